"""Compare intervention kinds and the VAR baseline over several seeds.

The full ten-seed version of this table is what the acceptance suite checks;
three seeds keep the demo to about fifteen seconds.

    python demos/03_benchmark.py [n_seeds]
"""

import sys

import time

from knockoff_invariance import run_benchmark

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 3
template = {"n_nodes": 5, "n_edges": 5, "length": 2000,
            "ranges": {"coupling": (0.8, 0.8), "noise_var": (0.3, 0.3), "functions": ("linear",)}}
t0 = time.perf_counter()
report = run_benchmark(["knockoff", "mean", "uniform", "ood", "var-gc"], template, range(n_seeds))

print(f"{'method':<10} {'F mean':>8} {'F sd':>7} {'FPR mean':>9} {'failed':>7}")
for method, s in report.summary().items():
    print(f"{method:<10} {s['f_score_mean']:>8.3f} {s['f_score_std']:>7.3f} {s['fpr_mean']:>9.3f} {s['n_failed']:>7}")
print(f"\nwall time {time.perf_counter() - t0:.0f}s")
