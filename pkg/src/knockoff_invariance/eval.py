"""Scoring discovered graphs and the multi-seed synthetic benchmark."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baseline import granger_graph
from .core import CausalGraph, DataError, RngSeed
from .forecaster import ForecastConfig
from .inference import DiscoveryConfig, WindowScheme, prepare, run_edges
from .interventions import KINDS, InterventionKind
from .synthgen import sample_spec, simulate

__all__ = [
    "GraphMetrics",
    "BenchmarkConfig",
    "BenchmarkReport",
    "METHODS",
    "score",
    "run_benchmark",
    "strip_timing",
    "config_from_dict",
]

METHODS = KINDS + ("var-gc",)
TIMING_KEYS = ("seconds", "timing")


@dataclass(frozen=True)
class GraphMetrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def fpr(self) -> float:
        neg = self.fp + self.tn
        return self.fp / neg if neg else 0.0

    @property
    def precision(self) -> float:
        pos = self.tp + self.fp
        return self.tp / pos if pos else 0.0

    @property
    def recall(self) -> float:
        pos = self.tp + self.fn
        return self.tp / pos if pos else 0.0

    @property
    def f_score(self) -> float:
        if self.tp == 0:
            return 0.0
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn, "fpr": self.fpr,
                "precision": self.precision, "recall": self.recall, "f_score": self.f_score}


def score(predicted: CausalGraph, truth: CausalGraph) -> GraphMetrics:
    """Confusion counts over all ordered off-diagonal pairs."""
    a = np.asarray(getattr(predicted, "adjacency", predicted), dtype=bool)
    b = np.asarray(getattr(truth, "adjacency", truth), dtype=bool)
    if a.shape != b.shape:
        raise DataError(f"graph size mismatch: {a.shape} vs {b.shape}")
    off = ~np.eye(a.shape[0], dtype=bool)
    return GraphMetrics(
        tp=int(np.sum(a & b & off)),
        fp=int(np.sum(a & ~b & off)),
        tn=int(np.sum(~a & ~b & off)),
        fn=int(np.sum(~a & b & off)),
    )


@dataclass(frozen=True)
class BenchmarkConfig:
    discovery: DiscoveryConfig = field(default_factory=DiscoveryConfig)
    var_order: int = 10
    var_alpha: float = 0.05

    def to_dict(self) -> dict:
        d = self.discovery.to_dict()
        d.pop("kind")
        return {"discovery": d, "var_order": self.var_order, "var_alpha": self.var_alpha}


@dataclass
class BenchmarkReport:
    methods: list
    seeds: list
    template: dict
    config: dict
    rows: list  # one dict per (seed, method)
    timing: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {}
        for method in self.methods:
            cells = [r for r in self.rows if r["method"] == method and r.get("metrics")]
            entry = {"n_ok": len(cells), "n_failed": sum(1 for r in self.rows
                                                          if r["method"] == method and r.get("error"))}
            for key in ("fpr", "f_score", "precision", "recall"):
                vals = np.array([c["metrics"][key] for c in cells])
                entry[f"{key}_mean"] = float(vals.mean()) if len(vals) else float("nan")
                entry[f"{key}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            out[method] = entry
        return out

    def to_dict(self) -> dict:
        return {
            "methods": list(self.methods),
            "seeds": list(self.seeds),
            "template": self.template,
            "config": self.config,
            "rows": self.rows,
            "summary": self.summary(),
            "timing": self.timing,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def strip_timing(obj):
    """Copy of a report dict with every wall-clock field removed."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def _run_seed(seed: int, methods, template: dict, config: BenchmarkConfig) -> tuple[list, dict]:
    root = RngSeed(int(seed))
    rows, timing = [], {}
    t0 = time.perf_counter()
    try:
        spec = sample_spec(template.get("n_nodes", 5), template.get("n_edges", 5), root.child("synth-spec"),
                           ranges=template.get("ranges"), length=template.get("length", 2000),
                           burn_in=template.get("burn_in", 500))
        data = simulate(spec, root.child("synth"))
    except Exception as exc:
        err = f"{type(exc).__name__}: {exc}"
        return [{"seed": int(seed), "method": m, "error": err} for m in methods], timing
    timing["simulate"] = time.perf_counter() - t0

    ctx = None
    kinds = [m for m in methods if m in KINDS]
    if kinds:
        t0 = time.perf_counter()
        try:
            ctx = prepare(data.series, config.discovery, root, fit_knockoffs="knockoff" in kinds)
        except Exception as exc:  # recorded per cell
            ctx = exc
        timing["fit"] = time.perf_counter() - t0

    for method in methods:
        row = {"seed": int(seed), "method": method, "truth": data.truth.to_lists()}
        t0 = time.perf_counter()
        try:
            if method == "var-gc":
                graph = granger_graph(data.series, config.var_order, config.var_alpha)
            else:
                if isinstance(ctx, Exception):
                    raise ctx
                kind = replace(config.discovery.kind, tag=method)
                graph, _ = run_edges(ctx, replace(config.discovery, kind=kind), root)
            row["predicted"] = graph.to_lists()
            row["metrics"] = score(graph, data.truth).to_dict()
        except Exception as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        row["seconds"] = time.perf_counter() - t0
        rows.append(row)
    return rows, timing


def run_benchmark(methods=METHODS, template: dict | None = None, seeds=range(10),
                  config: BenchmarkConfig | None = None, n_jobs: int = 1) -> BenchmarkReport:
    """Simulate one dataset per seed, run every method on it, and score.

    The forecaster and knockoff model are fitted once per seed and shared
    by the four intervention kinds, so they see identical data and model.
    """
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise DataError(f"unknown method {m!r}; expected one of {METHODS}")
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise DataError("need at least one seed")
    template = dict(template or {"n_nodes": 5, "n_edges": 5})
    config = config or BenchmarkConfig()

    if n_jobs > 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=n_jobs)(delayed(_run_seed)(s, methods, template, config) for s in seeds)
    else:
        results = [_run_seed(s, methods, template, config) for s in seeds]

    rows, timing = [], {}
    for s, (seed_rows, seed_timing) in zip(seeds, results):
        rows.extend(seed_rows)
        timing[str(s)] = seed_timing
    template_out = json.loads(json.dumps(template))
    return BenchmarkReport(methods, seeds, template_out, config.to_dict(), rows, timing)


def config_from_dict(d: dict):
    """Build ``(methods, template, seeds, BenchmarkConfig)`` from a parsed config file.

    Recognized keys (all optional): ``methods``, ``seeds`` (list) or
    ``n_seeds``/``master_seed``, ``template`` (``n_nodes``, ``n_edges``,
    ``length``, ``burn_in``, ``ranges``), ``forecaster`` (``ForecastConfig``
    fields), ``window``, ``step``, ``alpha``, ``q``, ``aggregate``,
    ``train_fraction``, ``redraws``, ``gmm_components``, ``ood_shift``,
    ``ood_scale``, ``var_order``, ``var_alpha``.
    """
    methods = d.get("methods", list(METHODS))
    if "seeds" in d:
        seeds = [int(s) for s in d["seeds"]]
    else:
        base = int(d.get("master_seed", 0))
        seeds = [base + k for k in range(int(d.get("n_seeds", 10)))]
    template = dict(d.get("template", {}))
    if "ranges" in template:
        template["ranges"] = {k: tuple(v) for k, v in template["ranges"].items()}
    fcfg = ForecastConfig(**{k: v for k, v in d.get("forecaster", {}).items() if k != "seed"})
    kind = InterventionKind("knockoff", float(d.get("ood_shift", 3.0)), float(d.get("ood_scale", 2.0)))
    disc = DiscoveryConfig(
        forecaster=fcfg,
        kind=kind,
        scheme=WindowScheme(int(d.get("window", 25)), int(d.get("step", 10))),
        alpha=float(d.get("alpha", 0.05)),
        q=float(d.get("q", 0.5)),
        train_fraction=float(d.get("train_fraction", 0.8)),
        aggregate=d.get("aggregate", "pool"),
        redraws=int(d.get("redraws", 1)),
        gmm_components=int(d.get("gmm_components", 0)),
    )
    return methods, template, seeds, BenchmarkConfig(disc, int(d.get("var_order", 10)), float(d.get("var_alpha", 0.05)))
