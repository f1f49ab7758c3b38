"""Invariance testing of forecast residuals and full-graph discovery.

For a candidate edge i -> j the trained forecaster is run twice over the
held-out segment: once on the observed data and once with variable i
swapped for an intervention series. The two residual series for target j
are cut into overlapping windows and each window pair is compared with a
two-sample Kolmogorov-Smirnov test. By default the residuals covered by the
windows are pooled into one test per edge; the alternative ``"vote"`` rule
keeps the edge when the fraction of rejecting windows exceeds ``q``.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import forecaster as fc
from .core import CausalGraph, DataError, MultivariateTimeSeries, RngSeed, _as_seed, split_train_forecast
from .interventions import InterventionKind, generate
from .knockoff import KnockoffModel, fit_gaussian, fit_gmm

__all__ = [
    "KsResult",
    "WindowScheme",
    "EdgeTestReport",
    "DiscoveryConfig",
    "DiscoveryContext",
    "kolmogorov_q",
    "ks_statistic",
    "ks_two_sample",
    "ks_exact_pvalue",
    "prepare",
    "test_edge",
    "discover_graph",
    "report_dict",
]


# ---------------------------------------------------------------------
# Two-sample KS test

@dataclass(frozen=True)
class KsResult:
    d: float
    statistic: float  # sqrt(nm / (n + m)) * d
    p_value: float
    n: int
    m: int


def kolmogorov_q(lam: float) -> float:
    """Kolmogorov survival function ``Q(lam) = 2 sum (-1)^(k-1) exp(-2 k^2 lam^2)``.

    For ``lam < 1.18`` the alternating series converges slowly, so the
    equivalent Jacobi-theta form is summed instead.
    """
    if lam <= 0.0:
        return 1.0
    if lam < 1.18:
        c = math.pi ** 2 / (8.0 * lam * lam)
        total = 0.0
        for k in range(1, 100):
            term = math.exp(-((2 * k - 1) ** 2) * c)
            total += term
            if term < 1e-16:
                break
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / lam * total))
    total = 0.0
    sign = 1.0
    for k in range(1, 101):
        term = math.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < 1e-12:
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def ks_statistic(a, b) -> float:
    """Supremum distance between the two empirical CDFs.

    Both CDFs are evaluated at every pooled value after all observations
    equal to it have been consumed, so ties are handled exactly.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def ks_exact_pvalue(a, b) -> float:
    """Permutation p-value ``P(D >= d_obs)`` by enumerating every relabeling of the pooled sample.

    Cost grows as ``C(n+m, n)``; meant for tiny samples.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = len(a), len(b)
    if math.comb(n + m, n) > 200_000:
        raise DataError("exact KS enumeration too large; use the asymptotic p-value")
    pooled = np.concatenate([a, b])
    d_obs = ks_statistic(a, b)
    hits = total = 0
    idx = np.arange(n + m)
    for chosen in itertools.combinations(range(n + m), n):
        mask = np.zeros(n + m, dtype=bool)
        mask[list(chosen)] = True
        d = ks_statistic(pooled[mask], pooled[idx[~mask]])
        hits += d >= d_obs - 1e-12
        total += 1
    return hits / total


def ks_two_sample(a, b, method: str = "asymptotic") -> KsResult:
    """Two-sample KS test.

    The asymptotic p-value is ``Q(lam)`` with the small-sample corrected
    argument ``lam = (en + 0.12 + 0.11 / en) * d``, ``en = sqrt(nm / (n + m))``.
    ``method="exact"`` enumerates relabelings instead.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise DataError("KS test needs two non-empty samples")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DataError("KS test samples must be finite")
    d = ks_statistic(a, b)
    en = math.sqrt(n * m / (n + m))
    if method == "exact":
        p = ks_exact_pvalue(a, b)
    elif method == "asymptotic":
        p = kolmogorov_q((en + 0.12 + 0.11 / en) * d)
    else:
        raise ValueError(f"unknown method {method!r}")
    return KsResult(d, en * d, float(min(1.0, max(0.0, p))), n, m)


# ---------------------------------------------------------------------
# Windows and per-edge reports

@dataclass(frozen=True)
class WindowScheme:
    length: int = 25
    step: int = 10
    min_windows: int = 3

    def __post_init__(self):
        if not 20 <= self.length <= 30:
            raise DataError(f"window length {self.length} outside [20, 30]")
        if not 5 <= self.step <= 10:
            raise DataError(f"window step {self.step} outside [5, 10]")

    def starts(self, n: int) -> list[int]:
        return list(range(0, n - self.length + 1, self.step))

    def count(self, n: int) -> int:
        return len(self.starts(n))


@dataclass(frozen=True)
class EdgeTestReport:
    source: int
    target: int
    kind: str
    windows: tuple[KsResult, ...]
    alpha: float
    q: float
    aggregate: str = "pool"
    pooled: KsResult | None = None

    @property
    def rejection_fraction(self) -> float:
        if not self.windows:
            return 0.0
        return sum(w.p_value < self.alpha for w in self.windows) / len(self.windows)

    @property
    def decision(self) -> bool:
        if self.aggregate == "pool":
            return self.pooled is not None and self.pooled.p_value < self.alpha
        return self.rejection_fraction > self.q

    def to_dict(self) -> dict:
        out = {
            "source": self.source,
            "target": self.target,
            "kind": self.kind,
            "p_values": [w.p_value for w in self.windows],
            "d_values": [w.d for w in self.windows],
            "rejection_fraction": self.rejection_fraction,
            "decision": bool(self.decision),
            "alpha": self.alpha,
            "q": self.q,
            "aggregate": self.aggregate,
        }
        if self.pooled is not None:
            out["pooled_p_value"] = self.pooled.p_value
            out["pooled_d"] = self.pooled.d
        return out


# ---------------------------------------------------------------------
# Discovery

@dataclass(frozen=True)
class DiscoveryConfig:
    forecaster: fc.ForecastConfig = field(default_factory=fc.ForecastConfig)
    kind: InterventionKind = field(default_factory=InterventionKind)
    scheme: WindowScheme = field(default_factory=WindowScheme)
    alpha: float = 0.05
    q: float = 0.5
    train_fraction: float = 0.8
    aggregate: str = "pool"  # one pooled test, or "vote" over windows
    redraws: int = 1
    gmm_components: int = 0  # 0: single Gaussian knockoffs

    def __post_init__(self):
        object.__setattr__(self, "kind", InterventionKind.parse(self.kind))
        if not 0 < self.alpha < 1:
            raise DataError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 <= self.q < 1:
            raise DataError(f"q must lie in [0, 1), got {self.q}")
        if self.aggregate not in ("vote", "pool"):
            raise DataError(f"aggregate must be 'vote' or 'pool', got {self.aggregate!r}")
        if self.redraws < 1:
            raise DataError("redraws must be >= 1")

    def to_dict(self) -> dict:
        return {
            "forecaster": self.forecaster.to_dict(),
            "kind": self.kind.tag,
            "ood_shift": self.kind.ood_shift,
            "ood_scale": self.kind.ood_scale,
            "window": self.scheme.length,
            "step": self.scheme.step,
            "alpha": self.alpha,
            "q": self.q,
            "train_fraction": self.train_fraction,
            "aggregate": self.aggregate,
            "redraws": self.redraws,
            "gmm_components": self.gmm_components,
        }


@dataclass(frozen=True)
class DiscoveryContext:
    """Everything fitted once per dataset and shared read-only by all edge tests."""

    series: MultivariateTimeSeries
    bounds: tuple[int, int]
    model: fc.ForecastModel
    knockoff_model: KnockoffModel | None
    baseline: dict = field(repr=False)  # target -> residual array


def prepare(series: MultivariateTimeSeries, config: DiscoveryConfig, seed=0,
            fit_knockoffs: bool | None = None) -> DiscoveryContext:
    """Split, fit the forecaster on the training part and the knockoff model on the whole series."""
    seed = _as_seed(seed)
    p = config.forecaster.lag_depth
    train, _ = split_train_forecast(series, config.train_fraction, p, config.scheme.length)
    bounds = (train.length, series.length)
    n_res = bounds[1] - bounds[0] - p
    if config.scheme.count(n_res) < config.scheme.min_windows:
        raise DataError(f"forecast segment yields {config.scheme.count(n_res)} windows; "
                        f"need at least {config.scheme.min_windows}")
    fcfg = replace(config.forecaster, seed=seed.child("forecaster-init"))
    model = fc.fit(train, fcfg)
    if fit_knockoffs is None:
        fit_knockoffs = config.kind.tag == "knockoff"
    kmodel = None
    if fit_knockoffs:
        if config.gmm_components > 0:
            kmodel = fit_gmm(series, config.gmm_components, seed.child("knockoff-gmm"))
        else:
            kmodel = fit_gaussian(series)
    base = {r.target: r.values for r in fc.residuals(model, series, bounds)}
    return DiscoveryContext(series, bounds, model, kmodel, base)


def _window_tests(base: np.ndarray, intervened: np.ndarray, scheme: WindowScheme) -> list[KsResult]:
    return [ks_two_sample(base[s:s + scheme.length], intervened[s:s + scheme.length])
            for s in scheme.starts(len(base))]


def _edge_report(ctx: DiscoveryContext, i: int, j: int, config: DiscoveryConfig, seed: RngSeed) -> EdgeTestReport:
    if i == j:
        raise DataError("self-links are not tested")
    start, stop = ctx.bounds
    base = ctx.baseline[j]
    n_windows = config.scheme.count(len(base))
    if n_windows < config.scheme.min_windows:
        raise DataError(f"forecast segment yields {n_windows} windows; need at least "
                        f"{config.scheme.min_windows}")
    windows, pooled_int = [], []
    for draw in range(config.redraws):
        draw_seed = seed.child(f"draw-{draw}") if config.redraws > 1 else seed
        replacement = generate(config.kind, i, ctx.series, ctx.knockoff_model, draw_seed,
                               length=stop - start, rows=slice(start, stop))
        res = fc.residuals(ctx.model, ctx.series, ctx.bounds, (i, replacement), [j],
                           intervention=(i, config.kind.tag))[0].values
        windows.extend(_window_tests(base, res, config.scheme))
        pooled_int.append(res)
    covered = config.scheme.starts(len(base))[-1] + config.scheme.length
    # the baseline is deterministic, so it enters once however many draws are pooled
    pooled = ks_two_sample(base[:covered], np.concatenate([res[:covered] for res in pooled_int]))
    return EdgeTestReport(i, j, config.kind.tag, tuple(windows), config.alpha, config.q,
                          config.aggregate, pooled)


def test_edge(model: fc.ForecastModel, series: MultivariateTimeSeries, bounds, i: int, j: int,
              kind="knockoff", scheme: WindowScheme | None = None, alpha: float = 0.05, q: float = 0.5,
              seed=0, knockoff_model: KnockoffModel | None = None, aggregate: str = "pool",
              redraws: int = 1) -> EdgeTestReport:
    """Test H0 "variable i does not cause variable j" with an already trained model."""
    config = DiscoveryConfig(model.config, InterventionKind.parse(kind), scheme or WindowScheme(),
                             alpha, q, aggregate=aggregate, redraws=redraws)
    base = fc.residuals(model, series, bounds, targets=[j])[0].values
    ctx = DiscoveryContext(series, tuple(bounds), model, knockoff_model, {j: base})
    return _edge_report(ctx, i, j, config, _as_seed(seed))


# not a pytest test despite the name
test_edge.__test__ = False


def run_edges(ctx: DiscoveryContext, config: DiscoveryConfig, seed=0, n_jobs: int = 1):
    """All ordered off-diagonal edge tests on a prepared context."""
    seed = _as_seed(seed)
    n = ctx.series.n_vars
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]

    def one(pair):
        i, j = pair
        return _edge_report(ctx, i, j, config, seed.child(f"edge-{i}-{j}"))

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            reports = list(pool.map(one, pairs))
    else:
        reports = [one(pr) for pr in pairs]
    adj = np.zeros((n, n), dtype=bool)
    for rep in reports:
        adj[rep.source, rep.target] = rep.decision
    return CausalGraph(adj, ctx.series.names), reports


def discover_graph(series: MultivariateTimeSeries, config: DiscoveryConfig | None = None, seed=0,
                   n_jobs: int = 1, context: DiscoveryContext | None = None):
    """Discover the summary causal graph.

    Returns the graph and one ``EdgeTestReport`` per ordered pair.
    """
    config = config or DiscoveryConfig()
    seed = _as_seed(seed)
    ctx = context or prepare(series, config, seed)
    return run_edges(ctx, config, seed, n_jobs)


def report_dict(graph: CausalGraph, reports, config: dict | None = None, method: str = "invariance") -> dict:
    return {
        "method": method,
        "variables": list(graph.names),
        "adjacency": graph.to_lists(),
        "config": config or {},
        "edges": [r.to_dict() if hasattr(r, "to_dict") else r for r in reports],
    }


def write_report(path, graph: CausalGraph, reports, config: dict | None = None, method: str = "invariance"):
    with open(path, "w") as fh:
        json.dump(report_dict(graph, reports, config, method), fh, indent=2)
