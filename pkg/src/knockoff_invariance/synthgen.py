"""Randomized nonlinear structural causal models for multivariate time series.

Each node follows

    z[t, j] = a_j * z[t-1, j] + sum_{edges i->j} c * f(z[t - lag, i]) + noise[t, j]

with ``f`` either the identity or the bounded bump ``exp(-z**2)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import CausalGraph, DataError, MultivariateTimeSeries, RngSeed, _as_seed, load_csv, write_csv

__all__ = [
    "Edge",
    "ScmSpec",
    "ScmDataset",
    "DEFAULT_RANGES",
    "FUNCTIONS",
    "sample_spec",
    "simulate",
    "linear_spectral_radius",
    "half_mean_zscores",
    "save_dataset",
    "load_dataset",
]

FUNCTIONS = {
    "linear": lambda z: z,
    "exponential": lambda z: np.exp(-z * z),
}

DEFAULT_RANGES = {
    "autocoef": (0.2, 1.0),
    "coupling": (0.2, 1.0),
    "lag": (0, 10),
    "noise_var": (0.3, 0.9),
    "functions": ("linear", "exponential"),
}


class ExplosiveSpecError(DataError):
    pass


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    coupling: float
    lag: int
    function: str = "linear"


@dataclass(frozen=True)
class ScmSpec:
    n_nodes: int
    autocoef: tuple[float, ...]
    edges: tuple[Edge, ...]
    noise_var: tuple[float, ...]
    length: int = 2000
    burn_in: int = 500

    def __post_init__(self):
        n = self.n_nodes
        if n < 1:
            raise DataError("need at least one node")
        if len(self.autocoef) != n or len(self.noise_var) != n:
            raise DataError("autocoef and noise_var need one entry per node")
        seen = set()
        for e in self.edges:
            if e.source == e.target:
                raise DataError(f"self-edge on node {e.source}")
            if not (0 <= e.source < n and 0 <= e.target < n):
                raise DataError(f"edge {e.source}->{e.target} out of range")
            if e.lag < 0:
                raise DataError("lags must be nonnegative")
            if e.function not in FUNCTIONS:
                raise DataError(f"unknown function tag {e.function!r}")
            if (e.source, e.target) in seen:
                raise DataError(f"duplicate edge {e.source}->{e.target}")
            seen.add((e.source, e.target))
        if any(v < 0 for v in self.noise_var):
            raise DataError("noise variances must be nonnegative")

    @property
    def max_lag(self) -> int:
        return max([1] + [e.lag for e in self.edges])

    def truth(self) -> CausalGraph:
        return CausalGraph.from_edges(self.n_nodes, [(e.source, e.target) for e in self.edges])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["autocoef"] = list(self.autocoef)
        d["noise_var"] = list(self.noise_var)
        d["edges"] = [asdict(e) for e in self.edges]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScmSpec":
        return cls(
            n_nodes=int(d["n_nodes"]),
            autocoef=tuple(float(a) for a in d["autocoef"]),
            edges=tuple(Edge(int(e["source"]), int(e["target"]), float(e["coupling"]),
                             int(e["lag"]), e.get("function", "linear")) for e in d["edges"]),
            noise_var=tuple(float(v) for v in d["noise_var"]),
            length=int(d.get("length", 2000)),
            burn_in=int(d.get("burn_in", 500)),
        )


@dataclass(frozen=True)
class ScmDataset:
    series: MultivariateTimeSeries
    truth: CausalGraph
    spec: ScmSpec = field(repr=False)


def _effective_lag(e: Edge) -> int:
    # lag-0 sources that come later in the update order are read from t-1
    return e.lag if (e.lag > 0 or e.source < e.target) else 1


def linear_spectral_radius(spec: ScmSpec) -> float:
    """Spectral radius of the lag-companion matrix of the linear part.

    Exponential edges are bounded and do not contribute. Lag-0 linear
    edges are folded in by solving the contemporaneous system, which is
    how the index-ordered recursion resolves them to first order.
    """
    n, p = spec.n_nodes, spec.max_lag
    coefs = np.zeros((p + 1, n, n))  # coefs[k][j, i]: effect of z[t-k, i] on z[t, j]
    for j, a in enumerate(spec.autocoef):
        coefs[1][j, j] += a
    for e in spec.edges:
        if e.function == "linear":
            coefs[_effective_lag(e)][e.target, e.source] += e.coupling
    b0 = coefs[0]
    try:
        inv = np.linalg.inv(np.eye(n) - b0)
    except np.linalg.LinAlgError:
        return np.inf
    blocks = [inv @ coefs[k] for k in range(1, p + 1)]
    companion = np.zeros((n * p, n * p))
    companion[:n, :] = np.hstack(blocks)
    if p > 1:
        companion[n:, :-n] = np.eye(n * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(companion))))


def sample_spec(n_nodes: int, n_edges: int, seed, ranges: dict | None = None,
                length: int = 2000, burn_in: int = 500, require_stable: bool = True,
                max_tries: int = 1000) -> ScmSpec:
    """Draw a random spec.

    Edges are drawn uniformly without replacement from the ordered
    off-diagonal pairs; every coefficient is uniform on its range and lags
    are uniform integers. Any key of ``DEFAULT_RANGES`` may be overridden
    through ``ranges`` (a degenerate range such as ``(0.8, 0.8)`` pins a
    value).

    With ``require_stable`` the draw is repeated until the linear part of
    the recursion has spectral radius below one.
    """
    if n_nodes < 2:
        raise DataError("need at least 2 nodes")
    if not 0 <= n_edges <= n_nodes * (n_nodes - 1):
        raise DataError(f"edge count {n_edges} too large for {n_nodes} nodes "
                        f"(max {n_nodes * (n_nodes - 1)})")
    r = dict(DEFAULT_RANGES)
    r.update(ranges or {})
    rng = _as_seed(seed).generator()
    pairs = [(i, j) for i in range(n_nodes) for j in range(n_nodes) if i != j]

    for _ in range(max_tries):
        chosen = rng.choice(len(pairs), size=n_edges, replace=False)
        edges = []
        for k in sorted(chosen):
            i, j = pairs[k]
            c = rng.uniform(*r["coupling"])
            lag = int(rng.integers(r["lag"][0], r["lag"][1] + 1))
            f = str(r["functions"][rng.integers(len(r["functions"]))])
            edges.append(Edge(i, j, float(c), lag, f))
        spec = ScmSpec(
            n_nodes=n_nodes,
            autocoef=tuple(float(v) for v in rng.uniform(*r["autocoef"], size=n_nodes)),
            edges=tuple(edges),
            noise_var=tuple(float(v) for v in rng.uniform(*r["noise_var"], size=n_nodes)),
            length=length,
            burn_in=burn_in,
        )
        if not require_stable or linear_spectral_radius(spec) < 1.0:
            return spec
    raise ExplosiveSpecError(f"no stable spec found in {max_tries} draws")


def simulate(spec: ScmSpec, seed) -> ScmDataset:
    """Run the recursion from a zero start and drop the burn-in prefix.

    Nodes are updated in index order within a time step, so a lag-0 edge
    i -> j reads z[t, i] when i < j and z[t-1, i] otherwise.
    """
    if spec.length < 100:
        raise DataError(f"length must be at least 100, got {spec.length}")
    if spec.burn_in < spec.max_lag:
        raise DataError(f"burn-in {spec.burn_in} shorter than max lag {spec.max_lag}")
    n = spec.n_nodes
    total = spec.burn_in + spec.length
    pad = spec.max_lag
    rng = _as_seed(seed).generator()
    noise = rng.standard_normal((total, n)) * np.sqrt(np.asarray(spec.noise_var))

    incoming = [[] for _ in range(n)]
    for e in spec.edges:
        incoming[e.target].append((e.source, _effective_lag(e), e.coupling, FUNCTIONS[e.function]))
    a = np.asarray(spec.autocoef)

    z = np.zeros((total + pad, n))
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(pad, total + pad):
            row = z[t]
            for j in range(n):
                v = a[j] * z[t - 1, j] + noise[t - pad, j]
                for i, lag, c, f in incoming[j]:
                    v += c * f(z[t - lag, i])
                if not np.isfinite(v):
                    raise ExplosiveSpecError(
                        f"non-finite value at node {j} time {t - pad} (explosive spec)")
                row[j] = v
    values = z[pad + spec.burn_in:]
    names = tuple(f"Z{i + 1}" for i in range(n))
    series = MultivariateTimeSeries(values, names, "synthetic")
    return ScmDataset(series, CausalGraph(spec.truth().adjacency, names), spec)


def half_mean_zscores(values: np.ndarray) -> np.ndarray:
    """Per-column z-score for the difference of first- and second-half means.

    The standard error is inflated by the AR(1) factor ``(1+rho)/(1-rho)``
    estimated from each column, which accounts for serial dependence.
    """
    values = np.asarray(values, dtype=float)
    h = values.shape[0] // 2
    first, second = values[:h], values[h:2 * h]
    out = np.empty(values.shape[1])
    for k in range(values.shape[1]):
        x = values[:, k] - values[:, k].mean()
        var = x.var()
        if var == 0:
            out[k] = 0.0
            continue
        rho = np.clip(np.dot(x[1:], x[:-1]) / (len(x) * var), -0.99, 0.999)
        inflate = (1 + rho) / (1 - rho)
        se = np.sqrt(2 * var * inflate / h)
        out[k] = abs(first[:, k].mean() - second[:, k].mean()) / se
    return out


def save_dataset(dataset: ScmDataset, directory) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(dataset.series, out / "series.csv")
    (out / "spec.json").write_text(json.dumps(dataset.spec.to_dict(), indent=2))
    (out / "truth.json").write_text(json.dumps(
        {"names": list(dataset.truth.names), "adjacency": dataset.truth.to_lists()}, indent=2))
    return out


def load_dataset(directory) -> ScmDataset:
    d = Path(directory)
    series = load_csv(d / "series.csv", sampling="synthetic", report=None)
    spec = ScmSpec.from_dict(json.loads((d / "spec.json").read_text()))
    truth = json.loads((d / "truth.json").read_text())
    return ScmDataset(series, CausalGraph(np.array(truth["adjacency"]), tuple(truth["names"])), spec)
