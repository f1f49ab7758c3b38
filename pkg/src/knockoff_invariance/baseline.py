"""Linear VAR Granger causality, the comparison baseline.

``i -> j`` is declared when dropping every lag of ``i`` from ``j``'s VAR
equation raises the residual sum of squares significantly under the nested
F-test

    F = ((RSS_r - RSS_f) / q) / (RSS_f / (T - qN - 1)),   F ~ F(q, T - qN - 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import CausalGraph, DataError, MultivariateTimeSeries

__all__ = ["VarModel", "GrangerResult", "var_design", "fit_var", "granger_tests", "granger_graph"]


@dataclass(frozen=True)
class VarModel:
    order: int
    coefs: np.ndarray  # (order, N, N); coefs[k][j, i] multiplies z[t-k-1, i] in equation j
    intercept: np.ndarray
    resid_cov: np.ndarray
    rss: np.ndarray
    stderr: np.ndarray  # same layout as coefs
    n_obs: int


@dataclass(frozen=True)
class GrangerResult:
    source: int
    target: int
    f_stat: float
    p_value: float
    df: tuple[int, int]
    decision: bool

    def to_dict(self) -> dict:
        return {"source": self.source, "target": self.target, "f_stat": self.f_stat,
                "p_value": self.p_value, "df": list(self.df), "decision": bool(self.decision)}


def _values(series) -> np.ndarray:
    if isinstance(series, MultivariateTimeSeries):
        return series.values
    return np.asarray(series, dtype=float)


def var_design(values: np.ndarray, order: int):
    """Regressors ``[1, z[t-1], ..., z[t-order]]`` and responses ``z[t]`` for ``t >= order``."""
    r, n = values.shape
    lags = [values[order - k - 1:r - k - 1] for k in range(order)]
    x = np.hstack([np.ones((r - order, 1))] + lags)
    return x, values[order:]


def _check_size(r: int, n: int, order: int):
    if order < 1:
        raise DataError(f"VAR order must be >= 1, got {order}")
    if r <= order * n + order + 1:
        raise DataError(f"series too short for VAR({order}) on {n} variables: need r > {order * n + order + 1}, got {r}")


def _lstsq(x: np.ndarray, y: np.ndarray):
    if np.linalg.matrix_rank(x) < x.shape[1]:
        raise DataError("rank-deficient VAR design matrix")
    beta, _, _, _ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    return beta, resid


def fit_var(series, order: int = 10) -> VarModel:
    x_all = _values(series)
    r, n = x_all.shape
    _check_size(r, n, order)
    x, y = var_design(x_all, order)
    beta, resid = _lstsq(x, y)
    t = len(y)
    dof = t - x.shape[1]
    rss = np.sum(resid ** 2, axis=0)
    resid_cov = resid.T @ resid / dof
    xtx_inv = np.linalg.inv(x.T @ x)
    se = np.sqrt(np.outer(np.diag(xtx_inv)[1:], rss / dof))  # (order*n, n)
    coefs = beta[1:].reshape(order, n, n).transpose(0, 2, 1)
    stderr = se.reshape(order, n, n).transpose(0, 2, 1)
    return VarModel(order, coefs, beta[0], resid_cov, rss, stderr, t)


def granger_tests(series, order: int = 10, alpha: float = 0.05) -> list[GrangerResult]:
    """F-tests for every ordered pair ``i != j``."""
    values = _values(series)
    r, n = values.shape
    _check_size(r, n, order)
    x, y = var_design(values, order)
    t = len(y)
    _, resid_full = _lstsq(x, y)
    rss_full = np.sum(resid_full ** 2, axis=0)
    df2 = t - order * n - 1
    results = []
    for i in range(n):
        keep = [0] + [1 + k * n + c for k in range(order) for c in range(n) if c != i]
        _, resid_r = _lstsq(x[:, keep], y)
        rss_r = np.sum(resid_r ** 2, axis=0)
        for j in range(n):
            if i == j:
                continue
            f = max(0.0, (rss_r[j] - rss_full[j]) / order) / (rss_full[j] / df2)
            p = float(stats.f.sf(f, order, df2))
            results.append(GrangerResult(i, j, float(f), p, (order, df2), p < alpha))
    return results


def granger_graph(series, order: int = 10, alpha: float = 0.05, return_tests: bool = False):
    """Summary graph from pairwise Granger F-tests on the full VAR."""
    values = _values(series)
    n = values.shape[1]
    tests = granger_tests(values, order, alpha)
    adj = np.zeros((n, n), dtype=bool)
    for res in tests:
        adj[res.source, res.target] = res.decision
    names = series.names if isinstance(series, MultivariateTimeSeries) else ()
    graph = CausalGraph(adj, names)
    return (graph, tests) if return_tests else graph
