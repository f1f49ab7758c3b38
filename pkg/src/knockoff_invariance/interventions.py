"""Replacement series that put the forecaster in a new environment.

Four kinds are supported:

``knockoff``
    column ``i`` of a knockoff draw aligned row-by-row with the data;
``mean``
    the variable's mean plus Gaussian noise with its marginal variance;
``uniform``
    i.i.d. uniform on ``[min z_i, max z_i]``;
``ood``
    i.i.d. Gaussian shifted to ``mu + shift * sigma`` with standard
    deviation ``scale * sigma``, independent of the data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import DataError, MultivariateTimeSeries, _as_seed
from .knockoff import KnockoffModel, sample_gmm_knockoffs, sample_knockoffs

__all__ = ["KINDS", "InterventionKind", "generate"]

KINDS = ("knockoff", "mean", "uniform", "ood")


@dataclass(frozen=True)
class InterventionKind:
    tag: str = "knockoff"
    ood_shift: float = 3.0
    ood_scale: float = 2.0
    noise_scale: float = 1.0  # multiplies the mean-kind noise sd

    def __post_init__(self):
        if self.tag not in KINDS:
            raise DataError(f"unknown intervention kind {self.tag!r}; expected one of {KINDS}")
        if not all(np.isfinite([self.ood_shift, self.ood_scale, self.noise_scale])):
            raise DataError("intervention multipliers must be finite")

    @classmethod
    def parse(cls, kind) -> "InterventionKind":
        return kind if isinstance(kind, cls) else cls(str(kind))


def generate(kind, variable: int, series: MultivariateTimeSeries, knockoff_model: KnockoffModel | None = None,
             seed=0, length: int | None = None, rows: slice | None = None) -> np.ndarray:
    """Replacement values for column ``variable``.

    Location/scale statistics come from the whole of ``series``. The
    knockoff kind is drawn row-aligned for ``series`` rows ``rows`` (default:
    the last ``length`` rows); the other kinds draw ``length`` i.i.d. values.
    """
    kind = InterventionKind.parse(kind)
    z = series.column(variable)
    r = series.length
    if length is None:
        length = r if rows is None else len(range(*rows.indices(r)))
    rng = _as_seed(seed).generator()

    if kind.tag == "knockoff":
        if knockoff_model is None:
            raise DataError("knockoff intervention needs a fitted knockoff model")
        if rows is None:
            if length > r:
                raise DataError(f"length {length} exceeds series length {r}")
            rows = slice(r - length, r)
        block = series.values[rows]
        if len(block) != length:
            raise DataError(f"row selection has {len(block)} rows, expected {length}")
        if knockoff_model.components and len(knockoff_model.components) > 1:
            draw = sample_gmm_knockoffs(knockoff_model, block, seed)
        else:
            draw = sample_knockoffs(knockoff_model, block, seed)
        return np.asarray(draw)[:, variable]

    if kind.tag == "mean":
        sd = z.std(ddof=1) * kind.noise_scale
        return z.mean() + sd * rng.standard_normal(length)

    if kind.tag == "uniform":
        lo, hi = float(z.min()), float(z.max())
        if lo == hi:
            warnings.warn(f"variable {variable} is constant; uniform replacement falls back to {lo}")
            return np.full(length, lo)
        return rng.uniform(lo, hi, size=length)

    mu, sd = z.mean(), z.std(ddof=1)
    return mu + kind.ood_shift * sd + kind.ood_scale * sd * rng.standard_normal(length)
