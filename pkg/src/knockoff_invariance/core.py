"""Shared data containers, CSV ingestion, standardization and seeded RNG streams.

Time runs along rows and variables along columns everywhere in the package.
"""

from __future__ import annotations

import csv
import hashlib
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "MultivariateTimeSeries",
    "CausalGraph",
    "StandardizationParams",
    "RngSeed",
    "DataError",
    "load_csv",
    "write_csv",
    "standardize",
    "unstandardize",
    "split_train_forecast",
]

MISSING_TOKENS = {"", "na", "nan", "null", "none", "n/a", "-"}


class DataError(ValueError):
    """Raised for malformed input data or violated size preconditions."""


@dataclass(frozen=True)
class MultivariateTimeSeries:
    """r x N matrix of observations with one name per column."""

    values: np.ndarray
    names: tuple[str, ...] = ()
    sampling: str = ""
    dropped_rows: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"expected a 2-d matrix, got shape {values.shape}")
        r, n = values.shape
        if r < 2 or n < 1:
            raise DataError(f"need at least 2 rows and 1 column, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("series contains non-finite entries")
        names = tuple(self.names) if self.names else tuple(f"z{i + 1}" for i in range(n))
        if len(names) != n:
            raise DataError(f"{len(names)} names for {n} columns")
        if len(set(names)) != n:
            raise DataError("column names must be unique")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]

    def slice_rows(self, start: int, stop: int) -> "MultivariateTimeSeries":
        return MultivariateTimeSeries(self.values[start:stop], self.names, self.sampling)

    def with_values(self, values: np.ndarray) -> "MultivariateTimeSeries":
        return MultivariateTimeSeries(values, self.names, self.sampling, self.dropped_rows)


@dataclass(frozen=True)
class CausalGraph:
    """Directed summary graph; ``adjacency[i, j]`` means an edge i -> j."""

    adjacency: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise DataError(f"adjacency must be square, got shape {adj.shape}")
        np.fill_diagonal(adj, False)
        adj.setflags(write=False)
        names = tuple(self.names) if self.names else tuple(f"z{i + 1}" for i in range(adj.shape[0]))
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "names", names)

    @classmethod
    def empty(cls, n: int, names: Sequence[str] = ()) -> "CausalGraph":
        return cls(np.zeros((n, n), dtype=bool), tuple(names))

    @classmethod
    def from_edges(cls, n: int, edges, names: Sequence[str] = ()) -> "CausalGraph":
        adj = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            adj[i, j] = True
        return cls(adj, tuple(names))

    @property
    def n_vars(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.adjacency))]

    def to_lists(self) -> list[list[int]]:
        return self.adjacency.astype(int).tolist()


@dataclass(frozen=True)
class StandardizationParams:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.constant is None:
            object.__setattr__(self, "constant", np.zeros(len(self.mean), dtype=bool))

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return np.where(self.constant, values, (values - self.mean) / self.std)

    def invert(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return np.where(self.constant, values, values * self.std + self.mean)

    def apply_column(self, values: np.ndarray, i: int) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if self.constant[i]:
            return values
        return (values - self.mean[i]) / self.std[i]


@dataclass(frozen=True)
class RngSeed:
    """A master seed plus a stream label.

    Streams with equal ``(master, label)`` are identical across runs and
    platforms; distinct labels give statistically independent streams.
    """

    master: int
    label: str = "root"

    def child(self, label: str) -> "RngSeed":
        return RngSeed(self.master, f"{self.label}/{label}")

    def generator(self) -> np.random.Generator:
        digest = hashlib.sha256(self.label.encode("utf-8")).digest()
        words = [int.from_bytes(digest[k:k + 4], "little") for k in range(0, 16, 4)]
        ss = np.random.SeedSequence([int(self.master) & 0xFFFFFFFFFFFFFFFF, *words])
        return np.random.Generator(np.random.PCG64(ss))


def _as_seed(seed) -> RngSeed:
    if isinstance(seed, RngSeed):
        return seed
    return RngSeed(int(seed))


def _parse_cell(cell: str):
    text = cell.strip()
    if text.lower() in MISSING_TOKENS:
        return None
    return float(text)


def load_csv(path, columns: Sequence[str] | None = None, date_column: str | int | None = None,
             sampling: str = "", report=sys.stderr) -> MultivariateTimeSeries:
    """Read a header-first, comma-separated file into a series.

    Parameters
    ----------
    path : str or Path
        CSV file; the first row holds column names.
    columns : sequence of str, optional
        Columns to keep, in this order. Defaults to every column except
        ``date_column``.
    date_column : str or int, optional
        A leading date/time column that is ignored for numerics.
    report : file-like, optional
        Where the dropped-row count is written (``None`` silences it).

    Rows containing a missing token in any selected column are dropped
    as a whole; the count is kept in ``dropped_rows`` and written to
    ``report``.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]

    skip = set()
    if date_column is not None:
        if isinstance(date_column, int):
            skip.add(date_column)
        elif date_column in header:
            skip.add(header.index(date_column))
        else:
            raise DataError(f"column not found: {date_column!r}")
    if columns is None:
        idx = [k for k in range(len(header)) if k not in skip]
    else:
        idx = []
        for name in columns:
            if name not in header:
                raise DataError(f"column not found: {name!r}")
            idx.append(header.index(name))

    data, dropped = [], 0
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        parsed = []
        for k in idx:
            cell = row[k] if k < len(row) else ""
            try:
                parsed.append(_parse_cell(cell))
            except ValueError:
                raise DataError(
                    f"non-numeric value {cell!r} at row {lineno}, column {header[k]!r}") from None
        if any(v is None for v in parsed):
            dropped += 1
            continue
        data.append(parsed)

    if report is not None:
        print(f"{path.name}: dropped {dropped} row(s) with missing values", file=report)
    if len(data) < 2:
        raise DataError(f"fewer than 2 usable rows in {path}")
    return MultivariateTimeSeries(np.array(data, dtype=float), tuple(header[k] for k in idx),
                                  sampling, dropped)


def write_csv(series: MultivariateTimeSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(series.names)
        for row in series.values:
            writer.writerow([repr(float(v)) for v in row])


def standardize(series: MultivariateTimeSeries):
    """Center and scale each column; zero-variance columns are flagged and left as is."""
    values = series.values
    mean = values.mean(axis=0)
    std = values.std(axis=0, ddof=1)
    constant = ~(std > 1e-12 * np.maximum(1.0, np.abs(mean)))
    params = StandardizationParams(mean, np.where(constant, 1.0, std), constant)
    return series.with_values(params.apply(values)), params


def unstandardize(series: MultivariateTimeSeries, params: StandardizationParams) -> MultivariateTimeSeries:
    return series.with_values(params.invert(series.values))


def split_train_forecast(series: MultivariateTimeSeries, train_fraction: float = 0.8,
                         lag_depth: int = 0, window: int = 0):
    """Split into a leading training segment and a trailing forecast segment.

    The training length is ``floor(train_fraction * r)``. Both segments
    must hold at least ``lag_depth + window`` rows.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train fraction must lie in (0, 1), got {train_fraction}")
    r = series.length
    n_train = int(math.floor(train_fraction * r))
    need = lag_depth + window
    if n_train < max(need, 1):
        raise DataError(f"train segment has {n_train} rows, needs at least {need} (p + L)")
    if r - n_train < max(need, 1):
        raise DataError(f"forecast segment has {r - n_train} rows, needs at least {need} (p + L)")
    return series.slice_rows(0, n_train), series.slice_rows(n_train, r)
