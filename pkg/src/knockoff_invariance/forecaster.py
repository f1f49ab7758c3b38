"""Nonlinear autoregressive one-step forecaster.

One small tanh network per target maps the last ``p`` standardized values
of every variable to the target's next value. The networks are trained in
lockstep (one shared mini-batch order) with Adam on squared error, but their
parameters are fully independent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import DataError, MultivariateTimeSeries, RngSeed, StandardizationParams, _as_seed, standardize

__all__ = [
    "ForecastConfig",
    "ForecastModel",
    "ResidualSeries",
    "ForecastError",
    "lagged_design",
    "init_params",
    "forward",
    "loss_and_grad",
    "fit",
    "residuals",
    "save_model",
    "load_model",
]

logger = logging.getLogger(__name__)

PARAM_NAMES = ("w1", "b1", "w2", "b2")


class ForecastError(DataError):
    pass


@dataclass(frozen=True)
class ForecastConfig:
    lag_depth: int = 10
    hidden: int = 32
    epochs: int = 300
    step_size: float = 3e-3
    batch_size: int = 64
    seed: RngSeed = field(default_factory=lambda: RngSeed(0, "forecaster-init"))
    weight_decay: float = 1e-2
    validation_fraction: float = 0.2  # trailing share of the training rows used for early stopping
    patience: int = 50

    def __post_init__(self):
        if self.lag_depth < 1:
            raise ForecastError(f"lag depth must be >= 1, got {self.lag_depth}")
        if self.hidden < 1 or self.epochs < 0 or self.batch_size < 1 or not self.step_size > 0:
            raise ForecastError("hidden, epochs, batch size and step size must be positive")
        if self.weight_decay < 0 or not 0 <= self.validation_fraction < 1 or self.patience < 1:
            raise ForecastError("invalid regularization settings")

    def to_dict(self) -> dict:
        return {"lag_depth": self.lag_depth, "hidden": self.hidden, "epochs": self.epochs,
                "step_size": self.step_size, "batch_size": self.batch_size,
                "weight_decay": self.weight_decay, "validation_fraction": self.validation_fraction,
                "patience": self.patience, "seed": {"master": self.seed.master, "label": self.seed.label}}


@dataclass(frozen=True)
class ResidualSeries:
    target: int
    values: np.ndarray
    intervention: tuple | None = None  # (variable, kind) or None


@dataclass(frozen=True)
class ForecastModel:
    config: ForecastConfig
    params: dict
    scaling: StandardizationParams
    loss_trace: np.ndarray
    train_rmse: np.ndarray

    @property
    def n_vars(self) -> int:
        return len(self.scaling.mean)

    @property
    def lag_depth(self) -> int:
        return self.config.lag_depth

    def scale(self, values: np.ndarray) -> np.ndarray:
        """Standardize; constant columns are centered to zero."""
        out = self.scaling.apply(values)
        return np.where(self.scaling.constant, np.asarray(values) - self.scaling.mean, out)

    def predict(self, values: np.ndarray, targets=None) -> np.ndarray:
        """One-step predictions (standardized units) for rows ``p..r-1`` of ``values``.

        ``values`` is in original units; returns shape ``(r - p, len(targets))``.
        """
        targets = range(self.n_vars) if targets is None else targets
        x = lagged_design(self.scale(values), self.lag_depth)
        cols = []
        for j in targets:
            if self.scaling.constant[j]:
                cols.append(np.zeros(len(x)))
            else:
                p = {k: v[j:j + 1] for k, v in self.params.items()}
                cols.append(forward(p, x)[0][0])
        return np.column_stack(cols) if cols else np.empty((len(x), 0))


def lagged_design(values: np.ndarray, p: int) -> np.ndarray:
    """Row ``k`` holds ``values[k+p-1], values[k+p-2], ..., values[k]`` flattened.

    That is the input for predicting ``values[k+p]``; the newest lag comes
    first. The last window (which has no target) is dropped.
    """
    values = np.asarray(values, dtype=float)
    r, n = values.shape
    if r <= p:
        raise ForecastError(f"need more than p={p} rows, got {r}")
    win = sliding_window_view(values, p, axis=0)[:-1]  # (r-p, n, p), oldest first
    return win[:, :, ::-1].transpose(0, 2, 1).reshape(r - p, p * n)


def init_params(names, lag_depth: int, hidden: int, seed: RngSeed) -> dict:
    """Initial weights for one network per variable.

    Every (target, input variable) weight block comes from its own stream
    keyed by the variable names, so reordering the columns of a series
    permutes the initial parameters instead of changing them.
    """
    n = len(names)
    n_inputs = lag_depth * n
    w1 = np.empty((n, hidden, n_inputs))
    w2 = np.empty((n, hidden))
    for t, target in enumerate(names):
        tseed = seed.child(f"target-{target}")
        for k, source in enumerate(names):
            block = tseed.child(f"input-{source}").generator().standard_normal((hidden, lag_depth))
            w1[t][:, k::n] = block / np.sqrt(n_inputs)
        w2[t] = tseed.generator().standard_normal(hidden) / np.sqrt(hidden)
    return {"w1": w1, "b1": np.zeros((n, hidden)), "w2": w2, "b2": np.zeros(n)}


def forward(params: dict, x: np.ndarray):
    """Predictions of shape ``(T, B)`` for ``T`` stacked networks and hidden activations."""
    h = np.tanh(np.einsum("thd,bd->tbh", params["w1"], x) + params["b1"][:, None, :])
    pred = np.einsum("tbh,th->tb", h, params["w2"]) + params["b2"][:, None]
    return pred, h


def loss_and_grad(params: dict, x: np.ndarray, y: np.ndarray, weight_decay: float = 0.0):
    """Mean squared error per network (plus optional L2 on the weights) and its gradients.

    ``x`` is ``(B, D)`` and shared by all networks; ``y`` is ``(T, B)``.
    """
    pred, h = forward(params, x)
    err = pred - y
    b = x.shape[0]
    loss = np.mean(err ** 2, axis=1)
    if weight_decay:
        loss = loss + weight_decay * (np.sum(params["w1"] ** 2, axis=(1, 2)) + np.sum(params["w2"] ** 2, axis=1))
    g_pred = 2.0 * err / b
    grads = {
        "b2": g_pred.sum(axis=1),
        "w2": np.einsum("tb,tbh->th", g_pred, h),
    }
    g_pre = g_pred[:, :, None] * params["w2"][:, None, :] * (1.0 - h * h)
    grads["b1"] = g_pre.sum(axis=1)
    grads["w1"] = np.einsum("tbh,bd->thd", g_pre, x)
    if weight_decay:
        grads["w1"] = grads["w1"] + 2.0 * weight_decay * params["w1"]
        grads["w2"] = grads["w2"] + 2.0 * weight_decay * params["w2"]
    return loss, grads


def fit(train: MultivariateTimeSeries, config: ForecastConfig | None = None) -> ForecastModel:
    """Train one network per variable on the training segment."""
    config = config or ForecastConfig()
    p = config.lag_depth
    if train.length <= p + config.batch_size:
        raise ForecastError(f"training segment has {train.length} rows; need more than "
                            f"p + batch size = {p + config.batch_size}")
    _, scaling = standardize(train)
    n = train.n_vars
    z = scaling.apply(train.values)
    z = np.where(scaling.constant, train.values - scaling.mean, z)
    x = lagged_design(z, p)
    y = z[p:].T.copy()
    active = np.flatnonzero(~scaling.constant)

    seed = _as_seed(config.seed)
    params = init_params(train.names, p, config.hidden, seed)
    n_val = int(round(config.validation_fraction * len(x)))
    n_fit = len(x) - n_val
    if n_fit <= config.batch_size:
        raise ForecastError(f"only {n_fit} fitting rows left after the validation split")
    x_fit, x_val = x[:n_fit], x[n_fit:]
    ya = y[active]
    y_fit, y_val = ya[:, :n_fit], ya[:, n_fit:]

    sub = {k: v[active].copy() for k, v in params.items()}
    m = {k: np.zeros_like(v) for k, v in sub.items()}
    s = {k: np.zeros_like(v) for k, v in sub.items()}
    best = {k: v.copy() for k, v in sub.items()}
    best_val = np.full(len(active), np.inf)
    stale = np.zeros(len(active), dtype=int)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    shuffle_rng = seed.child("shuffle").generator()
    trace = []
    step = 0
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n_fit)
        epoch_loss = np.zeros(len(active))
        for start in range(0, n_fit, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_grad(sub, x_fit[idx], y_fit[:, idx], config.weight_decay)
            if not np.all(np.isfinite(loss)):
                raise ForecastError(f"non-finite training loss at epoch {epoch}; reduce the step size")
            epoch_loss += loss * len(idx)
            step += 1
            lr = config.step_size * np.sqrt(1 - beta2 ** step) / (1 - beta1 ** step)
            for k in PARAM_NAMES:
                g = grads[k]
                m[k] = beta1 * m[k] + (1 - beta1) * g
                s[k] = beta2 * s[k] + (1 - beta2) * g * g
                sub[k] = sub[k] - lr * m[k] / (np.sqrt(s[k]) + eps)
        trace.append(epoch_loss / n_fit)
        if n_val:
            val = np.mean((forward(sub, x_val)[0] - y_val) ** 2, axis=1)
            improved = val < best_val
            for k in PARAM_NAMES:
                best[k][improved] = sub[k][improved]
            best_val = np.where(improved, val, best_val)
            stale = np.where(improved, 0, stale + 1)
            if np.all(stale >= config.patience):
                break
    final = best if n_val else sub
    for k in PARAM_NAMES:
        params[k][active] = final[k]

    pred = forward(params, x)[0]
    pred[scaling.constant] = 0.0
    rmse = np.sqrt(np.mean((pred - y) ** 2, axis=1))
    full_trace = np.zeros((len(trace), n))
    if trace:
        full_trace[:, active] = np.array(trace)
    logger.info("forecaster trained: train RMSE per target %s", np.round(rmse, 4))
    return ForecastModel(config, params, scaling, full_trace, rmse)


def residuals(model: ForecastModel, series: MultivariateTimeSeries, bounds=None,
              substitution=None, targets=None, intervention=None) -> list[ResidualSeries]:
    """Teacher-forced one-step residuals over ``series`` rows ``bounds``.

    The first ``p`` rows of the segment are warm-up, so each residual
    series has ``stop - start - p`` entries, in standardized units.

    Parameters
    ----------
    substitution : (int, array), optional
        Variable index and a replacement column (original units) covering
        every row of the segment. It is fed to the network in place of the
        observed column; the residual is always taken against the observed
        target.
    targets : iterable of int, optional
        Targets to evaluate; defaults to all. The substituted variable may
        not be among them.
    """
    start, stop = (0, series.length) if bounds is None else bounds
    if series.n_vars != model.n_vars:
        raise ForecastError(f"series has {series.n_vars} variables, model {model.n_vars}")
    p = model.lag_depth
    if stop - start <= p:
        raise ForecastError(f"segment of {stop - start} rows is not longer than the warm-up p={p}")
    targets = list(range(model.n_vars)) if targets is None else list(targets)
    observed = series.values[start:stop]
    inputs = observed
    if substitution is not None:
        i, replacement = substitution
        if i in targets:
            raise ForecastError(f"cannot substitute variable {i} while computing its own residuals")
        replacement = np.asarray(replacement, dtype=float)
        if replacement.shape != (stop - start,):
            raise ForecastError(f"replacement has length {replacement.shape}, segment needs {stop - start}")
        inputs = observed.copy()
        inputs[:, i] = replacement
    pred = model.predict(inputs, targets)
    truth = model.scale(observed)[p:]
    return [ResidualSeries(j, truth[:, j] - pred[:, k], intervention) for k, j in enumerate(targets)]


def save_model(model: ForecastModel, path) -> None:
    """Write parameters as ``name<TAB>shape<TAB>values`` lines (text)."""
    entries = {f"param.{k}": v for k, v in model.params.items()}
    entries.update({
        "scaling.mean": model.scaling.mean,
        "scaling.std": model.scaling.std,
        "scaling.constant": model.scaling.constant.astype(float),
        "train_rmse": model.train_rmse,
        "loss_trace": model.loss_trace,
        "config": np.array([model.config.lag_depth, model.config.hidden, model.config.epochs,
                            model.config.step_size, model.config.batch_size, model.config.weight_decay,
                            model.config.validation_fraction, model.config.patience], dtype=float),
    })
    lines = [f"# seed\t{model.config.seed.master}\t{model.config.seed.label}"]
    for name, arr in entries.items():
        arr = np.asarray(arr, dtype=float)
        shape = ",".join(str(d) for d in arr.shape)
        lines.append(f"{name}\t{shape}\t" + " ".join(repr(float(v)) for v in arr.ravel()))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> ForecastModel:
    seed = RngSeed(0, "forecaster-init")
    arrays = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("# seed\t"):
            _, master, label = line.split("\t", 2)
            seed = RngSeed(int(master), label)
            continue
        if not line.strip():
            continue
        name, shape, data = line.split("\t")
        dims = tuple(int(d) for d in shape.split(",")) if shape else ()
        vals = np.array([float(v) for v in data.split()]) if data else np.array([])
        arrays[name] = vals.reshape(dims)
    c = arrays["config"]
    config = ForecastConfig(int(c[0]), int(c[1]), int(c[2]), float(c[3]), int(c[4]), seed,
                            float(c[5]), float(c[6]), int(c[7]))
    scaling = StandardizationParams(arrays["scaling.mean"], arrays["scaling.std"],
                                    arrays["scaling.constant"].astype(bool))
    params = {k: arrays[f"param.{k}"] for k in PARAM_NAMES}
    return ForecastModel(config, params, scaling, arrays["loss_trace"], arrays["train_rmse"])
