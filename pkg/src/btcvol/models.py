"""Deep forecasters mapping one day's inputs to 96 log-return predictions.

All four models share the bottleneck interpolator head: a narrow linear
layer followed by a linear map to the 96 fifteen-minute slots, whose
96-entry bias vector carries one value per slot. The dual-pipeline model
adds a second convolution stack over tweet features; zeroing that
pipeline reproduces the single-pipeline model bitwise, which is the
ablation identity the harness relies on.
"""

from __future__ import annotations

import copy
import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .features import BIN_MINUTES, DAY_BINS, DayWindow, Scaler, invert_scaler, realized_volatility
from .tensor import Tensor, add_rowvec, backward, concat_vec, matmul, pick_row, relu, transpose

# width of the lower-pipeline representation after the dense reduction,
# fixed regardless of how many tweet feature columns are selected
LOWER_INPUT_DIM = 4

# inputs are scaled into [-0.25, 0.25]; magnitudes far outside the band
# indicate unscaled data reaching the model
SCALED_INPUT_LIMIT = 2.5


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass
class ForecastConfig:
    """Hyperparameters shared by the deep forecasters (defaults: best
    values from the search described in the experiment harness)."""

    filters: int = 287
    kernel_size: int = 5
    dilation_base: int = 4
    skip_connections: bool = True
    normalization: str = "none"
    dropout: float = 0.217
    epsilon: float = 0.0913
    learning_rate: float = 6.49e-5
    weight_decay: float = 5.93e-6
    recurrent_dim: int = 261
    bottleneck_dim: int = 8
    epochs: int = 30
    num_layers: int | None = None


class ForecastHead:
    """Bottleneck interpolator: repr -> B -> 96 slots, one bias per slot."""

    def __init__(self, repr_dim: int, bottleneck_dim: int, rng: np.random.Generator):
        self.bottleneck = nn.Linear(repr_dim, bottleneck_dim, rng)
        self.interpolator = nn.Linear(bottleneck_dim, DAY_BINS, rng)

    def __call__(self, h: Tensor) -> Tensor:
        return self.interpolator(self.bottleneck(h))

    def params(self, prefix: str = "head") -> dict[str, Tensor]:
        out = self.bottleneck.params(f"{prefix}.bottleneck")
        out.update(self.interpolator.params(f"{prefix}.interpolator"))
        return out


def _check_scaled(arr: np.ndarray, what: str) -> None:
    peak = float(np.max(np.abs(arr))) if arr.size else 0.0
    if peak > SCALED_INPUT_LIMIT:
        raise ValueError(
            f"{what} has magnitude {peak:.3g}; inputs must be scaled with the training-set scaler")


class TCNForecaster:
    """Causal convolution stack over the previous day's log-returns."""

    kind = "tcn"
    deterministic = False

    def __init__(self, config: ForecastConfig, rng: np.random.Generator):
        self.config = config
        self.block = nn.TCNBlock(
            1, config.filters, config.kernel_size, config.dilation_base, rng,
            num_layers=config.num_layers, skip_connections=config.skip_connections,
            normalization=config.normalization, dropout=config.dropout, span=DAY_BINS)
        self.head = ForecastHead(config.filters, config.bottleneck_dim, rng)

    def forward_day(self, window: DayWindow, rng: np.random.Generator | None = None) -> Tensor:
        _check_scaled(window.inputs, "input returns")
        x = Tensor(window.inputs.reshape(DAY_BINS, 1))
        h = self.block(x, rng)
        return self.head(pick_row(h, DAY_BINS - 1))

    def params(self) -> dict[str, Tensor]:
        out = self.block.params("upper")
        out.update(self.head.params())
        return out


class DTCNForecaster:
    """Two separate convolution pipelines: one over log-returns, one over
    per-bin tweet features reduced to four channels by a dense+ReLU stack.

    The final-timestep representations concatenate along the feature axis
    before the shared head.
    """

    kind = "dtcn"
    deterministic = False

    def __init__(self, config: ForecastConfig, feature_dim: int, rng: np.random.Generator):
        if feature_dim < 1:
            raise ValueError("the dual-pipeline model needs at least one feature column")
        self.config = config
        self.feature_dim = feature_dim
        self.upper = nn.TCNBlock(
            1, config.filters, config.kernel_size, config.dilation_base, rng,
            num_layers=config.num_layers, skip_connections=config.skip_connections,
            normalization=config.normalization, dropout=config.dropout, span=DAY_BINS)
        self.lower_dense = nn.Linear(feature_dim, LOWER_INPUT_DIM, rng)
        self.lower = nn.TCNBlock(
            LOWER_INPUT_DIM, config.filters, config.kernel_size, config.dilation_base, rng,
            num_layers=config.num_layers, skip_connections=config.skip_connections,
            normalization=config.normalization, dropout=config.dropout, span=DAY_BINS)
        self.head = ForecastHead(2 * config.filters, config.bottleneck_dim, rng)

    def forward_day(self, window: DayWindow, rng: np.random.Generator | None = None) -> Tensor:
        if window.features is None:
            raise ValueError("window carries no tweet features")
        if window.features.shape != (DAY_BINS, self.feature_dim):
            raise ValueError(f"expected ({DAY_BINS}, {self.feature_dim}) features, "
                             f"got {window.features.shape}")
        _check_scaled(window.inputs, "input returns")
        _check_scaled(window.features, "input features")
        x = Tensor(window.inputs.reshape(DAY_BINS, 1))
        upper_last = pick_row(self.upper(x, rng), DAY_BINS - 1)

        f = Tensor(window.features)
        reduced = relu(add_rowvec(matmul(f, transpose(self.lower_dense.w)), self.lower_dense.b))
        lower_last = pick_row(self.lower(reduced, rng), DAY_BINS - 1)

        return self.head(concat_vec([upper_last, lower_last]))

    def params(self) -> dict[str, Tensor]:
        out = self.upper.params("upper")
        out.update(self.lower_dense.params("lower.dense"))
        out.update(self.lower.params("lower"))
        out.update(self.head.params())
        return out


class RecurrentForecaster:
    """LSTM or GRU over the previous day's returns, same head as the TCN."""

    deterministic = False

    def __init__(self, kind: str, config: ForecastConfig, rng: np.random.Generator):
        if kind not in ("lstm", "gru"):
            raise ValueError("recurrent kind must be 'lstm' or 'gru'")
        self.kind = kind
        self.config = config
        cell_cls = nn.LSTMCell if kind == "lstm" else nn.GRUCell
        self.cell = cell_cls(1, config.recurrent_dim, rng, dropout=config.dropout)
        self.head = ForecastHead(config.recurrent_dim, config.bottleneck_dim, rng)

    def forward_day(self, window: DayWindow, rng: np.random.Generator | None = None) -> Tensor:
        _check_scaled(window.inputs, "input returns")
        x = Tensor(window.inputs.reshape(DAY_BINS, 1))
        h = nn.recurrent_forward(x, self.cell, rng)
        return self.head(pick_row(h, DAY_BINS - 1))

    def params(self) -> dict[str, Tensor]:
        out = self.cell.params("cell")
        out.update(self.head.params())
        return out


def predict_rv(predicted_returns) -> float:
    """Daily realized volatility of a vector of log-returns (its norm)."""
    r = np.asarray(predicted_returns, dtype=np.float64)
    return float(np.sqrt(np.sum(r * r)))


def fit(model, windows: list[DayWindow], rng: np.random.Generator,
        epochs: int | None = None) -> list[float]:
    """Train with AdamW on the banded squared loss over per-day windows.

    Windows are visited in a seeded shuffle each epoch; returns the
    per-epoch mean loss trace. A non-finite loss aborts with diagnostics.
    """
    cfg = model.config
    n_epochs = epochs if epochs is not None else cfg.epochs
    opt = nn.AdamW(model.params(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    trace = []
    for epoch in range(n_epochs):
        order = rng.permutation(len(windows))
        total = 0.0
        for j in order:
            w = windows[j]
            pred = model.forward_day(w, rng=rng)
            loss = nn.epsilon_insensitive_loss(Tensor(w.target), pred, cfg.epsilon)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss {value} at epoch {epoch}, window {w.date}")
            backward(loss)
            opt.step()
            opt.zero_grad()
            total += value
        trace.append(total / max(len(windows), 1))
    return trace


@dataclass
class DayPrediction:
    date: dt.date
    true_rv: float
    pred_rv: float


def evaluate(model, windows: list[DayWindow], return_scaler: Scaler) -> list[DayPrediction]:
    """One (true RV, predicted RV) pair per test day, dropout disabled.

    Predictions are mapped back to raw log-return space before
    aggregation; the true value comes from the realized returns.
    """
    out = []
    for w in windows:
        pred_scaled = model.forward_day(w)     # rng=None: no dropout
        pred_raw = invert_scaler(pred_scaled.data, return_scaler)
        out.append(DayPrediction(
            date=w.date,
            true_rv=realized_volatility(w.target_raw),
            pred_rv=predict_rv(pred_raw),
        ))
    return out


def export_head_bias(model) -> list[tuple[str, float]]:
    """The 96 interpolator bias values with their 15-minute UTC slots."""
    bias = model.head.interpolator.b.data
    rows = []
    for i, value in enumerate(bias):
        minutes = i * BIN_MINUTES
        rows.append((f"{minutes // 60:02d}:{minutes % 60:02d}", float(value)))
    return rows


def dtcn_from_tcn(tcn: TCNForecaster, feature_dim: int) -> DTCNForecaster:
    """Dual-pipeline model that shares the TCN's upper pipeline and head,
    with every lower-pipeline parameter zeroed.

    The head bottleneck of the dual model is wider (it also sees the lower
    representation); the TCN's weights occupy the upper columns and the
    rest are zero, so with zero lower output the predictions coincide
    bitwise with the TCN's.
    """
    dual = DTCNForecaster(tcn.config, feature_dim, np.random.default_rng(0))
    dual.upper = copy.deepcopy(tcn.block)
    for p in dual.lower_dense.params("x").values():
        p.data = np.zeros_like(p.data)
    for p in dual.lower.params("x").values():
        p.data = np.zeros_like(p.data)
    filters = tcn.config.filters
    w = np.zeros_like(dual.head.bottleneck.w.data)
    w[:, :filters] = tcn.head.bottleneck.w.data
    dual.head.bottleneck.w.data = w
    dual.head.bottleneck.b.data = tcn.head.bottleneck.b.data.copy()
    dual.head.interpolator.w.data = tcn.head.interpolator.w.data.copy()
    dual.head.interpolator.b.data = tcn.head.interpolator.b.data.copy()
    return dual


def save_model(model, path) -> None:
    nn.save_checkpoint(model.params(), path)


def load_model(model, path) -> None:
    nn.load_into(model.params(), path)
