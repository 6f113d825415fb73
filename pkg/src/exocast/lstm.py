"""Single-layer LSTM forecaster built on numpy.

Sliding-window dataset construction, vectorized forward pass over a batch
of windows, exact backpropagation through time, Adam updates, full-batch
training with early stopping, and a finite-difference gradient checker.

Weights are stored stacked in gate order (input, forget, cell, output):
``wx`` is (4H, F), ``wh`` is (4H, H), ``b`` is (4H,), with a scalar linear
head ``w_out`` (H,), ``b_out``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DatasetMismatch,
    DivergedLoss,
    LengthMismatch,
    NonFiniteActivation,
    ShapeMismatch,
    TooFewRows,
)
from .features import FeatureFrame, Normalizer

FORMAT_VERSION = 1


@dataclass(frozen=True)
class WindowSpec:
    width: int = 24
    horizon: int = 1

    def __post_init__(self):
        if self.width < 2:
            raise ValueError("window width must be >= 2")
        if self.horizon != 1:
            raise ValueError("only horizon 1 is supported")

    @property
    def input_length(self) -> int:
        return self.width - self.horizon


@dataclass
class WindowedDataset:
    inputs: np.ndarray  # (num_windows, input_length, num_features)
    targets: np.ndarray  # (num_windows,)
    start_dates: list[date]
    feature_names: list[str]

    @property
    def n_windows(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[2]


def make_windows(frame: FeatureFrame, spec: WindowSpec = WindowSpec()) -> WindowedDataset:
    """Stride-1 consecutive windows within one split.

    Window k takes predictor rows [k, k + width - 2] as input and the
    target column of row k + width - 1 as its label, so an N-row frame
    yields N - width + 1 windows.
    """
    n = frame.n_rows
    if n < spec.width:
        raise TooFewRows(f"{n} rows < window width {spec.width}")
    preds = frame.predictors()
    tgt = frame.target
    num = n - spec.width + 1
    t_in = spec.input_length
    inputs = np.stack([preds[k:k + t_in] for k in range(num)])
    targets = np.array([tgt[k + spec.width - 1] for k in range(num)])
    return WindowedDataset(inputs, targets, frame.dates[:num], frame.predictor_names)


@dataclass
class LstmParams:
    wx: np.ndarray  # (4H, F) gate order i, f, g, o
    wh: np.ndarray  # (4H, H)
    b: np.ndarray   # (4H,)
    w_out: np.ndarray  # (H,)
    b_out: float

    @property
    def hidden_size(self) -> int:
        return self.wh.shape[1]

    @property
    def input_size(self) -> int:
        return self.wx.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"wx": self.wx, "wh": self.wh, "b": self.b,
                "w_out": self.w_out, "b_out": np.array([self.b_out])}

    def copy(self) -> "LstmParams":
        return LstmParams(self.wx.copy(), self.wh.copy(), self.b.copy(),
                          self.w_out.copy(), self.b_out)


@dataclass(frozen=True)
class TrainConfig:
    hidden_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def init_params(n_features: int, config: TrainConfig) -> LstmParams:
    """Uniform +-1/sqrt(hidden) init with forget-gate bias +1."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(0,)))
    h = config.hidden_size
    scale = 1.0 / np.sqrt(h)
    wx = rng.uniform(-scale, scale, size=(4 * h, n_features))
    wh = rng.uniform(-scale, scale, size=(4 * h, h))
    b = np.zeros(4 * h)
    b[h:2 * h] = 1.0  # forget gate
    w_out = rng.uniform(-scale, scale, size=h)
    return LstmParams(wx, wh, b, w_out, 0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_forward(params: LstmParams, windows: np.ndarray, want_cache: bool = False):
    """Predictions for a batch of windows, optionally with BPTT caches.

    ``windows`` is (B, T, F) or a single (T, F) window. Initial hidden and
    cell states are zero.
    """
    x = np.asarray(windows, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != params.input_size:
        raise ShapeMismatch(f"input shape {x.shape} vs {params.input_size} features")
    bsz, t_len, _ = x.shape
    hsz = params.hidden_size
    h = np.zeros((bsz, hsz))
    c = np.zeros((bsz, hsz))
    cache = []
    for t in range(t_len):
        z = x[:, t] @ params.wx.T + h @ params.wh.T + params.b
        i = _sigmoid(z[:, :hsz])
        f = _sigmoid(z[:, hsz:2 * hsz])
        g = np.tanh(z[:, 2 * hsz:3 * hsz])
        o = _sigmoid(z[:, 3 * hsz:])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        if want_cache:
            cache.append((x[:, t], h, c, i, f, g, o, tanh_c))
        h, c = h_new, c_new
    preds = h @ params.w_out + params.b_out
    if not np.all(np.isfinite(preds)):
        raise NonFiniteActivation("non-finite prediction")
    if single:
        preds = float(preds[0])
    if want_cache:
        return preds, (cache, h)
    return preds


def mse_loss(predictions: Sequence[float], targets: Sequence[float]) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.size != t.size or p.size == 0:
        raise LengthMismatch(f"{p.size} predictions vs {t.size} targets")
    return float(np.mean((p - t) ** 2))


def bptt_gradients(params: LstmParams, batch: WindowedDataset) -> tuple[LstmParams, float]:
    """Exact gradients of the batch-mean MSE, plus the loss itself."""
    if batch.n_windows == 0:
        raise ShapeMismatch("empty batch")
    x = batch.inputs
    y = batch.targets
    preds, (cache, h_last) = lstm_forward(params, x, want_cache=True)
    loss = float(np.mean((preds - y) ** 2))
    bsz = x.shape[0]
    hsz = params.hidden_size

    dpred = 2.0 * (preds - y) / bsz  # (B,)
    g_wx = np.zeros_like(params.wx)
    g_wh = np.zeros_like(params.wh)
    g_b = np.zeros_like(params.b)
    g_wout = h_last.T @ dpred
    g_bout = float(dpred.sum())
    dh = dpred[:, None] * params.w_out[None, :]
    dc = np.zeros((bsz, hsz))
    for t in range(len(cache) - 1, -1, -1):
        x_t, h_prev, c_prev, i, f, g, o, tanh_c = cache[t]
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c**2)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g**2),
            do * o * (1.0 - o),
        ], axis=1)
        g_wx += dz.T @ x_t
        g_wh += dz.T @ h_prev
        g_b += dz.sum(axis=0)
        dh = dz @ params.wh
        dc = dc * f
    return LstmParams(g_wx, g_wh, g_b, g_wout, g_bout), loss


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def zeros_like(cls, params: LstmParams) -> "AdamState":
        arrays = params.arrays()
        return cls({k: np.zeros_like(a) for k, a in arrays.items()},
                   {k: np.zeros_like(a) for k, a in arrays.items()})


def adam_step(params: LstmParams, grads: LstmParams, state: AdamState,
              config: TrainConfig, step: int) -> LstmParams:
    """Bias-corrected Adam update; mutates ``state``, returns new params."""
    if step < 1:
        raise ValueError("step index starts at 1")
    p_arrays = params.arrays()
    g_arrays = grads.arrays()
    out: dict[str, np.ndarray] = {}
    b1, b2 = config.beta1, config.beta2
    for k in p_arrays:
        state.m[k] = b1 * state.m[k] + (1 - b1) * g_arrays[k]
        state.v[k] = b2 * state.v[k] + (1 - b2) * g_arrays[k] ** 2
        m_hat = state.m[k] / (1 - b1**step)
        v_hat = state.v[k] / (1 - b2**step)
        out[k] = p_arrays[k] - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
    return LstmParams(out["wx"], out["wh"], out["b"], out["w_out"], float(out["b_out"][0]))


@dataclass
class TrainReport:
    train_losses: list[float]
    val_losses: list[float]
    stopped_epoch: int
    best_epoch: int

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss"]
        for e, (tl, vl) in enumerate(zip(self.train_losses, self.val_losses), start=1):
            lines.append(f"{e},{tl!r},{vl!r}")
        return "\n".join(lines) + "\n"


@dataclass
class LstmModel:
    params: LstmParams
    feature_names: list[str]
    config: TrainConfig


def train_lstm(train: WindowedDataset, val: WindowedDataset,
               config: TrainConfig = TrainConfig()) -> tuple[LstmModel, TrainReport]:
    """Full-batch Adam training with early stopping on validation loss.

    Keeps the parameters achieving the best validation loss. Deterministic
    given (seed, data, config); training is single-threaded by contract.
    """
    if train.n_windows == 0 or val.n_windows == 0:
        raise DatasetMismatch("train and validation datasets must be nonempty")
    if train.n_features != val.n_features or train.feature_names != val.feature_names:
        raise DatasetMismatch("train/validation feature columns differ")
    params = init_params(train.n_features, config)
    state = AdamState.zeros_like(params)
    best = params.copy()
    best_val = float("inf")
    best_epoch = 0
    train_losses: list[float] = []
    val_losses: list[float] = []
    since_improvement = 0
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        grads, train_loss = bptt_gradients(params, train)
        if not np.isfinite(train_loss):
            raise DivergedLoss(f"non-finite training loss at epoch {epoch}")
        params = adam_step(params, grads, state, config, epoch)
        val_preds = lstm_forward(params, val.inputs)
        val_loss = mse_loss(val_preds, val.targets)
        if not np.isfinite(val_loss):
            raise DivergedLoss(f"non-finite validation loss at epoch {epoch}")
        train_losses.append(train_loss)
        val_losses.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best = params.copy()
            best_epoch = epoch
            since_improvement = 0
        else:
            since_improvement += 1
        if since_improvement >= config.patience:
            break
    model = LstmModel(best, list(train.feature_names), config)
    return model, TrainReport(train_losses, val_losses, stopped_epoch=epoch, best_epoch=best_epoch)


def evaluate_forecaster(model: LstmModel, dataset: WindowedDataset,
                        normalizer: Normalizer, target_name: str) -> dict:
    """MAE/MSE in normalized units plus MAE de-normalized to price units."""
    if dataset.n_windows == 0:
        raise DatasetMismatch("empty dataset")
    if dataset.feature_names != model.feature_names:
        raise DatasetMismatch("dataset feature columns differ from the trained model")
    preds = np.atleast_1d(lstm_forward(model.params, dataset.inputs))
    mae_norm = float(np.mean(np.abs(preds - dataset.targets)))
    loss_norm = float(np.mean((preds - dataset.targets) ** 2))
    _, target_std = normalizer.params_for(target_name)
    return {
        "mae_normalized": mae_norm,
        "loss_normalized": loss_norm,
        "mae_price_units": mae_norm * target_std,
        "predictions_normalized": preds,
    }


def gradient_check(config: TrainConfig, seed: int, n_windows: int = 3,
                   n_features: int = 3, t_len: int = 5, step: float = 1e-5) -> float:
    """Max relative error between analytic BPTT and central differences."""
    rng = np.random.default_rng(seed)
    params = init_params(n_features, replace(config, seed=seed))
    x = rng.normal(size=(n_windows, t_len, n_features))
    y = rng.normal(size=n_windows)
    ds = WindowedDataset(x, y, [date(2020, 1, 1)] * n_windows,
                         [f"f{i}" for i in range(n_features)])
    analytic, _ = bptt_gradients(params, ds)
    a_arrays = analytic.arrays()

    flat_keys = ["wx", "wh", "b", "w_out", "b_out"]

    def loss_at(p: LstmParams) -> float:
        return mse_loss(lstm_forward(p, x), y)

    max_rel = 0.0
    for k in flat_keys:
        arr = params.arrays()[k]
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            p_plus = params.copy()
            p_minus = params.copy()
            pa, ma = p_plus.arrays(), p_minus.arrays()
            pa[k][idx] += step
            ma[k][idx] -= step
            if k == "b_out":
                p_plus = replace(p_plus, b_out=float(pa[k][0]))
                p_minus = replace(p_minus, b_out=float(ma[k][0]))
            numeric = (loss_at(p_plus) - loss_at(p_minus)) / (2 * step)
            a = float(a_arrays[k][idx])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            max_rel = max(max_rel, rel)
    return max_rel


# --- persistence ----------------------------------------------------------

def model_to_json(model: LstmModel) -> str:
    p = model.params
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "lstm",
        "feature_names": model.feature_names,
        "config": {
            "hidden_size": model.config.hidden_size,
            "learning_rate": model.config.learning_rate,
            "beta1": model.config.beta1,
            "beta2": model.config.beta2,
            "eps": model.config.eps,
            "max_epochs": model.config.max_epochs,
            "patience": model.config.patience,
            "seed": model.config.seed,
        },
        "shapes": {k: list(a.shape) for k, a in p.arrays().items()},
        "weights": {k: a.ravel().tolist() for k, a in p.arrays().items()},
    }
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> LstmModel:
    doc = json.loads(text)
    w = {k: np.array(v).reshape(doc["shapes"][k]) for k, v in doc["weights"].items()}
    params = LstmParams(w["wx"], w["wh"], w["b"], w["w_out"], float(w["b_out"][0]))
    return LstmModel(params, doc["feature_names"], TrainConfig(**doc["config"]))
