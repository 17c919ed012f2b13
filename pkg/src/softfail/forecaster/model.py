"""Encoder-decoder LSTM regressor with recursive decoding.

The encoder folds the ``k + 1`` observations into ``(h, c)``. The decoder
starts from those states with a zero dummy input; every later decoder input is
the previous prediction, in training as well as inference. Each decoder hidden
state passes through the same dense head ``u -> dense_units (tanh) -> 1``.
"""
from __future__ import annotations

import copy
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..dataset import Scaler
from .cell import LstmCellParams, lstm_step, lstm_step_backward

MODEL_FORMAT = "softfail-edlstm/1"


@dataclass(frozen=True)
class ModelConfig:
    hidden_units: int = 30
    dense_units: int = 20
    input_features: int = 1
    use_bias: bool = False
    future_len: int = 70


@dataclass(eq=False)
class DenseHead:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def named_arrays(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    @classmethod
    def zeros(cls, u: int, units: int, out: int = 1):
        return cls(np.zeros((u, units)), np.zeros(units), np.zeros((units, out)), np.zeros(out))

    @classmethod
    def uniform(cls, u: int, units: int, rng: np.random.Generator, out: int = 1):
        a1, a2 = 1.0 / np.sqrt(u), 1.0 / np.sqrt(units)
        return cls(rng.uniform(-a1, a1, (u, units)), np.zeros(units),
                   rng.uniform(-a2, a2, (units, out)), np.zeros(out))

    def __call__(self, h):
        return np.tanh(h @ self.W1 + self.b1) @ self.W2 + self.b2


@dataclass(eq=False)
class EdLstmModel:
    encoder: LstmCellParams
    decoder: LstmCellParams
    dense: DenseHead
    config: ModelConfig = field(default_factory=ModelConfig)
    scaler: Scaler | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.encoder.hidden_units != self.decoder.hidden_units:
            raise ValueError("encoder and decoder need the same number of hidden units")
        if self.dense.W2.shape[1] != self.decoder.input_features:
            raise ValueError("decoder feeds predictions back, so output size must equal d")

    @classmethod
    def init(cls, config: ModelConfig, seed: int) -> "EdLstmModel":
        rng = np.random.default_rng(seed)
        d, u = config.input_features, config.hidden_units
        enc = LstmCellParams.uniform(d, u, rng, config.use_bias)
        dec = LstmCellParams.uniform(d, u, rng, config.use_bias)
        dense = DenseHead.uniform(u, config.dense_units, rng, d)
        return cls(enc, dec, dense, config, seed=seed)

    @classmethod
    def zeros(cls, config: ModelConfig) -> "EdLstmModel":
        d, u = config.input_features, config.hidden_units
        return cls(LstmCellParams.zeros(d, u, config.use_bias),
                   LstmCellParams.zeros(d, u, config.use_bias),
                   DenseHead.zeros(u, config.dense_units, d), config)

    def parameters(self) -> dict[str, np.ndarray]:
        """Name -> array, the live arrays (in-place updates change the model)."""
        out = {}
        for prefix, part in (("encoder", self.encoder), ("decoder", self.decoder),
                             ("dense", self.dense)):
            for name, arr in part.named_arrays().items():
                out[f"{prefix}.{name}"] = arr
        return out

    def copy(self) -> "EdLstmModel":
        return copy.deepcopy(self)


def encode(x_seq, p: LstmCellParams):
    """Final ``(h, c)`` after reading ``x_seq`` of shape (T, d) or (B, T, d)."""
    x_seq = np.asarray(x_seq, dtype=float)
    if x_seq.ndim == 1:
        x_seq = x_seq[:, None]
    if x_seq.shape[-2] == 0:
        raise ValueError("cannot encode an empty sequence")
    batch = x_seq.shape[:-2]
    h = np.zeros(batch + (p.hidden_units,))
    c = np.zeros_like(h)
    for t in range(x_seq.shape[-2]):
        h, c = lstm_step(x_seq[..., t, :], h, c, p)
    return h, c


def decode(h, c, s: int, p: LstmCellParams, dense: DenseHead):
    """``s`` recursive predictions, shape ``h.shape[:-1] + (s,)`` (d = 1)."""
    if s < 1:
        raise ValueError("decoding horizon must be >= 1")
    x = np.zeros(h.shape[:-1] + (p.input_features,))
    out = []
    for _ in range(s):
        h, c = lstm_step(x, h, c, p)
        x = dense(h)
        out.append(x[..., 0])
    return np.stack(out, axis=-1)


def forward(model: EdLstmModel, X, s: int, keep_cache: bool = False):
    """Batched forward pass. ``X`` is (B, k+1) in normalised units.

    Returns predictions (B, s) and, with ``keep_cache``, the per-step caches
    needed by :func:`backward`.
    """
    X = np.asarray(X, dtype=float)
    B, T = X.shape
    u = model.config.hidden_units
    h = np.zeros((B, u))
    c = np.zeros((B, u))
    enc_cache, dec_cache, head_cache = [], [], []
    for t in range(T):
        res = lstm_step(X[:, t:t + 1], h, c, model.encoder, cache=keep_cache)
        h, c = res[0], res[1]
        if keep_cache:
            enc_cache.append(res[2])
    x = np.zeros((B, 1))
    preds = np.empty((B, s))
    dn = model.dense
    for j in range(s):
        res = lstm_step(x, h, c, model.decoder, cache=keep_cache)
        h, c = res[0], res[1]
        z = np.tanh(h @ dn.W1 + dn.b1)
        x = z @ dn.W2 + dn.b2
        preds[:, j] = x[:, 0]
        if keep_cache:
            dec_cache.append(res[2])
            head_cache.append((h, z))
    if keep_cache:
        return preds, (enc_cache, dec_cache, head_cache)
    return preds


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def backward(model: EdLstmModel, cache, pred, target) -> dict[str, np.ndarray]:
    """Exact gradient of the batch MSE with respect to every parameter.

    The loss gradient of prediction ``j`` is joined by the gradient arriving
    through decoder input ``j + 1``, since that input is prediction ``j``.
    """
    enc_cache, dec_cache, head_cache = cache
    B, s = pred.shape
    dpred = 2.0 * (pred - target) / (B * s)
    grads = {name: np.zeros_like(arr) for name, arr in model.parameters().items()}
    g_enc = {k[len("encoder."):]: v for k, v in grads.items() if k.startswith("encoder.")}
    g_dec = {k[len("decoder."):]: v for k, v in grads.items() if k.startswith("decoder.")}
    dn = model.dense
    u = model.config.hidden_units
    dh_next = np.zeros((B, u))
    dc_next = np.zeros((B, u))
    dx_next = np.zeros((B, 1))
    for j in range(s - 1, -1, -1):
        h, z = head_cache[j]
        dy = dpred[:, j:j + 1] + dx_next
        grads["dense.W2"] += z.T @ dy
        grads["dense.b2"] += dy.sum(axis=0)
        da = (dy @ dn.W2.T) * (1.0 - z ** 2)
        grads["dense.W1"] += h.T @ da
        grads["dense.b1"] += da.sum(axis=0)
        dh = da @ dn.W1.T + dh_next
        dx_next, dh_next, dc_next = lstm_step_backward(dh, dc_next, dec_cache[j],
                                                       model.decoder, g_dec)
    # dx_next now belongs to the dummy input and is dropped
    for sc in reversed(enc_cache):
        _, dh_next, dc_next = lstm_step_backward(dh_next, dc_next, sc, model.encoder, g_enc)
    return grads


def predict(model: EdLstmModel, x_prime, s: int | None = None, scaler: Scaler | None = None):
    """Forecast ``s`` future values from the last ``k + 1`` observations.

    ``x_prime`` is in BER units when a scaler is available (argument or the
    model's own) and the result is returned in BER units; otherwise both are in
    model units. Accepts one sequence (1-D) or a batch (2-D).
    """
    s = model.config.future_len if s is None else s
    if s > model.config.future_len:
        warnings.warn(f"decoding {s} steps, beyond the trained horizon of "
                      f"{model.config.future_len}", RuntimeWarning, stacklevel=2)
    scaler = scaler if scaler is not None else model.scaler
    x = np.asarray(x_prime, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if scaler is not None:
        X = scaler.encode(X)
    y = forward(model, X, s)
    if scaler is not None:
        y = scaler.decode(y)
    return y[0] if single else y


def model_to_dict(model: EdLstmModel) -> dict:
    params = {}
    for name, arr in model.parameters().items():
        params[name] = {"shape": list(arr.shape), "data": arr.ravel(order="C").tolist()}
    return {
        "format": MODEL_FORMAT,
        "config": asdict(model.config),
        "seed": model.seed,
        "scaler": model.scaler.to_dict() if model.scaler is not None else None,
        "params": params,
    }


def model_from_dict(d: dict) -> EdLstmModel:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {d.get('format')!r}")
    model = EdLstmModel.zeros(ModelConfig(**d["config"]))
    model.seed = d.get("seed")
    if d.get("scaler") is not None:
        model.scaler = Scaler.from_dict(d["scaler"])
    live = model.parameters()
    if set(live) != set(d["params"]):
        raise ValueError("parameter names in file do not match the configuration")
    for name, arr in live.items():
        entry = d["params"][name]
        if list(arr.shape) != entry["shape"]:
            raise ValueError(f"{name}: shape {entry['shape']} != expected {list(arr.shape)}")
        arr[...] = np.asarray(entry["data"], dtype=float).reshape(arr.shape)
    return model


def save_model(path, model: EdLstmModel) -> None:
    """JSON container; floats are written with round-trip precision."""
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True) + "\n")


def load_model(path) -> EdLstmModel:
    return model_from_dict(json.loads(Path(path).read_text()))
