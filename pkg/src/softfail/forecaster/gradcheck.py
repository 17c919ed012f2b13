"""Central finite-difference check of :func:`~softfail.forecaster.model.backward`."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EdLstmModel, ModelConfig, backward, forward, mse_loss


@dataclass
class GradCheck:
    name: str
    analytic: np.ndarray
    numeric: np.ndarray

    @property
    def rel_error(self) -> float:
        """``|a - n| / max(|a|, |n|)`` over the whole array (0 if both vanish)."""
        diff = np.linalg.norm(self.analytic - self.numeric)
        scale = max(np.linalg.norm(self.analytic), np.linalg.norm(self.numeric))
        return float(diff / scale) if scale > 0 else 0.0

    @property
    def max_abs_error(self) -> float:
        return float(np.max(np.abs(self.analytic - self.numeric)))


def tiny_problem(u=3, k=4, s=3, batch=4, seed=0, bias=False):
    """Random model and batch; inputs span [-1, 1] so every gate is exercised."""
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(hidden_units=u, dense_units=5, use_bias=bias, future_len=s)
    model = EdLstmModel.init(cfg, seed)
    # larger weights than the default init make the check less forgiving
    for arr in model.parameters().values():
        arr[...] = rng.uniform(-1.0, 1.0, arr.shape)
    X = rng.uniform(-1.0, 1.0, (batch, k + 1))
    Y = rng.uniform(-1.0, 1.0, (batch, s))
    return model, X, Y


def check_gradients(model: EdLstmModel, X, Y, eps: float = 1e-5) -> list[GradCheck]:
    """Compare analytic and central-difference gradients for every parameter array."""
    s = Y.shape[1]
    pred, cache = forward(model, X, s, keep_cache=True)
    grads = backward(model, cache, pred, Y)
    out = []
    for name, arr in model.parameters().items():
        numeric = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            up = mse_loss(forward(model, X, s), Y)
            arr[idx] = old - eps
            down = mse_loss(forward(model, X, s), Y)
            arr[idx] = old
            numeric[idx] = (up - down) / (2.0 * eps)
        out.append(GradCheck(name, grads[name], numeric))
    return out
