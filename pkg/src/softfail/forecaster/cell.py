"""Bias-free LSTM cell (biases optional) with a hand-written backward pass.

Row-vector convention: inputs are (batch, d), states are (batch, u), and a gate
pre-activation is ``x @ U + h @ W``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GATES = ("i", "f", "o", "g")


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(eq=False)
class LstmCellParams:
    U_i: np.ndarray
    U_f: np.ndarray
    U_o: np.ndarray
    U_g: np.ndarray
    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_g: np.ndarray
    b_i: np.ndarray | None = None
    b_f: np.ndarray | None = None
    b_o: np.ndarray | None = None
    b_g: np.ndarray | None = None

    def __post_init__(self):
        d, u = self.U_i.shape
        for gate in GATES:
            U, W, b = self.U(gate), self.W(gate), self.b(gate)
            if U.shape != (d, u) or W.shape != (u, u):
                raise ValueError(f"gate {gate}: expected U {(d, u)} and W {(u, u)}, "
                                 f"got {U.shape} and {W.shape}")
            if b is not None and b.shape != (u,):
                raise ValueError(f"gate {gate}: bias must have shape ({u},)")
        if (self.b_i is None) != (self.b_g is None) or (self.b_f is None) != (self.b_o is None) \
                or (self.b_i is None) != (self.b_f is None):
            raise ValueError("biases must be all present or all absent")

    @property
    def hidden_units(self) -> int:
        return self.U_i.shape[1]

    @property
    def input_features(self) -> int:
        return self.U_i.shape[0]

    @property
    def has_bias(self) -> bool:
        return self.b_i is not None

    def U(self, gate):
        return getattr(self, f"U_{gate}")

    def W(self, gate):
        return getattr(self, f"W_{gate}")

    def b(self, gate):
        return getattr(self, f"b_{gate}")

    def named_arrays(self):
        names = [f"U_{g}" for g in GATES] + [f"W_{g}" for g in GATES]
        if self.has_bias:
            names += [f"b_{g}" for g in GATES]
        return {n: getattr(self, n) for n in names}

    @classmethod
    def zeros(cls, d: int, u: int, bias: bool = False) -> "LstmCellParams":
        arrays = {f"U_{g}": np.zeros((d, u)) for g in GATES}
        arrays.update({f"W_{g}": np.zeros((u, u)) for g in GATES})
        if bias:
            arrays.update({f"b_{g}": np.zeros(u) for g in GATES})
        return cls(**arrays)

    @classmethod
    def uniform(cls, d: int, u: int, rng: np.random.Generator, bias: bool = False):
        a = 1.0 / np.sqrt(u)
        arrays = {f"U_{g}": rng.uniform(-a, a, (d, u)) for g in GATES}
        arrays.update({f"W_{g}": rng.uniform(-a, a, (u, u)) for g in GATES})
        if bias:
            arrays.update({f"b_{g}": np.zeros(u) for g in GATES})
        return cls(**arrays)


@dataclass
class StepCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    tanh_c: np.ndarray


def lstm_step(x, h_prev, c_prev, p: LstmCellParams, cache: bool = False):
    """One cell update; returns ``(h, c)`` or ``(h, c, StepCache)``.

    ``x``, ``h_prev`` and ``c_prev`` may be 1-D (single sample) or 2-D (batch).
    """
    x = np.asarray(x, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    c_prev = np.asarray(c_prev, dtype=float)
    if x.shape[-1] != p.input_features or h_prev.shape[-1] != p.hidden_units \
            or c_prev.shape != h_prev.shape:
        raise ValueError(f"shape mismatch: x {x.shape}, h {h_prev.shape}, c {c_prev.shape} "
                         f"for d={p.input_features}, u={p.hidden_units}")

    def pre(gate):
        z = x @ p.U(gate) + h_prev @ p.W(gate)
        return z + p.b(gate) if p.has_bias else z

    i = sigmoid(pre("i"))
    f = sigmoid(pre("f"))
    o = sigmoid(pre("o"))
    g = np.tanh(pre("g"))
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = tanh_c * o
    if cache:
        return h, c, StepCache(x, h_prev, c_prev, i, f, o, g, tanh_c)
    return h, c


def lstm_step_backward(dh, dc, sc: StepCache, p: LstmCellParams, grads: dict):
    """Backprop one step. Accumulates parameter gradients into ``grads``
    (keyed like :meth:`LstmCellParams.named_arrays`) and returns
    ``(dx, dh_prev, dc_prev)``."""
    do = dh * sc.tanh_c
    dc = dc + dh * sc.o * (1.0 - sc.tanh_c ** 2)
    dz = {
        "i": dc * sc.g * sc.i * (1.0 - sc.i),
        "f": dc * sc.c_prev * sc.f * (1.0 - sc.f),
        "o": do * sc.o * (1.0 - sc.o),
        "g": dc * sc.i * (1.0 - sc.g ** 2),
    }
    dc_prev = dc * sc.f
    dx = np.zeros_like(sc.x)
    dh_prev = np.zeros_like(sc.h_prev)
    for gate, d in dz.items():
        grads[f"U_{gate}"] += sc.x.T @ d
        grads[f"W_{gate}"] += sc.h_prev.T @ d
        if p.has_bias:
            grads[f"b_{gate}"] += d.sum(axis=0)
        dx += d @ p.U(gate).T
        dh_prev += d @ p.W(gate).T
    return dx, dh_prev, dc_prev
