"""Adam, mini-batch training with best-validation checkpointing, evaluation."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..dataset import SequenceDataset
from ..errors import TrainingDivergence
from .model import EdLstmModel, backward, forward, model_from_dict, model_to_dict

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    batch_size: int = 16
    epochs: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


@dataclass
class TrainHistory:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    @property
    def best_epoch(self) -> int:
        """1-based epoch with the lowest validation loss."""
        return int(np.argmin(self.val_mse)) + 1

    def to_csv(self, path) -> None:
        # wall-clock is left out so reruns stay byte-identical
        lines = ["epoch,train_mse,val_mse"]
        lines += [f"{e},{float(t)!r},{float(v)!r}" for e, (t, v) in
                  enumerate(zip(self.train_mse, self.val_mse), start=1)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "TrainHistory":
        rows = Path(path).read_text().split("\n")[1:]
        h = cls()
        for row in filter(None, rows):
            _, t, v = row.split(",")
            h.train_mse.append(float(t))
            h.val_mse.append(float(v))
        return h


class Adam:
    """Bias-corrected Adam acting in place on a name -> array mapping."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def update(self, params: dict, grads: dict) -> dict:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in params.items():
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1 ** self.t)
            v_hat = v / (1.0 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params

    def state_dict(self) -> dict:
        return {"t": self.t,
                "m": {k: v.tolist() for k, v in self.m.items()},
                "v": {k: v.tolist() for k, v in self.v.items()}}

    def load_state_dict(self, state: dict) -> None:
        self.t = state["t"]
        self.m = {k: np.asarray(v, dtype=float) for k, v in state["m"].items()}
        self.v = {k: np.asarray(v, dtype=float) for k, v in state["v"].items()}


def _all_finite(arrays) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays)


class Trainer:
    """Owns everything that must survive a checkpoint: live weights, Adam
    moments, the shuffling RNG, the history and the best weights so far."""

    def __init__(self, model: EdLstmModel, config: TrainConfig, ds: SequenceDataset):
        self.model = model
        self.config = config
        self.ds = ds
        self.model.scaler = ds.scaler
        self.opt = Adam(config.learning_rate, config.beta1, config.beta2, config.eps)
        self.rng = np.random.default_rng(config.seed)
        self.history = TrainHistory()
        self.best: EdLstmModel | None = None
        self.best_val = np.inf
        self.X, self.Y = ds.part("train")
        self.Xv, self.Yv = ds.part("val")
        if len(self.X) == 0 or len(self.Xv) == 0:
            raise ValueError("training needs non-empty train and validation ranges")
        self.s = self.Y.shape[1]

    @property
    def epoch(self) -> int:
        return len(self.history.train_mse)

    def loss(self, X, Y) -> float:
        return float(np.mean((forward(self.model, X, self.s) - Y) ** 2))

    def step(self, X, Y) -> float:
        """One Adam step on a single batch; returns the pre-step batch loss."""
        # overflow is caught just below as divergence
        with np.errstate(over="ignore", invalid="ignore"):
            pred, cache = forward(self.model, X, self.s, keep_cache=True)
            loss = float(np.mean((pred - Y) ** 2))
            grads = backward(self.model, cache, pred, Y)
        if not (np.isfinite(loss) and _all_finite(grads.values())):
            raise TrainingDivergence(f"non-finite loss/gradient at epoch {self.epoch + 1}",
                                     self.history)
        self.opt.update(self.model.parameters(), grads)
        return loss

    def run_epoch(self) -> None:
        start = time.perf_counter()
        order = self.rng.permutation(len(self.X))
        bs = self.config.batch_size
        total = 0.0
        for lo in range(0, len(order), bs):
            idx = order[lo:lo + bs]
            total += self.step(self.X[idx], self.Y[idx]) * len(idx)
        val = self.loss(self.Xv, self.Yv)
        if not np.isfinite(val):
            raise TrainingDivergence(f"non-finite validation loss at epoch {self.epoch + 1}",
                                     self.history)
        self.history.train_mse.append(total / len(order))
        self.history.val_mse.append(val)
        self.history.seconds.append(time.perf_counter() - start)
        if val < self.best_val:
            self.best_val = val
            self.best = self.model.copy()

    def run(self, epochs: int | None = None):
        """Train up to ``epochs`` total epochs (default: the configured count)."""
        epochs = self.config.epochs if epochs is None else epochs
        while self.epoch < epochs:
            self.run_epoch()
            e = self.epoch
            if e == 1 or e % 10 == 0 or e == epochs:
                log.info("epoch %d/%d train %.4e val %.4e", e, epochs,
                         self.history.train_mse[-1], self.history.val_mse[-1])
        best = self.best if self.best is not None else self.model.copy()
        return best, self.history

    def state_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "model": model_to_dict(self.model),
            "best": model_to_dict(self.best) if self.best is not None else None,
            "best_val": self.best_val if np.isfinite(self.best_val) else None,
            "adam": self.opt.state_dict(),
            "rng": self.rng.bit_generator.state,
            "history": {"train_mse": self.history.train_mse,
                        "val_mse": self.history.val_mse},
        }

    @classmethod
    def from_state(cls, state: dict, ds: SequenceDataset,
                   config: TrainConfig | None = None) -> "Trainer":
        config = config or TrainConfig(**state["config"])
        tr = cls(model_from_dict(state["model"]), config, ds)
        tr.opt.load_state_dict(state["adam"])
        tr.rng.bit_generator.state = state["rng"]
        tr.history = TrainHistory(list(state["history"]["train_mse"]),
                                  list(state["history"]["val_mse"]),
                                  [float("nan")] * len(state["history"]["val_mse"]))
        if state["best"] is not None:
            tr.best = model_from_dict(state["best"])
            tr.best_val = state["best_val"]
        return tr

    def save_checkpoint(self, path) -> None:
        Path(path).write_text(json.dumps(self.state_dict(), sort_keys=True) + "\n")

    @classmethod
    def load_checkpoint(cls, path, ds: SequenceDataset, config: TrainConfig | None = None):
        return cls.from_state(json.loads(Path(path).read_text()), ds, config)


def train(ds: SequenceDataset, model: EdLstmModel, config: TrainConfig):
    """Train and return ``(best-validation model, history)``."""
    return Trainer(model, config, ds).run()


@dataclass
class Evaluation:
    """Per-sequence MSE over one dataset range, in model and BER units."""

    start: int
    mse_normalized: np.ndarray
    mse_ber: np.ndarray

    @property
    def aggregate_normalized(self) -> float:
        return float(np.mean(self.mse_normalized))

    @property
    def aggregate_ber(self) -> float:
        return float(np.mean(self.mse_ber))

    def to_csv(self, path) -> None:
        lines = ["pattern,sequence_index,mse_normalized,mse_ber"]
        for p, (a, b) in enumerate(zip(self.mse_normalized, self.mse_ber)):
            lines.append(f"{p},{self.start + p},{float(a)!r},{float(b)!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def evaluate(model: EdLstmModel, ds: SequenceDataset, part: str = "test",
             predictor=None) -> Evaluation:
    """Score ``model`` on a dataset range.

    ``predictor`` replaces the model forward pass; it maps normalised inputs
    (n, k+1) to normalised forecasts (n, s). Used for oracle baselines.
    """
    start, stop = getattr(ds.split, part)
    if stop <= start:
        raise ValueError(f"{part} range is empty")
    X, Y = ds.part(part)
    s = Y.shape[1]
    pred = predictor(X) if predictor is not None else forward(model, X, s)
    mse_n = np.mean((pred - Y) ** 2, axis=1)
    scaler = ds.scaler
    mse_b = np.mean((scaler.decode(pred) - scaler.decode(Y)) ** 2, axis=1)
    return Evaluation(start, mse_n, mse_b)


def trend_fraction(values, bins: int = 20, mode: str = "moving") -> float:
    """Share of rising steps in a smoothed per-pattern loss curve.

    ``mode="moving"`` smooths with a ``bins``-wide moving average;
    ``mode="chunks"`` averages ``bins`` contiguous chunks instead. Returns the
    fraction of successive differences of the smoothed curve that are positive.
    """
    values = np.asarray(values, dtype=float)
    if len(values) < bins + 1:
        raise ValueError(f"need at least {bins + 1} values, got {len(values)}")
    if mode == "moving":
        smooth = np.convolve(values, np.ones(bins) / bins, mode="valid")
    elif mode == "chunks":
        smooth = np.array([c.mean() for c in np.array_split(values, bins)])
    else:
        raise ValueError(f"unknown smoothing mode {mode!r}")
    return float(np.mean(np.diff(smooth) > 0))
