"""Resampling, sliding windows, temporal splits and normalisation.

A dataset row is one sequence of ``past_len + 1 + future_len`` consecutive
tau-samples: the first ``past_len + 1`` are the model input (the present value
included), the rest are the forecast target.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import DatasetError

log = logging.getLogger(__name__)

DATASET_FORMAT = "softfail-dataset/1"


@dataclass(frozen=True)
class WindowSpec:
    tau_minutes: float = 90.0
    past_len: int = 50
    future_len: int = 70
    stride: int = 2
    features: int = 1

    def __post_init__(self):
        if self.tau_minutes <= 0:
            raise ValueError("tau_minutes must be > 0")
        if self.past_len < 0 or self.future_len < 1 or self.stride < 1:
            raise ValueError("need past_len >= 0, future_len >= 1, stride >= 1")
        if self.features != 1:
            raise ValueError("only single-feature (BER) sequences are supported")

    @property
    def input_len(self) -> int:
        return self.past_len + 1

    @property
    def length(self) -> int:
        return self.past_len + 1 + self.future_len

    @property
    def horizon_minutes(self) -> float:
        return self.future_len * self.tau_minutes


@dataclass
class Resampled:
    values: np.ndarray
    raw_index: np.ndarray
    tau_minutes: float


def resample(values, sample_interval_minutes: float, tau_minutes: float) -> Resampled:
    """Keep the last raw sample of every complete tau-window.

    Raw sample ``n`` sits at ``n * sample_interval_minutes``; window ``j`` covers
    ``[j * tau, (j + 1) * tau)``. Ratios are handled with exact fractions so a
    90 min / 1.2 min pair gives exactly 75 samples per window.
    """
    values = np.asarray(values)
    if values.size == 0:
        raise DatasetError("cannot resample an empty trace")
    ratio = Fraction(str(tau_minutes)) / Fraction(str(sample_interval_minutes))
    n_windows = math.floor(len(values) / ratio)
    if n_windows < 1:
        raise DatasetError(
            f"trace of {len(values)} samples is shorter than one {tau_minutes} min window")
    p, q = ratio.numerator, ratio.denominator
    j = np.arange(1, n_windows + 1, dtype=np.int64)
    idx = -((-j * p) // q) - 1
    return Resampled(values[idx], idx, float(tau_minutes))


def window_count(length: int, spec: WindowSpec) -> int:
    if length < spec.length:
        return 0
    return (length - spec.length) // spec.stride + 1


def windowize(series, spec: WindowSpec) -> np.ndarray:
    """All stride-spaced windows of ``spec.length`` samples, shape (n, length)."""
    series = np.asarray(series, dtype=float)
    if len(series) < spec.length:
        raise DatasetError(f"series of {len(series)} samples is shorter than one "
                           f"{spec.length}-sample sequence")
    view = np.lib.stride_tricks.sliding_window_view(series, spec.length)[:: spec.stride]
    return np.ascontiguousarray(view)


@dataclass(frozen=True)
class Split:
    """Contiguous sequence-index ranges ``[start, stop)``: train, then validation, then test."""

    train: tuple[int, int]
    val: tuple[int, int]
    test: tuple[int, int]

    @property
    def fit_range(self) -> tuple[int, int]:
        """Everything before the test set (training plus validation)."""
        return (self.train[0], self.val[1])


def split_sizes(n: int, train_frac: float = 0.9, val_frac_of_train: float = 0.2):
    """``(n_train, n_val, n_test)`` where ``n_train`` includes validation."""
    if not (0 < train_frac < 1 and 0 < val_frac_of_train < 1):
        raise DatasetError("split fractions must lie in (0, 1)")
    n_train = math.floor(train_frac * n)
    n_val = math.floor(val_frac_of_train * n_train)
    n_test = n - n_train
    if n_train - n_val < 1 or n_val < 1 or n_test < 1:
        raise DatasetError(f"split of {n} sequences leaves an empty part "
                           f"(train {n_train - n_val}, val {n_val}, test {n_test})")
    return n_train, n_val, n_test


def make_split(n: int, train_frac: float = 0.9, val_frac_of_train: float = 0.2) -> Split:
    n_train, n_val, _ = split_sizes(n, train_frac, val_frac_of_train)
    return Split((0, n_train - n_val), (n_train - n_val, n_train), (n_train, n))


@dataclass
class Normalizer:
    kind: str = "minmax"
    offset: float = 0.0
    scale: float = 1.0

    KINDS = ("minmax", "zscore", "none")

    @classmethod
    def fit(cls, values, kind: str = "minmax") -> "Normalizer":
        if kind not in cls.KINDS:
            raise ValueError(f"unknown normalizer kind {kind!r}")
        values = np.asarray(values, dtype=float)
        if kind == "none":
            return cls("none")
        if kind == "zscore":
            std = float(values.std())
            if not std > 0:
                raise DatasetError("z-score normalisation of a constant series")
            return cls("zscore", float(values.mean()), std)
        lo, hi = float(values.min()), float(values.max())
        if not hi > lo:
            warnings.warn("constant series; min-max normaliser falls back to identity",
                          RuntimeWarning, stacklevel=2)
            return cls("minmax")
        return cls("minmax", lo, hi - lo)

    def apply(self, x):
        return (np.asarray(x, dtype=float) - self.offset) / self.scale

    def invert(self, y):
        return np.asarray(y, dtype=float) * self.scale + self.offset


@dataclass
class Scaler:
    """BER <-> model units: optional log10, then the affine normaliser."""

    transform: str = "none"
    normalizer: Normalizer = field(default_factory=Normalizer)

    def __post_init__(self):
        if self.transform not in ("none", "log10"):
            raise ValueError(f"unknown target transform {self.transform!r}")

    def forward_transform(self, ber):
        ber = np.asarray(ber, dtype=float)
        if self.transform == "log10":
            if np.any(ber <= 0):
                raise DatasetError("log10 transform needs strictly positive BER")
            return np.log10(ber)
        return ber

    def inverse_transform(self, values):
        values = np.asarray(values, dtype=float)
        return np.power(10.0, values) if self.transform == "log10" else values

    def encode(self, ber):
        return self.normalizer.apply(self.forward_transform(ber))

    def decode(self, y):
        return self.inverse_transform(self.normalizer.invert(y))

    def to_dict(self) -> dict:
        return {"transform": self.transform, "normalizer": dataclasses.asdict(self.normalizer)}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(d["transform"], Normalizer(**d["normalizer"]))


@dataclass(eq=False)
class SequenceDataset:
    """Windowed sequences in transformed (pre-normalisation) units."""

    sequences: np.ndarray
    spec: WindowSpec
    split: Split
    scaler: Scaler
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sequences.ndim != 2 or self.sequences.shape[1] != self.spec.length:
            raise DatasetError(f"sequences must have shape (n, {self.spec.length})")

    def __len__(self):
        return len(self.sequences)

    @property
    def inputs(self) -> np.ndarray:
        return self.sequences[:, : self.spec.input_len]

    @property
    def targets(self) -> np.ndarray:
        return self.sequences[:, self.spec.input_len:]

    def part(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Normalised ``(inputs, targets)`` of the ``train``, ``val`` or ``test`` range."""
        start, stop = getattr(self.split, name)
        norm = self.scaler.normalizer
        return norm.apply(self.inputs[start:stop]), norm.apply(self.targets[start:stop])


def build_dataset(trace, spec: WindowSpec, *, n_sequences: int | None = None,
                  transform: str = "none", normalizer: str = "minmax",
                  train_frac: float = 0.9, val_frac_of_train: float = 0.2,
                  max_train_ber: float | None = None) -> SequenceDataset:
    """Resample a :class:`~softfail.aging.BerTrace` and window it into a dataset.

    With ``n_sequences`` only the latest sequences are kept: the subset ends at
    the last complete tau-window of the trace.
    """
    rs = resample(trace.ber, trace.sample_interval_minutes, spec.tau_minutes)
    series = rs.values
    start = 0
    if n_sequences is not None:
        needed = (n_sequences - 1) * spec.stride + spec.length
        if needed > len(series):
            raise DatasetError(f"{n_sequences} sequences need {needed} tau-samples, "
                               f"trace gives {len(series)}")
        start = len(series) - needed
        series = series[start:]
    scaler = Scaler(transform)
    windows = windowize(scaler.forward_transform(series), spec)
    split = make_split(len(windows), train_frac, val_frac_of_train)
    fit_lo, fit_hi = split.fit_range
    # statistics see training and validation windows only
    scaler.normalizer = Normalizer.fit(windows[fit_lo:fit_hi], normalizer)
    if max_train_ber is not None:
        last = (fit_hi - 1) * spec.stride + spec.length
        if np.max(series[:last]) > max_train_ber:
            log.warning("training range already contains BER above %g", max_train_ber)
    provenance = {
        "trace_sha256": trace.digest(),
        "sample_interval_minutes": trace.sample_interval_minutes,
        "tau_start": int(start),
        "raw_index_of_first_sample": int(rs.raw_index[start]),
    }
    return SequenceDataset(windows, spec, split, scaler, provenance)


def sequence_raw_index(ds: SequenceDataset, i: int, offset: int) -> int:
    """Raw trace index of sample ``offset`` within sequence ``i``."""
    ratio = (Fraction(str(ds.spec.tau_minutes))
             / Fraction(str(ds.provenance["sample_interval_minutes"])))
    j = ds.provenance["tau_start"] + i * ds.spec.stride + offset + 1
    return -((-j * ratio.numerator) // ratio.denominator) - 1


def save_dataset(path, ds: SequenceDataset) -> None:
    """Text file: one JSON header comment, then one comma-separated sequence per row."""
    header = {
        "format": DATASET_FORMAT,
        "window": dataclasses.asdict(ds.spec),
        "scaler": ds.scaler.to_dict(),
        "split": dataclasses.asdict(ds.split),
        "provenance": ds.provenance,
        "shape": list(ds.sequences.shape),
    }
    with Path(path).open("w", newline="\n") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        np.savetxt(fh, ds.sequences, fmt="%.17g", delimiter=",")


def load_dataset(path) -> SequenceDataset:
    with Path(path).open() as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise DatasetError(f"{path}: missing dataset header")
        meta = json.loads(first[2:])
        if meta.get("format") != DATASET_FORMAT:
            raise DatasetError(f"{path}: unsupported dataset format {meta.get('format')!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if list(data.shape) != meta["shape"]:
        raise DatasetError(f"{path}: expected shape {meta['shape']}, read {list(data.shape)}")
    split = Split(**{k: tuple(v) for k, v in meta["split"].items()})
    return SequenceDataset(data, WindowSpec(**meta["window"]), split,
                           Scaler.from_dict(meta["scaler"]), meta["provenance"])
