"""Repair-trigger policies and the comparison report.

Lead time is always hard-failure time minus trigger time, in days; it is
negative when the trigger comes after the failure.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aging import BerTrace, first_crossing
from .dataset import WindowSpec, resample
from .errors import ConfigError

MINUTES_PER_DAY = 1440.0


@dataclass(frozen=True)
class HardFailureSpec:
    ber_threshold: float = 1e-3

    def __post_init__(self):
        if not 0 < self.ber_threshold < 0.5:
            raise ValueError("ber_threshold must lie in (0, 0.5)")


@dataclass
class TriggerEvent:
    policy_name: str
    trigger_sample_index: int | None = None
    trigger_time_days: float | None = None
    ber_at_trigger: float | None = None
    gain_reduction_at_trigger_db: float | None = None
    lead_time_days: float | None = None
    qot_margin_percent: float | None = None
    late: bool = False

    @property
    def triggered(self) -> bool:
        return self.trigger_sample_index is not None


@dataclass
class TriggerReport:
    hard_failure_index: int | None
    hard_failure_days: float | None
    events: list[TriggerEvent] = field(default_factory=list)

    COLUMNS = ("policy", "gain_reduction_db", "trigger_day", "lead_time_days",
               "ber_at_trigger", "qot_margin_percent", "status")

    def rows(self) -> list[dict]:
        out = []
        for ev in self.events:
            if not ev.triggered:
                status = "no trigger"
            elif ev.late:
                status = "hard-failure occurred"
            else:
                status = "ahead"
            out.append({
                "policy": ev.policy_name,
                "gain_reduction_db": ev.gain_reduction_at_trigger_db,
                "trigger_day": ev.trigger_time_days,
                "lead_time_days": ev.lead_time_days,
                "ber_at_trigger": ev.ber_at_trigger,
                "qot_margin_percent": ev.qot_margin_percent,
                "status": status,
            })
        return out

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: ("" if v is None else (repr(float(v)) if isinstance(v, float) else v))
                             for k, v in row.items()})
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_text(self) -> str:
        """Aligned table: gain reduction, repair action, QoT margin per policy."""
        header = ("Policy", "Gain Reduction", "Repair Action", "QoT Margin")
        body = []
        for ev in self.events:
            gain = "-" if ev.gain_reduction_at_trigger_db is None \
                else f"{ev.gain_reduction_at_trigger_db:.2f} dB"
            if not ev.triggered:
                action, margin = "No trigger", "-"
            elif ev.late:
                action = margin = "Hard-failure occurred"
            elif ev.lead_time_days is None:
                action, margin = "No hard-failure in horizon", f"{ev.qot_margin_percent:.2f}%"
            else:
                action = f"{ev.lead_time_days:.2f} days ahead"
                margin = f"{ev.qot_margin_percent:.2f}%"
            body.append((ev.policy_name, gain, action, margin))
        widths = [max(len(r[i]) for r in [header] + body) for i in range(4)]
        fmt = " | ".join(f"{{:<{w}}}" for w in widths)
        rule = "-+-".join("-" * w for w in widths)
        hf = "none in horizon" if self.hard_failure_days is None \
            else f"day {self.hard_failure_days:.2f} (sample {self.hard_failure_index})"
        lines = [f"Hard failure: {hf}", fmt.format(*header), rule]
        lines += [fmt.format(*r) for r in body]
        return "\n".join(lines) + "\n"


def hard_failure_time(trace: BerTrace, spec: HardFailureSpec) -> int | None:
    """First raw sample whose BER exceeds the threshold, or None."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    return first_crossing(trace.ber, spec.ber_threshold)


def qot_margin_percent(ber_at_trigger: float, spec: HardFailureSpec) -> tuple[float, bool]:
    """Log-domain distance below the threshold, as a percentage of |log10 threshold|.

    Returns ``(margin, late)``; a BER above the threshold gives ``(0.0, True)``.
    """
    if not ber_at_trigger > 0:
        raise ValueError("BER must be > 0")
    thr = spec.ber_threshold
    if ber_at_trigger > thr:
        return 0.0, True
    log_thr = math.log10(thr)
    return 100.0 * (log_thr - math.log10(ber_at_trigger)) / abs(log_thr), False


def _days(trace: BerTrace, index) -> float:
    return float(index) * trace.sample_interval_minutes / MINUTES_PER_DAY


def _event(name: str, trace: BerTrace, idx: int | None, spec: HardFailureSpec) -> TriggerEvent:
    if idx is None:
        return TriggerEvent(name)
    hf = hard_failure_time(trace, spec)
    ber = float(trace.ber[idx])
    margin, over = qot_margin_percent(ber, spec)
    late = over or (hf is not None and idx >= hf)
    return TriggerEvent(
        policy_name=name,
        trigger_sample_index=int(idx),
        trigger_time_days=_days(trace, idx),
        ber_at_trigger=ber,
        gain_reduction_at_trigger_db=float(trace.source.gain_reduction_db[idx]),
        lead_time_days=None if hf is None else _days(trace, hf - idx),
        qot_margin_percent=0.0 if late else margin,
        late=late,
    )


def fixed_margin_trigger(trace: BerTrace, gain_reduction_db: float,
                         spec: HardFailureSpec = HardFailureSpec(),
                         name: str | None = None) -> TriggerEvent:
    """Fire at the first sample whose cumulative gain loss reaches the threshold."""
    if not 0 < gain_reduction_db < trace.source.initial_gain_db:
        raise ValueError("gain-reduction threshold must lie in (0, initial gain)")
    name = name or f"fixed {gain_reduction_db:g} dB"
    # absorbs rounding in G0 - n * step
    reached = np.flatnonzero(trace.source.gain_reduction_db >= gain_reduction_db - 1e-9)
    return _event(name, trace, int(reached[0]) if reached.size else None, spec)


class ModelForecaster:
    """Causal forecaster: each forecast only sees the last ``k + 1`` tau-samples."""

    def __init__(self, model, past_len: int, batch: int = 512):
        if model.scaler is None:
            raise ConfigError("model has no scaler; train it on a dataset first")
        self.model = model
        self.past_len = past_len
        self.horizon = model.config.future_len
        self.batch = batch

    def __call__(self, stream: np.ndarray, steps: np.ndarray) -> np.ndarray:
        from .forecaster.model import predict

        k = self.past_len
        windows = np.stack([stream[t - k:t + 1] for t in steps])
        return np.concatenate([predict(self.model, windows[i:i + self.batch], self.horizon)
                               for i in range(0, len(windows), self.batch)])


class OracleForecaster:
    """Reads the true future of the stream; an upper bound on forecast quality."""

    def __init__(self, horizon: int):
        self.horizon = horizon

    def __call__(self, stream: np.ndarray, steps: np.ndarray) -> np.ndarray:
        out = np.full((len(steps), self.horizon), -np.inf)
        for row, t in enumerate(steps):
            future = stream[t + 1:t + 1 + self.horizon]
            out[row, :len(future)] = future
        return out


def prediction_trigger(forecaster, trace: BerTrace, window: WindowSpec,
                       spec: HardFailureSpec = HardFailureSpec(),
                       name: str = "prediction", chunk: int = 256) -> TriggerEvent:
    """Walk the tau-sampled stream and fire at the first step whose forecast of
    the next ``window.future_len`` samples exceeds the BER threshold."""
    if forecaster.horizon < window.future_len:
        raise ConfigError(f"forecaster horizon {forecaster.horizon} is shorter than the "
                          f"requested {window.future_len} steps")
    rs = resample(trace.ber, trace.sample_interval_minutes, window.tau_minutes)
    steps = np.arange(window.past_len, len(rs.values))
    for lo in range(0, len(steps), chunk):
        block = steps[lo:lo + chunk]
        forecast = forecaster(rs.values, block)[:, : window.future_len]
        hit = np.flatnonzero(np.any(forecast > spec.ber_threshold, axis=1))
        if hit.size:
            return _event(name, trace, int(rs.raw_index[block[hit[0]]]), spec)
    return TriggerEvent(name)


def compare(trace: BerTrace, spec: HardFailureSpec, fixed_thresholds_db=(5.0, 7.0, 10.0),
            prediction: TriggerEvent | None = None) -> TriggerReport:
    """Fixed-threshold rows in the given order, then the prediction row if any."""
    hf = hard_failure_time(trace, spec)
    events = [fixed_margin_trigger(trace, g, spec) for g in fixed_thresholds_db]
    if prediction is not None:
        events.append(prediction)
    return TriggerReport(hf, None if hf is None else _days(trace, hf), events)
