"""EDFA ageing: Weibull event process -> gain trace -> BER trace.

Time is measured in raw sample ticks: sample ``n`` sits at time ``n`` and the
Weibull scale is expressed in ticks. ``sample_interval_minutes`` only matters
when ticks are converted to wall-clock time downstream.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import physics
from .errors import CalibrationError, NumericDomainError
from .physics import LightpathGeometry, PhysicalParams

log = logging.getLogger(__name__)

RNG_NAME = "numpy.PCG64"
TRACE_FORMAT = "softfail-trace/1"


@dataclass(frozen=True)
class WeibullProcessParams:
    scale_lambda: float = 595.75
    shape_beta: float = 1.05
    degradation_step_db: float = 1e-6
    initial_gain_db: float = 22.0
    horizon_samples: int = 1_000_000
    sample_interval_minutes: float = 1.2
    # dB lost per event is degradation_step_db * units_per_event
    units_per_event: float = 1.0

    def __post_init__(self):
        for name in ("scale_lambda", "shape_beta", "degradation_step_db", "initial_gain_db",
                     "sample_interval_minutes", "units_per_event"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.horizon_samples < 0:
            raise ValueError("horizon_samples must be >= 0")

    @property
    def drop_per_event_db(self) -> float:
        return self.degradation_step_db * self.units_per_event


@dataclass(eq=False)
class GainTrace:
    gain_db: np.ndarray
    params: WeibullProcessParams
    rng_seed: int
    truncated: bool = False

    @property
    def sample_interval_minutes(self) -> float:
        return self.params.sample_interval_minutes

    @property
    def initial_gain_db(self) -> float:
        return self.params.initial_gain_db

    @property
    def gain_reduction_db(self) -> np.ndarray:
        return self.initial_gain_db - self.gain_db

    def __len__(self):
        return len(self.gain_db)


@dataclass(eq=False)
class BerTrace:
    ber: np.ndarray
    source: GainTrace
    physics: PhysicalParams
    geometry: LightpathGeometry

    @property
    def sample_interval_minutes(self) -> float:
        return self.source.sample_interval_minutes

    def __len__(self):
        return len(self.ber)

    def digest(self) -> str:
        """SHA-256 over the little-endian gain and BER arrays."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.source.gain_db, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.ber, dtype="<f8").tobytes())
        return h.hexdigest()


def sample_event_times(params: WeibullProcessParams, rng_seed: int,
                       horizon: float | None = None) -> np.ndarray:
    """Arrival times of a Weibull power-law process up to ``horizon``.

    The expected number of events by time t is ``(t / scale) ** shape``;
    arrivals are ``scale * S_j ** (1 / shape)`` where ``S_j`` are partial sums
    of standard exponentials. ``horizon`` defaults to the last sample tick.
    """
    if horizon is None:
        horizon = max(params.horizon_samples - 1, 0)
    if horizon <= 0:
        return np.empty(0)
    rng = np.random.default_rng(rng_seed)
    budget = (horizon / params.scale_lambda) ** params.shape_beta
    chunk = int(budget + 4.0 * math.sqrt(budget) + 16)
    sums = []
    total = 0.0
    while True:
        s = total + np.cumsum(rng.standard_exponential(chunk))
        sums.append(s)
        total = s[-1]
        if total > budget:
            break
    s = np.concatenate(sums)
    s = s[s <= budget]
    return params.scale_lambda * s ** (1.0 / params.shape_beta)


def event_counts(events: np.ndarray, n_samples: int) -> np.ndarray:
    """Number of events at or before each sample tick."""
    return np.searchsorted(events, np.arange(n_samples, dtype=float), side="right")


def _gain_from_counts(params: WeibullProcessParams, counts) -> np.ndarray:
    return params.initial_gain_db - params.drop_per_event_db * np.asarray(counts, dtype=float)


def gain_trace(params: WeibullProcessParams, events: np.ndarray, rng_seed: int) -> GainTrace:
    events = np.asarray(events, dtype=float)
    if events.size and np.any(np.diff(events) < 0):
        raise ValueError("event times must be sorted ascending")
    gain = _gain_from_counts(params, event_counts(events, params.horizon_samples))
    truncated = False
    dead = np.flatnonzero(gain <= 0)
    if dead.size:
        gain = gain[: dead[0]]
        truncated = True
        log.warning("gain reached 0 dB at sample %d; trace truncated", dead[0])
    return GainTrace(gain, params, rng_seed, truncated)


def _link_state(physics_params, geom, initial_gain_db):
    return physics.nominal_state(physics_params, geom, initial_gain_db)


def ber_trace(gain: GainTrace, params: PhysicalParams, geom: LightpathGeometry) -> BerTrace:
    """Map every gain sample through the lightpath BER chain.

    Only the distinct gain levels are evaluated; a trace has at most one level
    per degradation event.
    """
    state = _link_state(params, geom, gain.initial_gain_db)
    levels, inverse = np.unique(gain.gain_db, return_inverse=True)
    ber_levels = np.atleast_1d(physics.lightpath_ber(params, geom, state, levels))
    return BerTrace(ber_levels[inverse].reshape(gain.gain_db.shape), gain, params, geom)


def simulate(params: WeibullProcessParams, physics_params: PhysicalParams,
             geom: LightpathGeometry, rng_seed: int) -> BerTrace:
    events = sample_event_times(params, rng_seed)
    return ber_trace(gain_trace(params, events, rng_seed), physics_params, geom)


def first_crossing(ber: np.ndarray, threshold: float) -> int | None:
    above = np.flatnonzero(np.asarray(ber) > threshold)
    return int(above[0]) if above.size else None


def calibrate_trace(params: WeibullProcessParams, physics_params: PhysicalParams,
                    geom: LightpathGeometry, hard_ber: float = 1e-3,
                    crossing_fraction: float = 0.95, rng_seed: int = 0,
                    tolerance: float = 0.02) -> WeibullProcessParams:
    """Scale ``units_per_event`` so the seeded trace first exceeds ``hard_ber``
    at about ``crossing_fraction * horizon_samples``.

    The crossing index only moves when the per-event drop changes, and it moves
    monotonically (larger drops cross earlier), so a bisection on
    ``log(units_per_event)`` finds the smallest drop that crosses by the target
    sample. The result is then rescanned on the full trace.
    """
    if not 0 < hard_ber < 0.5:
        raise ValueError("hard_ber must lie in (0, 0.5)")
    if not 0.5 < crossing_fraction <= 1.0:
        raise ValueError("crossing_fraction must lie in (0.5, 1]")
    n = params.horizon_samples
    state = _link_state(physics_params, geom, params.initial_gain_db)
    nominal_ber = physics.lightpath_ber(physics_params, geom, state)
    diagnostics = {"nominal_ber": nominal_ber, "hard_ber": hard_ber, "horizon": n}
    try:
        g_star = physics.threshold_gain_db(physics_params, geom, state, hard_ber)
    except NumericDomainError as exc:
        raise CalibrationError(f"unachievable target: {exc}", diagnostics) from exc
    required_drop = params.initial_gain_db - g_star
    diagnostics["required_drop_db"] = required_drop

    events = sample_event_times(params, rng_seed)
    counts = event_counts(events, n)
    target = min(int(round(crossing_fraction * n)), n - 1)
    diagnostics["target_index"] = target
    if counts[target] == 0:
        raise CalibrationError("no degradation events before the target sample", diagnostics)

    def crossing(units: float) -> int | None:
        p = dataclasses.replace(params, units_per_event=units)
        levels = _gain_from_counts(p, np.arange(counts[-1] + 1))
        alive = levels > 0
        ber = np.ones_like(levels)
        ber[alive] = physics.lightpath_ber(physics_params, geom, state, levels[alive])
        level = first_crossing(ber, hard_ber)
        if level is None:
            return None
        return int(np.searchsorted(counts, level, side="left")) if counts[-1] >= level else None

    # hi: a single event already drops past the threshold gain.
    lo = 1e-12 / params.degradation_step_db
    hi = 2.0 * required_drop / params.degradation_step_db
    c_lo = crossing(lo)
    if c_lo is not None and c_lo <= target:
        raise CalibrationError("trace crosses before the target even with a negligible drop",
                               diagnostics)
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        c = crossing(mid)
        if c is not None and c <= target:
            hi = mid
        else:
            lo = mid
        if hi / lo - 1.0 < 1e-15:
            break
    calibrated = dataclasses.replace(params, units_per_event=hi)

    trace = ber_trace(gain_trace(calibrated, events, rng_seed), physics_params, geom)
    idx = first_crossing(trace.ber, hard_ber)
    diagnostics.update(units_per_event=hi, crossing_index=idx)
    if idx is None or abs(idx / n - crossing_fraction) > tolerance:
        raise CalibrationError(
            f"crossing at {idx} misses {crossing_fraction:.3f} of {n} samples by more than "
            f"{tolerance:.0%}; too few events near the target", diagnostics)
    log.info("calibrated units_per_event=%.6g, crossing at sample %d (%.4f of horizon)",
             hi, idx, idx / n)
    return calibrated


def _params_dict(obj) -> dict:
    return json.loads(json.dumps(dataclasses.asdict(obj)))


def trace_header(trace: BerTrace) -> dict:
    g = trace.source
    return {
        "format": TRACE_FORMAT,
        "rng": RNG_NAME,
        "rng_seed": g.rng_seed,
        "truncated": g.truncated,
        "weibull": _params_dict(g.params),
        "physics": _params_dict(trace.physics),
        "geometry": _params_dict(trace.geometry),
    }


def write_trace(path, trace: BerTrace) -> None:
    """Write ``index,gain_db,ber`` rows under a JSON header comment.

    Floats use 17 significant digits so the file round-trips bit-exactly.
    """
    path = Path(path)
    header = json.dumps(trace_header(trace), sort_keys=True)
    rows = np.column_stack([np.arange(len(trace)), trace.source.gain_db, trace.ber])
    with path.open("w", newline="\n") as fh:
        fh.write(f"# {header}\n")
        fh.write("index,gain_db,ber\n")
        np.savetxt(fh, rows, fmt=["%d", "%.17g", "%.17g"], delimiter=",")


def read_trace(path) -> BerTrace:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing trace header")
        meta = json.loads(first[2:])
        if meta.get("format") != TRACE_FORMAT:
            raise ValueError(f"{path}: unsupported trace format {meta.get('format')!r}")
        columns = fh.readline().strip()
        if columns != "index,gain_db,ber":
            raise ValueError(f"{path}: unexpected columns {columns!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    geom = meta["geometry"]
    geometry = LightpathGeometry(
        tuple(geom["span_lengths_km"]), geom["hops"], geom["inline_edfa_count"],
        tuple(geom["node_degree_q"]), geom["degraded_edfa_index"])
    gain = GainTrace(data[:, 1].copy(), WeibullProcessParams(**meta["weibull"]),
                     meta["rng_seed"], meta["truncated"])
    return BerTrace(data[:, 2].copy(), gain, PhysicalParams(**meta["physics"]), geometry)
