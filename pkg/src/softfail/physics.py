"""Received power, ASE noise, SNR and 4-QAM BER for one lightpath.

Power budgets are kept in dB (dBm for absolute power) and noise in linear
watts. Gains are converted dB -> linear only inside :func:`ase_noise_w`, and
the signal dBm -> W only inside :func:`snr_linear`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GeometryError, NumericDomainError
from .special import erfc, log_erfc

_LN10 = math.log(10.0)


@dataclass(frozen=True)
class PhysicalParams:
    """Physical-layer constants of the simulated lightpath.

    ``snr_penalty_db`` is not a physical-layer table entry: it is an extra
    receiver-side SNR penalty, 0 dB by default, that :func:`calibrate_snr_penalty`
    can fit so the BER threshold is hit at a chosen gain reduction.
    """

    transmit_power_dbm: float = -17.0
    carrier_frequency_hz: float = 193.1e12
    nsp_inline: float = 3.0
    nsp_booster: float = 2.0
    fiber_attenuation_db_per_km: float = 0.2
    wss_loss_db: float = 2.0
    tap_loss_db: float = 1.0
    edfa_spacing_km: float = 100.0
    booster_gain_db: float = 8.0
    electrical_bandwidth_hz: float = 7e9
    planck_j_s: float = 6.62e-34
    snr_penalty_db: float = 0.0

    def __post_init__(self):
        positive = {
            "carrier_frequency_hz": self.carrier_frequency_hz,
            "fiber_attenuation_db_per_km": self.fiber_attenuation_db_per_km,
            "wss_loss_db": self.wss_loss_db,
            "tap_loss_db": self.tap_loss_db,
            "edfa_spacing_km": self.edfa_spacing_km,
            "electrical_bandwidth_hz": self.electrical_bandwidth_hz,
            "planck_j_s": self.planck_j_s,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")
        if self.nsp_inline < 1 or self.nsp_booster < 1:
            raise ValueError("spontaneous emission factors must be >= 1")
        if self.snr_penalty_db < 0:
            raise ValueError("snr_penalty_db must be >= 0")

    @property
    def gamma(self) -> float:
        """2 h f_c B_e, the per-unit-gain ASE power in watts."""
        return 2.0 * self.planck_j_s * self.carrier_frequency_hz * self.electrical_bandwidth_hz


@dataclass(frozen=True)
class LightpathGeometry:
    span_lengths_km: tuple[float, ...]
    hops: int
    inline_edfa_count: int
    node_degree_q: tuple[int, ...] = ()
    degraded_edfa_index: int = 1

    def __post_init__(self):
        if self.hops != len(self.span_lengths_km) or self.hops < 1:
            raise GeometryError("hops must equal the number of links (>= 1)")
        if not 1 <= self.degraded_edfa_index <= self.inline_edfa_count:
            raise GeometryError(
                f"degraded_edfa_index {self.degraded_edfa_index} outside [1, {self.inline_edfa_count}]"
            )
        if self.node_degree_q and len(self.node_degree_q) != self.hops - 1:
            raise GeometryError("node_degree_q needs one entry per intermediate node")

    @classmethod
    def from_spans(cls, span_lengths_km, edfa_spacing_km=100.0, node_degree_q=None,
                   degraded_edfa_index=1):
        spans = tuple(float(s) for s in span_lengths_km)
        if any(s <= 0 for s in spans):
            raise GeometryError("link lengths must be > 0")
        ratio = sum(spans) / edfa_spacing_km
        count = round(ratio)
        if count < 1 or abs(ratio - count) > 1e-9:
            raise GeometryError(
                f"total length {sum(spans)} km is not a multiple of the {edfa_spacing_km} km EDFA spacing"
            )
        if node_degree_q is None:
            node_degree_q = (4,) * (len(spans) - 1)
        return cls(spans, len(spans), count, tuple(int(q) for q in node_degree_q),
                   degraded_edfa_index)


def paper_lightpath() -> LightpathGeometry:
    """Two links of 400 km and 300 km, EDFAs every 100 km."""
    return LightpathGeometry.from_spans((400.0, 300.0), 100.0)


@dataclass(frozen=True)
class LinkState:
    inline_gain_nominal_db: float
    inline_gain_degraded_db: float
    booster_gains_db: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0 < self.inline_gain_degraded_db <= self.inline_gain_nominal_db:
            raise GeometryError(
                "degraded gain must satisfy 0 < degraded <= nominal, got "
                f"{self.inline_gain_degraded_db} / {self.inline_gain_nominal_db}"
            )


def booster_gain_db(q_ports: int, wss_loss_db: float) -> float:
    """Booster gain that offsets a Q-port splitter plus the WSS loss."""
    if q_ports < 1:
        raise GeometryError(f"node needs at least one port, got {q_ports}")
    if wss_loss_db < 0:
        raise ValueError("wss_loss_db must be >= 0")
    return 3.0 * math.ceil(math.log2(q_ports)) + wss_loss_db


def inline_gain_nominal_db(params: PhysicalParams, span_km: float) -> float:
    if span_km <= 0:
        raise ValueError("span_km must be > 0")
    return params.fiber_attenuation_db_per_km * span_km + params.tap_loss_db


def nominal_state(params: PhysicalParams, geom: LightpathGeometry,
                  inline_gain_db: float = 22.0, booster_rule: str = "table") -> LinkState:
    """Undegraded link state. ``booster_rule`` is ``"table"`` or ``"ports"``."""
    if booster_rule == "table":
        boosters = (params.booster_gain_db,) * (geom.hops - 1)
    elif booster_rule == "ports":
        boosters = tuple(booster_gain_db(q, params.wss_loss_db) for q in geom.node_degree_q)
    else:
        raise ValueError(f"unknown booster_rule {booster_rule!r}")
    return LinkState(inline_gain_db, inline_gain_db, boosters)


def _check_boosters(geom: LightpathGeometry, state: LinkState):
    if len(state.booster_gains_db) != geom.hops - 1:
        raise GeometryError(
            f"expected {geom.hops - 1} booster gains, got {len(state.booster_gains_db)}"
        )


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def dbm_to_w(dbm):
    return db_to_linear(dbm) * 1e-3


def w_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=float) / 1e-3)


def received_power_dbm(params: PhysicalParams, geom: LightpathGeometry, state: LinkState,
                       degraded_gain_db=None):
    """Received signal power in dBm.

    ``degraded_gain_db`` may be an array to evaluate a whole gain trace at once;
    it overrides ``state.inline_gain_degraded_db``.
    """
    _check_boosters(geom, state)
    g_deg = state.inline_gain_degraded_db if degraded_gain_db is None else np.asarray(degraded_gain_db, float)
    m = geom.inline_edfa_count
    total_loss = m * params.fiber_attenuation_db_per_km * params.edfa_spacing_km
    return (params.transmit_power_dbm - total_loss - params.wss_loss_db - params.tap_loss_db
            + g_deg + (m - 1) * state.inline_gain_nominal_db + sum(state.booster_gains_db))


def ase_noise_w(params: PhysicalParams, geom: LightpathGeometry, state: LinkState,
                degraded_gain_db=None):
    """Accumulated ASE noise power in watts."""
    _check_boosters(geom, state)
    g_deg = state.inline_gain_degraded_db if degraded_gain_db is None else np.asarray(degraded_gain_db, float)
    m = geom.inline_edfa_count
    inline = (m - 1) * (db_to_linear(state.inline_gain_nominal_db) - 1.0) + (db_to_linear(g_deg) - 1.0)
    booster = sum(float(db_to_linear(g)) - 1.0 for g in state.booster_gains_db)
    return params.gamma * (params.nsp_inline * inline + params.nsp_booster * booster)


def snr_linear(signal_dbm, noise_w):
    noise_w = np.asarray(noise_w, dtype=float)
    if np.any(noise_w <= 0):
        raise NumericDomainError("noise power must be > 0")
    return dbm_to_w(signal_dbm) / noise_w


def _check_snr(snr):
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0) or np.any(np.isnan(snr)):
        raise NumericDomainError("SNR must be >= 0")
    return snr


def ber_4qam(snr):
    """BER of 4-QAM at linear SNR; underflows to 0.0 for SNR above ~1400."""
    snr = _check_snr(snr)
    out = 0.5 * erfc(np.sqrt(snr / 2.0))
    return out if np.ndim(out) else float(out)


def log10_ber_4qam(snr):
    """log10 of :func:`ber_4qam`, finite for every SNR >= 0."""
    snr = _check_snr(snr)
    out = (log_erfc(np.sqrt(snr / 2.0)) - math.log(2.0)) / _LN10
    return out if np.ndim(out) else float(out)


def effective_snr(params: PhysicalParams, geom: LightpathGeometry, state: LinkState,
                  degraded_gain_db=None):
    """SNR of the full chain, after the configured receiver penalty."""
    p = received_power_dbm(params, geom, state, degraded_gain_db)
    n = ase_noise_w(params, geom, state, degraded_gain_db)
    return snr_linear(p, n) / db_to_linear(params.snr_penalty_db)


def lightpath_ber(params: PhysicalParams, geom: LightpathGeometry, state: LinkState,
                  degraded_gain_db=None):
    return ber_4qam(effective_snr(params, geom, state, degraded_gain_db))


def snr_for_ber(target_ber: float, tol: float = 1e-14) -> float:
    """Linear SNR at which :func:`ber_4qam` equals ``target_ber`` (bisection)."""
    if not 0 < target_ber < 0.5:
        raise NumericDomainError("target BER must lie in (0, 0.5)")
    target = math.log10(target_ber)
    lo, hi = 0.0, 1.0
    while log10_ber_4qam(hi) > target:
        hi *= 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if log10_ber_4qam(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def threshold_gain_db(params: PhysicalParams, geom: LightpathGeometry, state: LinkState,
                      ber: float) -> float:
    """Degraded-EDFA gain at which the lightpath BER equals ``ber``.

    BER is strictly decreasing in the degraded gain, so this is a bisection on
    gain over (0, nominal]. Raises :class:`NumericDomainError` if ``ber`` is not
    bracketed by the BER at nominal gain and at (almost) zero gain.
    """
    target = math.log10(ber)

    def log_ber(g):
        return log10_ber_4qam(effective_snr(params, geom, state, g))

    lo, hi = 1e-9, state.inline_gain_nominal_db
    if log_ber(hi) >= target:
        raise NumericDomainError(f"BER {ber:g} is already reached at nominal gain")
    if log_ber(lo) <= target:
        raise NumericDomainError(f"BER {ber:g} is not reached even at zero gain")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if log_ber(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def calibrate_snr_penalty(params: PhysicalParams, geom: LightpathGeometry, state: LinkState,
                          gain_drop_db: float, ber: float) -> PhysicalParams:
    """Fit ``snr_penalty_db`` so that a ``gain_drop_db`` reduction gives ``ber``.

    Returns a copy of ``params`` with the fitted penalty.
    """
    g = state.inline_gain_nominal_db - gain_drop_db
    if not 0 < g <= state.inline_gain_nominal_db:
        raise NumericDomainError("gain drop must leave a positive gain")
    raw_snr = float(snr_linear(received_power_dbm(params, geom, state, g),
                               ase_noise_w(params, geom, state, g)))
    needed = snr_for_ber(ber)
    if needed > raw_snr:
        raise NumericDomainError(
            f"unpenalised SNR {raw_snr:.4g} is already below the {needed:.4g} needed for BER {ber:g}"
        )
    return replace(params, snr_penalty_db=10.0 * math.log10(raw_snr / needed))
