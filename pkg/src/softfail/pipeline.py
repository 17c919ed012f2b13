"""Stage functions shared by the CLI, the scripts and the tests."""
from __future__ import annotations

import dataclasses
import logging
import math

from . import aging, physics, policy
from .config import RunConfig
from .dataset import SequenceDataset, build_dataset
from .forecaster import EdLstmModel, Trainer

log = logging.getLogger(__name__)


@dataclasses.dataclass
class SimulationResult:
    trace: aging.BerTrace
    physics: physics.PhysicalParams
    weibull: aging.WeibullProcessParams
    crossing_index: int | None

    def summary(self) -> dict:
        n = len(self.trace)
        idx = self.crossing_index
        drop = self.trace.source.gain_reduction_db
        return {
            "samples": n,
            "snr_penalty_db": self.physics.snr_penalty_db,
            "units_per_event": self.weibull.units_per_event,
            "drop_per_event_db": self.weibull.drop_per_event_db,
            "crossing_index": idx,
            "crossing_fraction": None if idx is None else idx / n,
            "gain_drop_at_crossing_db": None if idx is None else float(drop[idx]),
            "final_gain_drop_db": float(drop[-1]) if n else 0.0,
            "truncated": self.trace.source.truncated,
            "trace_sha256": self.trace.digest(),
        }


def resolve_physics(cfg: RunConfig):
    """Physical parameters (with the anchored SNR penalty if enabled) and geometry."""
    params = cfg.physics
    geom = cfg.geometry.build(params)
    state = physics.nominal_state(params, geom, cfg.weibull.initial_gain_db,
                                  cfg.geometry.booster_rule)
    anchor = cfg.penalty_anchor
    if anchor.enabled:
        thr = cfg.hard_failure.ber_threshold
        anchor_ber = thr * 10.0 ** (-anchor.margin_percent / 100.0 * abs(math.log10(thr)))
        params = physics.calibrate_snr_penalty(params, geom, state, anchor.gain_drop_db,
                                               anchor_ber)
        log.info("SNR penalty %.6f dB puts BER %.4g at a %.2f dB gain drop",
                 params.snr_penalty_db, anchor_ber, anchor.gain_drop_db)
    return params, geom


def simulate(cfg: RunConfig) -> SimulationResult:
    params, geom = resolve_physics(cfg)
    weibull = cfg.weibull
    if cfg.calibration.enabled:
        weibull = aging.calibrate_trace(weibull, params, geom, cfg.hard_failure.ber_threshold,
                                        cfg.calibration.crossing_fraction, cfg.trace_seed)
    trace = aging.simulate(weibull, params, geom, cfg.trace_seed)
    idx = aging.first_crossing(trace.ber, cfg.hard_failure.ber_threshold)
    return SimulationResult(trace, params, weibull, idx)


def make_dataset(cfg: RunConfig, trace: aging.BerTrace) -> SequenceDataset:
    d = cfg.dataset
    return build_dataset(trace, cfg.window, n_sequences=d.n_sequences, transform=d.transform,
                         normalizer=d.normalizer, train_frac=d.train_frac,
                         val_frac_of_train=d.val_frac_of_train,
                         max_train_ber=cfg.hard_failure.ber_threshold)


def make_trainer(cfg: RunConfig, ds: SequenceDataset) -> Trainer:
    train_cfg = dataclasses.replace(cfg.train, seed=cfg.train_seed)
    model = EdLstmModel.init(cfg.model, cfg.train_seed)
    return Trainer(model, train_cfg, ds)


def compare(cfg: RunConfig, trace: aging.BerTrace, model: EdLstmModel | None = None,
            fixed_thresholds_db=None, prediction: str | None = None) -> policy.TriggerReport:
    spec = cfg.hard_failure
    thresholds = cfg.policy.fixed_thresholds_db if fixed_thresholds_db is None \
        else fixed_thresholds_db
    prediction = cfg.policy.prediction if prediction is None else prediction
    event = None
    if prediction == "model":
        if model is None:
            raise ValueError("the model prediction policy needs a trained model")
        fc = policy.ModelForecaster(model, cfg.window.past_len)
        event = policy.prediction_trigger(fc, trace, cfg.window, spec, name="prediction")
    elif prediction == "oracle":
        fc = policy.OracleForecaster(cfg.window.future_len)
        event = policy.prediction_trigger(fc, trace, cfg.window, spec, name="prediction (oracle)")
    return policy.compare(trace, spec, thresholds, event)
