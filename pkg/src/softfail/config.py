"""Run configuration: one dataclass per pipeline stage, two presets.

A config document (YAML or JSON) holds any subset of the sections below and
overrides the chosen preset field by field. Unknown sections or keys raise
:class:`~softfail.errors.ConfigError`.

``paper`` uses the published constants (1e6-sample trace, k=50, s=70, u=30,
lr 1e-5, 500 epochs, n=6081 sequences). ``desk`` shrinks everything so the
whole pipeline runs in about a minute.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .aging import WeibullProcessParams
from .dataset import WindowSpec
from .errors import ConfigError
from .forecaster.model import ModelConfig
from .forecaster.train import TrainConfig
from .physics import LightpathGeometry, PhysicalParams
from .policy import HardFailureSpec


@dataclass(frozen=True)
class GeometryConfig:
    span_lengths_km: tuple[float, ...] = (400.0, 300.0)
    node_degree_q: tuple[int, ...] = (4,)
    degraded_edfa_index: int = 1
    # "table": every booster uses PhysicalParams.booster_gain_db; "ports": 3*ceil(log2 Q) + L_WSS
    booster_rule: str = "table"

    def build(self, physics: PhysicalParams) -> LightpathGeometry:
        return LightpathGeometry.from_spans(self.span_lengths_km, physics.edfa_spacing_km,
                                            self.node_degree_q, self.degraded_edfa_index)


@dataclass(frozen=True)
class PenaltyAnchor:
    """Fit the receiver SNR penalty so that a ``gain_drop_db`` loss leaves the
    BER exactly ``margin_percent`` (log-domain) below the hard-failure threshold."""

    enabled: bool = True
    gain_drop_db: float = 9.06
    margin_percent: float = 5.32


@dataclass(frozen=True)
class CalibrationConfig:
    enabled: bool = True
    crossing_fraction: float = 0.95


@dataclass(frozen=True)
class DatasetConfig:
    n_sequences: int | None = None
    transform: str = "none"
    normalizer: str = "minmax"
    train_frac: float = 0.9
    val_frac_of_train: float = 0.2


@dataclass(frozen=True)
class PolicyConfig:
    fixed_thresholds_db: tuple[float, ...] = (5.0, 7.0, 10.0)
    # "model", "oracle" or "none"
    prediction: str = "model"


@dataclass(frozen=True)
class RunConfig:
    physics: PhysicalParams = field(default_factory=PhysicalParams)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    penalty_anchor: PenaltyAnchor = field(default_factory=PenaltyAnchor)
    weibull: WeibullProcessParams = field(default_factory=WeibullProcessParams)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    window: WindowSpec = field(default_factory=WindowSpec)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    hard_failure: HardFailureSpec = field(default_factory=HardFailureSpec)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    seed: int = 0
    out_dir: str = "runs/default"

    @property
    def trace_seed(self) -> int:
        return self.seed

    @property
    def train_seed(self) -> int:
        return self.seed + 1

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))


SECTIONS = {f.name for f in fields(RunConfig)} - {"seed", "out_dir"}


def _coerce(value, current):
    """Match ``value`` to the type of the field it replaces.

    YAML 1.1 reads ``7e9`` as a string and ``400`` as an int; both should land
    as floats in float fields.
    """
    if isinstance(value, list):
        value = tuple(value)
    if isinstance(value, tuple) and isinstance(current, tuple) and current:
        kind = type(current[0])
        return tuple(_coerce(v, kind()) for v in value)
    if isinstance(current, float) and not isinstance(value, bool) \
            and isinstance(value, (int, str)):
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"expected a number, got {value!r}") from exc
    return value


def _update_section(current, updates, name: str):
    if not isinstance(updates, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(current)}
    unknown = set(updates) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {sorted(unknown)}")
    try:
        return dataclasses.replace(
            current, **{k: _coerce(v, getattr(current, k)) for k, v in updates.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name!r} section: {exc}") from exc


def merge(base: RunConfig, doc: dict) -> RunConfig:
    """Override ``base`` with a (possibly partial) nested mapping."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    unknown = set(doc) - SECTIONS - {"seed", "out_dir"}
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    changes = {}
    for name, updates in doc.items():
        if name in SECTIONS:
            changes[name] = _update_section(getattr(base, name), updates, name)
        else:
            changes[name] = updates
    cfg = dataclasses.replace(base, **changes)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.model.future_len != cfg.window.future_len:
        raise ConfigError("model.future_len must equal window.future_len")
    if cfg.policy.prediction not in ("model", "oracle", "none"):
        raise ConfigError("policy.prediction must be model, oracle or none")
    if cfg.geometry.booster_rule not in ("table", "ports"):
        raise ConfigError("geometry.booster_rule must be 'table' or 'ports'")
    if not isinstance(cfg.seed, int):
        raise ConfigError("seed must be an integer")


def paper_preset() -> RunConfig:
    return RunConfig(dataset=DatasetConfig(n_sequences=6081), out_dir="runs/paper")


def desk_preset() -> RunConfig:
    return RunConfig(
        weibull=WeibullProcessParams(horizon_samples=100_000),
        window=WindowSpec(past_len=20, future_len=10),
        model=ModelConfig(hidden_units=16, future_len=10),
        dataset=DatasetConfig(transform="log10"),
        train=TrainConfig(learning_rate=1e-3, epochs=100),
        out_dir="runs/desk",
    )


PRESETS = {"paper": paper_preset, "desk": desk_preset}


def load_config(path=None, preset: str = "paper") -> RunConfig:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    cfg = PRESETS[preset]()
    if path is None:
        return cfg
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return merge(cfg, doc or {})


def save_config(path, cfg: RunConfig) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
