"""Experiment configuration: TOML files validated against strict schemas.

Every physical quantity carries its unit in the key name.  Unknown keys are
rejected so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, field_validator, model_validator

from ..channel import ChannelParams, rate_from_half_life

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = (
    "sir_sweep",
    "fec_vs_drift",
    "detector_comparison",
    "passband_spectrum",
    "pathloss_table",
    "pulse_shaping",
)
FEC_CODES = ("rm84", "dhw", "moco", "moco_search", "moco_noguard", "isifree")
DETECTOR_NAMES = ("map", "mmse", "dff", "diff")


class ConfigError(ValueError):
    """Configuration failed to parse or validate."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ChannelSection(_Strict):
    distance_um: float = Field(gt=0)
    diffusivity_um2_per_s: float = Field(gt=0)
    receiver_radius_um: Optional[float] = Field(default=None, gt=0)
    dimension: Literal[1, 3] = 1
    drift_um_per_s: float = Field(default=0.0, ge=0)
    half_life_s: float = Field(default=math.inf, gt=0)

    @model_validator(mode="after")
    def _radius_for_3d(self):
        if self.dimension == 3 and self.receiver_radius_um is None:
            raise ValueError("receiver_radius_um is required when dimension = 3")
        return self

    def params(self, **overrides) -> ChannelParams:
        kw = dict(
            distance=self.distance_um,
            diffusivity=self.diffusivity_um2_per_s,
            receiver_radius=self.receiver_radius_um,
            drift=self.drift_um_per_s,
            dimension=self.dimension,
            degradation_rate=rate_from_half_life(self.half_life_s),
        )
        kw.update(overrides)
        return ChannelParams(**kw)


def _strictly_monotone(values: list[float]) -> list[float]:
    if len(values) == 0:
        raise ValueError("sweep needs at least one value")
    diffs = [b - a for a, b in zip(values[:-1], values[1:])]
    if diffs and not (all(x > 0 for x in diffs) or all(x < 0 for x in diffs)):
        raise ValueError("sweep values must be strictly monotone")
    return values


class _Base(_Strict):
    seed: int = Field(default=0, ge=0)
    description: str = ""


class SirSweepConfig(_Base):
    experiment: Literal["sir_sweep"]
    channel: ChannelSection
    symbol_periods_s: list[Annotated[float, Field(gt=0)]]
    half_lives_s: list[Annotated[float, Field(gt=0)]] = [math.inf, 8.0, 4.0, 2.0]
    monte_carlo_particles: int = Field(default=0, ge=0)
    monte_carlo_time_step_s: Optional[float] = Field(default=None, gt=0)
    batches: int = Field(default=20, ge=20)

    _mono = field_validator("symbol_periods_s")(_strictly_monotone)


class FecVsDriftConfig(_Base):
    experiment: Literal["fec_vs_drift"]
    channel: ChannelSection
    drifts_um_per_s: list[Annotated[float, Field(ge=0)]]
    symbol_period_s: float = Field(default=1.0, gt=0)
    codewords_per_point: int = Field(default=100_000, ge=1)
    codes: list[Literal["rm84", "dhw", "moco", "moco_search", "moco_noguard", "isifree"]] = list(FEC_CODES)
    receiver_mode: Literal["order", "slot"] = "order"
    moco_trials: int = Field(default=20_000, ge=1)
    batches: int = Field(default=20, ge=20)

    _mono = field_validator("drifts_um_per_s")(_strictly_monotone)

    @model_validator(mode="after")
    def _one_dimensional(self):
        if self.channel.dimension != 1:
            raise ValueError("fec_vs_drift models a 1-D drift channel; set channel.dimension = 1")
        return self


class DetectorComparisonConfig(_Base):
    experiment: Literal["detector_comparison"]
    channel: ChannelSection
    snr_db: list[float]
    symbol_period_s: float = Field(gt=0)
    tap_count: int = Field(default=50, ge=1)
    memory_lengths: list[Annotated[int, Field(ge=0, le=16)]] = [2, 5, 10]
    detectors: list[Literal["map", "mmse", "dff", "diff"]] = list(DETECTOR_NAMES)
    noise_model: Literal["binomial", "gaussian_approx", "awgn_drift"] = "gaussian_approx"
    awgn_variance: float = Field(default=0.0, ge=0)
    bits_per_point: int = Field(default=100_000, ge=1)
    frame_length: int = Field(default=500, ge=1)
    difference_threshold_fraction: float = 0.0
    batches: int = Field(default=20, ge=20)

    _mono = field_validator("snr_db")(_strictly_monotone)


class PassbandSpectrumConfig(_Base):
    experiment: Literal["passband_spectrum"]
    channel: ChannelSection
    amplitude_um: float = Field(ge=0)
    carrier_frequencies_hz: list[Annotated[float, Field(gt=0)]]
    emission_rate_per_s: float = Field(gt=0)
    sample_rate_hz: float = Field(gt=0)
    duration_s: float = Field(gt=0)
    warmup_s: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _geometry(self):
        if self.amplitude_um >= self.channel.distance_um:
            raise ValueError("amplitude_um must be below channel.distance_um")
        if self.warmup_s >= self.duration_s:
            raise ValueError("warmup_s must be shorter than duration_s")
        return self


class PathlossTableConfig(_Base):
    experiment: Literal["pathloss_table"]
    channel: ChannelSection
    distances_um: list[Annotated[float, Field(gt=0)]]
    em_frequency_hz: float = Field(default=2.4e9, gt=0)

    _mono = field_validator("distances_um")(_strictly_monotone)


class PulseShapingConfig(_Base):
    experiment: Literal["pulse_shaping"]
    channel: ChannelSection
    symbol_periods_s: list[Annotated[float, Field(gt=0)]]
    cutoff_fraction: float = Field(default=0.01, gt=0, le=1)
    horizon_s: float = Field(default=1.0, gt=0)
    samples_per_feature: int = Field(default=20, ge=2)

    _mono = field_validator("symbol_periods_s")(_strictly_monotone)


ExperimentConfig = Annotated[
    Union[
        SirSweepConfig,
        FecVsDriftConfig,
        DetectorComparisonConfig,
        PassbandSpectrumConfig,
        PathlossTableConfig,
        PulseShapingConfig,
    ],
    Field(discriminator="experiment"),
]
_ADAPTER = TypeAdapter(ExperimentConfig)


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_config(data: dict):
    """Validate a mapping; raises ConfigError naming the offending field(s)."""
    if not isinstance(data, dict) or "experiment" not in data:
        raise ConfigError("experiment: missing; expected one of " + ", ".join(EXPERIMENTS))
    if data["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown value {data['experiment']!r}; expected one of " + ", ".join(EXPERIMENTS))
    try:
        return _ADAPTER.validate_python(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def load_config(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None
    return parse_config(data)


def config_hash(cfg) -> str:
    """SHA-256 over the canonical JSON of the validated config."""
    blob = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
