#!/usr/bin/env python
# coding: utf-8

"""
Physics-informed synthetic dataset generator.

Samples are drawn per class from truncated normal feature distributions and
kept only when the Den Hartog trigger (lift slope + drag < 0) of their
aerodynamic proxies agrees with the class. Labels are then flipped
symmetrically with probability label_noise.

The wind-line angle of attack is not modelled; its effect is folded into the
precipitation and ice proxies of the lift slope.
"""

import math
import logging
import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.stats import truncnorm

from gal_config_manager import parse_flat_config, write_flat_config
from gal_data import Dataset, FeatureId, Label, WeatherSample, derive_seed, MAX_SEED
from gal_errors import ConfigError, SynthesisError

logger = logging.getLogger('galloping_prediction')

RECORDED_SAMPLE_COUNT = 80596
RECORDED_GALLOPING_COUNT = 25414

MIN_BATCH = 256


@dataclass(frozen=True)
class AeroCoefficients:
    """Proxies for the lift-curve slope dCL/dalpha and the drag coefficient CD."""
    lift_slope: float
    drag: float

    def __post_init__(self):
        if not self.drag >= 0:
            raise ValueError(f"Drag coefficient must be non-negative, got {self.drag}")


@dataclass(frozen=True)
class FeatureDistribution:
    """Normal(loc, scale) truncated to [low, high]."""
    loc: float
    scale: float
    low: float
    high: float

    def __post_init__(self):
        values = (self.loc, self.scale, self.low, self.high)
        if not all(math.isfinite(v) for v in values):
            raise SynthesisError(f"Distribution parameters must be finite: {values}")
        if self.scale <= 0:
            raise SynthesisError(f"Distribution scale must be positive, got {self.scale}")
        if self.low >= self.high:
            raise SynthesisError(f"Distribution bounds must satisfy low < high, got [{self.low}, {self.high}]")

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        a = (self.low - self.loc) / self.scale
        b = (self.high - self.loc) / self.scale
        return truncnorm.rvs(a, b, loc=self.loc, scale=self.scale, size=size, random_state=rng)


def _galloping_distributions() -> Dict[FeatureId, FeatureDistribution]:
    return {
        FeatureId.WIND_SPEED: FeatureDistribution(9.0, 3.0, 0.0, 25.0),
        FeatureId.HUMIDITY: FeatureDistribution(82.0, 10.0, 20.0, 100.0),
        FeatureId.TEMPERATURE: FeatureDistribution(0.0, 2.5, -15.0, 10.0),
        FeatureId.PRECIPITATION: FeatureDistribution(6.0, 3.0, 0.0, 30.0),
        FeatureId.ICE_THICKNESS: FeatureDistribution(5.0, 3.0, 0.0, 20.0),
        FeatureId.VERTICAL_WIND_SPEED: FeatureDistribution(0.3, 0.6, -3.0, 3.0),
        FeatureId.AMPLITUDE: FeatureDistribution(0.45, 0.25, 0.0, 2.0),
    }


def _normal_distributions() -> Dict[FeatureId, FeatureDistribution]:
    return {
        FeatureId.WIND_SPEED: FeatureDistribution(4.5, 2.5, 0.0, 25.0),
        FeatureId.HUMIDITY: FeatureDistribution(78.0, 12.0, 20.0, 100.0),
        FeatureId.TEMPERATURE: FeatureDistribution(12.0, 9.0, -20.0, 40.0),
        FeatureId.PRECIPITATION: FeatureDistribution(0.8, 1.5, 0.0, 30.0),
        FeatureId.ICE_THICKNESS: FeatureDistribution(1.5, 1.5, 0.0, 20.0),
        FeatureId.VERTICAL_WIND_SPEED: FeatureDistribution(0.2, 0.6, -3.0, 3.0),
        FeatureId.AMPLITUDE: FeatureDistribution(0.3, 0.2, 0.0, 2.0),
    }


@dataclass(frozen=True)
class SynthConfig:
    """
    Generator configuration.

    Aerodynamic proxies:
        lift_slope = a0 - a1 * precipitation * exp(-(temperature / t0)^2) - a2 * ice_thickness
        drag       = b0 + b1 * wind_speed^2
    """
    n_total: int = 20000
    galloping_fraction: float = 0.315
    label_noise: float = 0.02
    seed: int = 0
    a0: float = 1.0
    a1: float = 1.0
    a2: float = 0.04
    t0: float = 4.0
    b0: float = 0.2
    b1: float = 0.002
    max_rounds: int = 100
    galloping: Dict[FeatureId, FeatureDistribution] = field(default_factory=_galloping_distributions)
    normal: Dict[FeatureId, FeatureDistribution] = field(default_factory=_normal_distributions)

    def __post_init__(self):
        if self.n_total < 1:
            raise SynthesisError(f"n_total must be positive, got {self.n_total}")
        if not 0.0 < self.galloping_fraction < 1.0:
            raise SynthesisError(f"galloping_fraction must be in (0, 1), got {self.galloping_fraction}")
        if not 0.0 <= self.label_noise < 0.5:
            raise SynthesisError(f"label_noise must be in [0, 0.5), got {self.label_noise}")
        if not 0 <= self.seed < MAX_SEED:
            raise SynthesisError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.t0 <= 0:
            raise SynthesisError(f"t0 must be positive, got {self.t0}")
        if self.b0 < 0 or self.b1 < 0:
            raise SynthesisError("Drag constants b0 and b1 must be non-negative")
        if self.max_rounds < 1:
            raise SynthesisError(f"max_rounds must be positive, got {self.max_rounds}")
        for name in ('galloping', 'normal'):
            missing = [f.column for f in FeatureId if f not in getattr(self, name)]
            if missing:
                raise SynthesisError(f"No {name} distribution for {', '.join(missing)}")

    def distributions(self, label: Label) -> Dict[FeatureId, FeatureDistribution]:
        return self.galloping if label == Label.GALLOPING else self.normal

    def replace(self, **changes) -> 'SynthConfig':
        return dataclasses.replace(self, **changes)


def recorded_size_config(seed: int = 0, label_noise: float = 0.02) -> SynthConfig:
    """Config reproducing the recorded dataset size and class ratio."""
    return SynthConfig(n_total=RECORDED_SAMPLE_COUNT,
                       galloping_fraction=RECORDED_GALLOPING_COUNT / RECORDED_SAMPLE_COUNT,
                       label_noise=label_noise, seed=seed)


def aero_arrays(X: np.ndarray, config: SynthConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Lift slope and drag proxies for every row of a full 7-feature matrix."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    wind = X[:, FeatureId.WIND_SPEED]
    temperature = X[:, FeatureId.TEMPERATURE]
    precipitation = X[:, FeatureId.PRECIPITATION]
    ice = X[:, FeatureId.ICE_THICKNESS]

    lift_slope = config.a0 - config.a1 * precipitation * np.exp(-(temperature / config.t0) ** 2) \
        - config.a2 * ice
    drag = config.b0 + config.b1 * wind ** 2
    return lift_slope, drag


def trigger_array(X: np.ndarray, config: SynthConfig) -> np.ndarray:
    lift_slope, drag = aero_arrays(X, config)
    return lift_slope + drag < 0


def aero_from_weather(sample: WeatherSample, config: SynthConfig) -> AeroCoefficients:
    lift_slope, drag = aero_arrays(np.array([sample.features]), config)
    return AeroCoefficients(float(lift_slope[0]), float(drag[0]))


def den_hartog_trigger(coeff: AeroCoefficients) -> bool:
    """Galloping instability: dCL/dalpha + CD < 0 (strict)."""
    return coeff.lift_slope + coeff.drag < 0


def clean_labels(X: np.ndarray, config: SynthConfig) -> np.ndarray:
    """Noise-free labels implied by the trigger condition."""
    return np.where(trigger_array(X, config), int(Label.GALLOPING), int(Label.NORMAL))


def _draw_batch(distributions: Dict[FeatureId, FeatureDistribution], size: int,
                rng: np.random.Generator) -> np.ndarray:
    return np.column_stack([distributions[f].sample(size, rng) for f in FeatureId])


def _draw_class(config: SynthConfig, label: Label, count: int) -> np.ndarray:
    """Rejection-sample `count` rows whose trigger outcome matches the class."""
    if count == 0:
        return np.empty((0, len(FeatureId)))

    rng = np.random.default_rng(derive_seed(config.seed, f"synth/{label.name.lower()}"))
    distributions = config.distributions(label)
    wants_trigger = label == Label.GALLOPING

    accepted = []
    have = 0
    for round_number in range(1, config.max_rounds + 1):
        batch = _draw_batch(distributions, max(2 * (count - have), MIN_BATCH), rng)
        keep = trigger_array(batch, config) == wants_trigger
        accepted.append(batch[keep])
        have += int(keep.sum())
        if have >= count:
            logger.debug(f"Drew {count} {label.name.lower()} samples in {round_number} rounds")
            return np.vstack(accepted)[:count]

    raise SynthesisError(
        f"Could only draw {have} of {count} {label.name.lower()} samples consistent with the trigger "
        f"condition in {config.max_rounds} rounds; adjust the {label.name.lower()} distributions or "
        f"aerodynamic constants")


def generate(config: SynthConfig) -> Dataset:
    """
    Generate a labelled dataset.

    The clean galloping count is round(galloping_fraction * n_total); each
    label is then flipped with probability label_noise. Equal configs
    (seed included) produce identical datasets.

    Raises:
        SynthesisError: If a class cannot be filled within max_rounds rejection rounds
    """
    n_galloping = int(math.floor(config.galloping_fraction * config.n_total + 0.5))
    n_normal = config.n_total - n_galloping
    logger.info(f"Generating {config.n_total} samples ({n_galloping} galloping, "
                f"label noise {config.label_noise}, seed {config.seed})")

    X = np.vstack([_draw_class(config, Label.GALLOPING, n_galloping),
                   _draw_class(config, Label.NORMAL, n_normal)])
    y = np.concatenate([np.full(n_galloping, int(Label.GALLOPING)),
                        np.full(n_normal, int(Label.NORMAL))])

    order = np.random.default_rng(derive_seed(config.seed, 'synth/shuffle')).permutation(config.n_total)
    X, y = X[order], y[order]

    if config.label_noise > 0:
        noise_rng = np.random.default_rng(derive_seed(config.seed, 'synth/noise'))
        flips = noise_rng.random(config.n_total) < config.label_noise
        y[flips] = -y[flips]
        logger.debug(f"Flipped {int(flips.sum())} labels")

    dataset = Dataset.from_arrays(X, y)
    galloping, normal = dataset.class_counts
    logger.info(f"Generated dataset: {galloping} galloping, {normal} normal "
                f"(fraction {galloping / config.n_total:.4f})")
    return dataset


SCALAR_KEYS: Dict[str, str] = {
    'n_total': 'int',
    'galloping_fraction': 'float',
    'label_noise': 'float',
    'seed': 'int',
    'max_rounds': 'int',
    'a0': 'float',
    'a1': 'float',
    'a2': 'float',
    't0': 'float',
    'b0': 'float',
    'b1': 'float',
}
DISTRIBUTION_FIELDS = ('loc', 'scale', 'low', 'high')
CLASS_PREFIXES = ('galloping', 'normal')


def synth_config_schema() -> Dict[str, str]:
    schema = dict(SCALAR_KEYS)
    for prefix in CLASS_PREFIXES:
        for feature in FeatureId:
            for name in DISTRIBUTION_FIELDS:
                schema[f"{prefix}.{feature.column}.{name}"] = 'float'
    return schema


def synth_config_to_dict(config: SynthConfig) -> Dict[str, Any]:
    values: Dict[str, Any] = {key: getattr(config, key) for key in SCALAR_KEYS}
    for prefix in CLASS_PREFIXES:
        for feature, distribution in getattr(config, prefix).items():
            for name in DISTRIBUTION_FIELDS:
                values[f"{prefix}.{feature.column}.{name}"] = float(getattr(distribution, name))
    return values


def synth_config_from_dict(values: Dict[str, Any], base: Optional[SynthConfig] = None) -> SynthConfig:
    """Override base (defaults when None) with flat keys; unknown keys raise ConfigError."""
    base = base or SynthConfig()
    schema = synth_config_schema()
    unknown = [key for key in values if key not in schema]
    if unknown:
        raise ConfigError(f"Unknown generator config keys: {', '.join(sorted(unknown))}")

    scalars = {key: values[key] for key in SCALAR_KEYS if key in values}
    classes = {}
    for prefix in CLASS_PREFIXES:
        distributions = dict(getattr(base, prefix))
        for feature in FeatureId:
            current = distributions[feature]
            overrides = {name: values[f"{prefix}.{feature.column}.{name}"] for name in DISTRIBUTION_FIELDS
                         if f"{prefix}.{feature.column}.{name}" in values}
            if overrides:
                distributions[feature] = dataclasses.replace(current, **overrides)
        classes[prefix] = distributions
    return dataclasses.replace(base, **scalars, **classes)


def read_synth_config(path: str, base: Optional[SynthConfig] = None) -> SynthConfig:
    """
    Read a flat key=value generator config.

    Keys absent from the file keep their base value, so a file may set only
    e.g. ``seed=7`` and ``galloping.temperature.loc=-1.0``.
    """
    config = synth_config_from_dict(parse_flat_config(path, synth_config_schema()), base)
    logger.debug(f"Loaded generator config from {path}")
    return config


def write_synth_config(config: SynthConfig, path: str):
    try:
        write_flat_config(synth_config_to_dict(config), path)
    except OSError as e:
        raise ConfigError(f"Cannot write generator config to {path}: {e}") from e
    logger.debug(f"Wrote generator config to {path}")
