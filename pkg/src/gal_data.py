#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Galloping Data - Data model, CSV ingestion, splitting and standardization
=========================================================================

A Dataset is an ordered table of meteorological/line observations with a
binary galloping label (+1 galloping, -1 normal). The seven usable features
keep a fixed ordinal (0..6) that orders CSV columns and FeatureMask bits.

All randomness in the package is seeded through derive_seed, which splits a
single user seed into independent per-purpose streams.
"""

import io
import os
import math
import zlib
import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gal_errors import DataFormatError, DatasetError

logger = logging.getLogger('galloping_prediction')

MAX_SEED = 2 ** 64


class FeatureId(IntEnum):
    """The seven usable features, in CSV and mask-bit order."""
    WIND_SPEED = 0
    HUMIDITY = 1
    TEMPERATURE = 2
    PRECIPITATION = 3
    ICE_THICKNESS = 4
    VERTICAL_WIND_SPEED = 5
    AMPLITUDE = 6

    @property
    def column(self) -> str:
        return self.name.lower()

    @property
    def unit(self) -> str:
        return FEATURE_UNITS[self]

    @classmethod
    def from_column(cls, name: str) -> 'FeatureId':
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(
                f"Unknown feature '{name}'; expected one of {', '.join(FEATURE_COLUMNS)}") from None


FEATURE_UNITS = {
    FeatureId.WIND_SPEED: 'm/s',
    FeatureId.HUMIDITY: '%',
    FeatureId.TEMPERATURE: 'degC',
    FeatureId.PRECIPITATION: 'mm',
    FeatureId.ICE_THICKNESS: 'mm',
    FeatureId.VERTICAL_WIND_SPEED: 'm/s',
    FeatureId.AMPLITUDE: 'm',
}

FEATURE_COLUMNS: Tuple[str, ...] = tuple(f.column for f in FeatureId)
LABEL_COLUMN = 'label'
CSV_HEADER: Tuple[str, ...] = FEATURE_COLUMNS + (LABEL_COLUMN,)


class Label(IntEnum):
    GALLOPING = 1
    NORMAL = -1


LABEL_TEXT = {'1': 1, '+1': 1, '-1': -1}


@dataclass(frozen=True)
class WeatherSample:
    """One observation: seven finite feature values and a label."""
    features: Tuple[float, ...]
    label: Label

    def __post_init__(self):
        values = tuple(float(v) for v in self.features)
        if len(values) != len(FeatureId):
            raise ValueError(f"A sample needs {len(FeatureId)} features, got {len(values)}")
        for feature, value in zip(FeatureId, values):
            if not math.isfinite(value):
                raise ValueError(f"Feature {feature.column} is not finite: {value!r}")
        object.__setattr__(self, 'features', values)
        object.__setattr__(self, 'label', Label(int(self.label)))

    def value(self, feature: FeatureId) -> float:
        return self.features[int(feature)]


@dataclass(frozen=True)
class FeatureMask:
    """Nonempty feature subset; bit k selects FeatureId ordinal k."""
    mask: int

    def __post_init__(self):
        if isinstance(self.mask, bool) or not isinstance(self.mask, (int, np.integer)):
            raise ValueError(f"Feature mask must be an integer, got {self.mask!r}")
        if not 1 <= int(self.mask) <= (1 << len(FeatureId)) - 1:
            raise ValueError(f"Feature mask must be in [1, {(1 << len(FeatureId)) - 1}], got {self.mask}")
        object.__setattr__(self, 'mask', int(self.mask))

    @property
    def features(self) -> Tuple[FeatureId, ...]:
        return tuple(f for f in FeatureId if self.mask >> int(f) & 1)

    @property
    def columns(self) -> Tuple[str, ...]:
        return tuple(f.column for f in self.features)

    def __len__(self) -> int:
        return bin(self.mask).count('1')

    def __str__(self) -> str:
        return '+'.join(self.columns)

    @classmethod
    def from_features(cls, features: Iterable[FeatureId]) -> 'FeatureMask':
        mask = 0
        for feature in features:
            mask |= 1 << int(feature)
        return cls(mask)

    @classmethod
    def from_names(cls, names: Iterable[str]) -> 'FeatureMask':
        return cls.from_features(FeatureId.from_column(name) for name in names if name.strip())

    @classmethod
    def from_columns(cls, columns: Sequence[str]) -> 'FeatureMask':
        return cls.from_names(columns)


FeatureMask.ALL = FeatureMask((1 << len(FeatureId)) - 1)
FeatureMask.WEATHER_TRIO = FeatureMask.from_features(
    (FeatureId.WIND_SPEED, FeatureId.TEMPERATURE, FeatureId.PRECIPITATION))


def all_masks() -> List[FeatureMask]:
    """Every nonempty feature subset, in mask order 1..127."""
    return [FeatureMask(m) for m in range(1, 1 << len(FeatureId))]


@dataclass(frozen=True)
class Standardization:
    """Per-feature (mean, population standard deviation) pairs."""
    columns: Tuple[str, ...]
    means: Tuple[float, ...]
    stds: Tuple[float, ...]

    def __post_init__(self):
        if not (len(self.columns) == len(self.means) == len(self.stds)):
            raise ValueError("Standardization columns, means and stds must have equal length")
        for column, std in zip(self.columns, self.stds):
            if not (math.isfinite(std) and std > 0):
                raise ValueError(f"Standard deviation of {column} must be positive, got {std!r}")
        object.__setattr__(self, 'columns', tuple(self.columns))
        object.__setattr__(self, 'means', tuple(float(m) for m in self.means))
        object.__setattr__(self, 'stds', tuple(float(s) for s in self.stds))

    def restrict(self, columns: Sequence[str]) -> 'Standardization':
        """Keep only the given columns, in the given order."""
        missing = [c for c in columns if c not in self.columns]
        if missing:
            raise ValueError(f"Standardization has no entry for {', '.join(missing)}")
        positions = [self.columns.index(c) for c in columns]
        return Standardization(tuple(columns),
                               tuple(self.means[p] for p in positions),
                               tuple(self.stds[p] for p in positions))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - np.asarray(self.means)) / np.asarray(self.stds)


@dataclass(frozen=True)
class SplitSpec:
    """Random train/test split parameters (25% test by default)."""
    test_fraction: float = 0.25
    seed: int = 0
    stratify: bool = False

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if not 0 <= int(self.seed) < MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass
class Dataset:
    """
    Ordered collection of labelled samples.

    The frame holds feature columns in FeatureId order (all seven, or a
    projected subset) followed by an integer ``label`` column.
    """
    frame: pd.DataFrame
    standardization: Optional[Standardization] = None

    def __post_init__(self):
        columns = list(self.frame.columns)
        if not columns or columns[-1] != LABEL_COLUMN:
            raise ValueError(f"Dataset frame must end with a '{LABEL_COLUMN}' column")
        features = columns[:-1]
        unknown = [c for c in features if c not in FEATURE_COLUMNS]
        if unknown:
            raise ValueError(f"Unknown feature columns: {', '.join(unknown)}")
        if features != [c for c in FEATURE_COLUMNS if c in features]:
            raise ValueError("Feature columns must follow the canonical feature order")

        frame = self.frame.reset_index(drop=True)
        frame[features] = frame[features].astype(float)
        frame[LABEL_COLUMN] = frame[LABEL_COLUMN].astype(int)

        values = frame[features].to_numpy()
        if values.size and not np.isfinite(values).all():
            raise ValueError("All feature values must be finite")
        labels = frame[LABEL_COLUMN].to_numpy()
        if labels.size and not np.isin(labels, (1, -1)).all():
            raise ValueError("Labels must be +1 or -1")
        if self.standardization is not None and tuple(self.standardization.columns) != tuple(features):
            self.standardization = self.standardization.restrict(features)
        self.frame = frame

    @classmethod
    def from_arrays(cls, X: np.ndarray, y: np.ndarray, columns: Sequence[str] = FEATURE_COLUMNS,
                    standardization: Optional[Standardization] = None) -> 'Dataset':
        X = np.asarray(X, dtype=float).reshape(len(y), len(columns))
        frame = pd.DataFrame(X, columns=list(columns))
        frame[LABEL_COLUMN] = np.asarray(y, dtype=int)
        return cls(frame, standardization)

    @classmethod
    def from_samples(cls, samples: Iterable[WeatherSample]) -> 'Dataset':
        samples = list(samples)
        X = np.array([s.features for s in samples], dtype=float).reshape(len(samples), len(FeatureId))
        y = np.array([int(s.label) for s in samples], dtype=int)
        return cls.from_arrays(X, y)

    @property
    def columns(self) -> Tuple[str, ...]:
        return tuple(self.frame.columns[:-1])

    @property
    def mask(self) -> FeatureMask:
        return FeatureMask.from_columns(self.columns)

    @property
    def X(self) -> np.ndarray:
        return self.frame[list(self.columns)].to_numpy(dtype=float)

    @property
    def y(self) -> np.ndarray:
        return self.frame[LABEL_COLUMN].to_numpy(dtype=int)

    def __len__(self) -> int:
        return len(self.frame)

    def class_count(self, label: Label) -> int:
        return int((self.frame[LABEL_COLUMN] == int(label)).sum())

    @property
    def class_counts(self) -> Tuple[int, int]:
        """(galloping, normal) counts."""
        return self.class_count(Label.GALLOPING), self.class_count(Label.NORMAL)

    def has_both_classes(self) -> bool:
        galloping, normal = self.class_counts
        return galloping > 0 and normal > 0

    def samples(self) -> List[WeatherSample]:
        if self.columns != FEATURE_COLUMNS:
            raise DatasetError("Only datasets holding all seven features convert to samples")
        return [WeatherSample(tuple(row[:-1]), Label(int(row[-1])))
                for row in self.frame.itertuples(index=False, name=None)]

    def subset(self, indices: Sequence[int]) -> 'Dataset':
        return Dataset(self.frame.iloc[np.asarray(indices, dtype=int)], self.standardization)

    def with_label_indices(self, label: Label) -> np.ndarray:
        return np.flatnonzero(self.y == int(label))

    def concat(self, other: 'Dataset') -> 'Dataset':
        if other.columns != self.columns:
            raise ValueError("Cannot concatenate datasets with different columns")
        return Dataset(pd.concat([self.frame, other.frame], ignore_index=True), self.standardization)

    def equals(self, other: 'Dataset') -> bool:
        return (self.columns == other.columns
                and self.standardization == other.standardization
                and self.frame.equals(other.frame))


def derive_seed(seed: int, purpose: str) -> int:
    """
    Derive an independent 64-bit seed for one purpose from the user seed.

    The purpose is a literal label such as "split" or "balance/2000/3";
    equal (seed, purpose) pairs always give the same stream.
    """
    if not 0 <= int(seed) < MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    sequence = np.random.SeedSequence([int(seed), zlib.crc32(purpose.encode('utf-8'))])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def load_csv(path: str) -> Dataset:
    """
    Read a dataset in the canonical CSV format.

    Args:
        path: CSV file with header wind_speed,...,amplitude,label

    Returns:
        Dataset with one sample per data row, file order preserved

    Raises:
        DataFormatError: Missing file, header mismatch, missing/non-numeric or
            non-finite cell, or label outside {+1, -1}; located by line and column
    """
    if not os.path.isfile(path):
        raise DataFormatError(f"Dataset file not found: {path}")

    try:
        with open(path, 'rb') as f:
            content = f.read()
    except OSError as e:
        raise DataFormatError(f"Cannot read dataset file {path}: {e}") from e
    try:
        text = content.decode('utf-8')
    except UnicodeDecodeError as e:
        raise DataFormatError(f"Invalid UTF-8 byte 0x{content[e.start]:02x}",
                              row=content.count(b'\n', 0, e.start) + 1) from None
    header = text.split('\n', 1)[0].rstrip('\r').split(',')

    for position, expected in enumerate(CSV_HEADER):
        found = header[position].strip() if position < len(header) else None
        if found != expected:
            raise DataFormatError(f"Header mismatch: expected '{expected}', found '{found}'",
                                  row=1, column=found if found else expected)
    if len(header) > len(CSV_HEADER):
        raise DataFormatError(f"Unexpected extra column '{header[len(CSV_HEADER)]}'",
                              row=1, column=header[len(CSV_HEADER)])

    try:
        raw = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    except pd.errors.ParserError as e:
        raise DataFormatError(f"Malformed row in {path}: {e}") from e
    except pd.errors.EmptyDataError:
        raw = pd.DataFrame(columns=list(CSV_HEADER))

    frame = pd.DataFrame(index=raw.index)
    for column in CSV_HEADER:
        cells = raw[column]
        blank = cells.isna() | (cells.astype(str).str.strip() == '')
        if blank.any():
            position = int(np.flatnonzero(blank.to_numpy())[0])
            raise DataFormatError("Missing value", row=position + 2, column=column)

        if column == LABEL_COLUMN:
            labels = cells.str.strip().map(LABEL_TEXT)
            if labels.isna().any():
                position = int(np.flatnonzero(labels.isna().to_numpy())[0])
                raise DataFormatError(f"Label {cells.iloc[position]!r} outside {{+1, -1}}",
                                      row=position + 2, column=column)
            frame[column] = labels.astype(int)
            continue

        try:
            values = cells.to_numpy(dtype=object).astype(float)
        except ValueError:
            values = None
            for position, cell in enumerate(cells):
                try:
                    float(cell)
                except ValueError:
                    raise DataFormatError(f"Non-numeric value {cell!r}", row=position + 2,
                                          column=column) from None
        if not np.isfinite(values).all():
            position = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DataFormatError(f"Non-finite value {cells.iloc[position]!r}", row=position + 2,
                                  column=column)
        frame[column] = values

    dataset = Dataset(frame)
    logger.debug(f"Loaded {len(dataset)} samples from {path} (class counts {dataset.class_counts})")
    return dataset


def write_csv(dataset: Dataset, path: str):
    """
    Write a dataset in the canonical CSV format.

    Floats are written in shortest round-trip form, so load_csv reproduces
    the values bit for bit.

    Raises:
        DatasetError: Empty dataset or dataset without all seven features
        DataFormatError: Unwritable path
    """
    if len(dataset) == 0:
        raise DatasetError("Cannot write an empty dataset")
    if dataset.columns != FEATURE_COLUMNS:
        raise DatasetError("Only datasets holding all seven features can be written as CSV")

    try:
        dataset.frame[list(CSV_HEADER)].to_csv(path, index=False, lineterminator='\n', encoding='utf-8')
    except OSError as e:
        raise DataFormatError(f"Cannot write dataset to {path}: {e}") from e
    logger.debug(f"Wrote {len(dataset)} samples to {path}")


def train_test_split(dataset: Dataset, spec: SplitSpec = SplitSpec()) -> Tuple[Dataset, Dataset]:
    """
    Randomly partition a dataset into train and test parts.

    |test| = round(test_fraction * |dataset|), rounding halves up; with
    ``spec.stratify`` the rounding is applied within each class. Both parts
    keep the original sample order.

    Raises:
        DatasetError: If either part would be empty
    """
    n = len(dataset)
    if n < 2:
        raise DatasetError(f"Need at least 2 samples to split, got {n}")

    rng = np.random.default_rng(int(spec.seed))
    if spec.stratify:
        test_parts = []
        for label in (Label.GALLOPING, Label.NORMAL):
            indices = dataset.with_label_indices(label)
            count = _round_half_up(spec.test_fraction * len(indices))
            test_parts.append(rng.permutation(indices)[:count])
        test_idx = np.concatenate(test_parts)
    else:
        test_idx = rng.permutation(n)[:_round_half_up(spec.test_fraction * n)]

    if len(test_idx) < 1 or len(test_idx) > n - 1:
        raise DatasetError(
            f"A {spec.test_fraction:.0%} test split of {n} samples leaves one part empty")

    in_test = np.zeros(n, dtype=bool)
    in_test[test_idx] = True
    return dataset.subset(np.flatnonzero(~in_test)), dataset.subset(np.flatnonzero(in_test))


def standardize(dataset: Dataset) -> Dataset:
    """
    Z-score every feature column (population standard deviation).

    Returns:
        Dataset with column means 0 and standard deviations 1, carrying the
        fitted Standardization for later use on unseen samples

    Raises:
        DatasetError: If a feature is constant (names the feature) or the dataset is empty
    """
    if len(dataset) == 0:
        raise DatasetError("Cannot standardize an empty dataset")

    X = dataset.X
    for position, column in enumerate(dataset.columns):
        if np.ptp(X[:, position]) == 0:
            raise DatasetError(f"Feature '{column}' has zero variance")

    means = X.mean(axis=0)
    stds = X.std(axis=0)
    record = Standardization(dataset.columns, tuple(means), tuple(stds))
    return Dataset.from_arrays(record.transform(X), dataset.y, dataset.columns, record)


def apply_standardization(dataset: Dataset, record: Standardization) -> Dataset:
    """Apply a fitted Standardization to a dataset with the same (or fewer) columns."""
    record = record.restrict(dataset.columns)
    return Dataset.from_arrays(record.transform(dataset.X), dataset.y, dataset.columns, record)


def project(dataset: Dataset, mask: FeatureMask) -> Dataset:
    """
    Keep only the masked features; labels, order and count are unchanged.

    Raises:
        DatasetError: If the dataset lacks a masked feature
    """
    missing = [c for c in mask.columns if c not in dataset.columns]
    if missing:
        raise DatasetError(f"Dataset has no column for {', '.join(missing)}")
    return Dataset(dataset.frame[list(mask.columns) + [LABEL_COLUMN]].copy(), dataset.standardization)
