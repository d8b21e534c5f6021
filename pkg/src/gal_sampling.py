#!/usr/bin/env python
# coding: utf-8

"""
Class balancing: uniform random under-sampling of the majority class and
SMOTE over-sampling of the minority class.

Both operate on whatever feature space the dataset is in (the standardized
one inside experiments) and never touch samples of the other class.
"""

import math
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from gal_batch_processor import get_batch_processor
from gal_data import Dataset, Label, MAX_SEED, derive_seed
from gal_errors import SamplingError

logger = logging.getLogger('galloping_prediction')


class SamplingKind(Enum):
    NONE = 'none'
    UNDER = 'under'
    SMOTE = 'smote'


@dataclass(frozen=True)
class SamplingStrategy:
    """
    How to rebalance a training set.

    target_ratio is the minority:majority ratio reached after adjustment;
    k_neighbors applies to SMOTE only.
    """
    kind: SamplingKind = SamplingKind.NONE
    k_neighbors: int = 5
    target_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.kind, SamplingKind):
            raise SamplingError(f"Unknown sampling kind {self.kind!r}")
        if self.k_neighbors < 1:
            raise SamplingError(f"k_neighbors must be at least 1, got {self.k_neighbors}")
        if not (math.isfinite(self.target_ratio) and self.target_ratio > 0):
            raise SamplingError(f"target_ratio must be positive, got {self.target_ratio}")
        if not 0 <= self.seed < MAX_SEED:
            raise SamplingError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @classmethod
    def from_cli(cls, kind: str, k: int = 5, ratio: float = 1.0, seed: int = 0) -> 'SamplingStrategy':
        try:
            sampling_kind = SamplingKind(kind.strip().lower())
        except ValueError:
            raise SamplingError(f"Unknown sampling kind '{kind}'; expected none, under or smote") from None
        return cls(sampling_kind, k, ratio, seed)

    def with_seed(self, seed: int) -> 'SamplingStrategy':
        return SamplingStrategy(self.kind, self.k_neighbors, self.target_ratio, seed)

    @property
    def name(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class SmoteDraw:
    """Synthetic points with their provenance (parent row, neighbour row, interpolation weight)."""
    points: np.ndarray
    parents: np.ndarray
    neighbors: np.ndarray
    weights: np.ndarray


def _class_roles(dataset: Dataset) -> Tuple[Label, Label]:
    """(minority, majority); galloping counts as minority on a tie."""
    galloping, normal = dataset.class_counts
    if galloping == 0 or normal == 0:
        raise SamplingError(f"Sampling needs both classes, got {galloping} galloping and {normal} normal")
    if galloping <= normal:
        return Label.GALLOPING, Label.NORMAL
    return Label.NORMAL, Label.GALLOPING


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def k_nearest_neighbors(points: np.ndarray, k: int) -> np.ndarray:
    """
    Exact k nearest neighbours of every point among the others (Euclidean).

    Returns:
        (n, k) index array, nearest first; equal distances go to the lower index
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    if not 1 <= k < n:
        raise SamplingError(f"Need more than k={k} points for neighbour search, got {n}")

    def block_neighbors(block: np.ndarray, start: int) -> np.ndarray:
        distances = cdist(block, points, 'sqeuclidean')
        rows = np.arange(len(block))
        distances[rows, start + rows] = np.inf
        kth = np.partition(distances, k - 1, axis=1)[:, k - 1]
        result = np.empty((len(block), k), dtype=int)
        for r in rows:
            candidates = np.flatnonzero(distances[r] <= kth[r])
            order = np.lexsort((candidates, distances[r, candidates]))
            result[r] = candidates[order[:k]]
        return result

    return get_batch_processor().map_batches(points, block_neighbors)


def generate_smote_samples(minority: np.ndarray, n_new: int, k: int, rng: np.random.Generator,
                           weights: Optional[np.ndarray] = None) -> SmoteDraw:
    """
    Interpolate n_new synthetic points between minority points and their neighbours.

    Every minority point is a parent floor(n_new / n) times; the remaining
    parents are drawn without replacement. Each parent picks one of its k
    nearest neighbours uniformly and a weight t in [0, 1] (or the given
    weights), giving parent + t * (neighbour - parent).
    """
    minority = np.atleast_2d(np.asarray(minority, dtype=float))
    n = len(minority)
    neighbor_table = k_nearest_neighbors(minority, k)

    parents = np.concatenate([np.repeat(np.arange(n), n_new // n),
                              np.sort(rng.choice(n, n_new % n, replace=False))]).astype(int)
    neighbors = neighbor_table[parents, rng.integers(0, k, size=n_new)]
    if weights is None:
        weights = rng.random(n_new)
    else:
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape != (n_new,) or np.any((weights < 0) | (weights > 1)):
            raise SamplingError(f"Expected {n_new} interpolation weights in [0, 1]")

    origin = minority[parents]
    points = origin + weights[:, None] * (minority[neighbors] - origin)
    return SmoteDraw(points=points, parents=parents, neighbors=neighbors, weights=weights)


def undersample(dataset: Dataset, strategy: SamplingStrategy) -> Dataset:
    """
    Drop uniformly chosen majority samples until minority/majority = target_ratio.

    Sample order is preserved. When nothing needs dropping the dataset is
    returned unchanged with a warning.
    """
    minority_label, majority_label = _class_roles(dataset)
    minority_idx = dataset.with_label_indices(minority_label)
    majority_idx = dataset.with_label_indices(majority_label)

    target = max(1, _round_half_up(len(minority_idx) / strategy.target_ratio))
    if target >= len(majority_idx):
        logger.warning(f"Under-sampling to ratio {strategy.target_ratio} drops nothing "
                       f"({len(minority_idx)} minority, {len(majority_idx)} majority); dataset unchanged")
        return dataset

    rng = np.random.default_rng(derive_seed(strategy.seed, 'undersample'))
    kept = rng.choice(majority_idx, target, replace=False)
    result = dataset.subset(np.sort(np.concatenate([minority_idx, kept])))
    logger.debug(f"Under-sampled {majority_label.name.lower()} class from {len(majority_idx)} to {target}")
    return result


def smote(dataset: Dataset, strategy: SamplingStrategy) -> Dataset:
    """
    Append SMOTE samples of the minority class until minority/majority = target_ratio.

    Raises:
        SamplingError: If the minority class has at most k_neighbors members
    """
    minority_label, majority_label = _class_roles(dataset)
    minority_idx = dataset.with_label_indices(minority_label)
    n_majority = dataset.class_count(majority_label)

    needed = _round_half_up(strategy.target_ratio * n_majority) - len(minority_idx)
    if needed <= 0:
        logger.warning(f"SMOTE to ratio {strategy.target_ratio} needs no synthetic samples; dataset unchanged")
        return dataset
    if len(minority_idx) <= strategy.k_neighbors:
        raise SamplingError(f"SMOTE with k={strategy.k_neighbors} needs more than {strategy.k_neighbors} "
                            f"minority samples, got {len(minority_idx)}")

    rng = np.random.default_rng(derive_seed(strategy.seed, 'smote'))
    draw = generate_smote_samples(dataset.X[minority_idx], needed, strategy.k_neighbors, rng)
    synthetic = Dataset.from_arrays(draw.points, np.full(needed, int(minority_label)),
                                    dataset.columns, dataset.standardization)
    logger.debug(f"SMOTE added {needed} synthetic {minority_label.name.lower()} samples "
                 f"(k={strategy.k_neighbors})")
    return dataset.concat(synthetic)


def apply(dataset: Dataset, strategy: SamplingStrategy) -> Dataset:
    """Dispatch on strategy.kind; NONE returns the dataset itself."""
    if strategy.kind == SamplingKind.NONE:
        return dataset
    if strategy.kind == SamplingKind.UNDER:
        return undersample(dataset, strategy)
    return smote(dataset, strategy)
