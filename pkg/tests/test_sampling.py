"""
Tests for gal_sampling: under-sampling, neighbour search and SMOTE interpolation.
"""

import logging

import numpy as np
import pytest
from scipy.spatial.distance import cdist
from scipy.stats import ks_2samp

from gal_data import Dataset, Label
from gal_errors import SamplingError
from gal_metrics import kl_divergence
from gal_sampling import (SamplingKind, SamplingStrategy, apply, generate_smote_samples, k_nearest_neighbors,
                          smote, undersample)

COLUMNS = ('wind_speed', 'humidity')


def _imbalanced(n_galloping, n_normal, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(1.0, 1.0, size=(n_galloping, 2)), rng.normal(-1.0, 1.0, size=(n_normal, 2))])
    y = np.concatenate([np.ones(n_galloping, dtype=int), -np.ones(n_normal, dtype=int)])
    order = rng.permutation(len(y))
    return Dataset.from_arrays(X[order], y[order], columns=COLUMNS)


def test_undersample_reaches_target_and_keeps_order():
    dataset = Dataset.from_arrays(np.column_stack([np.arange(400.0), np.zeros(400)]),
                                  np.where(np.arange(400) % 4 == 0, 1, -1), columns=COLUMNS)
    result = undersample(dataset, SamplingStrategy(SamplingKind.UNDER, seed=1))
    assert result.class_counts == (100, 100)
    assert np.all(np.diff(result.X[:, 0]) > 0)
    assert np.array_equal(result.X[result.y == 1, 0], dataset.X[dataset.y == 1, 0])


def test_undersample_partial_ratio():
    result = undersample(_imbalanced(100, 300), SamplingStrategy(SamplingKind.UNDER, target_ratio=0.5))
    assert result.class_counts == (100, 200)


def test_balanced_input_is_returned_unchanged(gal_log):
    dataset = _imbalanced(100, 100)
    assert undersample(dataset, SamplingStrategy(SamplingKind.UNDER)) is dataset
    assert smote(dataset, SamplingStrategy(SamplingKind.SMOTE)) is dataset
    warnings = [r for r in gal_log.records if r.levelno == logging.WARNING]
    assert len(warnings) == 2


def test_undersampled_majority_keeps_its_distribution():
    ks_statistics = []
    for seed in range(20):
        dataset = _imbalanced(1000, 10000, seed=seed)
        result = undersample(dataset, SamplingStrategy(SamplingKind.UNDER, seed=seed))
        kept = result.X[result.y == -1, 0]
        original = dataset.X[dataset.y == -1, 0]
        ks_statistics.append(ks_2samp(kept, original).statistic)
        assert kl_divergence(kept, original, 20) <= 0.05
    assert float(np.median(ks_statistics)) <= 0.05


def test_smote_midpoint_with_fixed_weights():
    minority = np.array([[0.0, 0.0], [2.0, 4.0]])
    draw = generate_smote_samples(minority, 2, 1, np.random.default_rng(0), weights=np.full(2, 0.5))
    assert np.array_equal(draw.parents, [0, 1])
    assert np.allclose(draw.points, [[1.0, 2.0], [1.0, 2.0]])

    with pytest.raises(SamplingError):
        generate_smote_samples(minority, 2, 1, np.random.default_rng(0), weights=np.array([0.5, 1.5]))


def test_smote_points_lie_on_parent_neighbour_segments():
    rng = np.random.default_rng(4)
    minority = rng.normal(size=(60, 3))
    draw = generate_smote_samples(minority, 250, 5, np.random.default_rng(1))
    neighbor_table = k_nearest_neighbors(minority, 5)

    assert np.all((draw.weights >= 0) & (draw.weights <= 1))
    for point, parent, neighbor, t in zip(draw.points, draw.parents, draw.neighbors, draw.weights):
        assert neighbor in neighbor_table[parent]
        assert np.allclose(point, minority[parent] + t * (minority[neighbor] - minority[parent]), atol=1e-12)
    low, high = minority.min(axis=0), minority.max(axis=0)
    assert np.all(draw.points >= low - 1e-12) and np.all(draw.points <= high + 1e-12)


def test_smote_uses_every_parent_evenly():
    minority = np.random.default_rng(5).normal(size=(50, 2))
    draw = generate_smote_samples(minority, 130, 3, np.random.default_rng(2))
    counts = np.bincount(draw.parents, minlength=50)
    assert set(counts) <= {2, 3}
    assert counts.sum() == 130


def test_neighbours_match_brute_force():
    points = np.random.default_rng(6).normal(size=(120, 4))
    neighbors = k_nearest_neighbors(points, 7)
    distances = cdist(points, points)
    np.fill_diagonal(distances, np.inf)
    expected = np.argsort(distances, axis=1, kind='stable')[:, :7]
    assert np.array_equal(neighbors, expected)
    assert not np.any(neighbors == np.arange(120)[:, None])


def test_neighbour_ties_go_to_lower_index():
    points = np.array([[0.0], [1.0], [-1.0], [5.0]])
    assert k_nearest_neighbors(points, 1)[0, 0] == 1
    assert list(k_nearest_neighbors(points, 2)[0]) == [1, 2]
    with pytest.raises(SamplingError):
        k_nearest_neighbors(points, 4)


def test_smote_balances_counts():
    dataset = _imbalanced(2000, 6000, seed=7)
    result = smote(dataset, SamplingStrategy(SamplingKind.SMOTE, k_neighbors=5, seed=3))
    assert result.class_counts == (6000, 6000)
    assert result.subset(np.arange(len(dataset))).equals(dataset)
    assert np.all(result.y[len(dataset):] == int(Label.GALLOPING))


def test_smote_needs_more_minority_than_k():
    dataset = _imbalanced(5, 50)
    with pytest.raises(SamplingError):
        smote(dataset, SamplingStrategy(SamplingKind.SMOTE, k_neighbors=5))
    assert smote(dataset, SamplingStrategy(SamplingKind.SMOTE, k_neighbors=4)).class_counts == (50, 50)


def test_minority_may_be_the_normal_class():
    dataset = _imbalanced(300, 100, seed=8)
    assert undersample(dataset, SamplingStrategy(SamplingKind.UNDER)).class_counts == (100, 100)
    assert smote(dataset, SamplingStrategy(SamplingKind.SMOTE)).class_counts == (300, 300)


def test_single_class_is_rejected():
    dataset = Dataset.from_arrays(np.zeros((10, 2)), np.ones(10, dtype=int), columns=COLUMNS)
    with pytest.raises(SamplingError):
        undersample(dataset, SamplingStrategy(SamplingKind.UNDER))


def test_apply_dispatch_and_determinism():
    dataset = _imbalanced(200, 600, seed=9)
    assert apply(dataset, SamplingStrategy()) is dataset
    assert apply(dataset, SamplingStrategy(SamplingKind.UNDER, seed=2)).class_counts == (200, 200)

    strategy = SamplingStrategy(SamplingKind.SMOTE, seed=2)
    assert apply(dataset, strategy).equals(apply(dataset, strategy))
    assert not apply(dataset, strategy).equals(apply(dataset, strategy.with_seed(3)))


def test_strategy_validation():
    assert SamplingStrategy.from_cli(' SMOTE ', k=3).kind is SamplingKind.SMOTE
    assert SamplingStrategy.from_cli('under').name == 'under'
    with pytest.raises(SamplingError):
        SamplingStrategy.from_cli('oversample')
    with pytest.raises(SamplingError):
        SamplingStrategy(SamplingKind.SMOTE, k_neighbors=0)
    with pytest.raises(SamplingError):
        SamplingStrategy(SamplingKind.UNDER, target_ratio=0.0)
    with pytest.raises(SamplingError):
        SamplingStrategy(seed=-1)
