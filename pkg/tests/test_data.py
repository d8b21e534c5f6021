"""
Tests for gal_data: feature model, CSV codec, splitting, standardization, projection.
"""

import math

import numpy as np
import pandas as pd
import pytest

from gal_data import (CSV_HEADER, FEATURE_COLUMNS, Dataset, FeatureId, FeatureMask, Label, SplitSpec,
                      Standardization, WeatherSample, all_masks, apply_standardization, derive_seed,
                      load_csv, project, standardize, train_test_split, write_csv)
from gal_errors import DataFormatError, DatasetError


def _random_dataset(n, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, len(FeatureId))) * [3, 10, 8, 2, 1.5, 0.5, 0.2] + [6, 80, 5, 2, 2, 0.2, 0.3]
    y = np.where(rng.random(n) < 0.3, 1, -1)
    return Dataset.from_arrays(X, y)


def _write_lines(path, lines):
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return str(path)


def test_feature_order_matches_csv_header():
    assert FEATURE_COLUMNS == ('wind_speed', 'humidity', 'temperature', 'precipitation',
                               'ice_thickness', 'vertical_wind_speed', 'amplitude')
    assert CSV_HEADER[-1] == 'label'
    assert [int(f) for f in FeatureId] == list(range(7))
    assert FeatureId.from_column('Temperature') == FeatureId.TEMPERATURE


def test_feature_masks():
    assert FeatureMask.ALL.mask == 127
    assert len(FeatureMask.ALL) == 7
    assert FeatureMask.WEATHER_TRIO.mask == 13
    assert FeatureMask.WEATHER_TRIO.columns == ('wind_speed', 'temperature', 'precipitation')
    assert FeatureMask.from_names(['precipitation', 'wind_speed', 'temperature']) == FeatureMask.WEATHER_TRIO
    assert str(FeatureMask(5)) == 'wind_speed+temperature'

    masks = all_masks()
    assert len(masks) == 127
    assert len({m.mask for m in masks}) == 127

    for bad in (0, 128, -1):
        with pytest.raises(ValueError):
            FeatureMask(bad)
    with pytest.raises(ValueError):
        FeatureMask.from_names(['wind_direction'])


def test_weather_sample_requires_finite_values():
    sample = WeatherSample((1, 2, 3, 4, 5, 6, 7), 1)
    assert sample.label is Label.GALLOPING
    assert sample.value(FeatureId.TEMPERATURE) == 3.0
    with pytest.raises(ValueError):
        WeatherSample((1, 2, float('nan'), 4, 5, 6, 7), -1)
    with pytest.raises(ValueError):
        WeatherSample((1, 2, 3), -1)
    with pytest.raises(ValueError):
        WeatherSample((1, 2, 3, 4, 5, 6, 7), 0)


def test_dataset_from_samples_keeps_order():
    samples = [WeatherSample((i, 50, 0, 1, 0, 0, 0.1), 1 if i % 2 else -1) for i in range(5)]
    dataset = Dataset.from_samples(samples)
    assert len(dataset) == 5
    assert dataset.class_counts == (2, 3)
    assert dataset.samples() == samples


def test_csv_round_trip_is_exact(tmp_path):
    dataset = _random_dataset(200, seed=4)
    path = str(tmp_path / 'data.csv')
    write_csv(dataset, path)

    reloaded = load_csv(path)
    assert reloaded.equals(dataset)
    assert np.array_equal(reloaded.X, dataset.X)

    with open(path, encoding='utf-8') as f:
        assert f.readline().strip() == ','.join(CSV_HEADER)


def test_write_csv_rejects_empty_and_projected(tmp_path):
    dataset = _random_dataset(10)
    with pytest.raises(DatasetError):
        write_csv(dataset.subset([]), str(tmp_path / 'empty.csv'))
    with pytest.raises(DatasetError):
        write_csv(project(dataset, FeatureMask.WEATHER_TRIO), str(tmp_path / 'trio.csv'))


def test_load_csv_reports_header_mismatch(tmp_path):
    header = 'wind_speed,humidity,temp,precipitation,ice_thickness,vertical_wind_speed,amplitude,label'
    path = _write_lines(tmp_path / 'bad.csv', [header, '1,2,3,4,5,6,7,1'])
    with pytest.raises(DataFormatError) as excinfo:
        load_csv(path)
    assert excinfo.value.row == 1
    assert excinfo.value.column == 'temp'


def test_load_csv_reports_invalid_utf8(tmp_path):
    path = tmp_path / 'binary.csv'
    path.write_bytes((','.join(CSV_HEADER) + '\n1,2,3,4,5,6,7,1\n').encode('utf-8') + b'1,2,3,4,5,6,\xff\xfe,1\n')
    with pytest.raises(DataFormatError, match='0xff') as excinfo:
        load_csv(str(path))
    assert excinfo.value.row == 3


def test_written_values_reparse_exactly(tmp_path):
    X = np.array([[0.1, 1e-5, -0.0, 1 / 3, 2.0 ** 60, 5e-324, 7.0]])
    dataset = Dataset.from_arrays(X, [1])
    path = tmp_path / 'values.csv'
    write_csv(dataset, str(path))
    assert path.read_text(encoding='utf-8').splitlines()[1].endswith(',1')
    assert np.array_equal(load_csv(str(path)).X, X)


def test_load_csv_reports_missing_and_bad_cells(tmp_path):
    header = ','.join(CSV_HEADER)

    path = _write_lines(tmp_path / 'missing.csv', [header, '1,2,3,4,5,6,7,1', '1,2,,4,5,6,7,-1'])
    with pytest.raises(DataFormatError) as excinfo:
        load_csv(path)
    assert (excinfo.value.row, excinfo.value.column) == (3, 'temperature')
    assert 'line 3' in str(excinfo.value)

    path = _write_lines(tmp_path / 'text.csv', [header, '1,2,3,4,5,6,seven,1'])
    with pytest.raises(DataFormatError) as excinfo:
        load_csv(path)
    assert (excinfo.value.row, excinfo.value.column) == (2, 'amplitude')

    path = _write_lines(tmp_path / 'label.csv', [header, '1,2,3,4,5,6,7,1', '1,2,3,4,5,6,7,0'])
    with pytest.raises(DataFormatError) as excinfo:
        load_csv(path)
    assert (excinfo.value.row, excinfo.value.column) == (3, 'label')

    path = _write_lines(tmp_path / 'inf.csv', [header, '1,2,3,inf,5,6,7,1'])
    with pytest.raises(DataFormatError) as excinfo:
        load_csv(path)
    assert excinfo.value.column == 'precipitation'

    with pytest.raises(DataFormatError):
        load_csv(str(tmp_path / 'absent.csv'))


def test_split_sizes_and_partition():
    dataset = _random_dataset(10)
    train, test = train_test_split(dataset, SplitSpec(0.25, seed=1))
    assert len(test) == 3  # floor(2.5 + 0.5)
    assert len(train) == 7

    dataset = _random_dataset(1000)
    train, test = train_test_split(dataset, SplitSpec(seed=5))
    assert len(test) == 250
    combined = pd.concat([train.frame, test.frame]).sort_values(list(FEATURE_COLUMNS)).reset_index(drop=True)
    original = dataset.frame.sort_values(list(FEATURE_COLUMNS)).reset_index(drop=True)
    pd.testing.assert_frame_equal(combined, original)


def test_split_preserves_relative_order():
    X = np.arange(40, dtype=float).reshape(40, 1)
    dataset = Dataset.from_arrays(X, np.where(np.arange(40) % 3 == 0, 1, -1), columns=('wind_speed',))
    train, test = train_test_split(dataset, SplitSpec(seed=9))
    assert np.all(np.diff(train.X[:, 0]) > 0)
    assert np.all(np.diff(test.X[:, 0]) > 0)


def test_split_is_deterministic_and_seed_sensitive():
    dataset = _random_dataset(1000)
    first = train_test_split(dataset, SplitSpec(seed=42))[1]
    second = train_test_split(dataset, SplitSpec(seed=42))[1]
    assert first.equals(second)

    different = 0
    for seed in range(100):
        a = train_test_split(dataset, SplitSpec(seed=seed))[1]
        b = train_test_split(dataset, SplitSpec(seed=seed + 1000))[1]
        different += not a.equals(b)
    assert different >= 99


def test_stratified_split_rounds_per_class():
    dataset = _random_dataset(1000, seed=7)
    galloping, normal = dataset.class_counts
    train, test = train_test_split(dataset, SplitSpec(0.25, seed=3, stratify=True))
    assert test.class_count(Label.GALLOPING) == math.floor(0.25 * galloping + 0.5)
    assert test.class_count(Label.NORMAL) == math.floor(0.25 * normal + 0.5)


def test_split_errors():
    with pytest.raises(DatasetError):
        train_test_split(_random_dataset(1), SplitSpec())
    with pytest.raises(DatasetError):
        train_test_split(_random_dataset(3), SplitSpec(0.1))
    with pytest.raises(ValueError):
        SplitSpec(test_fraction=1.0)


def test_standardize_gives_zero_mean_unit_sd():
    dataset = _random_dataset(500, seed=8)
    standardized = standardize(dataset)
    X = standardized.X
    assert np.allclose(X.mean(axis=0), 0.0, atol=1e-9)
    assert np.allclose(X.std(axis=0), 1.0, atol=1e-9)
    assert np.array_equal(standardized.y, dataset.y)
    assert standardized.standardization.columns == FEATURE_COLUMNS
    assert np.allclose(standardized.standardization.means, dataset.X.mean(axis=0))


def test_standardize_rejects_constant_feature():
    dataset = _random_dataset(50)
    frame = dataset.frame.copy()
    frame['humidity'] = 0.1
    with pytest.raises(DatasetError, match='humidity'):
        standardize(Dataset(frame))


def test_apply_standardization_uses_recorded_statistics():
    train, test = train_test_split(_random_dataset(400, seed=2), SplitSpec(seed=1))
    standardized = standardize(train)
    record = standardized.standardization
    applied = apply_standardization(test, record)
    expected = (test.X - np.array(record.means)) / np.array(record.stds)
    assert np.array_equal(applied.X, expected)

    trio = apply_standardization(project(test, FeatureMask.WEATHER_TRIO), record)
    assert trio.columns == FeatureMask.WEATHER_TRIO.columns
    assert trio.standardization == record.restrict(FeatureMask.WEATHER_TRIO.columns)


def test_standardization_validates_spread():
    with pytest.raises(ValueError):
        Standardization(('wind_speed',), (1.0,), (0.0,))


def test_project_keeps_labels_and_order():
    dataset = _random_dataset(30)
    projected = project(dataset, FeatureMask.WEATHER_TRIO)
    assert projected.columns == ('wind_speed', 'temperature', 'precipitation')
    assert np.array_equal(projected.y, dataset.y)
    assert np.array_equal(projected.X, dataset.X[:, [0, 2, 3]])
    assert project(dataset, FeatureMask.ALL).equals(dataset)
    with pytest.raises(DatasetError):
        project(projected, FeatureMask.ALL)


def test_derive_seed_streams():
    assert derive_seed(1, 'split') == derive_seed(1, 'split')
    assert derive_seed(1, 'split') != derive_seed(1, 'smote')
    assert derive_seed(1, 'split') != derive_seed(2, 'split')
    assert 0 <= derive_seed(2 ** 64 - 1, 'balance/2000/3') < 2 ** 64
    with pytest.raises(ValueError):
        derive_seed(-1, 'split')
