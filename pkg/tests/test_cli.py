"""
End-to-end tests of the command line front end through main.run().
"""

import logging

import pandas as pd
import pytest

from gal_data import CSV_HEADER, load_csv, write_csv
from gal_synth import SynthConfig, generate
from main import run


@pytest.fixture(autouse=True)
def restore_logger():
    package_logger = logging.getLogger('galloping_prediction')
    handlers, level, propagate = list(package_logger.handlers), package_logger.level, package_logger.propagate
    yield
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)
    for handler in handlers:
        package_logger.addHandler(handler)
    package_logger.setLevel(level)
    package_logger.propagate = propagate


@pytest.fixture(scope='module')
def data_file(tmp_path_factory):
    path = tmp_path_factory.mktemp('cli') / 'data.csv'
    write_csv(generate(SynthConfig(n_total=1500, galloping_fraction=0.2, seed=3)), str(path))
    return str(path)


def _last_line(capsys):
    return capsys.readouterr().out.strip().splitlines()[-1]


def test_gen_writes_requested_rows(tmp_path, capsys):
    out = tmp_path / 'gen.csv'
    assert run(['gen', '--n', '10000', '--seed', '7', '--out', str(out)]) == 0
    lines = out.read_text(encoding='utf-8').splitlines()
    assert lines[0] == ','.join(CSV_HEADER)
    assert len(lines) == 10001
    assert 'generated 10000 samples' in _last_line(capsys)


def test_gen_config_file_reproduces_data(tmp_path):
    first, second, config = tmp_path / 'a.csv', tmp_path / 'b.csv', tmp_path / 'synth.cfg'
    assert run(['gen', '--n', '600', '--noise', '0.05', '--seed', '9', '--out', str(first),
                '--write-config', str(config)]) == 0
    assert 'label_noise=0.05' in config.read_text(encoding='utf-8')
    assert run(['gen', '--seed', '9', '--config', str(config), '--out', str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_train_then_eval(tmp_path, capsys, data_file):
    model = tmp_path / 'model.svm'
    assert run(['train', '--data', data_file, '--features', 'wind_speed,temperature,precipitation',
                '--seed', '1', '--model', str(model)]) == 0
    assert 'support vectors' in _last_line(capsys)

    metrics = tmp_path / 'metrics.csv'
    assert run(['eval', '--data', data_file, '--model', str(model), '--out', str(metrics)]) == 0
    fields = dict(part.split('=') for part in _last_line(capsys).split())
    assert set(fields) == {'f1', 'precision', 'recall'}
    assert 0.0 <= float(fields['f1']) <= 1.0

    table = pd.read_csv(metrics)
    assert list(table.columns) == ['tp', 'fp', 'fn', 'tn', 'precision', 'recall', 'f1']
    assert int(table[['tp', 'fp', 'fn', 'tn']].sum(axis=1)[0]) == len(load_csv(data_file))


def test_train_with_smote_and_grid_search(tmp_path, data_file):
    model = tmp_path / 'smote.svm'
    assert run(['train', '--data', data_file, '--features', 'wind_speed,temperature', '--seed', '2',
                '--model', str(model), '--sampling', 'smote', '--smote-k', '3', '--grid-search']) == 0
    assert model.read_text(encoding='utf-8').startswith('galloping-svm-model 1')


def test_compare_sampling_is_reproducible(tmp_path, capsys, data_file):
    first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
    for out in (first, second):
        assert run(['--workers', '1', 'compare-sampling', '--data', data_file, '--seed', '4',
                    '--out', str(out)]) == 0
    assert first.read_bytes() == second.read_bytes()
    table = pd.read_csv(first)
    assert list(table['strategy']) == ['none', 'under', 'smote']
    assert 'runtime_seconds' not in table.columns
    assert 'best f1=' in _last_line(capsys)


def test_small_experiments(tmp_path, data_file):
    sweep = tmp_path / 'sweep.csv'
    assert run(['--workers', '1', 'sweep-balance', '--data', data_file, '--seed', '5', '--minority', '80',
                '--counts', '80,160', '--reps', '2', '--out', str(sweep), '--timings']) == 0
    table = pd.read_csv(sweep, keep_default_na=False)
    assert len(table) == 6
    assert 'runtime_seconds' in table.columns

    grid = tmp_path / 'grid.csv'
    assert run(['grid', '--data', data_file, '--seed', '5', '--sizes', '200', '--ratios', '0.2,0.4',
                '--out', str(grid)]) == 0
    assert len(pd.read_csv(grid)) == 2

    search = tmp_path / 'search.csv'
    assert run(['--workers', '4', 'search-features', '--data', data_file, '--seed', '5', '--max-train', '150',
                '--c', '1.0', '--out', str(search)]) == 0
    assert len(pd.read_csv(search)) == 127
    substitutes = pd.read_csv(tmp_path / 'substitute_features.csv', keep_default_na=False)
    assert list(substitutes.columns[:5]) == ['base', 'added', 'mask', 'features', 'f1_gain']
    assert list(substitutes['mask']) == [5, 13, 21, 7, 31, 12, 13, 44, 45]

    repeated = tmp_path / 'repeated.csv'
    assert run(['--workers', '1', 'compare-sampling', '--data', data_file, '--seed', '4', '--reps', '2',
                '--out', str(repeated)]) == 0
    table = pd.read_csv(repeated, keep_default_na=False, dtype=str)
    assert list(table['repetition']) == ['0', '1', 'mean'] * 3
    assert list(table['strategy']) == ['none'] * 3 + ['under'] * 3 + ['smote'] * 3


def test_separation_and_optional_seed(tmp_path, capsys, data_file):
    out = tmp_path / 'separation.csv'
    assert run(['separation', '--data', data_file, '--bins', '10', '--out', str(out)]) == 0
    table = pd.read_csv(out)
    assert len(table) == 7
    assert 'most separated feature' in _last_line(capsys)
    assert run(['separation', '--data', data_file, '--seed', '1', '--out', str(out)]) == 0


def test_usage_errors_exit_2(tmp_path, data_file):
    assert run(['train', '--data', data_file, '--model', str(tmp_path / 'm.svm')]) == 2
    assert run(['bogus']) == 2
    assert run([]) == 2
    assert run(['gen', '--seed', '-4', '--out', str(tmp_path / 'x.csv')]) == 2
    assert run(['train', '--data', data_file, '--seed', '1', '--model', str(tmp_path / 'm.svm'),
                '--features', 'wind_direction']) == 2
    assert run(['--log-level', 'LOUD', 'separation', '--data', data_file]) == 2
    assert run(['--workers', '0', 'separation', '--data', data_file]) == 2
    assert run(['compare-sampling', '--data', data_file, '--seed', '1', '--reps', '0',
                '--out', str(tmp_path / 'c.csv')]) == 2


def test_domain_errors_exit_1(tmp_path, data_file):
    assert run(['eval', '--data', str(tmp_path / 'absent.csv'), '--model', str(tmp_path / 'm.svm')]) == 1
    assert run(['eval', '--data', data_file, '--model', str(tmp_path / 'absent.svm')]) == 1
    assert run(['sweep-balance', '--data', data_file, '--seed', '1', '--minority', '5000']) == 1

    binary = tmp_path / 'binary.csv'
    binary.write_bytes((','.join(CSV_HEADER) + '\n').encode('utf-8') + b'1,2,3,4,5,6,\xff\xfe,1\n')
    assert run(['train', '--data', str(binary), '--seed', '1', '--model', str(tmp_path / 'm.svm')]) == 1

    model = tmp_path / 'trio.svm'
    assert run(['train', '--data', data_file, '--features', 'wind_speed,temperature,precipitation',
                '--seed', '1', '--model', str(model)]) == 0
    assert run(['eval', '--data', data_file, '--model', str(model),
                '--out', str(tmp_path / 'missing_dir' / 'metrics.csv')]) == 1

    bad_config = tmp_path / 'params.yaml'
    bad_config.write_text('no_such_parameter: 3\n', encoding='utf-8')
    assert run(['--config-file', str(bad_config), 'separation', '--data', data_file]) == 1
