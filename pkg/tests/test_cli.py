import json
import math

import numpy as np
import pandas as pd
import pytest

from mpctune.cli import (
    EXIT_OK,
    EXIT_SEED_FAILED,
    EXIT_USAGE,
    ThetaFileError,
    jsonable,
    load_theta,
    main,
    parse_seeds,
    tune_summary_frame,
)
from mpctune.harness import TRAJECTORY_COLUMNS


@pytest.fixture
def setup_config_file(tmp_path, setup_fast_config):
    path = tmp_path / 'fast.json'
    path.write_text(json.dumps(setup_fast_config))
    return str(path)


@pytest.fixture
def setup_theta_file(tmp_path, setup_constant_theta):
    path = tmp_path / 'theta.json'
    path.write_text(json.dumps({'theta': setup_constant_theta}))
    return str(path)


def test_load_theta(tmp_path, setup_theta_file, setup_constant_theta):

    np.testing.assert_array_equal(load_theta(setup_theta_file), setup_constant_theta)

    bare = tmp_path / 'bare.json'
    bare.write_text(json.dumps(setup_constant_theta))
    np.testing.assert_array_equal(load_theta(str(bare)), setup_constant_theta)


@pytest.mark.parametrize('content', [
    '[1, 2, 3]',
    '{"coeffs": []}',
    '[' + ', '.join(['0'] * 14) + ', NaN]',
    '[' + ', '.join(['"a"'] * 15) + ']',
    'not json',
])
def test_malformed_theta(tmp_path, content):

    path = tmp_path / 'theta.json'
    path.write_text(content)

    with pytest.raises(ThetaFileError):
        load_theta(str(path))


def test_missing_theta_file(tmp_path):

    with pytest.raises(ThetaFileError):
        load_theta(str(tmp_path / 'nowhere.json'))


def test_parse_seeds():

    assert parse_seeds('0,1,2') == [0, 1, 2]
    assert parse_seeds('7') == [7]

    with pytest.raises(Exception):
        parse_seeds('a,b')


def test_jsonable():

    value = jsonable({'a': np.float64(1.5), 'b': [np.inf, -np.inf, math.nan],
                      'c': np.arange(2), 'd': np.bool_(True)})

    assert value == {'a': 1.5, 'b': [None, None, None], 'c': [0, 1], 'd': True}


def test_tune_summary_frame():

    curves = {0: np.array([np.nan, 2.0, 3.0]), 1: np.array([1.0, 1.0, 5.0])}
    summary = tune_summary_frame(curves)

    assert list(summary.columns) == ['iteration', 'mean', 'std', 'min', 'max', 'n_seeds']
    assert summary['n_seeds'].tolist() == [1, 2, 2]
    assert summary['mean'].tolist() == [1.0, 1.5, 4.0]
    assert summary['max'].tolist() == [1.0, 2.0, 5.0]


def test_missing_feed_concentration_exits_with_usage_error(tmp_path):

    path = tmp_path / 'incomplete.json'
    path.write_text(json.dumps({'scenario': 'noise_free'}))

    assert main(['simulate', '--config', str(path), '--out', str(tmp_path)]) == EXIT_USAGE


def test_assess_needs_theta(tmp_path, setup_config_file):

    assert main(['assess', '--config', setup_config_file, '--out', str(tmp_path)]) == EXIT_USAGE


def test_malformed_theta_exits_with_usage_error(tmp_path, setup_config_file):

    theta = tmp_path / 'short.json'
    theta.write_text('[1, 2]')

    code = main(['simulate', '--config', setup_config_file, '--theta', str(theta),
                 '--out', str(tmp_path)])

    assert code == EXIT_USAGE


def test_simulate(tmp_path, setup_config_file, setup_theta_file):

    out = tmp_path / 'out'
    code = main(['simulate', '--config', setup_config_file, '--theta', setup_theta_file,
                 '--out', str(out), '--seeds', '0,1'])

    assert code == EXIT_OK

    text = (out / 'simulate_seed0.csv').read_text()
    assert text.splitlines()[0] == ','.join(TRAJECTORY_COLUMNS)
    assert '\r' not in text

    frame = pd.read_csv(out / 'simulate_seed1.csv')
    assert len(frame) == 6
    assert (frame['F'].iloc[:-1] == 5.0).all()

    manifest = json.loads((out / 'manifest_simulate.json').read_text())
    assert manifest['seeds'] == [0, 1]
    assert manifest['failed_seeds'] == []
    assert manifest['config']['plant']['cA0'] == 5.1
    assert manifest['assumptions']['Vin_equals_VR']


def test_tune(tmp_path, setup_config_file):

    out = tmp_path / 'tune'
    code = main(['tune', '--config', setup_config_file, '--out', str(out), '--seeds', '0,1'])

    assert code == EXIT_OK

    lines = (out / 'tune_seed0.jsonl').read_text().splitlines()
    assert len(lines) == 3

    records = [json.loads(line) for line in lines]
    assert [record['iteration'] for record in records] == [0, 1, 2]
    for record in records:
        assert len(record['theta']) == 15
        assert set(record) >= {'iteration', 'theta', 'y_obj', 'y_con', 'eta', 'acq_value',
                               'mode', 'best_feasible', 'wall_time_s', 'rng_stream_id'}

    best = json.loads((out / 'best_theta_seed0.json').read_text())
    assert len(best['theta']) == 15
    assert best['seed'] == 0
    assert best['report']['con_gp']['kernel']['noise_variance'] <= 1e-6

    curve = pd.read_csv(out / 'best_so_far_seed0.csv')
    assert len(curve) == 3
    objective = curve['best_feasible_objective'].dropna().values
    assert np.all(np.diff(objective) <= 0)

    summary = pd.read_csv(out / 'tune_summary.csv')
    assert list(summary.columns) == ['iteration', 'mean', 'std', 'min', 'max', 'n_seeds']
    assert len(summary) == 3


def test_tune_is_reproducible(tmp_path, setup_config_file):

    for name in ('first', 'second'):
        assert main(['tune', '--config', setup_config_file, '--out', str(tmp_path / name),
                     '--seeds', '3']) == EXIT_OK

    first = (tmp_path / 'first' / 'tune_seed3.jsonl').read_bytes()
    second = (tmp_path / 'second' / 'tune_seed3.jsonl').read_bytes()

    assert first == second


def test_baseline_and_assess(tmp_path, setup_config_file):

    out = tmp_path / 'baseline'
    assert main(['baseline', '--config', setup_config_file, '--out', str(out)]) == EXIT_OK

    baseline = json.loads((out / 'baseline_seed0.json').read_text())
    assert baseline['theta'][14] == 0.0
    assert (out / 'baseline_trajectory_seed0.csv').exists()

    code = main(['assess', '--config', setup_config_file, '--out', str(out),
                 '--theta', str(out / 'baseline_seed0.json')])
    assert code == EXIT_OK

    report = json.loads((out / 'assess_seed0.json').read_text())
    assert report['n_runs'] == 2
    assert len(report['per_step_violation_freq']) == 5
    assert set(report['production_stats']) == {'mean', 'std', 'min', 'max'}


def test_failed_seed_sets_exit_code(monkeypatch, tmp_path, setup_config_file, setup_theta_file):

    from mpctune import harness

    original = harness.run_closed_loop

    def failing_for_seed_one(theta, noise, rng, config):
        if failing_for_seed_one.calls == 1:
            failing_for_seed_one.calls += 1
            raise RuntimeError('solver crashed')
        failing_for_seed_one.calls += 1
        return original(theta, noise, rng, config)

    failing_for_seed_one.calls = 0
    monkeypatch.setattr(harness, 'run_closed_loop', failing_for_seed_one)

    code = main(['simulate', '--config', setup_config_file, '--theta', setup_theta_file,
                 '--out', str(tmp_path), '--seeds', '0,1'])

    assert code == EXIT_SEED_FAILED
    manifest = json.loads((tmp_path / 'manifest_simulate.json').read_text())
    assert manifest['failed_seeds'] == [1]
