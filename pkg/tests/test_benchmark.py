"""
Full CSTR tuning studies on scripts/cstr_benchmark.json. Hours of runtime;
enable with MPCTUNE_RUN_BENCHMARK=1.

"""
import numpy as np
import pytest

from mpctune.config import merge
from mpctune.harness import (
    baseline_openloop_id,
    bo_settings,
    make_evaluator,
    monte_carlo_assess,
    noise_spec,
    run_closed_loop,
)
from mpctune.optimizer import run


def tuned_theta(config, seed):
    _, report = run(bo_settings(config), make_evaluator(config), seed)
    return np.array(report['theta_star'])


@pytest.mark.benchmark
def test_noise_free_tuning_beats_openloop_identification(setup_benchmark_config):

    config = setup_benchmark_config
    noise = noise_spec(config)
    assert noise == {'sigma_B': 0.0, 'sigma_R': 0.0}

    baseline = baseline_openloop_id(noise, 0, config)
    baseline_production = baseline['result']['production']

    tuned = []
    for seed in range(3):
        theta = tuned_theta(config, seed)
        result = run_closed_loop(theta, noise, np.random.default_rng(seed), config)
        tuned.append((result['production'], theta, result))

    tuned.sort(key=lambda item: item[0])
    production, _, result = tuned[1]

    assert production >= 1.5 * baseline_production

    TR = result['states'][:, 2]
    assert np.all((TR >= 100.0) & (TR <= 150.0))


@pytest.mark.benchmark
def test_noisy_tuning_respects_chance_constraint(setup_benchmark_config):

    config = merge(setup_benchmark_config, {'scenario': 'noisy'})
    noise = noise_spec(config)

    theta = tuned_theta(config, 0)
    baseline = baseline_openloop_id(noise, 0, config)

    tuned_report = monte_carlo_assess(theta, 100, noise, 1, config)
    baseline_report = monte_carlo_assess(baseline['theta'], 100, noise, 1, config)

    tuned_violation = np.array(tuned_report['per_step_violation_freq'])
    baseline_violation = np.array(baseline_report['per_step_violation_freq'])

    assert np.all(tuned_violation <= 0.10)
    assert tuned_violation.max() < baseline_violation.max()
