import os

import pytest
from pytest import fixture

from mpctune.config import default_config, load_config, merge
from mpctune.harness import mpc_config
from mpctune.plant import PLANT_PARAMETERS

BENCHMARK_CA0 = 5.1


def pytest_collection_modifyitems(config, items):
    if os.environ.get('MPCTUNE_RUN_BENCHMARK') == '1':
        return
    skip_benchmark = pytest.mark.skip(reason='set MPCTUNE_RUN_BENCHMARK=1 to run benchmark experiments')
    for item in items:
        if 'benchmark' in item.keywords:
            item.add_marker(skip_benchmark)


@fixture(scope='function')
def setup_plant_parameters():
    return dict(PLANT_PARAMETERS, cA0=BENCHMARK_CA0)


@fixture(scope='function')
def setup_config():
    return merge(default_config(), {'plant': {'cA0': BENCHMARK_CA0}})


@fixture(scope='function')
def setup_benchmark_config():
    return load_config(os.path.join(os.path.dirname(__file__), '..', 'scripts', 'cstr_benchmark.json'))


@fixture(scope='function')
def setup_fast_config():
    return merge(default_config(), {
        'plant': {'cA0': BENCHMARK_CA0},
        'simulation': {'T': 5},
        'mpc': {'Np': 3, 'max_iters': 60},
        'bo': {
            'budget': 3,
            'n_init': 2,
            'acq_restarts': 2,
            'acq_local_iters': 20,
            'gp_restarts': 2,
        },
        'prbs': {'n_points': 200, 'hold': 20},
        'assess': {'n_runs': 2},
    })


@fixture(scope='function')
def setup_mpc_config(setup_config):
    settings = mpc_config(setup_config, 0.0)
    settings.update({'Np': 2, 'restarts': 8})
    return settings


@fixture(scope='function')
def setup_constant_theta():
    """
    Tuning vector whose model predicts cB = -1 mol/L and TR = 125 degC for
    every input, so the controller always picks the minimum flow.

    """
    theta = [0.0] * 15
    theta[0] = -0.5
    theta[7] = 0.5
    return theta


@fixture(scope='function')
def setup_bo_config():
    return {
        'budget': 8,
        'n_init': 5,
        'beta': 0.05,
        'acq_restarts': 4,
        'acq_local_iters': 50,
        'mode': 'EIC',
        'gp_restarts': 2,
        'gp_bounds': None,
        'default_kernel': {
            'lengthscale': 0.5,
            'signal_variance': 1.0,
            'noise_variance': 1e-6,
        },
        'record_wall_time': False,
        'theta_bounds': [[-2.0, 2.0], [-2.0, 2.0]],
    }
