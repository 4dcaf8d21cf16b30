"""
Experiment configuration

A single JSON document merged over the defaults below. Every constant of the
benchmark has a key; the feed concentration cA0 has none and must be given.

"""
import copy
import json
import logging
import os

import numpy as np

from mpctune.acquisition import MODES
from mpctune.gp import KernelParams, default_bounds, hyperparameter_log_bounds
from mpctune.narx import N_COEFFS, check_scaling
from mpctune.optimizer import BO_PARAMETERS, gp_bounds
from mpctune.plant import INITIAL_STATE, PLANT_PARAMETERS, STATE_NAMES, validate_plant_parameters

logger = logging.getLogger(__name__)

ENV_OUTPUT_DIR = 'MPCTUNE_OUTPUT_DIR'
DEFAULT_OUTPUT_DIR = 'results'

NOISE_FREE = 'noise_free'
NOISY = 'noisy'
SCENARIOS = (NOISE_FREE, NOISY)


class ConfigError(ValueError):
    """The experiment config is incomplete or inconsistent."""


def default_config():
    """
    Defaults for every key except plant.cA0.

    """
    bo = copy.deepcopy(BO_PARAMETERS)
    bo.update({
        'M': 1,
        'theta_bounds': [[-2.0, 2.0]] * N_COEFFS + [[0.0, 0.2]],
    })

    return {
        'scenario': NOISE_FREE,
        'seeds': [0],
        'plant': dict(PLANT_PARAMETERS),
        'initial_state': dict(INITIAL_STATE),
        'noise': {
            'sigma_B': 0.2,
            'sigma_R': 10.0,
        },
        'simulation': {
            'dt': 0.005,
            'T': 40,
            'substeps': 10,
            'epsilon': 0.05,
            'TR_bounds': [100.0, 150.0],
            'F_bounds': [5.0, 35.0],
            'Vin': 10.01,
        },
        'scaling': {
            'cB': [0.0, 2.0],
            'TR': [100.0, 150.0],
            'F': [5.0, 35.0],
        },
        'mpc': {
            'Np': 10,
            'penalty_weight': 1e3,
            'restarts': 0,
            'max_iters': 500,
            'tolerance': 1e-6,
        },
        'bo': bo,
        'prbs': {
            'n_points': 3000,
            'hold': 100,
            'holdout_fraction': 0.2,
        },
        'assess': {
            'n_runs': 100,
        },
        'output_dir': None,
        'dump_trajectories': False,
    }


def merge(base, override):
    """
    Recursive dict merge; values of override win, nested dicts are merged.

    """
    merged = copy.deepcopy(base)

    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)

    return merged


def load_config(path):
    """
    Read, merge and validate an experiment config file.

    Raises
    ------
    ConfigError
        If the file cannot be read or parsed, or the result is invalid.

    """
    try:
        with open(path, 'r') as config_file:
            overrides = json.load(config_file)
    except (OSError, ValueError) as err:
        raise ConfigError('Cannot read config {}: {}'.format(path, err))

    if not isinstance(overrides, dict):
        raise ConfigError('Config {} must hold a JSON object'.format(path))

    config = merge(default_config(), overrides)
    validate_config(config)

    return config


def _require(condition, message):
    if not condition:
        raise ConfigError(message)


def validate_config(config):
    """
    Raise ConfigError unless config describes a runnable experiment.

    """
    _require(config['scenario'] in SCENARIOS,
             'scenario must be one of {}, got {!r}'.format(SCENARIOS, config['scenario']))

    seeds = config['seeds']
    _require(isinstance(seeds, list) and len(seeds) > 0
             and all(isinstance(s, int) and s >= 0 for s in seeds),
             'seeds must be a non-empty list of non-negative integers')

    _require('cA0' in config['plant'],
             'plant.cA0 (feed concentration, mol/L) has no default and must be set')
    try:
        validate_plant_parameters(config['plant'])
    except ValueError as err:
        raise ConfigError(str(err))

    _require(all(name in config['initial_state'] for name in STATE_NAMES),
             'initial_state needs {}'.format(', '.join(STATE_NAMES)))

    noise = config['noise']
    _require(noise['sigma_B'] >= 0 and noise['sigma_R'] >= 0,
             'noise standard deviations must be non-negative')

    simulation = config['simulation']
    _require(simulation['dt'] > 0, 'simulation.dt must be positive')
    _require(simulation['T'] >= 1, 'simulation.T must be at least 1')
    _require(simulation['substeps'] >= 1, 'simulation.substeps must be at least 1')
    _require(0 <= simulation['epsilon'] < 1, 'simulation.epsilon must lie in [0, 1)')
    for name in ('TR_bounds', 'F_bounds'):
        lower, upper = simulation[name]
        _require(lower < upper, 'simulation.{} needs lower < upper'.format(name))

    try:
        check_scaling({signal: tuple(b) for signal, b in config['scaling'].items()})
    except (KeyError, ValueError) as err:
        raise ConfigError('Invalid scaling: {}'.format(err))

    _require(config['mpc']['Np'] >= 1, 'mpc.Np must be at least 1')

    bo = config['bo']
    _require(1 <= bo['n_init'] <= bo['budget'], 'bo needs 1 <= n_init <= budget')
    _require(bo['M'] >= 1, 'bo.M must be at least 1')
    _require(0 < bo['beta'] <= 0.5, 'bo.beta must lie in (0, 0.5]')
    _require(bo['mode'] in MODES, 'bo.mode must be one of {}'.format(MODES))

    bounds = np.asarray(bo['theta_bounds'], dtype=float)
    _require(bounds.shape == (N_COEFFS + 1, 2),
             'bo.theta_bounds must list {} [lower, upper] pairs'.format(N_COEFFS + 1))
    _require(bool(np.all(bounds[:, 0] < bounds[:, 1])), 'bo.theta_bounds need lower < upper')
    _require(bounds[N_COEFFS, 0] >= 0, 'the backoff bound must be non-negative')

    try:
        KernelParams(**bo['default_kernel'])
    except (TypeError, ValueError) as err:
        raise ConfigError('Invalid bo.default_kernel: {}'.format(err))

    for key in ('gp_bounds', 'con_gp_bounds'):
        try:
            hyperparameter_log_bounds(gp_bounds(bo, key) or default_bounds())
        except (AttributeError, TypeError, ValueError) as err:
            raise ConfigError('Invalid bo.{}: {}'.format(key, err))

    prbs = config['prbs']
    _require(prbs['n_points'] >= 1 and prbs['hold'] >= 1, 'prbs needs positive n_points and hold')
    _require(0 <= prbs['holdout_fraction'] < 1, 'prbs.holdout_fraction must lie in [0, 1)')

    _require(config['assess']['n_runs'] >= 1, 'assess.n_runs must be at least 1')


def resolve_output_dir(config, cli_value=None):
    """
    Output directory: command line, then config, then environment, then ./results.

    """
    if cli_value:
        return cli_value
    if config.get('output_dir'):
        return config['output_dir']

    return os.environ.get(ENV_OUTPUT_DIR) or DEFAULT_OUTPUT_DIR
