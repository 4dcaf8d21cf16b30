"""
Tuning harness

Connects the tuning loop to the plant: closed-loop replicates for a candidate
tuning vector, the sample-average objective and chance-constraint estimates,
the open-loop PRBS identification baseline and Monte-Carlo assessment.

A tuning vector theta holds the 14 NARX coefficients (cB row, then TR row)
followed by the backoff in scaled temperature units.

"""
import copy
import logging
import math
import os

import numpy as np
import pandas as pd

from mpctune.mpc import MPC_PARAMETERS, check_mpc_config, control_law
from mpctune.narx import (
    N_COEFFS,
    check_scaling,
    coeffs_to_theta,
    fit_least_squares,
    scale,
    theta_to_coeffs,
)
from mpctune.optimizer import EvaluationError
from mpctune.plant import STATE_NAMES, initial_state, measure, step

logger = logging.getLogger(__name__)

N_THETA = N_COEFFS + 1

# stream tags; BO evaluations use (seed, iteration, replicate), iterations stay below these
PRBS_TAG = 10001
BASELINE_TAG = 10002
ASSESS_TAG = 10003
SIMULATE_TAG = 10004

TRAJECTORY_COLUMNS = [
    'k', 't', 'F', 'cA_true', 'cB_true', 'TR_true', 'TK_true', 'cB_meas', 'TR_meas', 'feasible',
]

# noise variance interval of the constraint surrogate in the noise-free scenario
NOISE_FREE_CON_NOISE = (1e-10, 1e-6)

# failures of a single replicate, as opposed to usage errors
REPLICATE_ERRORS = (ArithmeticError, np.linalg.LinAlgError)


def theta_bounds(config):
    """
    (15, 2) box of the tuning parameters.

    """
    bounds = np.asarray(config['bo']['theta_bounds'], dtype=float)
    if bounds.shape != (N_THETA, 2):
        raise ValueError('theta_bounds must have shape ({}, 2), got {}'.format(
            N_THETA, bounds.shape))

    return bounds


def noise_spec(config):
    """
    Measurement noise standard deviations; all zero in the noise-free scenario.

    """
    if config['scenario'] == 'noise_free':
        return {'sigma_B': 0.0, 'sigma_R': 0.0}

    return {
        'sigma_B': float(config['noise']['sigma_B']),
        'sigma_R': float(config['noise']['sigma_R']),
    }


def mpc_config(config, backoff):
    """
    Controller settings for one closed-loop run.

    """
    simulation = config['simulation']
    scaling = {signal: tuple(bounds) for signal, bounds in config['scaling'].items()}
    check_scaling(scaling)

    settings = dict(MPC_PARAMETERS)
    settings.update(config['mpc'])
    settings.update({
        'F_bounds': tuple(simulation['F_bounds']),
        'TR_bounds': tuple(simulation['TR_bounds']),
        'dt': simulation['dt'],
        'Vin': simulation['Vin'],
        'backoff': float(backoff),
        'scaling': scaling,
    })
    check_mpc_config(settings)

    return settings


def run_closed_loop(theta, noise, rng, config):
    """
    Simulate the plant under the MPC parameterised by theta.

    The plant starts from the configured initial state. At every step k the
    outputs are measured, the controller picks F_k and the plant is advanced by
    dt. Feasibility is judged on the true reactor temperature.

    Parameters
    ----------
    theta : array-like
        Tuning vector (14 coefficients and the backoff).
    noise : dict
        Measurement noise standard deviations.
    rng : numpy.random.Generator
        Stream for the measurement noise.
    config : dict
        Experiment config.

    Returns
    -------
    result : dict
        'states' (T+1, 4), 'measurements' (T+1, 2), 'inputs' (T,),
        'production' in moles of B, 'feasible' (T+1,), 'per_step_feasible'
        for k = 1..T, 'outputs' true (cB, TR) for k = 1..T, 'solver_status'
        per step, plus 'theta' and 'dt'.

    """
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape[0] != N_THETA:
        raise ValueError('theta needs {} values, got {}'.format(N_THETA, theta.shape[0]))

    coeffs = theta_to_coeffs(theta)
    settings = mpc_config(config, theta[N_COEFFS])

    simulation = config['simulation']
    params = config['plant']
    horizon = simulation['T']
    dt = simulation['dt']

    states = np.empty((horizon + 1, len(STATE_NAMES)))
    measurements = np.empty((horizon + 1, 2))
    inputs = np.empty(horizon)
    solver_status = []
    memory = {}

    x = initial_state(config['initial_state'])
    states[0] = x

    for k in range(horizon):
        measurements[k] = measure(x, noise, rng)
        inputs[k] = control_law(measurements[k], coeffs, settings, memory)
        solver_status.append(memory['status'])
        x = step(x, inputs[k], dt, simulation['substeps'], params)
        states[k + 1] = x

    measurements[horizon] = measure(x, noise, rng)

    TR_min, TR_max = simulation['TR_bounds']
    feasible = (states[:, 2] >= TR_min) & (states[:, 2] <= TR_max)

    production = float(np.sum(simulation['Vin'] * states[:-1, 1] * inputs * dt))

    return {
        'theta': theta,
        'dt': dt,
        'states': states,
        'measurements': measurements,
        'inputs': inputs,
        'production': production,
        'feasible': feasible,
        'per_step_feasible': feasible[1:],
        'outputs': states[1:, 1:3],
        'solver_status': solver_status,
    }


def constraint_estimate(feasible_matrix, epsilon):
    """
    Sample-average chance-constraint value min_k freq_k - 1 + epsilon.

    Parameters
    ----------
    feasible_matrix : array-like
        Booleans of shape (M, T), replicate by time step.
    epsilon : float
        Allowed violation probability per step.

    """
    feasible_matrix = np.atleast_2d(np.asarray(feasible_matrix, dtype=float))

    return float(np.min(np.mean(feasible_matrix, axis=0)) - 1.0 + epsilon)


def trajectory_frame(result):
    """
    One row per time step k = 0..T; F is empty at k = T.

    """
    states = result['states']
    horizon = states.shape[0] - 1
    k = np.arange(horizon + 1)

    return pd.DataFrame({
        'k': k,
        't': k * result['dt'],
        'F': np.append(result['inputs'], np.nan),
        'cA_true': states[:, 0],
        'cB_true': states[:, 1],
        'TR_true': states[:, 2],
        'TK_true': states[:, 3],
        'cB_meas': result['measurements'][:, 0],
        'TR_meas': result['measurements'][:, 1],
        'feasible': result['feasible'].astype(int),
    }, columns=TRAJECTORY_COLUMNS)


def write_trajectory(result, path):
    trajectory_frame(result).to_csv(
        path, index=False, float_format='%.17g', lineterminator='\n')


def evaluate(theta, M, noise, stream, config, trajectory_dir=None):
    """
    Monte-Carlo estimate of the objective and the chance constraint.

    Replicate j draws its noise from the sub-stream (*stream, j), so results
    do not depend on the order replicates run in.

    Parameters
    ----------
    theta : array-like
        Tuning vector.
    M : int
        Number of replicates.
    noise : dict
        Measurement noise.
    stream : list of int
        Stream identifier, e.g. (seed, iteration).
    config : dict
        Experiment config.
    trajectory_dir : str, optional
        If given, each replicate's trajectory is written there as CSV.

    Returns
    -------
    evaluation : dict
        'y_obj' (mean negative production), 'y_con', 'M', 'n_failed' and the
        replicate 'productions'.

    Raises
    ------
    EvaluationError
        If every replicate failed.

    """
    if M < 1:
        raise ValueError('M must be at least 1, got {!r}'.format(M))

    productions = []
    feasible_rows = []
    n_failed = 0

    for j in range(M):
        rng = np.random.default_rng(list(stream) + [j])
        try:
            result = run_closed_loop(theta, noise, rng, config)
        except REPLICATE_ERRORS as err:
            logger.warning('Replicate %d of stream %s failed: %s', j, stream, err)
            n_failed += 1
            continue

        if trajectory_dir is not None:
            name = 'trajectory_{}_{}.csv'.format('-'.join(str(s) for s in stream), j)
            write_trajectory(result, os.path.join(trajectory_dir, name))

        productions.append(result['production'])
        feasible_rows.append(result['per_step_feasible'])

    if not productions:
        raise EvaluationError('All {} replicates failed for stream {}'.format(M, stream))

    return {
        'y_obj': -float(np.mean(productions)),
        'y_con': constraint_estimate(feasible_rows, config['simulation']['epsilon']),
        'M': M,
        'n_failed': n_failed,
        'productions': productions,
    }


def make_evaluator(config, trajectory_dir=None):
    """
    Black-box evaluator for the tuning loop: (theta, stream) -> (y_obj, y_con).

    """
    M = config['bo']['M']
    noise = noise_spec(config)

    def evaluator(theta, stream):
        evaluation = evaluate(theta, M, noise, stream, config, trajectory_dir)
        return evaluation['y_obj'], evaluation['y_con']

    return evaluator


def bo_settings(config):
    """
    Settings for the tuning loop: the bo section plus the checked tuning box.

    Without measurement noise the constraint observations are exact, so the
    constraint surrogate is held to jitter-level noise unless
    bo.con_gp_bounds is set.

    """
    settings = copy.deepcopy(config['bo'])
    settings['theta_bounds'] = theta_bounds(config).tolist()

    if config['scenario'] == 'noise_free' and settings.get('con_gp_bounds') is None:
        settings['con_gp_bounds'] = {'noise_variance': NOISE_FREE_CON_NOISE}

    return settings


def generate_prbs_dataset(n_points, hold, rng, noise, config):
    """
    Open-loop step-test data for identification.

    The input switches between independently drawn binary levels F_min and
    F_max, each held `hold` steps, while the plant runs continuously from the
    initial state.

    Returns
    -------
    rows : numpy.ndarray
        Scaled (cB_k, TR_k, F_k, cB_k+1, TR_k+1), shape (n_points, 5).

    """
    if n_points < 1 or hold < 1:
        raise ValueError('n_points and hold must be positive')

    simulation = config['simulation']
    scaling = config['scaling']
    F_min, F_max = simulation['F_bounds']

    levels = rng.choice([float(F_min), float(F_max)], size=math.ceil(n_points / hold))
    inputs = np.repeat(levels, hold)[:n_points]

    x = initial_state(config['initial_state'])
    y = measure(x, noise, rng)

    rows = np.empty((n_points, 5))
    for k in range(n_points):
        x = step(x, inputs[k], simulation['dt'], simulation['substeps'], config['plant'])
        y_next = measure(x, noise, rng)
        rows[k] = [
            scale(y[0], scaling['cB']), scale(y[1], scaling['TR']),
            scale(inputs[k], scaling['F']),
            scale(y_next[0], scaling['cB']), scale(y_next[1], scaling['TR']),
        ]
        y = y_next

    return rows


def baseline_openloop_id(noise, seed, config):
    """
    Traditional identification: PRBS data, least squares, closed loop.

    The fitted model runs under the same MPC with zero backoff.

    Returns
    -------
    baseline : dict
        'coeffs', 'theta', the fit 'report' and the closed-loop 'result'.

    """
    prbs = config['prbs']

    rows = generate_prbs_dataset(
        prbs['n_points'], prbs['hold'], np.random.default_rng([seed, PRBS_TAG]), noise, config)
    coeffs, report = fit_least_squares(rows, holdout_fraction=prbs['holdout_fraction'])

    logger.info('Baseline NARX fit: holdout accuracy %s', report['holdout_accuracy'])

    theta = coeffs_to_theta(coeffs, 0.0)
    result = run_closed_loop(theta, noise, np.random.default_rng([seed, BASELINE_TAG]), config)

    logger.info('Baseline closed loop: production %.6g mol, %d infeasible steps',
                result['production'], int(np.sum(~result['per_step_feasible'])))

    return {
        'coeffs': coeffs,
        'theta': theta,
        'report': report,
        'result': result,
    }


def monte_carlo_assess(theta, n_runs, noise, seed, config):
    """
    Closed-loop statistics over independent noise realisations.

    Returns
    -------
    report : dict
        'production_stats' (mean, std, min, max), 'per_step_violation_freq'
        for k = 1..T, 'theta', 'n_runs', 'n_failed' and the per-run
        'productions'.

    """
    if n_runs < 1:
        raise ValueError('n_runs must be at least 1, got {!r}'.format(n_runs))

    productions = []
    feasible_rows = []
    n_failed = 0

    for j in range(n_runs):
        rng = np.random.default_rng([seed, ASSESS_TAG, j])
        try:
            result = run_closed_loop(theta, noise, rng, config)
        except REPLICATE_ERRORS as err:
            logger.warning('Assessment run %d failed: %s', j, err)
            n_failed += 1
            continue
        productions.append(result['production'])
        feasible_rows.append(result['per_step_feasible'])

    if not productions:
        raise EvaluationError('All {} assessment runs failed'.format(n_runs))

    productions = np.array(productions)
    violation = 1.0 - np.mean(np.array(feasible_rows, dtype=float), axis=0)

    return {
        'theta': np.asarray(theta, dtype=float).tolist(),
        'n_runs': n_runs,
        'n_failed': n_failed,
        'production_stats': {
            'mean': float(np.mean(productions)),
            'std': float(np.std(productions)),
            'min': float(np.min(productions)),
            'max': float(np.max(productions)),
        },
        'per_step_violation_freq': violation.tolist(),
        'productions': productions.tolist(),
    }
