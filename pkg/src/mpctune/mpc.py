"""
Economic MPC

Receding-horizon controller over the NARX model. It maximises predicted
production of B over Np steps within the input box, with the backoff-tightened
reactor temperature bound handled as a quadratic penalty, and applies the
first input of the optimised sequence.

"""
import logging

import numpy as np

from mpctune.narx import SCALING, scale, scale_outputs, simulate_horizon, unscale
from mpctune.search import box_nelder_mead, multistart_points

logger = logging.getLogger(__name__)

OPTIMAL = 'OPTIMAL'
DEGENERATE = 'DEGENERATE'

MPC_PARAMETERS = {
    'Np': 10,
    'F_bounds': (5.0, 35.0),
    'TR_bounds': (100.0, 150.0),
    'backoff': 0.0,
    'dt': 0.005,
    'Vin': 10.01,
    'penalty_weight': 1e3,
    'restarts': 0,
    'max_iters': 500,
    'tolerance': 1e-6,
    'stage_cost_params': [],
    'scaling': SCALING,
}

# seeded starts beyond the standard ones must not depend on the caller
START_SEED = 0


def check_mpc_config(config):
    """
    Raise ValueError for an inconsistent controller config.

    """
    if config['Np'] < 1:
        raise ValueError('Np must be at least 1, got {!r}'.format(config['Np']))
    F_min, F_max = config['F_bounds']
    if not F_min < F_max:
        raise ValueError('F_bounds need F_min < F_max, got {!r}'.format(config['F_bounds']))
    if config['backoff'] < 0:
        raise ValueError('backoff must be non-negative, got {!r}'.format(config['backoff']))
    if config['penalty_weight'] <= 0:
        raise ValueError('penalty_weight must be positive')


def mpc_objective(u_sequence, y_current_scaled, coeffs, config):
    """
    Negative predicted production plus the temperature penalty.

    Stage i pairs the input u_i with the output it produces, y_{i+1}.

    Parameters
    ----------
    u_sequence : array-like
        Inputs F_0..F_Np-1 in physical units (1/h).
    y_current_scaled : array-like
        Current scaled output pair.
    coeffs : array-like
        (2, 7) NARX coefficients.
    config : dict
        Controller config.

    Returns
    -------
    value : float
        Objective to minimise.

    """
    scaling = config['scaling']
    u_sequence = np.asarray(u_sequence, dtype=float)

    predictions = simulate_horizon(coeffs, y_current_scaled, scale(u_sequence, scaling['F']))

    cB = unscale(predictions[:, 0], scaling['cB'])
    production = np.sum(config['Vin'] * cB * u_sequence * config['dt'])

    TR_min, TR_max = scale(config['TR_bounds'], scaling['TR'])
    upper = np.maximum(0.0, predictions[:, 1] + config['backoff'] - TR_max)
    lower = np.maximum(0.0, TR_min - predictions[:, 1])

    penalty = config['penalty_weight'] * (np.sum(upper ** 2) + np.sum(lower ** 2))

    return float(-production + penalty)


def solve(y_current_meas, coeffs, config, warm_start=None):
    """
    Optimise the input sequence from the current measurement.

    Nelder-Mead runs over the input box from the warm start (if any), the
    constant minimum, maximum and midpoint inputs, then `restarts` seeded
    Halton sequences. The best result wins; ties go to the earlier start. The
    solve is DEGENERATE when no local search improves on its own start, as on
    a flat objective.

    Parameters
    ----------
    y_current_meas : array-like
        Measured (cB, TR) in physical units.
    coeffs : array-like
        (2, 7) NARX coefficients.
    config : dict
        Controller config.
    warm_start : array-like, optional
        Previous input sequence, shifted.

    Returns
    -------
    solution : dict
        'u_sequence', 'predicted_outputs' (scaled), 'objective_value' and
        'solver_status' (OPTIMAL or DEGENERATE).

    """
    F_min, F_max = config['F_bounds']
    horizon = config['Np']
    y_scaled = scale_outputs(y_current_meas, config['scaling'])

    def to_physical(v):
        return np.clip(F_min + v * (F_max - F_min), F_min, F_max)

    def cost(v):
        return mpc_objective(to_physical(v), y_scaled, coeffs, config)

    starts = []
    if warm_start is not None:
        warm = (np.asarray(warm_start, dtype=float) - F_min) / (F_max - F_min)
        starts.append(np.clip(warm, 0.0, 1.0))
    starts.append(np.zeros(horizon))
    starts.append(np.ones(horizon))
    starts.append(np.full(horizon, 0.5))
    starts.extend(multistart_points(horizon, config['restarts'], START_SEED))

    best_point, best_value = None, np.inf
    improved = False

    for start in starts:
        start_value = cost(start)
        point, value = box_nelder_mead(
            cost, start, config['max_iters'],
            xatol=config['tolerance'], fatol=config['tolerance'] * 1e-3)

        if value < start_value:
            improved = True
        else:
            point, value = start, start_value

        if value < best_value:
            best_point, best_value = point, value

    status = OPTIMAL if improved else DEGENERATE

    u_sequence = to_physical(best_point)

    return {
        'u_sequence': u_sequence,
        'predicted_outputs': simulate_horizon(
            coeffs, y_scaled, scale(u_sequence, config['scaling']['F'])),
        'objective_value': best_value,
        'solver_status': status,
    }


def control_law(y_current_meas, coeffs, config, controller_memory):
    """
    First input of the optimised sequence.

    controller_memory is a dict owned by one controller instance. It carries
    the one-step-shifted previous solution as warm start and the last solver
    status.

    """
    solution = solve(
        y_current_meas, coeffs, config, warm_start=controller_memory.get('u_sequence'))

    u_sequence = solution['u_sequence']
    controller_memory['u_sequence'] = np.append(u_sequence[1:], u_sequence[-1])
    controller_memory['status'] = solution['solver_status']

    if solution['solver_status'] == DEGENERATE:
        logger.debug('MPC solve degenerate, objective %.6g', solution['objective_value'])

    return float(u_sequence[0])
