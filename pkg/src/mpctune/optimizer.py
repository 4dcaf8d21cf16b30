"""
Constrained Bayesian optimization loop

Initial random design, then propose with the constrained expected improvement,
evaluate, refit both surrogates, repeat until the budget is spent. The loop
works in the unit box; tuning parameters are mapped to and from their
physical bounds at the evaluator boundary.

"""
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from mpctune.acquisition import (
    EIC,
    FEASIBILITY_ONLY,
    AcquisitionConfig,
    compute_incumbent,
    eic,
    maximize_acquisition,
    probability_feasible,
)
from mpctune.gp import (
    GpModel,
    KernelParams,
    build_model,
    default_bounds,
    fit_hyperparameters,
    model_to_dict,
)

logger = logging.getLogger(__name__)

INITIAL = 'INITIAL'
RANDOM = 'RANDOM'

INCUMBENT = 'incumbent'
BEST_OBSERVED_FEASIBLE = 'best_observed_feasible'
LEAST_INFEASIBLE_OBSERVED = 'least_infeasible_observed'

# stream tags that keep the seeded sub-searches of one iteration apart
INCUMBENT_TAG = 0
ACQUISITION_TAG = 1
OBJECTIVE_FIT_TAG = 2
CONSTRAINT_FIT_TAG = 3
RANDOM_TAG = 4

BO_PARAMETERS = {
    'budget': 40,
    'n_init': 5,
    'beta': 0.05,
    'acq_restarts': 32,
    'acq_local_iters': 200,
    'mode': EIC,
    'gp_restarts': 8,
    'gp_bounds': None,
    'con_gp_bounds': None,
    'default_kernel': {
        'lengthscale': 0.5,
        'signal_variance': 1.0,
        'noise_variance': 1e-6,
    },
    'record_wall_time': False,
}


class EvaluationError(RuntimeError):
    """The black-box evaluation produced no usable observation."""


def to_unit(theta, bounds):
    """
    Map physical tuning parameters into the unit box.

    """
    bounds = np.asarray(bounds, dtype=float)

    return (np.asarray(theta, dtype=float) - bounds[:, 0]) / (bounds[:, 1] - bounds[:, 0])


def from_unit(point, bounds):
    """
    Map a unit-box point back to physical tuning parameters, clipped into the box.

    """
    bounds = np.asarray(bounds, dtype=float)
    theta = bounds[:, 0] + np.asarray(point, dtype=float) * (bounds[:, 1] - bounds[:, 0])

    return np.clip(theta, bounds[:, 0], bounds[:, 1])


def check_bounds(bounds):
    """
    Validate a (d, 2) array of box bounds.

    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2 or bounds.shape[0] < 1:
        raise ValueError('Bounds must have shape (d, 2), got {}'.format(bounds.shape))
    if not np.all(np.isfinite(bounds)) or np.any(bounds[:, 1] <= bounds[:, 0]):
        raise ValueError('Every bound needs finite lower < upper')

    return bounds


def initial_design(bounds, n_init, seed):
    """
    Uniform random initial design over the box.

    Parameters
    ----------
    bounds : array-like
        (d, 2) lower and upper bounds.
    n_init : int
        Number of points, at least 1.
    seed : int or list of int
        Entropy of the design.

    Returns
    -------
    design : numpy.ndarray
        (n_init, d) points in physical units.

    """
    if n_init < 1:
        raise ValueError('n_init must be at least 1, got {!r}'.format(n_init))

    bounds = check_bounds(bounds)

    unit = np.random.default_rng(seed).random((n_init, bounds.shape[0]))

    return from_unit(unit, bounds)


@dataclass
class BoRunState:
    """
    Everything the loop knows after some iterations.

    design holds the initial design in physical units. observations
    holds successful evaluations only; failed iterations are counted in
    n_failed and appear in the log.

    """
    bounds: np.ndarray
    design: np.ndarray
    budget: int
    n_init: int
    observations: list = field(default_factory=list)
    obj_gp: Optional[GpModel] = None
    con_gp: Optional[GpModel] = None
    iteration: int = 0
    best_feasible_history: list = field(default_factory=list)
    log: list = field(default_factory=list)
    n_failed: int = 0

    @property
    def dim(self):
        return self.bounds.shape[0]

    def unit_inputs(self):
        return np.array([record['unit'] for record in self.observations])

    def objective_values(self):
        return np.array([record['y_obj'] for record in self.observations])

    def constraint_values(self):
        return np.array([record['y_con'] for record in self.observations])


def acquisition_config(config):
    return AcquisitionConfig(
        beta=config['beta'],
        restarts=config['acq_restarts'],
        local_iters=config['acq_local_iters'],
        mode=config.get('mode', EIC),
    )


def gp_bounds(config, key='gp_bounds'):
    """
    Hyperparameter search intervals from the config, None for the defaults.

    Partial intervals are completed from the defaults. The constraint
    surrogate reads 'con_gp_bounds' and falls back to 'gp_bounds'.

    """
    intervals = config.get(key)
    if intervals is None and key != 'gp_bounds':
        intervals = config.get('gp_bounds')
    if intervals is None:
        return None

    bounds = default_bounds()
    bounds.update({name: tuple(interval) for name, interval in intervals.items()})

    return bounds


def best_feasible_value(state):
    """
    Lowest observed objective among observations with y_con >= 0, +inf if none.

    """
    feasible = [r['y_obj'] for r in state.observations if r['y_con'] >= 0.0]

    return min(feasible) if feasible else np.inf


def best_observed_point(state):
    """
    Unit-box location of the best feasible observation, or of the least
    infeasible one when nothing feasible was observed yet.

    """
    if not state.observations:
        return None

    feasible = [r for r in state.observations if r['y_con'] >= 0.0]
    if feasible:
        return min(feasible, key=lambda r: r['y_obj'])['unit']

    return max(state.observations, key=lambda r: r['y_con'])['unit']


def refit(state, seed, config):
    """
    Refit both surrogates on the successful observations.

    With a single observation the configured default kernel is used, since
    the marginal likelihood cannot identify hyperparameters from one point.

    """
    inputs = state.unit_inputs()

    if len(state.observations) == 1:
        kernel = KernelParams(**config['default_kernel'])
        state.obj_gp = build_model(inputs, state.objective_values(), kernel)
        state.con_gp = build_model(inputs, state.constraint_values(), kernel)
        return

    state.obj_gp = fit_hyperparameters(
        inputs, state.objective_values(), bounds=gp_bounds(config),
        restarts=config['gp_restarts'], seed=[seed, state.iteration, OBJECTIVE_FIT_TAG])
    state.con_gp = fit_hyperparameters(
        inputs, state.constraint_values(), bounds=gp_bounds(config, 'con_gp_bounds'),
        restarts=config['gp_restarts'], seed=[seed, state.iteration, CONSTRAINT_FIT_TAG])


def propose(state, seed, config):
    """
    Next unit-box point with the incumbent value, acquisition value and mode.

    """
    iteration = state.iteration

    if iteration < state.n_init:
        return to_unit(state.design[iteration], state.bounds), None, None, INITIAL

    if state.obj_gp is None:
        rng = np.random.default_rng([seed, iteration, RANDOM_TAG])
        logger.warning('No observations to model at iteration %d, proposing at random', iteration)
        return rng.random(state.dim), None, None, RANDOM

    settings = acquisition_config(config)
    extra = best_observed_point(state)
    extra = None if extra is None else [extra]

    incumbent = compute_incumbent(
        state.obj_gp, state.con_gp, settings, [seed, iteration, INCUMBENT_TAG], extra)
    point = maximize_acquisition(
        state.obj_gp, state.con_gp, incumbent, settings,
        [seed, iteration, ACQUISITION_TAG], extra)

    if settings.mode == FEASIBILITY_ONLY or not incumbent.feasible_found:
        mode = FEASIBILITY_ONLY
        value = probability_feasible(state.con_gp, point)
    else:
        mode = EIC
        value = eic(state.obj_gp, state.con_gp, point, incumbent.value)

    eta = incumbent.value if incumbent.feasible_found else None

    return point, eta, value, mode


def _finite_or_none(value):
    if value is None or not np.isfinite(value):
        return None

    return float(value)


def bo_step(state, evaluator, seed, config):
    """
    One propose, evaluate, refit cycle.

    Parameters
    ----------
    state : BoRunState
        Updated in place.
    evaluator : callable
        evaluator(theta, stream) -> (y_obj, y_con), theta in physical units,
        stream a list of ints identifying the random sub-stream.
    seed : int
        Run seed.
    config : dict
        BO settings (see BO_PARAMETERS).

    Returns
    -------
    record : dict
        JSON-ready log record of the iteration.

    """
    if state.iteration >= state.budget:
        raise ValueError('Budget of {} iterations already spent'.format(state.budget))

    iteration = state.iteration
    started = time.perf_counter()

    point, eta, acq_value, mode = propose(state, seed, config)
    point = np.clip(point, 0.0, 1.0)
    if mode == INITIAL:
        theta = np.array(state.design[iteration])
    else:
        theta = from_unit(point, state.bounds)

    stream = [seed, iteration]
    failed = False
    try:
        y_obj, y_con = evaluator(theta, stream)
    except EvaluationError as err:
        logger.warning('Evaluation failed at iteration %d: %s', iteration, err)
        y_obj, y_con, failed = None, None, True

    if failed:
        state.n_failed += 1
    else:
        state.observations.append({
            'iteration': iteration,
            'theta': theta,
            'unit': point,
            'y_obj': float(y_obj),
            'y_con': float(y_con),
            'rng_stream_id': '{}-{}'.format(seed, iteration),
        })
        refit(state, seed, config)

    best = best_feasible_value(state)
    if state.best_feasible_history:
        best = min(best, state.best_feasible_history[-1])
    state.best_feasible_history.append(best)

    wall_time = time.perf_counter() - started if config.get('record_wall_time') else None

    record = {
        'iteration': iteration,
        'theta': theta.tolist(),
        'y_obj': _finite_or_none(y_obj),
        'y_con': _finite_or_none(y_con),
        'eta': _finite_or_none(eta),
        'acq_value': _finite_or_none(acq_value),
        'mode': mode,
        'best_feasible': _finite_or_none(best),
        'wall_time_s': wall_time,
        'rng_stream_id': '{}-{}'.format(seed, iteration),
        'seed': seed,
        'failed': failed,
    }
    state.log.append(record)
    state.iteration += 1

    logger.info('Iteration %d (%s): y_obj=%s y_con=%s best=%s', iteration, mode,
                record['y_obj'], record['y_con'], record['best_feasible'])

    return record


def recommend(state, seed, config):
    """
    Recommended tuning parameters at termination.

    The constrained incumbent location when one exists, else the best feasible
    observation, else the least infeasible observation.

    Returns
    -------
    theta : numpy.ndarray
        Physical tuning parameters.
    source : str
        Which rule produced the recommendation.

    """
    if not state.observations:
        raise EvaluationError('No successful evaluation in {} iterations'.format(state.iteration))

    if state.obj_gp is not None:
        extra = [best_observed_point(state)]
        incumbent = compute_incumbent(
            state.obj_gp, state.con_gp, acquisition_config(config),
            [seed, state.iteration, INCUMBENT_TAG], extra)
        if incumbent.feasible_found:
            return from_unit(incumbent.location, state.bounds), INCUMBENT

    if np.isfinite(best_feasible_value(state)):
        return from_unit(best_observed_point(state), state.bounds), BEST_OBSERVED_FEASIBLE

    return from_unit(best_observed_point(state), state.bounds), LEAST_INFEASIBLE_OBSERVED


def run(config, evaluator, seed, on_iteration=None):
    """
    Run the whole budget.

    Parameters
    ----------
    config : dict
        BO settings; 'theta_bounds' gives the (d, 2) box.
    evaluator : callable
        evaluator(theta, stream) -> (y_obj, y_con).
    seed : int
        Run seed, the only source of randomness besides the evaluator.
    on_iteration : callable, optional
        Called with every log record as soon as it exists, so a caller can
        flush it before a later iteration raises.

    Returns
    -------
    state : BoRunState
        Final state.
    report : dict
        Recommendation and run summary.

    """
    bounds = check_bounds(config['theta_bounds'])
    budget, n_init = config['budget'], config['n_init']

    if n_init < 1 or budget < n_init:
        raise ValueError('Need 1 <= n_init <= budget, got n_init={} budget={}'.format(
            n_init, budget))

    state = BoRunState(
        bounds=bounds,
        design=initial_design(bounds, n_init, seed),
        budget=budget,
        n_init=n_init,
    )

    for _ in range(budget):
        record = bo_step(state, evaluator, seed, config)
        if on_iteration is not None:
            on_iteration(record)

    theta_star, source = recommend(state, seed, config)

    logger.info('Seed %d finished: %d observations, %d failed, recommendation from %s',
                seed, len(state.observations), state.n_failed, source)

    report = {
        'seed': seed,
        'theta_star': theta_star.tolist(),
        'recommendation_source': source,
        'no_bo_iterations': budget == n_init,
        'n_observations': len(state.observations),
        'n_failed': state.n_failed,
        'best_feasible': _finite_or_none(state.best_feasible_history[-1]),
        'best_feasible_history': [_finite_or_none(v) for v in state.best_feasible_history],
        'obj_gp': model_to_dict(state.obj_gp) if state.obj_gp is not None else None,
        'con_gp': model_to_dict(state.con_gp) if state.con_gp is not None else None,
    }

    return state, report
