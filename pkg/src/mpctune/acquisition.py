"""
Acquisition functions

Expected improvement (minimisation convention), probability of constraint
satisfaction, their product (EIC), the constrained incumbent and the
multistart acquisition maximiser. All points are in the unit box.

"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from mpctune.gp import posterior, predict
from mpctune.search import box_nelder_mead, multistart_points

logger = logging.getLogger(__name__)

EIC = 'EIC'
FEASIBILITY_ONLY = 'FEASIBILITY_ONLY'
MODES = (EIC, FEASIBILITY_ONLY)

SIGMA_FLOOR = 1e-12

# weight on the probability shortfall while searching for the incumbent
INFEASIBILITY_PENALTY = 1e6


@dataclass(frozen=True)
class AcquisitionConfig:
    """
    Settings of the incumbent search and the acquisition maximiser.

    Attributes
    ----------
    beta : float
        Allowed probability of constraint violation for the incumbent.
    restarts : int
        Number of Halton starts.
    local_iters : int
        Objective evaluations per local search.
    mode : str
        EIC or FEASIBILITY_ONLY.

    """
    beta: float = 0.05
    restarts: int = 32
    local_iters: int = 200
    mode: str = EIC

    def __post_init__(self):
        if not 0.0 < self.beta <= 0.5:
            raise ValueError('beta must lie in (0, 0.5], got {!r}'.format(self.beta))
        if self.restarts < 1 or self.local_iters < 1:
            raise ValueError('restarts and local_iters must be positive')
        if self.mode not in MODES:
            raise ValueError('Unknown acquisition mode {!r}'.format(self.mode))


@dataclass(frozen=True)
class Incumbent:
    value: float
    location: Optional[np.ndarray]
    feasible_found: bool


def improvement_from_moments(mean, variance, eta):
    """
    Expected improvement below eta of a Gaussian with the given moments.

    Vectorised over mean and variance. Falls back to max(0, eta - mean) where
    the standard deviation is below SIGMA_FLOOR.

    """
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))

    with np.errstate(divide='ignore', invalid='ignore'):
        z = (eta - mean) / sigma
        improvement = sigma * (z * norm.cdf(z) + norm.pdf(z))

    return np.where(
        sigma < SIGMA_FLOOR,
        np.maximum(eta - mean, 0.0),
        np.maximum(improvement, 0.0),
    )


def feasibility_from_moments(mean, variance):
    """
    P(c >= 0) for a Gaussian constraint value with the given moments.

    """
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))

    with np.errstate(divide='ignore', invalid='ignore'):
        probability = norm.cdf(mean / sigma)

    return np.where(sigma < SIGMA_FLOOR, (mean >= 0.0).astype(float), probability)


def expected_improvement(obj_gp, query, eta):
    """
    Expected improvement of the objective GP over the incumbent value eta.

    Parameters
    ----------
    obj_gp : GpModel
        Objective surrogate.
    query : array-like
        Point in the unit box.
    eta : float
        Incumbent value (minimisation).

    Returns
    -------
    value : float
        Non-negative expected improvement.

    """
    moments = posterior(obj_gp, query)

    return float(improvement_from_moments(moments.mean, moments.variance, eta))


def probability_feasible(con_gp, query):
    """
    Posterior probability that the constraint is non-negative at query.

    A missing constraint model (None) means certain feasibility.

    """
    if con_gp is None:
        return 1.0

    moments = posterior(con_gp, query)

    return float(feasibility_from_moments(moments.mean, moments.variance))


def eic(obj_gp, con_gp, query, eta):
    """
    Expected improvement weighted by the probability of feasibility.

    """
    return expected_improvement(obj_gp, query, eta) * probability_feasible(con_gp, query)


def start_points(dim, config, seed, extra_starts=None):
    """
    Halton starts followed by any caller-supplied extra starts.

    """
    points = multistart_points(dim, config.restarts, seed)

    if extra_starts is not None and len(extra_starts) > 0:
        extra = np.clip(np.atleast_2d(np.asarray(extra_starts, dtype=float)), 0.0, 1.0)
        points = np.vstack([points, extra])

    return points


def compute_incumbent(obj_gp, con_gp, config, seed, extra_starts=None):
    """
    Constrained minimum of the objective posterior mean.

    Minimises mu_n over the unit box subject to P(c >= 0) >= 1 - beta. Every
    start and every local-search result that passes the probability test is a
    candidate; the lowest posterior mean wins.

    Parameters
    ----------
    obj_gp : GpModel
        Objective surrogate.
    con_gp : GpModel or None
        Constraint surrogate; None means certain feasibility.
    config : AcquisitionConfig
        Provides beta, restarts and local_iters.
    seed : int or list of int
        Entropy of the start design.
    extra_starts : array-like, optional
        Additional starts, e.g. the best observed point.

    Returns
    -------
    incumbent : Incumbent
        value is +inf and location None when no start yields a feasible point.

    """
    threshold = 1.0 - config.beta
    starts = start_points(obj_gp.dim, config, seed, extra_starts)

    def mean_of(x):
        return posterior(obj_gp, x).mean

    def penalised(x):
        shortfall = max(0.0, threshold - probability_feasible(con_gp, x))
        return mean_of(x) + INFEASIBILITY_PENALTY * shortfall

    best_value, best_location = np.inf, None

    for start in starts:
        local, _ = box_nelder_mead(penalised, start, config.local_iters)

        for candidate in (start, local):
            if probability_feasible(con_gp, candidate) < threshold:
                continue
            value = mean_of(candidate)
            if value < best_value:
                best_value, best_location = value, np.array(candidate)

    if best_location is None:
        logger.warning('No point passes the feasibility test with beta=%g', config.beta)
        return Incumbent(value=np.inf, location=None, feasible_found=False)

    return Incumbent(value=float(best_value), location=best_location, feasible_found=True)


def maximize_acquisition(obj_gp, con_gp, incumbent, config, seed, extra_starts=None):
    """
    Next point to evaluate.

    Multistart Nelder-Mead ascent of EIC, or of the probability of feasibility
    when the config asks for it or no feasible incumbent exists. Ties go to the
    lowest restart index. When the acquisition is zero everywhere it was
    evaluated, the start with the largest objective posterior variance is
    returned instead.

    Parameters
    ----------
    obj_gp : GpModel
        Objective surrogate.
    con_gp : GpModel or None
        Constraint surrogate; None gives plain expected improvement.
    incumbent : Incumbent
        Result of compute_incumbent.
    config : AcquisitionConfig
        Search settings.
    seed : int or list of int
        Entropy of the start design.
    extra_starts : array-like, optional
        Additional starts after the Halton points.

    Returns
    -------
    point : numpy.ndarray
        Point inside the unit box.

    """
    feasibility_only = config.mode == FEASIBILITY_ONLY or not incumbent.feasible_found

    if feasibility_only:
        def acquisition(x):
            return probability_feasible(con_gp, x)
    else:
        def acquisition(x):
            return eic(obj_gp, con_gp, x, incumbent.value)

    def negative(x):
        return -acquisition(x)

    starts = start_points(obj_gp.dim, config, seed, extra_starts)

    best_value, best_point = -np.inf, None

    for start in starts:
        local, value = box_nelder_mead(negative, start, config.local_iters)
        value = -value
        if value > best_value:
            best_value, best_point = value, local

    if best_value <= 0.0:
        _, variance = predict(obj_gp, starts)
        index = int(np.argmax(variance))
        logger.debug('Flat acquisition, exploring start %d with largest variance', index)
        return np.array(starts[index])

    return np.clip(best_point, 0.0, 1.0)
