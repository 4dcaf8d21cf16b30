"""
Bounded local search

Seeded start designs and box-bounded Nelder-Mead, shared by the GP
hyperparameter fit, the acquisition optimizer and the MPC solver. All searches
run in the unit box; callers map to physical units themselves.

"""
import logging

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

logger = logging.getLogger(__name__)


def multistart_points(dim, count, seed):
    """
    Scrambled Halton design of `count` points in the unit box.

    Parameters
    ----------
    dim : int
        Dimension of the box.
    count : int
        Number of points.
    seed : int or list of int
        Entropy for the scrambling, so the design is reproducible.

    Returns
    -------
    points : numpy.ndarray
        Array of shape (count, dim).

    """
    if count <= 0:
        return np.empty((0, dim))

    sampler = qmc.Halton(d=dim, scramble=True, seed=np.random.default_rng(seed))

    return sampler.random(count)


def inward_simplex(x0, step):
    """
    Initial Nelder-Mead simplex around x0 whose vertices all stay in the box.

    """
    dim = x0.shape[0]
    simplex = np.tile(x0, (dim + 1, 1))

    for i in range(dim):
        if x0[i] + step <= 1.0:
            simplex[i + 1, i] += step
        else:
            simplex[i + 1, i] -= step

    return simplex


def box_nelder_mead(fun, x0, max_evals, step=0.1, xatol=1e-6, fatol=1e-10):
    """
    Minimise `fun` over the unit box with Nelder-Mead started at x0.

    Parameters
    ----------
    fun : callable
        Objective taking a 1-D array.
    x0 : array-like
        Start point, clipped into the box.
    max_evals : int
        Budget of objective evaluations.
    step : float
        Edge length of the initial simplex.

    Returns
    -------
    x : numpy.ndarray
        Best point found, inside the box.
    value : float
        Objective value at x.

    """
    x0 = np.clip(np.asarray(x0, dtype=float), 0.0, 1.0)
    dim = x0.shape[0]

    result = minimize(
        fun,
        x0,
        method='Nelder-Mead',
        bounds=[(0.0, 1.0)] * dim,
        options={
            'maxfev': max_evals,
            'initial_simplex': inward_simplex(x0, step),
            'xatol': xatol,
            'fatol': fatol,
        },
    )

    x = np.clip(result.x, 0.0, 1.0)

    return x, float(result.fun)
