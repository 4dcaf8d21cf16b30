"""
Gaussian process surrogate

Squared-exponential GP regression with Gaussian observation noise. The
hyperparameters are point estimates found by maximising the log marginal
likelihood. Inputs live in the unit box (tuning parameters normalised by
their box bounds), so a single isotropic length-scale is used.

"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from mpctune.search import multistart_points

logger = logging.getLogger(__name__)

LENGTHSCALE_RANGE = (1e-3, 1e3)
SIGNAL_VARIANCE_RANGE = (1e-6, 1e6)
NOISE_VARIANCE_RANGE = (1e-10, 1e2)

# relative to the signal variance; zero jitter is always tried first
JITTER_EXPONENTS = range(-10, -3)

FAILED_FIT_VALUE = 1e25


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky factorisation failed even with the largest jitter."""


def check_range(name, value, bounds):
    """
    Raise ValueError if value is not inside the closed interval bounds.

    """
    lower, upper = bounds
    if not lower <= value <= upper:
        raise ValueError('{}={!r} outside [{:g}, {:g}]'.format(name, value, lower, upper))


@dataclass(frozen=True)
class KernelParams:
    """
    Squared-exponential kernel hyperparameters plus the noise level.

    A noise variance of exactly zero is accepted as the noise-free case.

    """
    lengthscale: float
    signal_variance: float
    noise_variance: float = 0.0

    def __post_init__(self):
        check_range('lengthscale', self.lengthscale, LENGTHSCALE_RANGE)
        check_range('signal_variance', self.signal_variance, SIGNAL_VARIANCE_RANGE)
        if self.noise_variance != 0.0:
            check_range('noise_variance', self.noise_variance, NOISE_VARIANCE_RANGE)

    def to_dict(self):
        return {
            'lengthscale': self.lengthscale,
            'signal_variance': self.signal_variance,
            'noise_variance': self.noise_variance,
        }


class PosteriorMoments(NamedTuple):
    mean: float
    variance: float


@dataclass(frozen=True)
class GpModel:
    """
    A conditioned GP. Treat as immutable: every change of data or kernel goes
    through build_model so the cached factorisation stays consistent.

    Attributes
    ----------
    kernel : KernelParams
        Hyperparameters.
    inputs : numpy.ndarray
        Training inputs, shape (n, d).
    targets : numpy.ndarray
        Training targets, shape (n,).
    prior_mean : float
        Constant prior mean.
    chol : numpy.ndarray
        Lower Cholesky factor of K + (noise + jitter) I.
    alpha : numpy.ndarray
        (K + (noise + jitter) I)^-1 (targets - prior_mean).
    jitter : float
        Diagonal jitter that was needed for the factorisation.

    """
    kernel: KernelParams
    inputs: np.ndarray
    targets: np.ndarray
    prior_mean: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float

    @property
    def dim(self):
        return self.inputs.shape[1]

    @property
    def n(self):
        return self.inputs.shape[0]


def kernel_eval(a, b, kernel):
    """
    Squared-exponential covariance between two points.

    Parameters
    ----------
    a, b : array-like
        Points of equal dimension.
    kernel : KernelParams
        Hyperparameters.

    Returns
    -------
    value : float
        signal_variance * exp(-|a - b|^2 / (2 lengthscale^2))

    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()

    if a.shape != b.shape:
        raise ValueError('Dimension mismatch: {} vs {}'.format(a.shape[0], b.shape[0]))
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError('Kernel arguments must be finite')

    sqdist = float(np.sum((a - b) ** 2))

    return kernel.signal_variance * math.exp(-sqdist / (2.0 * kernel.lengthscale ** 2))


def kernel_matrix(a, b, kernel):
    """
    Covariance matrix between the rows of a and the rows of b.

    """
    sqdist = cdist(a, b, 'sqeuclidean')

    return kernel.signal_variance * np.exp(-sqdist / (2.0 * kernel.lengthscale ** 2))


def factorize(cov, kernel, log_level=logging.WARNING):
    """
    Cholesky factor of cov + noise I, escalating the jitter when needed.

    Any jitter that was needed is logged at log_level; the likelihood search
    passes DEBUG since it factorises once per evaluation.

    Returns
    -------
    chol : numpy.ndarray
        Lower triangular factor.
    jitter : float
        The jitter that was added on top of the noise variance.

    """
    n = cov.shape[0]
    base = cov + kernel.noise_variance * np.eye(n)

    ladder = [0.0] + [kernel.signal_variance * 10.0 ** e for e in JITTER_EXPONENTS]

    for jitter in ladder:
        try:
            chol = cholesky(base + jitter * np.eye(n), lower=True)
        except LinAlgError:
            continue
        if jitter > 0.0:
            logger.log(log_level, 'Covariance factorised with jitter %.3g', jitter)
        return chol, jitter

    raise FactorizationError(
        'Covariance matrix (n={}) not positive definite with jitter up to {:.3g}'.format(
            n, ladder[-1]))


def build_model(inputs, targets, kernel, prior_mean=None):
    """
    Condition a GP on data.

    Parameters
    ----------
    inputs : array-like
        Training inputs, shape (n, d).
    targets : array-like
        Training targets, shape (n,).
    kernel : KernelParams
        Hyperparameters.
    prior_mean : float, optional
        Constant prior mean. Defaults to the empirical mean of the targets.

    Returns
    -------
    model : GpModel

    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()

    if inputs.shape[0] != targets.shape[0]:
        raise ValueError('{} inputs but {} targets'.format(inputs.shape[0], targets.shape[0]))
    if targets.shape[0] < 1:
        raise ValueError('A GP needs at least one observation')
    if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
        raise ValueError('GP training data must be finite')

    if prior_mean is None:
        prior_mean = float(np.mean(targets))

    chol, jitter = factorize(kernel_matrix(inputs, inputs, kernel), kernel)
    alpha = cho_solve((chol, True), targets - prior_mean)

    return GpModel(
        kernel=kernel,
        inputs=inputs,
        targets=targets,
        prior_mean=float(prior_mean),
        chol=chol,
        alpha=alpha,
        jitter=jitter,
    )


def predict(model, queries):
    """
    Posterior mean and variance at many points.

    Parameters
    ----------
    model : GpModel
        Conditioned GP.
    queries : array-like
        Query points, shape (m, d).

    Returns
    -------
    mean : numpy.ndarray
        Posterior means, shape (m,).
    variance : numpy.ndarray
        Posterior variances, shape (m,), clipped at zero.

    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))

    if queries.shape[1] != model.dim:
        raise ValueError('Query dimension {} does not match model dimension {}'.format(
            queries.shape[1], model.dim))
    if not np.all(np.isfinite(queries)):
        raise ValueError('GP queries must be finite')

    cross = kernel_matrix(queries, model.inputs, model.kernel)
    mean = model.prior_mean + cross @ model.alpha

    v = solve_triangular(model.chol, cross.T, lower=True)
    variance = model.kernel.signal_variance - np.sum(v ** 2, axis=0)

    return mean, np.maximum(variance, 0.0)


def posterior(model, query):
    """
    Posterior moments of the latent function at a single point.

    """
    query = np.asarray(query, dtype=float)
    if query.ndim != 1:
        raise ValueError('posterior expects a single point, got shape {}'.format(query.shape))

    mean, variance = predict(model, query.reshape(1, -1))

    return PosteriorMoments(float(mean[0]), float(variance[0]))


def log_marginal_likelihood(model):
    """
    Log marginal likelihood of the training targets under the model.

    """
    residual = model.targets - model.prior_mean

    return float(
        -0.5 * residual @ model.alpha
        - np.sum(np.log(np.diag(model.chol)))
        - 0.5 * model.n * math.log(2.0 * math.pi)
    )


def default_bounds():
    return {
        'lengthscale': LENGTHSCALE_RANGE,
        'signal_variance': SIGNAL_VARIANCE_RANGE,
        'noise_variance': NOISE_VARIANCE_RANGE,
    }


def hyperparameter_log_bounds(bounds):
    """
    (3, 2) log-space search box; raises ValueError for intervals outside the
    allowed hyperparameter ranges.

    """
    names = ('lengthscale', 'signal_variance', 'noise_variance')
    ranges = (LENGTHSCALE_RANGE, SIGNAL_VARIANCE_RANGE, NOISE_VARIANCE_RANGE)

    rows = []
    for name, allowed in zip(names, ranges):
        lower, upper = bounds[name]
        if not allowed[0] <= lower <= upper <= allowed[1]:
            raise ValueError('Bounds for {} must lie inside [{:g}, {:g}], got [{:g}, {:g}]'.format(
                name, allowed[0], allowed[1], lower, upper))
        rows.append((math.log(lower), math.log(upper)))

    return np.array(rows)


def _kernel_from_log(log_params, log_bounds):
    values = np.exp(np.clip(log_params, log_bounds[:, 0], log_bounds[:, 1]))
    limits = np.array([LENGTHSCALE_RANGE, SIGNAL_VARIANCE_RANGE, NOISE_VARIANCE_RANGE])

    # exp(log(x)) can land a hair outside the interval
    values = np.clip(values, limits[:, 0], limits[:, 1])

    return KernelParams(
        lengthscale=float(values[0]),
        signal_variance=float(values[1]),
        noise_variance=float(values[2]),
    )


def _negative_lml(log_params, log_bounds, sqdist, residual):
    kernel = _kernel_from_log(log_params, log_bounds)
    cov = kernel.signal_variance * np.exp(-sqdist / (2.0 * kernel.lengthscale ** 2))

    try:
        chol, _ = factorize(cov, kernel, log_level=logging.DEBUG)
    except FactorizationError:
        return FAILED_FIT_VALUE

    alpha = cho_solve((chol, True), residual)

    return float(
        0.5 * residual @ alpha
        + np.sum(np.log(np.diag(chol)))
        + 0.5 * residual.shape[0] * math.log(2.0 * math.pi)
    )


def fit_hyperparameters(inputs, targets, bounds=None, restarts=8, seed=0, prior_mean=None):
    """
    Fit kernel hyperparameters by maximising the log marginal likelihood.

    The search runs in log-space with L-BFGS-B from `restarts` starts of a
    seeded Halton design over the bounds. The best likelihood wins, ties go to
    the lower restart index.

    Parameters
    ----------
    inputs : array-like
        Training inputs, shape (n, d), n >= 2.
    targets : array-like
        Training targets, shape (n,).
    bounds : dict, optional
        Intervals keyed by 'lengthscale', 'signal_variance', 'noise_variance'.
    restarts : int
        Number of multistarts.
    seed : int or list of int
        Entropy of the start design.
    prior_mean : float, optional
        Constant prior mean, empirical target mean by default.

    Returns
    -------
    model : GpModel
        GP conditioned on the data with the fitted hyperparameters.

    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()

    if targets.shape[0] < 2:
        raise ValueError('Hyperparameter fitting needs at least 2 observations, got {}'.format(
            targets.shape[0]))
    if restarts < 1:
        raise ValueError('restarts must be at least 1')

    log_bounds = hyperparameter_log_bounds(bounds if bounds is not None else default_bounds())

    if prior_mean is None:
        prior_mean = float(np.mean(targets))

    sqdist = cdist(inputs, inputs, 'sqeuclidean')
    residual = targets - prior_mean

    design = multistart_points(3, restarts, seed)
    starts = log_bounds[:, 0] + design * (log_bounds[:, 1] - log_bounds[:, 0])

    def objective(log_params):
        return _negative_lml(log_params, log_bounds, sqdist, residual)

    best_x, best_value = None, np.inf

    for index, start in enumerate(starts):
        start_value = objective(start)
        result = minimize(objective, start, method='L-BFGS-B', bounds=log_bounds)

        if result.fun < start_value:
            x, value = np.asarray(result.x), float(result.fun)
        else:
            x, value = start, start_value

        logger.debug('GP restart %d: -lml %.6g -> %.6g', index, start_value, value)

        if value < best_value:
            best_x, best_value = x, value

    kernel = _kernel_from_log(best_x, log_bounds)
    logger.debug('Fitted GP kernel %s (lml %.6g)', kernel, -best_value)

    return build_model(inputs, targets, kernel, prior_mean=prior_mean)


def model_to_dict(model):
    """
    JSON-ready description of a model: hyperparameters and training set.

    """
    return {
        'kernel': model.kernel.to_dict(),
        'prior_mean': model.prior_mean,
        'jitter': model.jitter,
        'inputs': model.inputs.tolist(),
        'targets': model.targets.tolist(),
    }
