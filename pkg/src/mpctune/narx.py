"""
NARX prediction model

Second-order polynomial NARX model without interaction terms, one output lag
and one input lag, on data scaled to [0, 1]. Each output row of the
coefficient matrix multiplies the basis {1, y1, y2, u, y1^2, y2^2, u^2}, with
y1 = cB, y2 = TR and u = F.

"""
import logging

import numpy as np

logger = logging.getLogger(__name__)

N_BASIS = 7
N_COEFFS = 2 * N_BASIS

SCALING = {
    'cB': (0.0, 2.0),
    'TR': (100.0, 150.0),
    'F': (5.0, 35.0),
}

PREDICTION_CLAMP = 10.0

RIDGE_LAMBDA = 1e-8


def check_scaling(scaling):
    """
    Raise ValueError unless every signal range has max > min.

    """
    for signal in ('cB', 'TR', 'F'):
        lower, upper = scaling[signal]
        if not upper > lower:
            raise ValueError('Scaling for {} needs max > min, got [{!r}, {!r}]'.format(
                signal, lower, upper))


def scale(values, bounds):
    """
    Map physical values to scaled units, bounds[0] -> 0 and bounds[1] -> 1.

    """
    lower, upper = bounds

    return (np.asarray(values, dtype=float) - lower) / (upper - lower)


def unscale(values, bounds):
    lower, upper = bounds

    return lower + np.asarray(values, dtype=float) * (upper - lower)


def scale_outputs(y, scaling):
    """
    Scale an output pair (cB, TR).

    """
    return np.array([scale(y[0], scaling['cB']), scale(y[1], scaling['TR'])])


def theta_to_coeffs(theta):
    """
    The (2, 7) coefficient matrix held in the first 14 tuning parameters.

    """
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape[0] < N_COEFFS:
        raise ValueError('Expected at least {} values, got {}'.format(N_COEFFS, theta.shape[0]))

    return theta[:N_COEFFS].reshape(2, N_BASIS)


def coeffs_to_theta(coeffs, backoff):
    """
    Tuning vector: cB row, TR row, then the backoff.

    """
    return np.append(np.asarray(coeffs, dtype=float).reshape(N_COEFFS), float(backoff))


def basis(y, u):
    y1, y2 = y

    return np.array([1.0, y1, y2, u, y1 ** 2, y2 ** 2, u ** 2])


def design_matrix(outputs, inputs):
    """
    Regressor matrix with one basis row per sample.

    Parameters
    ----------
    outputs : numpy.ndarray
        Scaled outputs y_k, shape (N, 2).
    inputs : numpy.ndarray
        Scaled inputs u_k, shape (N,).

    """
    y1, y2 = outputs[:, 0], outputs[:, 1]

    return np.column_stack([
        np.ones_like(inputs), y1, y2, inputs, y1 ** 2, y2 ** 2, inputs ** 2,
    ])


def predict_one_step(coeffs, y_scaled, u_scaled):
    """
    Next scaled output pair from the current scaled output and input.

    """
    coeffs = np.asarray(coeffs, dtype=float).reshape(2, N_BASIS)

    return coeffs @ basis(y_scaled, u_scaled)


def simulate_horizon(coeffs, y0_scaled, u_sequence_scaled, clamp=PREDICTION_CLAMP):
    """
    Iterate the one-step model over an input sequence.

    Parameters
    ----------
    coeffs : array-like
        (2, 7) coefficients.
    y0_scaled : array-like
        Current scaled output pair.
    u_sequence_scaled : array-like
        Scaled inputs, length Np >= 1.
    clamp : float or None
        Predictions are clipped to [-clamp, clamp]; None disables clipping.

    Returns
    -------
    predictions : numpy.ndarray
        Scaled outputs y_1..y_Np, shape (Np, 2).

    """
    coeffs = np.asarray(coeffs, dtype=float).reshape(2, N_BASIS)
    u_sequence_scaled = np.asarray(u_sequence_scaled, dtype=float).ravel()

    if u_sequence_scaled.shape[0] < 1:
        raise ValueError('Prediction horizon must be at least 1')

    predictions = np.empty((u_sequence_scaled.shape[0], 2))
    y = np.asarray(y0_scaled, dtype=float)

    for i, u in enumerate(u_sequence_scaled):
        y = coeffs @ basis(y, u)
        if clamp is not None:
            y = np.clip(y, -clamp, clamp)
        predictions[i] = y

    return predictions


def accuracy(actual, predicted):
    """
    Fit accuracy 1 - NRMSE per output column.

    NRMSE is |y - y_hat| / |y - mean(y)|, the normalisation used by
    common system identification toolboxes.

    """
    actual = np.atleast_2d(np.asarray(actual, dtype=float).T).T
    predicted = np.atleast_2d(np.asarray(predicted, dtype=float).T).T

    error = np.linalg.norm(actual - predicted, axis=0)
    spread = np.linalg.norm(actual - actual.mean(axis=0), axis=0)

    with np.errstate(divide='ignore', invalid='ignore'):
        return 1.0 - error / spread


def fit_least_squares(rows, holdout_fraction=0.0):
    """
    Least-squares NARX fit, one regression per output.

    Parameters
    ----------
    rows : array-like
        Scaled samples (y1_k, y2_k, u_k, y1_k+1, y2_k+1), shape (N, 5).
    holdout_fraction : float
        Trailing share of the rows kept out of the fit and used to report
        one-step accuracy.

    Returns
    -------
    coeffs : numpy.ndarray
        (2, 7) coefficients.
    report : dict
        Sample counts, regressor rank, whether the ridge fallback was used,
        and training / holdout accuracy (1 - NRMSE) per output.

    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != 5:
        raise ValueError('Expected rows of (y1, y2, u, y1_next, y2_next), got {} columns'.format(
            rows.shape[1]))

    n_holdout = int(round(rows.shape[0] * holdout_fraction))
    n_train = rows.shape[0] - n_holdout

    if n_train < N_COEFFS:
        raise ValueError('Need at least {} training rows, got {}'.format(N_COEFFS, n_train))

    train, holdout = rows[:n_train], rows[n_train:]

    regressors = design_matrix(train[:, 0:2], train[:, 2])
    targets = train[:, 3:5]

    rank = int(np.linalg.matrix_rank(regressors))
    ridge = rank < N_BASIS

    if ridge:
        logger.warning('NARX regressors have rank %d < %d, using ridge fallback', rank, N_BASIS)
        gram = regressors.T @ regressors + RIDGE_LAMBDA * np.eye(N_BASIS)
        solution = np.linalg.solve(gram, regressors.T @ targets)
    else:
        solution, _, _, _ = np.linalg.lstsq(regressors, targets, rcond=None)

    coeffs = solution.T

    report = {
        'n_train': n_train,
        'n_holdout': n_holdout,
        'rank': rank,
        'ridge': ridge,
        'train_accuracy': accuracy(targets, regressors @ solution).tolist(),
        'holdout_accuracy': None,
        'holdout_accuracy_mean': None,
    }

    if n_holdout > 0:
        predicted = design_matrix(holdout[:, 0:2], holdout[:, 2]) @ solution
        holdout_accuracy = accuracy(holdout[:, 3:5], predicted)
        report['holdout_accuracy'] = holdout_accuracy.tolist()
        report['holdout_accuracy_mean'] = float(np.mean(holdout_accuracy))

    return coeffs, report
