"""
CSTR plant

Four-state continuously stirred tank reactor with the reactions A -> B -> C
and 2A -> D, Arrhenius kinetics and a cooling jacket. Used only as a black
box by the controller code: step it, measure it.

State vectors are ordered (cA, cB, TR, TK) in mol/L, mol/L, degC, degC and
time is in hours.

"""
import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

STATE_NAMES = ('cA', 'cB', 'TR', 'TK')

# cA0 (feed concentration) is deliberately absent and must be configured
PLANT_PARAMETERS = {
    'k01': 1.287e12,
    'k02': 1.287e12,
    'k03': 9.043e9,
    'Ea1R': 9758.3,
    'Ea2R': 9758.3,
    'Ea3R': 7704.0,
    'dH_AB': 4.2,
    'dH_BC': -11.0,
    'dH_AD': -41.85,
    'rho': 0.9342,
    'cp': 3.01,
    'cpK': 2.0,
    'A': 0.215,
    'VR': 10.01,
    'mK': 5.0,
    'Tin': 130.0,
    'kW': 4032.0,
    'QK_dot': -4500.0,
}

INITIAL_STATE = {
    'cA': 1.0,
    'cB': 1.0,
    'TR': 100.0,
    'TK': 100.0,
}

POSITIVE_PARAMETERS = ('rho', 'cp', 'cpK', 'VR', 'mK', 'A')


class IntegrationError(ArithmeticError):
    """The integrator produced a non-finite state."""


def validate_plant_parameters(params):
    """
    Check a plant parameter dict for completeness and physical sense.

    Raises
    ------
    ValueError
        If a parameter is missing (including cA0), non-finite, or a
        quantity that must be positive is not.

    """
    missing = [key for key in list(PLANT_PARAMETERS) + ['cA0'] if key not in params]
    if missing:
        raise ValueError('Plant parameters missing: {}'.format(', '.join(missing)))

    for key in list(PLANT_PARAMETERS) + ['cA0']:
        if not math.isfinite(params[key]):
            raise ValueError('Plant parameter {} is not finite'.format(key))

    for key in POSITIVE_PARAMETERS + ('cA0',):
        if params[key] <= 0:
            raise ValueError('Plant parameter {} must be positive, got {!r}'.format(
                key, params[key]))


def initial_state(values=None):
    """
    State vector from a dict keyed by STATE_NAMES (defaults to Table-2 values).

    """
    values = INITIAL_STATE if values is None else values

    return np.array([float(values[name]) for name in STATE_NAMES])


def rate_constants(TR, params):
    """
    Arrhenius rate constants k1, k2, k3 at reactor temperature TR (degC).

    """
    T = TR + 273.15

    k1 = params['k01'] * math.exp(-params['Ea1R'] / T)
    k2 = params['k02'] * math.exp(-params['Ea2R'] / T)
    k3 = params['k03'] * math.exp(-params['Ea3R'] / T)

    return k1, k2, k3


def derivatives(state, F, params):
    """
    Time derivatives of the CSTR state.

    Parameters
    ----------
    state : array-like
        (cA, cB, TR, TK).
    F : float
        Feed flow over reactor volume (1/h).
    params : dict
        Plant parameters including cA0.

    Returns
    -------
    rates : numpy.ndarray
        (dcA/dt, dcB/dt, dTR/dt, dTK/dt) per hour.

    """
    cA, cB, TR, TK = (float(v) for v in state)
    k1, k2, k3 = rate_constants(TR, params)

    rho_cp = params['rho'] * params['cp']
    heat_transfer = params['kW'] * params['A']

    dcA = F * (params['cA0'] - cA) - k1 * cA - k3 * cA ** 2
    dcB = -F * cB + k1 * cA - k2 * cB
    dTR = (
        F * (params['Tin'] - TR)
        + heat_transfer / (rho_cp * params['VR']) * (TK - TR)
        - (k1 * cA * params['dH_AB'] + k2 * cB * params['dH_BC']
           + k3 * cA ** 2 * params['dH_AD']) / rho_cp
    )
    dTK = (params['QK_dot'] + heat_transfer * (TR - TK)) / (params['mK'] * params['cpK'])

    return np.array([dcA, dcB, dTR, dTK])


def step(state, F, dt, substeps, params):
    """
    Advance the plant one sampling interval with classical RK4.

    Parameters
    ----------
    state : array-like
        Current state.
    F : float
        Input held constant over the interval.
    dt : float
        Interval length (h).
    substeps : int
        Number of equal RK4 sub-steps.
    params : dict
        Plant parameters.

    Returns
    -------
    state : numpy.ndarray
        State at the end of the interval.

    """
    if dt <= 0:
        raise ValueError('dt must be positive, got {!r}'.format(dt))
    if substeps < 1:
        raise ValueError('substeps must be at least 1, got {!r}'.format(substeps))

    x = np.asarray(state, dtype=float).copy()
    h = dt / substeps

    try:
        for _ in range(substeps):
            k1 = derivatives(x, F, params)
            k2 = derivatives(x + 0.5 * h * k1, F, params)
            k3 = derivatives(x + 0.5 * h * k2, F, params)
            k4 = derivatives(x + h * k3, F, params)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    except (OverflowError, ZeroDivisionError) as err:
        raise IntegrationError('Plant integration failed at F={!r}: {}'.format(F, err))

    if not np.all(np.isfinite(x)):
        raise IntegrationError('Plant integration produced a non-finite state at F={!r}'.format(F))

    return x


def measure(state, noise, rng):
    """
    Noisy measurement of (cB, TR).

    Two standard normal draws are consumed on every call, so the stream
    position does not depend on the noise level.

    Parameters
    ----------
    state : array-like
        Plant state.
    noise : dict
        Standard deviations 'sigma_B' (mol/L) and 'sigma_R' (degC).
    rng : numpy.random.Generator
        Random stream.

    Returns
    -------
    y : numpy.ndarray
        (cB_meas, TR_meas).

    """
    draws = rng.standard_normal(2)

    return np.array([
        state[1] + noise['sigma_B'] * draws[0],
        state[2] + noise['sigma_R'] * draws[1],
    ])
