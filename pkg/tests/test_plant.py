import numpy as np
import pytest
from scipy.integrate import solve_ivp

from mpctune.plant import (
    IntegrationError,
    derivatives,
    initial_state,
    measure,
    rate_constants,
    step,
    validate_plant_parameters,
)


def test_rate_constants(setup_plant_parameters):

    k1, k2, k3 = rate_constants(100.0, setup_plant_parameters)

    assert k1 == pytest.approx(5.65, rel=1e-2)
    assert k2 == k1
    assert k3 == pytest.approx(9.77, rel=1e-2)


def test_initial_state():

    np.testing.assert_array_equal(initial_state(), [1.0, 1.0, 100.0, 100.0])
    np.testing.assert_array_equal(
        initial_state({'cA': 2.0, 'cB': 0.5, 'TR': 120.0, 'TK': 110.0}),
        [2.0, 0.5, 120.0, 110.0])


def test_jacket_derivative(setup_plant_parameters):

    rates = derivatives([1.0, 1.0, 100.0, 100.0], 10.0, setup_plant_parameters)

    assert rates.shape == (4,)
    # no temperature difference, so only the jacket heat removal acts
    assert rates[3] == pytest.approx(-4500.0 / (5.0 * 2.0))


def test_feed_balance(setup_plant_parameters):

    params = dict(setup_plant_parameters)
    k1, k2, k3 = rate_constants(100.0, params)

    rates = derivatives([1.0, 1.0, 100.0, 100.0], 10.0, params)

    assert rates[0] == pytest.approx(10.0 * (5.1 - 1.0) - k1 - k3)
    assert rates[1] == pytest.approx(-10.0 + k1 - k2)


def test_validate_plant_parameters(setup_plant_parameters):

    validate_plant_parameters(setup_plant_parameters)

    missing = dict(setup_plant_parameters)
    del missing['cA0']
    with pytest.raises(ValueError):
        validate_plant_parameters(missing)

    negative = dict(setup_plant_parameters, rho=-1.0)
    with pytest.raises(ValueError):
        validate_plant_parameters(negative)

    infinite = dict(setup_plant_parameters, kW=np.inf)
    with pytest.raises(ValueError):
        validate_plant_parameters(infinite)


def test_step_arguments(setup_plant_parameters):

    with pytest.raises(ValueError):
        step(initial_state(), 10.0, 0.0, 10, setup_plant_parameters)

    with pytest.raises(ValueError):
        step(initial_state(), 10.0, 0.005, 0, setup_plant_parameters)


def test_non_finite_state_raises(setup_plant_parameters):

    with pytest.raises(IntegrationError):
        step(initial_state(), np.inf, 0.005, 10, setup_plant_parameters)


def test_rk4_convergence_order(setup_plant_parameters):

    x0 = initial_state()
    reference = step(x0, 20.0, 0.005, 1024, setup_plant_parameters)

    substeps = np.array([2, 4, 8, 16])
    errors = [np.max(np.abs(step(x0, 20.0, 0.005, n, setup_plant_parameters) - reference))
              for n in substeps]

    slope = -np.polyfit(np.log(substeps), np.log(errors), 1)[0]

    assert 3.5 <= slope <= 4.5


def test_matches_reference_integrator(setup_plant_parameters):

    def rhs(t, x):
        return derivatives(x, 20.0, setup_plant_parameters)

    x = initial_state()
    for _ in range(40):
        x = step(x, 20.0, 0.005, 10, setup_plant_parameters)

    reference = solve_ivp(rhs, (0.0, 0.2), initial_state(), method='DOP853',
                          rtol=1e-12, atol=1e-12).y[:, -1]

    np.testing.assert_allclose(x, reference, rtol=1e-5)


def test_state_stays_finite_over_input_range(setup_plant_parameters):

    for F in (5.0, 20.0, 35.0):
        x = initial_state()
        for _ in range(40):
            x = step(x, F, 0.005, 10, setup_plant_parameters)
            assert np.all(np.isfinite(x))
            assert x[0] >= 0.0 and x[1] >= 0.0
            assert 50.0 <= x[2] <= 200.0


def test_measure_without_noise():

    rng = np.random.default_rng(0)
    y = measure([1.0, 0.8, 120.0, 110.0], {'sigma_B': 0.0, 'sigma_R': 0.0}, rng)

    np.testing.assert_array_equal(y, [0.8, 120.0])


def test_measure_consumes_stream_regardless_of_noise():

    state = [1.0, 0.8, 120.0, 110.0]
    quiet = np.random.default_rng(5)
    noisy = np.random.default_rng(5)

    measure(state, {'sigma_B': 0.0, 'sigma_R': 0.0}, quiet)
    measure(state, {'sigma_B': 0.2, 'sigma_R': 10.0}, noisy)

    assert quiet.random() == noisy.random()


def test_measure_noise_statistics():

    rng = np.random.default_rng(1)
    noise = {'sigma_B': 0.2, 'sigma_R': 10.0}
    samples = np.array([measure([1.0, 0.8, 120.0, 110.0], noise, rng) for _ in range(20000)])

    assert abs(samples[:, 0].mean() - 0.8) < 4 * 0.2 / np.sqrt(20000)
    assert abs(samples[:, 1].mean() - 120.0) < 4 * 10.0 / np.sqrt(20000)
    assert samples[:, 0].std() == pytest.approx(0.2, rel=0.05)
    assert samples[:, 1].std() == pytest.approx(10.0, rel=0.05)
