import numpy as np
import pytest

from mpctune.acquisition import (
    FEASIBILITY_ONLY,
    AcquisitionConfig,
    Incumbent,
    compute_incumbent,
    eic,
    expected_improvement,
    feasibility_from_moments,
    improvement_from_moments,
    maximize_acquisition,
    probability_feasible,
    start_points,
)
from mpctune.gp import KernelParams, build_model, predict


@pytest.fixture
def setup_objective_gp():
    inputs = np.linspace(0, 1, 8).reshape(-1, 1)
    targets = (inputs[:, 0] - 0.7) ** 2
    return build_model(inputs, targets, KernelParams(0.3, 0.1, 1e-8))


@pytest.fixture
def setup_feasible_gp():
    inputs = np.linspace(0, 1, 5).reshape(-1, 1)
    return build_model(inputs, np.ones(5), KernelParams(0.3, 0.01, 1e-6))


def test_config_validation():

    with pytest.raises(ValueError):
        AcquisitionConfig(beta=0.0)

    with pytest.raises(ValueError):
        AcquisitionConfig(beta=0.6)

    with pytest.raises(ValueError):
        AcquisitionConfig(mode='UCB')

    with pytest.raises(ValueError):
        AcquisitionConfig(restarts=0)


def test_improvement_matches_monte_carlo():

    rng = np.random.default_rng(0)

    for _ in range(20):
        mean = rng.uniform(-2, 2)
        sigma = rng.uniform(0.1, 2)
        eta = rng.uniform(-2, 2)

        samples = mean + sigma * rng.standard_normal(1000000)
        gains = np.maximum(0.0, eta - samples)
        standard_error = gains.std() / np.sqrt(gains.shape[0])

        analytic = float(improvement_from_moments(mean, sigma ** 2, eta))

        assert abs(analytic - gains.mean()) <= 4 * standard_error + 1e-6


def test_improvement_without_uncertainty():

    assert float(improvement_from_moments(1.0, 0.0, 3.0)) == 2.0
    assert float(improvement_from_moments(3.0, 0.0, 1.0)) == 0.0
    assert float(improvement_from_moments(0.0, 1.0, 0.0)) == pytest.approx(1 / np.sqrt(2 * np.pi))


def test_feasibility_probability():

    assert float(feasibility_from_moments(0.0, 1.0)) == pytest.approx(0.5)
    assert float(feasibility_from_moments(1.0, 0.0)) == 1.0
    assert float(feasibility_from_moments(0.0, 0.0)) == 1.0
    assert float(feasibility_from_moments(-1e-3, 0.0)) == 0.0
    assert probability_feasible(None, np.array([0.3])) == 1.0


def test_eic_identities(setup_objective_gp, setup_feasible_gp):

    for x in np.linspace(0, 1, 11):
        query = np.array([x])
        ei = expected_improvement(setup_objective_gp, query, 0.05)

        assert ei >= 0.0
        assert eic(setup_objective_gp, None, query, 0.05) == ei
        assert eic(setup_objective_gp, setup_feasible_gp, query, 0.05) == pytest.approx(ei)


def test_incumbent_matches_grid_minimum(setup_objective_gp, setup_feasible_gp):

    config = AcquisitionConfig(restarts=8, local_iters=200)
    incumbent = compute_incumbent(setup_objective_gp, setup_feasible_gp, config, seed=0)

    grid = np.linspace(0, 1, 2001).reshape(-1, 1)
    mean, _ = predict(setup_objective_gp, grid)

    assert incumbent.feasible_found
    assert incumbent.value <= mean.min() + 1e-6
    assert 0.0 <= incumbent.location[0] <= 1.0


def test_incumbent_when_nothing_is_feasible(setup_objective_gp):

    inputs = np.linspace(0, 1, 5).reshape(-1, 1)
    infeasible = build_model(inputs, -np.ones(5), KernelParams(0.3, 0.01, 1e-6))

    incumbent = compute_incumbent(
        setup_objective_gp, infeasible, AcquisitionConfig(restarts=4, local_iters=50), seed=0)

    assert not incumbent.feasible_found
    assert incumbent.value == np.inf
    assert incumbent.location is None


def test_larger_beta_never_worsens_incumbent():

    inputs = np.linspace(0, 1, 9).reshape(-1, 1)
    objective = build_model(inputs, -inputs[:, 0], KernelParams(1.0, 1.0, 1e-8))
    constraint = build_model(inputs, 0.5 - inputs[:, 0], KernelParams(1.0, 1.0, 1e-2))

    values = []
    for beta in (0.01, 0.1, 0.3):
        config = AcquisitionConfig(beta=beta, restarts=8, local_iters=200)
        values.append(compute_incumbent(objective, constraint, config, seed=0).value)

    assert values[1] <= values[0] + 1e-6
    assert values[2] <= values[1] + 1e-6


def test_proposal_seeks_feasibility_without_incumbent(setup_objective_gp):

    inputs = np.linspace(0, 1, 11).reshape(-1, 1)
    constraint = build_model(inputs, inputs[:, 0] - 0.8, KernelParams(0.2, 0.1, 1e-6))
    incumbent = Incumbent(value=np.inf, location=None, feasible_found=False)

    point = maximize_acquisition(
        setup_objective_gp, constraint, incumbent,
        AcquisitionConfig(restarts=8, local_iters=100), seed=0)

    assert 0.8 <= point[0] <= 1.0


def test_flat_acquisition_explores_largest_variance(setup_objective_gp):

    config = AcquisitionConfig(restarts=8, local_iters=50)
    incumbent = Incumbent(value=-1e6, location=np.array([0.7]), feasible_found=True)

    point = maximize_acquisition(setup_objective_gp, None, incumbent, config, seed=3)

    starts = start_points(1, config, 3)
    _, variance = predict(setup_objective_gp, starts)

    np.testing.assert_array_equal(point, starts[np.argmax(variance)])


def test_proposal_on_one_dimensional_grid(setup_objective_gp):

    config = AcquisitionConfig(restarts=16, local_iters=200)
    incumbent = compute_incumbent(setup_objective_gp, None, config, seed=0)

    point = maximize_acquisition(setup_objective_gp, None, incumbent, config, seed=0)

    grid = np.linspace(0, 1, 2001)
    values = [expected_improvement(setup_objective_gp, np.array([x]), incumbent.value)
              for x in grid]

    assert expected_improvement(setup_objective_gp, point, incumbent.value) >= \
        max(values) - 1e-6 * max(1.0, max(values))


def test_certain_feasibility_gives_plain_ei_proposal(setup_objective_gp):

    inputs = np.linspace(0, 1, 5).reshape(-1, 1)
    always_feasible = build_model(inputs, np.full(5, 0.05), KernelParams(0.3, 1e-6, 1e-10))

    config = AcquisitionConfig(restarts=8, local_iters=100)
    incumbent = compute_incumbent(setup_objective_gp, None, config, seed=1)

    plain = maximize_acquisition(setup_objective_gp, None, incumbent, config, seed=1)
    constrained = maximize_acquisition(
        setup_objective_gp, always_feasible, incumbent, config, seed=1)

    np.testing.assert_array_equal(plain, constrained)


def test_feasibility_only_mode(setup_objective_gp, setup_feasible_gp):

    config = AcquisitionConfig(restarts=4, local_iters=50, mode=FEASIBILITY_ONLY)
    incumbent = compute_incumbent(setup_objective_gp, setup_feasible_gp, config, seed=0)

    point = maximize_acquisition(setup_objective_gp, setup_feasible_gp, incumbent, config, seed=0)

    assert point.shape == (1,)
    assert probability_feasible(setup_feasible_gp, point) > 0.99
