import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esgdmv.capm import (
    AgentPopulation,
    AssetUniverse,
    agent_demand,
    aggregate_no_uncertainty,
    aggregate_with_uncertainty,
    capm_no_uncertainty,
    capm_with_uncertainty,
    checked_solve,
    esg_alpha,
)
from esgdmv.dmv import InvestorProfile, InvestorType, MarketParams, dmv_optimal_weight
from esgdmv.errors import ConfigError, DataError, SingularSystem


def random_universe(rng, n):
    A = rng.normal(size=(n, n))
    S = A @ A.T / n + 0.2 * np.eye(n)
    G = rng.normal(size=(n, n + 1))
    Sg = G @ G.T / n
    return AssetUniverse(rng.uniform(0.01, 0.1, n), 0.05 * S, rng.uniform(0.0, 1.0, n), 0.05 * Sg)


def random_population(rng, k=3):
    w = rng.dirichlet(np.ones(k))
    return AgentPopulation(w, rng.uniform(1, 6, k), rng.uniform(0.2, 2, k), rng.uniform(0.1, 3, k))


def test_demand_classical_limit(rng):
    u = random_universe(rng, 3)
    np.testing.assert_allclose(agent_demand(u, 2.0, 0.0, 0.0), np.linalg.solve(u.Sigma_M, u.mu_r) / 2.0, rtol=1e-12)


def test_demand_hand_example():
    u = AssetUniverse(np.array([0.1, 0.0]), np.eye(2), np.array([0.0, 0.1]), np.eye(2))
    np.testing.assert_allclose(agent_demand(u, 1.0, 1.0, 1.0), [0.05, 0.05], atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.0, 0.05), st.floats(0.0, 0.2), st.floats(1e-3, 0.2), st.floats(-0.1, 0.1), st.floats(0.0, 0.1),
    st.floats(0.5, 10), st.floats(0.01, 3), st.floats(0.0, 5),
)
def test_scalar_reduction(mu_f, mu_M, s2m, mu_g, s2g, gamma, b, theta):
    m = MarketParams(mu_f, mu_M, s2m, mu_g, s2g)
    u = AssetUniverse(np.array([m.premium]), np.array([[s2m]]), np.array([mu_g]), np.array([[s2g]]))
    x = agent_demand(u, gamma, b, theta)[0]
    w = dmv_optimal_weight(m, InvestorProfile(InvestorType.U, gamma, theta, b)).w
    assert abs(x - w) <= 1e-12 * max(1.0, abs(w))


def test_aggregation_examples():
    pop = AgentPopulation(np.array([0.5, 0.5]), np.array([2.0, 4.0]), np.array([1.0, 1.0]), np.zeros(2))
    g, b = aggregate_no_uncertainty(pop)
    assert g == pytest.approx(1 / 0.375) and b == pytest.approx(1.0)
    g, b = aggregate_no_uncertainty(AgentPopulation.homogeneous(gamma=3.0, b=0.7, theta=1.0))
    assert g == pytest.approx(3.0) and b == pytest.approx(0.7)


def test_population_validation():
    with pytest.raises(ConfigError):
        AgentPopulation(np.array([0.6, 0.6]), np.ones(2), np.ones(2), np.ones(2))
    with pytest.raises(ConfigError):
        AgentPopulation(np.array([1.0]), np.array([-1.0]), np.ones(1), np.ones(1))


def test_universe_validation():
    with pytest.raises(DataError):
        AssetUniverse(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros(2), np.zeros((2, 2)))


def test_reference_alpha_example():
    assert esg_alpha(1.5, 2.0, 2.5, 1.0) == 0.5
    assert esg_alpha(1.5, 2.0, 3.5, 1.0) == -0.5
    assert esg_alpha(1.5, 2.0, 3.01, 1.0) < 0.0


def test_uncertainty_aggregation_special_cases(rng):
    u = random_universe(rng, 4)
    pop = random_population(rng).without_uncertainty()
    G, B = aggregate_with_uncertainty(u, pop)
    g, b = aggregate_no_uncertainty(pop)
    np.testing.assert_allclose(G, g * u.Sigma_M, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(B, b * np.eye(4), atol=1e-10)

    one = AgentPopulation(np.array([1.0]), np.array([2.5]), np.array([0.8]), np.array([1.7]))
    G, B = aggregate_with_uncertainty(u, one)
    np.testing.assert_allclose(G, 2.5 * u.Sigma_M + 0.8 * 1.7 * u.Sigma_gM, rtol=1e-10)
    np.testing.assert_allclose(B, 0.8 * np.eye(4), atol=1e-10)

    same_b = AgentPopulation(np.array([0.3, 0.7]), np.array([2.0, 5.0]), np.array([1.3, 1.3]), np.array([0.5, 2.0]))
    _, B = aggregate_with_uncertainty(u, same_b)
    np.testing.assert_allclose(B, 1.3 * np.eye(4), atol=1e-10)


def test_single_asset_alpha_vanishes():
    u = AssetUniverse(np.array([0.05]), np.array([[0.04]]), np.array([0.3]), np.array([[0.01]]))
    pop = AgentPopulation(np.array([0.4, 0.6]), np.array([2.0, 3.0]), np.array([1.0, 0.5]), np.array([1.0, 2.0]))
    for res in (capm_no_uncertainty(u, pop), capm_with_uncertainty(u, pop)):
        # X_M is the raw aggregate demand, so beta is 1 per unit of market holding
        np.testing.assert_allclose(res.beta * res.X_M, [1.0], atol=1e-12)
        np.testing.assert_allclose(res.alpha, [0.0], atol=1e-12)


@pytest.mark.parametrize("seed", range(25))
def test_round_trip_and_market_identities(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    u = random_universe(rng, n)
    pop = random_population(rng, int(rng.integers(1, 5)))
    for res in (capm_no_uncertainty(u, pop), capm_with_uncertainty(u, pop)):
        np.testing.assert_allclose(res.reconstruct_mu_r(), u.mu_r, rtol=1e-8)
        assert abs(res.X_M @ res.beta - 1.0) <= 1e-9
        assert abs(res.X_M @ res.alpha) <= 1e-9


def test_with_uncertainty_collapses_when_theta_zero(rng):
    u = random_universe(rng, 5)
    pop = random_population(rng, 4).without_uncertainty()
    a, b = capm_no_uncertainty(u, pop), capm_with_uncertainty(u, pop)
    np.testing.assert_allclose(b.beta, a.beta, atol=1e-9)
    np.testing.assert_allclose(b.alpha, a.alpha, atol=1e-9)
    np.testing.assert_allclose(b.X_M, a.X_M, atol=1e-9)


def test_theta_continuity(rng):
    u = random_universe(rng, 4)
    base = random_population(rng, 3)
    ref = capm_no_uncertainty(u, base)
    dists = []
    for theta in (1.0, 0.1, 0.01, 0.001):
        pop = AgentPopulation(base.weights, base.gamma, base.b, np.full(3, theta))
        dists.append(np.max(np.abs(capm_with_uncertainty(u, pop).alpha - ref.alpha)))
    assert all(d2 < d1 for d1, d2 in zip(dists, dists[1:]))


def test_single_agent_taste_matrix_is_scalar(rng):
    u = random_universe(rng, 4)
    res = capm_with_uncertainty(u, AgentPopulation.homogeneous(gamma=2.0, b=0.9, theta=1.4))
    np.testing.assert_allclose(res.B_MU, 0.9 * np.eye(4), atol=1e-10)
    np.testing.assert_allclose(res.mu_M * res.beta + res.alpha, u.mu_r, rtol=1e-8)


def test_beta_market_is_covariance_beta(rng):
    u = random_universe(rng, 3)
    res = capm_with_uncertainty(u, random_population(rng))
    np.testing.assert_allclose(res.beta_market, u.Sigma_M @ res.X_M / res.sigma2_M, rtol=1e-12)
    assert abs(res.X_M @ res.beta_market - 1.0) <= 1e-9


def test_checked_solve_rejects_singular():
    with pytest.raises(SingularSystem):
        checked_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 2.0]))
    np.testing.assert_allclose(checked_solve(np.diag([2.0, 4.0]), np.array([2.0, 2.0])), [1.0, 0.5])
