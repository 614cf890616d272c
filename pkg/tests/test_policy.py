import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from esgdmv.capm import AssetUniverse
from esgdmv.dmv import InvestorProfile, InvestorType, MarketParams, dmv_objective, dmv_optimal_weight
from esgdmv.errors import ConfigError
from esgdmv.market_env import ReturnMoments, RewardKind, RewardSpec, batch_reward, reward
from esgdmv.policy import PolicyParams, SearchConfig, closed_form_policy, cross_entropy_search, project_demand, softmax

FAST = SearchConfig(population=48, iterations=120, seed=3)


def test_policy_params_validation():
    with pytest.raises(ConfigError):
        PolicyParams(np.array([0.5, 0.6]))
    p = PolicyParams(np.array([0.25, 0.75]))
    assert p.cash == 0.75


def test_search_config_validation():
    for bad in (dict(population=0), dict(elite_fraction=1.0), dict(initial_sd=0.0), dict(iterations=0)):
        with pytest.raises(ConfigError):
            SearchConfig(**bad)
    assert SearchConfig().n_elite == 8


def test_closed_form_scalar():
    u = AssetUniverse(np.array([0.06]), np.array([[0.04]]), np.array([0.02]), np.array([[0.01]]))
    p = closed_form_policy(u, InvestorProfile(InvestorType.I, gamma=2.0))
    np.testing.assert_allclose(p.weights, [0.75, 0.25], atol=1e-15)


def test_closed_form_all_negative_goes_to_cash():
    u = AssetUniverse(np.array([-0.05, -0.02]), np.eye(2) * 0.04, np.zeros(2), np.zeros((2, 2)))
    p = closed_form_policy(u, InvestorProfile(InvestorType.N))
    np.testing.assert_array_equal(p.weights, [0.0, 0.0, 1.0])
    assert p.events


def test_closed_form_zero_demand():
    u = AssetUniverse(np.zeros(2), np.eye(2), np.zeros(2), np.eye(2))
    np.testing.assert_array_equal(closed_form_policy(u, InvestorProfile(InvestorType.U)).weights, [0, 0, 1])


def test_project_demand_renormalizes():
    p = project_demand(np.array([2.0, 1.0, -1.0]))
    np.testing.assert_allclose(p.weights, [2 / 3, 1 / 3, 0.0, 0.0])
    assert len(p.events) == 2


@given(hnp.arrays(np.float64, st.integers(1, 6), elements=st.floats(-5, 5)))
def test_project_demand_on_simplex(x):
    w = project_demand(x).weights
    assert (w >= 0).all() and abs(w.sum() - 1.0) <= 1e-9


@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 6)), elements=st.floats(-50, 50)))
def test_softmax_rows_on_simplex(z):
    w = softmax(z)
    assert (w >= 0).all()
    np.testing.assert_allclose(w.sum(axis=-1), 1.0, atol=1e-12)


def test_cem_quadratic_recovery():
    target = np.array([0.5, 0.3, 0.2])  # interior point, so it is the simplex argmax of -|w - target|^2
    res = cross_entropy_search(lambda w: -float(np.sum((w - target) ** 2)), 3, SearchConfig(seed=11), trace=True)
    assert np.max(np.abs(res.best_params.weights - target)) <= 1e-2
    assert all(b >= a for a, b in zip(res.best_history, res.best_history[1:]))


def test_cem_constant_reward_keeps_first_sample():
    cfg = SearchConfig(population=8, iterations=5, seed=2)
    res = cross_entropy_search(lambda w: 1.0, 4, cfg, trace=True)
    first = softmax(np.random.default_rng(2).standard_normal((8, 4)))[0]
    np.testing.assert_allclose(res.best_params.weights, first, atol=1e-12)
    assert res.best_history == [1.0] * 5


def test_cem_reproducible_and_vectorized_equivalent():
    rng = np.random.default_rng(0)
    mom = ReturnMoments(rng.normal(0.0, 0.1, 3), np.eye(3) * 0.05, rf=0.0)
    spec = RewardSpec(RewardKind.DMV_U, rng.normal(size=3), esg_cov=np.eye(3) * 0.2)
    a = cross_entropy_search(lambda w: reward(spec, w, mom), 4, FAST)
    b = cross_entropy_search(lambda w: reward(spec, w, mom), 4, FAST)
    c = cross_entropy_search(lambda W: batch_reward(spec, W, mom), 4, FAST, vectorized=True)
    np.testing.assert_array_equal(a.weights, b.weights)
    np.testing.assert_allclose(a.weights, c.weights, atol=1e-12)


def test_cem_single_asset_dmv_matches_closed_form():
    m = MarketParams(mu_f=0.01, mu_M=0.07, sigma2_M=0.04, mu_g=0.02, sigma2_g=0.01)
    prof = InvestorProfile(InvestorType.U)
    w_star = dmv_optimal_weight(m, prof).w
    res = cross_entropy_search(lambda w: dmv_objective(w[0], m, prof), 2, SearchConfig(seed=5))
    assert abs(res.weights[0] - w_star) <= 1e-2


def test_type_n_reward_wiring():
    rng = np.random.default_rng(4)
    esg = np.abs(rng.normal(size=3)) + 0.1  # positive ESG, so mu_g > 0 for any portfolio
    mom = ReturnMoments(rng.normal(0.02, 0.01, 3), np.eye(3) * 0.02, rf=0.005)
    spec_n = RewardSpec(RewardKind.DMV_N, esg, b=0.8)
    spec_i = RewardSpec(RewardKind.DMV_I, esg)
    w = cross_entropy_search(lambda W: batch_reward(spec_n, W, mom), 4, FAST, vectorized=True).weights
    sleeve = 0.8 * float(w[:3] @ esg)
    assert sleeve > 0.0
    assert reward(spec_n, w, mom) >= reward(spec_i, w, mom) + sleeve - 1e-12
