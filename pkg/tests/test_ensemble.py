import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esgdmv.ensemble import (
    EnsembleMethod,
    EnsembleSpec,
    alpha_maxmin,
    centroid,
    ensemble,
    first_principal_component,
    median,
    parse_spec,
    pca_ensemble,
)
from esgdmv.errors import AlphaOutOfRange, ConfigError, DegenerateCovariance, IncompleteRow
from esgdmv.ratings import EsgPanel, StandardizedPanel, standardize
from esgdmv.synthgen import SynthConfig, gen_esg_panel

rows = st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=7)


def test_centroid_examples():
    assert centroid([80, 60, 70, 90]) == 75
    assert centroid([33.3] * 4) == pytest.approx(33.3)
    assert centroid([0, 100]) == 50


def test_median_examples():
    assert median([80, 60, 70, 90]) == 75
    assert median([80, 60, 70, 9000]) == 75
    assert median([10, 20, 30]) == 20


def test_alpha_maxmin_examples():
    assert alpha_maxmin([60, 90], 0.5) == 75
    assert alpha_maxmin([60, 70, 90], 1.0) == 60
    assert alpha_maxmin([60, 70, 90], 0.0) == 90


def test_incomplete_row_and_bad_alpha():
    for fn in (centroid, median, alpha_maxmin):
        with pytest.raises(IncompleteRow):
            fn([1.0, np.nan])
    with pytest.raises(AlphaOutOfRange):
        alpha_maxmin([1.0, 2.0], 1.5)
    with pytest.raises(AlphaOutOfRange):
        EnsembleSpec(EnsembleMethod.ALPHA_MAXMIN, -0.1)


@given(rows, st.floats(0, 1))
def test_bounded_by_row_range(row, alpha):
    lo, hi = min(row), max(row)
    for v in (centroid(row), median(row), alpha_maxmin(row, alpha)):
        assert lo - 1e-9 <= v <= hi + 1e-9


@given(rows, st.floats(0, 1), st.floats(0, 1))
def test_alpha_maxmin_nonincreasing(row, a1, a2):
    lo, hi = sorted((a1, a2))
    assert alpha_maxmin(row, hi) <= alpha_maxmin(row, lo) + 1e-12


@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=3, max_size=7), st.integers(0, 6), st.sampled_from([-1e9, 1e9]))
def test_median_robust_to_one_extreme(row, idx, extreme):
    idx %= len(row)
    if len(row) % 2 == 0:
        # even counts average the two middle values; a single extreme can still move which two those are
        return
    bumped = list(row)
    bumped[idx] = extreme
    lo, hi = sorted(row)[len(row) // 2 - 1], sorted(row)[len(row) // 2 + 1]
    assert lo <= median(bumped) <= hi


@given(rows, st.randoms())
def test_permutation_invariance(row, rnd):
    perm = list(row)
    rnd.shuffle(perm)
    assert centroid(perm) == pytest.approx(centroid(row), abs=1e-9)
    assert median(perm) == median(row)
    assert alpha_maxmin(perm) == alpha_maxmin(row)


def test_pca_identical_columns():
    z = np.array([-1.0, 0.0, 1.0, 2.0, -2.0])
    z = (z - z.mean()) / z.std(ddof=1)
    sp = StandardizedPanel(tuple("abcde"), ("r1", "r2"), np.column_stack([z, z]))
    res = pca_ensemble(sp)
    np.testing.assert_allclose(res.loadings, [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)
    np.testing.assert_allclose(res.scores, np.sqrt(2) * z, atol=1e-12)
    assert res.explained_variance_ratio == pytest.approx(1.0, abs=1e-9)


def test_pca_hand_covariance():
    v, lam, ratio = first_principal_component(np.diag([1.0, 4.0]))
    np.testing.assert_allclose(np.abs(v), [0.0, 1.0], atol=1e-12)
    assert lam == 4.0 and ratio == pytest.approx(0.8)


def test_pca_sign_convention():
    v, _, _ = first_principal_component(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    # loadings sum exactly to zero, so the first loading decides
    assert v[0] > 0.0


def test_pca_zero_covariance():
    with pytest.raises(DegenerateCovariance):
        first_principal_component(np.zeros((3, 3)))


def test_pca_eigen_residual_on_synthetic_panel():
    panel = gen_esg_panel(SynthConfig(seed=3, n_firms=500))
    res = ensemble(panel, EnsembleSpec(EnsembleMethod.PCA))
    z = standardize(panel).values
    cov = np.cov(z, rowvar=False)
    lam = np.linalg.eigvalsh(cov)[-1]
    assert np.max(np.abs(cov @ res.loadings - lam * res.loadings)) <= 1e-8
    assert np.linalg.norm(res.loadings) == pytest.approx(1.0, abs=1e-12)


def test_pca_column_order_invariance():
    panel = gen_esg_panel(SynthConfig(seed=4, n_firms=80))
    order = [2, 0, 3, 1]
    shuffled = EsgPanel(panel.firms, tuple(panel.raters[i] for i in order), panel.scores[:, order])
    a = ensemble(panel, EnsembleSpec(EnsembleMethod.PCA)).scores
    b = ensemble(shuffled, EnsembleSpec(EnsembleMethod.PCA)).scores
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_ensemble_drops_incomplete_rows():
    m = np.array([[10, 20, 30], [40, np.nan, 60], [70, 80, 20], [15, 45, 90], [55, 35, 25]], dtype=float)
    panel = EsgPanel(tuple("abcde"), ("x", "y", "z"), m)
    for method in EnsembleMethod:
        res = ensemble(panel, EnsembleSpec(method))
        assert res.dropped == 1
        assert "b" not in res.firms and len(res.scores) == 4


def test_parse_spec():
    assert parse_spec("median").method is EnsembleMethod.MEDIAN
    s = parse_spec("alpha_maxmin:0.25")
    assert s.alpha == 0.25 and s.name == "alpha_maxmin(0.25)"
    assert parse_spec("alpha_maxmin").alpha == 0.5
    with pytest.raises(ConfigError):
        parse_spec("mode")
