import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import multivariate_normal, norm

from negdep.errors import AsymmetricCov, ClosedFormUnavailable, NotPSD, OutOfRange, PrecisionUnreachable
from negdep.gallery import log_growth_cov, log_growth_process, star_process
from negdep.gaussian import (
    bivariate_threshold_cov,
    bvn_cdf,
    canonical_correlation,
    gaussian_na_check,
    max_linear_correlation,
    orthant_probability,
    sample,
    tail_projection_profile,
    threshold_covariance,
    threshold_law,
    validate_spec,
)
from negdep.model import GaussianSpec, covariance_matrix
from negdep.na import check_na_exact


def _random_corr(rng, n, sign=None):
    A = rng.normal(size=(n, n + 2))
    C = A @ A.T
    d = np.sqrt(np.diag(C))
    return C / np.outer(d, d)


def _random_na_cov(rng, n):
    """Diagonally dominant matrix with nonpositive off-diagonals (hence PSD)."""
    off = -rng.random((n, n))
    off = (off + off.T) / 2
    np.fill_diagonal(off, 0.0)
    diag = np.abs(off).sum(axis=1) + rng.random(n) + 0.05
    return off + np.diag(diag)


# -- bivariate pieces --------------------------------------------------------


@pytest.mark.parametrize("rho", [-0.95, -0.5, 0.0, 0.3, 0.8])
@pytest.mark.parametrize("h, k", [(0.0, 0.0), (0.5, -1.2), (-0.3, 0.0), (0.0, 1.1), (2.0, 2.5), (-1.5, -0.7)])
def test_bvn_cdf_matches_scipy(h, k, rho):
    ref = multivariate_normal(mean=[0, 0], cov=[[1, rho], [rho, 1]]).cdf([h, k])
    assert bvn_cdf(h, k, rho) == pytest.approx(ref, abs=2e-7)


def test_bvn_cdf_degenerate_correlations():
    assert bvn_cdf(0.3, 1.0, 1.0) == pytest.approx(norm.cdf(0.3))
    assert bvn_cdf(0.3, 1.0, -1.0) == pytest.approx(norm.cdf(0.3) + norm.cdf(1.0) - 1)


@given(st.floats(-1, 1))
def test_threshold_cov_is_odd(rho):
    assert bivariate_threshold_cov(-rho) == pytest.approx(-bivariate_threshold_cov(rho), abs=1e-15)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_threshold_cov_is_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert bivariate_threshold_cov(lo) <= bivariate_threshold_cov(hi)


def test_threshold_cov_range():
    with pytest.raises(OutOfRange):
        bivariate_threshold_cov(1.5)
    # rho = 1/2: P(both) = 1/3, so the covariance is 1/3 - 1/4
    assert bivariate_threshold_cov(0.5) == pytest.approx(1 / 12)


# -- orthants and threshold laws ---------------------------------------------


def test_orthant_rho_half_is_one_third():
    spec = GaussianSpec.centered([[1.0, 0.5], [0.5, 1.0]])
    res = orthant_probability(spec, "11")
    assert res.method == "closed_form"
    assert res.probability == pytest.approx(1 / 3, abs=1e-15)


def test_orthant_trivariate_closed_form_matches_scipy():
    rng = np.random.default_rng(2)
    R = _random_corr(rng, 3)
    spec = GaussianSpec.centered(R)
    for pattern in ("000", "101", "111"):
        s = np.array([1.0 if c == "1" else -1.0 for c in pattern])
        # scipy's default Genz error target is 1e-5; ask for more
        ref = multivariate_normal.cdf(
            np.zeros(3), mean=np.zeros(3), cov=R * np.outer(s, s), abseps=1e-9, releps=0, maxpts=10**7
        )
        assert orthant_probability(spec, pattern).probability == pytest.approx(ref, abs=1e-7)


def test_monte_carlo_agrees_with_closed_form():
    spec = GaussianSpec.centered([[1.0, -0.3, 0.2], [-0.3, 1.0, -0.4], [0.2, -0.4, 1.0]])
    exact = orthant_probability(spec, "110")
    mc = orthant_probability(spec, "110", method="monte_carlo", precision=5e-4, seed=3)
    assert mc.method == "monte_carlo"
    assert abs(mc.probability - exact.probability) <= 4 * mc.stderr + 1e-12


def test_monte_carlo_with_thresholds_matches_scipy():
    R = np.array([[1.0, 0.2, -0.1, 0.0], [0.2, 1.0, 0.3, -0.2], [-0.1, 0.3, 1.0, 0.1], [0.0, -0.2, 0.1, 1.0]])
    a = np.array([0.3, -0.5, 0.0, 1.0])
    spec = GaussianSpec(np.zeros(4), R, a)
    res = orthant_probability(spec, "0000", precision=5e-4, seed=1)
    ref = multivariate_normal(mean=np.zeros(4), cov=R).cdf(a)
    assert abs(res.probability - ref) <= 4 * res.stderr + 1e-5


def test_orthant_probabilities_sum_to_one():
    rng = np.random.default_rng(4)
    spec = GaussianSpec.centered(_random_corr(rng, 4))
    results = [orthant_probability(spec, format(p, "04b"), precision=2e-3, seed=5) for p in range(16)]
    total = sum(r.probability for r in results)
    assert abs(total - 1) <= 4 * sum(r.stderr for r in results)


def test_monte_carlo_is_reproducible_and_seed_dependent():
    spec = GaussianSpec.centered(_random_corr(np.random.default_rng(1), 4))
    a = threshold_law(spec, precision=2e-3, seed=11)
    b = threshold_law(spec, precision=2e-3, seed=11)
    c = threshold_law(spec, precision=2e-3, seed=12)
    assert a.law.allclose(b.law, atol=0)
    assert not a.law.allclose(c.law, atol=0)


def test_precision_unreachable():
    spec = GaussianSpec.centered(np.eye(4))
    with pytest.raises(PrecisionUnreachable):
        orthant_probability(spec, "1111", precision=1e-6, max_samples=300_000)


def test_closed_form_unavailable():
    spec = GaussianSpec(np.zeros(3), np.eye(3), [0.1, 0.0, 0.0])
    with pytest.raises(ClosedFormUnavailable):
        orthant_probability(spec, "111", method="closed_form")


def test_threshold_law_rho_half():
    law = threshold_law(GaussianSpec.centered([[1.0, 0.5], [0.5, 1.0]])).law
    assert law.prob("11") == pytest.approx(1 / 3)
    assert law.prob("00") == pytest.approx(1 / 3)
    assert law.prob("10") == pytest.approx(1 / 6)


def test_threshold_law_independent_is_product():
    spec = GaussianSpec([0.0, 0.0, 0.0], np.eye(3), [0.0, 0.0, 0.0])
    law = threshold_law(spec).law
    np.testing.assert_allclose(law.probs, np.full(8, 1 / 8), atol=1e-12)


def test_threshold_covariance_matches_law_covariance():
    spec = GaussianSpec(np.zeros(2), [[2.0, -0.6], [-0.6, 1.0]], [0.4, -0.2])
    law = threshold_law(spec).law
    np.testing.assert_allclose(covariance_matrix(law), threshold_covariance(spec), atol=1e-12)


def test_threshold_covariance_of_star_hub():
    C = threshold_covariance(star_process(4))
    assert C[0, 1] == pytest.approx(math.asin(-0.5) / (2 * math.pi))
    assert C[1, 2] == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=8)
@given(st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_threshold_law_of_na_spec_is_na(n, seed):
    spec = GaussianSpec.centered(_random_na_cov(np.random.default_rng(seed), n))
    assert gaussian_na_check(spec).holds
    res = threshold_law(spec)
    assert check_na_exact(res.law, res.covariance_tolerance).holds


def test_empirical_threshold_covariance_small_sample():
    spec = GaussianSpec.centered([[1.0, -0.5], [-0.5, 1.0]])
    X = sample(spec, 200_000, 7) >= 0
    x, y = X[:, 0].astype(float), X[:, 1].astype(float)
    prod = (x - x.mean()) * (y - y.mean())
    se = prod.std() / math.sqrt(len(x))
    assert abs(prod.mean() - bivariate_threshold_cov(-0.5)) <= 4 * se


# -- validation ------------------------------------------------------------------


def test_validate_spec_errors_and_flag():
    with pytest.raises(AsymmetricCov):
        validate_spec(GaussianSpec.centered([[1.0, 0.2], [0.1, 1.0]]))
    with pytest.raises(NotPSD):
        validate_spec(GaussianSpec.centered([[1.0, 2.0], [2.0, 1.0]]))
    assert validate_spec(star_process(3)).near_singular
    assert not validate_spec(GaussianSpec.centered(np.eye(2))).near_singular


def test_sampling_singular_spec_reproduces_covariance():
    spec = star_process(3)
    Z = sample(spec, 400_000, 1)
    np.testing.assert_allclose(np.cov(Z.T), spec.cov, atol=0.01)
    assert np.abs(Z[:, 0] + Z[:, 1:].sum(axis=1) / math.sqrt(3)).max() < 1e-9


# -- canonical correlation -----------------------------------------------------


def test_canonical_correlation_one_by_one():
    for rho in (-0.7, 0.0, 0.45):
        spec = GaussianSpec.centered([[2.0, rho * math.sqrt(2)], [rho * math.sqrt(2), 1.0]])
        assert max_linear_correlation(spec, [0], [1]) == pytest.approx(abs(rho), abs=1e-14)


def _best_random_direction(cov, A, B, draws, rng):
    SA, SB, SAB = cov[np.ix_(A, A)], cov[np.ix_(B, B)], cov[np.ix_(A, B)]
    a = rng.normal(size=(draws, len(A)))
    b = rng.normal(size=(draws, len(B)))
    num = np.einsum("ij,jk,ik->i", a, SAB, b)
    den = np.sqrt(np.einsum("ij,jk,ik->i", a, SA, a) * np.einsum("ij,jk,ik->i", b, SB, b))
    return float(np.abs(num / den).max())


def test_canonical_correlation_beats_random_directions():
    rng = np.random.default_rng(8)
    C = _random_corr(rng, 8)
    res = canonical_correlation(C, [0, 1, 2, 3], [4, 5, 6, 7])
    best = _best_random_direction(C, [0, 1, 2, 3], [4, 5, 6, 7], 100_000, rng)
    assert res.value >= best - 1e-6
    assert res.value - best < 0.05
    # the returned directions attain the value
    a, b = res.directionA, res.directionB
    attained = a @ C[:4, 4:] @ b / math.sqrt((a @ C[:4, :4] @ a) * (b @ C[4:, 4:] @ b))
    assert abs(attained) == pytest.approx(res.value, abs=1e-10)


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1))
def test_canonical_correlation_invariant_under_block_reparametrization(seed):
    rng = np.random.default_rng(seed)
    C = _random_corr(rng, 5)
    A, B = [0, 1], [2, 3, 4]
    MA = rng.normal(size=(2, 2)) + 2 * np.eye(2)
    MB = rng.normal(size=(3, 3)) + 2 * np.eye(3)
    T = np.zeros((5, 5))
    T[np.ix_(A, A)] = MA
    T[np.ix_(B, B)] = MB
    C2 = T @ C @ T.T
    assert canonical_correlation(C2, A, B).value == pytest.approx(canonical_correlation(C, A, B).value, abs=1e-9)


def test_canonical_correlation_singular_block():
    # block A contains the hub and a duplicate of it
    v = np.array([1.0, 1.0, 0.5])
    C = np.outer(v, v) + np.diag([0.0, 0.0, 0.75])
    res = canonical_correlation(C, [0, 1], [2])
    assert res.dropped_directions[0] == 1
    assert res.value == pytest.approx(0.5 / 1.0, abs=1e-12)


# -- tail projection profile -----------------------------------------------------


def _gram_oracle(G, head, N):
    """Head size 1: ||P_T u|| / ||u|| = sqrt(g^T G_TT^+ g / G_11)."""
    T = slice(N - 1, G.shape[0])
    g = G[0, T]
    return math.sqrt(max(0.0, g @ np.linalg.pinv(G[T, T], rcond=1e-12) @ g) / G[0, 0])


def test_tail_profile_identity_is_zero():
    prof = tail_projection_profile(np.eye(10), 2, [3, 5, 10])
    np.testing.assert_allclose(prof.values, 0.0, atol=1e-12)


def test_tail_profile_repeated_vector_is_one():
    prof = tail_projection_profile(np.ones((8, 8)), 1, [2, 5, 8])
    np.testing.assert_allclose(prof.values, 1.0, atol=1e-9)


def test_tail_profile_matches_gram_formula():
    G = log_growth_cov(60)
    cuts = [2, 5, 10, 30, 60]
    prof = tail_projection_profile(G, 1, cuts)
    for N, value in zip(cuts, prof.values):
        assert value == pytest.approx(_gram_oracle(G, 1, N), abs=1e-7)


def test_tail_profile_log_growth_decays():
    prof = tail_projection_profile(log_growth_process(200).cov, 1, list(range(2, 201, 9)))
    assert np.all(prof.values > 0)
    assert np.all(np.diff(prof.values) <= 1e-12)


def test_tail_profile_random_gram_is_nonincreasing():
    rng = np.random.default_rng(3)
    V = rng.normal(size=(30, 12))
    prof = tail_projection_profile(V.T @ V, 3, [4, 6, 8, 10, 12])
    assert np.all(np.diff(prof.values) <= 1e-12)


def test_tail_profile_errors():
    with pytest.raises(NotPSD):
        tail_projection_profile(np.array([[1.0, 2.0], [2.0, 1.0]]), 1, [2])
    with pytest.raises(ValueError):
        tail_projection_profile(np.eye(4), 2, [2])
