import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import crandn, random_hermitian, random_pd
from maskbf.cov_linalg import (
    CovarianceSet,
    canonicalize,
    covariance_batch,
    gev_batch,
    gev_max,
    gev_min,
    hermitize,
    load,
    solve_loaded,
    weighted_covariance,
)
from maskbf.errors import ConstraintViolation, InvalidInput, NumericalError
from maskbf.tf_transform import Spectrogram, StftConfig
from oracles import gev_2x2, naive_covariance

# Frozen from the naive triple-loop oracle (tests/oracles.py) on seed 2024.
FROZEN_X = np.array([
    [1.0288568739519013 + 0.8613509179404263j, 1.6419200406711503 + 0.509186798845688j],
    [1.1467195295966137 + 1.8102855742952833j, -0.9731795154745656 + 0.7508434731539183j],
    [-1.3928000963768683 + 0.6397595539314624j, 0.06719635507109722 - 0.7313225212292476j],
])
FROZEN_M = np.array([0.10538567974837565, 0.5657310510258305, 0.00462964332838578])
FROZEN_COV = np.array([
    [0.9328377123534729, 0.11975970840529265 - 0.46481590287004104j],
    [0.11975970840529268 + 0.46481590287004099j, 0.38955379736926643],
])
# Frozen from the closed-form 2x2 determinant oracle, confirmed at 40 digits.
GEV_A = np.array([[2.0, 1 - 1j], [1 + 1j, 3.0]])
GEV_B = np.array([[2.0, 0.5j], [-0.5j, 1.0]])
GEV_VALUES = (0.4913971744912804939, 4.651459968365862363)


def spec_from_tn(x_tn):
    """Wrap frames (T, N) as a one-bin spectrogram with a 0-length window trick."""
    cfg = StftConfig(window_len=4, hop_len=1)
    t_len, n = x_tn.shape
    bins = np.zeros((n, cfg.n_bins, t_len), dtype=complex)
    bins[:, 0, :] = x_tn.T
    return Spectrogram(bins, cfg, 16000)


def test_weighted_covariance_single_frame():
    spec = spec_from_tn(np.array([[1.0, 0.0]]))
    np.testing.assert_array_equal(weighted_covariance(spec, [1.0]), [[1, 0], [0, 0]])


def test_weighted_covariance_zero_mask(rng):
    spec = spec_from_tn(crandn(rng, 5, 3))
    np.testing.assert_array_equal(weighted_covariance(spec, np.zeros(5)), np.zeros((3, 3)))


def test_weighted_covariance_frozen_oracle():
    cov = weighted_covariance(spec_from_tn(FROZEN_X), FROZEN_M)
    np.testing.assert_allclose(cov, FROZEN_COV, atol=1e-12)
    np.testing.assert_allclose(cov, naive_covariance(FROZEN_X, FROZEN_M), atol=1e-12)


def test_weighted_covariance_unit_default_and_hermitian(rng):
    x = crandn(rng, 7, 4)
    cov = weighted_covariance(spec_from_tn(x))
    np.testing.assert_allclose(cov, naive_covariance(x, np.ones(7)), atol=1e-12)
    np.testing.assert_array_equal(cov, cov.conj().T)


def test_weighted_covariance_errors(rng):
    spec = spec_from_tn(crandn(rng, 4, 2))
    with pytest.raises(InvalidInput):
        weighted_covariance(spec, np.ones(3))
    with pytest.raises(ConstraintViolation):
        weighted_covariance(spec, np.array([1.0, -0.1, 1.0, 1.0]))


@given(st.integers(1, 6), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_covariance_is_linear_in_mask(n, t_len, seed):
    rng = np.random.default_rng(seed)
    x = crandn(rng, 3, t_len, n)
    m1, m2 = rng.uniform(0, 2, (2, 3, t_len))
    total = covariance_batch(x, m1 + m2)
    np.testing.assert_allclose(total, covariance_batch(x, m1) + covariance_batch(x, m2),
                               atol=1e-12 * max(1.0, np.abs(total).max()))


def test_solve_loaded_examples():
    np.testing.assert_allclose(solve_loaded(np.eye(2), np.array([3.0, 4.0]), 0.0), [3, 4])
    np.testing.assert_allclose(solve_loaded(np.diag([2.0, 4.0]), np.array([2.0, 4.0]), 0.0), [1, 1])


@given(st.integers(1, 8), st.floats(0, 1e-2), st.integers(0, 2**32 - 1))
def test_solve_loaded_residual(n, eps, seed):
    rng = np.random.default_rng(seed)
    a = random_pd(rng, n)
    b = crandn(rng, n)
    x = solve_loaded(a, b, eps)
    loaded = a + eps * np.trace(a).real / n * np.eye(n)
    assert np.linalg.norm(loaded @ x - b) / np.linalg.norm(b) < 1e-10


def test_solve_loaded_indefinite_raises():
    with pytest.raises(NumericalError):
        solve_loaded(np.diag([1.0, -1.0]), np.ones(2), 0.0)
    with pytest.raises(InvalidInput):
        solve_loaded(np.eye(2), np.ones(2), -1.0)


def test_gev_diagonal_case():
    a, b = np.diag([2.0, 1.0]), np.eye(2)
    hi, lo = gev_max(a, b, 0.0), gev_min(a, b, 0.0)
    assert hi.eigenvalue == pytest.approx(2.0)
    assert lo.eigenvalue == pytest.approx(1.0)
    np.testing.assert_allclose(hi.eigenvector, [1, 0], atol=1e-14)
    np.testing.assert_allclose(lo.eigenvector, [0, 1], atol=1e-14)


def test_gev_degenerate_spectrum():
    res = gev_max(np.eye(3), np.eye(3), 0.0)
    assert res.eigenvalue == pytest.approx(1.0)
    assert np.linalg.norm(res.eigenvector - res.eigenvector) == 0
    assert np.linalg.norm(np.eye(3) @ res.eigenvector - res.eigenvector) < 1e-12


def test_gev_frozen_closed_form():
    assert gev_min(GEV_A, GEV_B, 0.0).eigenvalue == pytest.approx(GEV_VALUES[0], abs=1e-13)
    assert gev_max(GEV_A, GEV_B, 0.0).eigenvalue == pytest.approx(GEV_VALUES[1], abs=1e-13)
    np.testing.assert_allclose(gev_2x2(GEV_A, GEV_B), GEV_VALUES, atol=1e-13)


def _residual(a, b, res, eps):
    n = a.shape[0]
    b_loaded = b + eps * np.trace(b).real / n * np.eye(n)
    return np.linalg.norm(a @ res.eigenvector - res.eigenvalue * b_loaded @ res.eigenvector)


@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_gev_residual_and_canonical_form(n, seed):
    rng = np.random.default_rng(seed)
    a, b = random_hermitian(rng, n), random_pd(rng, n)
    for fn in (gev_max, gev_min):
        res = fn(a, b)
        assert _residual(a, b, res, 1e-6) < 1e-10 * np.linalg.norm(a)
        w = res.eigenvector
        assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-12)
        k = np.argmax(np.abs(w))
        assert w[k].imag == 0 and w[k].real >= 0
    assert gev_max(a, b).eigenvalue >= gev_min(a, b).eigenvalue


@given(st.integers(2, 6), st.floats(0.01, 100), st.integers(0, 2**32 - 1))
def test_gev_scale_equivariance(n, c, seed):
    rng = np.random.default_rng(seed)
    a, b = random_hermitian(rng, n), random_pd(rng, n)
    r1, r2 = gev_max(a, b), gev_max(c * a, b)
    assert r2.eigenvalue == pytest.approx(c * r1.eigenvalue, rel=1e-10, abs=1e-12)
    np.testing.assert_allclose(r2.eigenvector, r1.eigenvector, atol=1e-8)


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_gev_max_min_reciprocal(n, seed):
    rng = np.random.default_rng(seed)
    a, b = random_pd(rng, n), random_pd(rng, n)
    hi, lo = gev_max(a, b, 0.0), gev_min(b, a, 0.0)
    assert hi.eigenvalue * lo.eigenvalue == pytest.approx(1.0, rel=1e-10)
    np.testing.assert_allclose(hi.eigenvector, lo.eigenvector, atol=1e-8)


def test_gev_requires_pd_right_hand_side():
    with pytest.raises(NumericalError):
        gev_max(np.eye(2), np.zeros((2, 2)))
    dec = gev_batch(np.eye(2)[None], -np.eye(2)[None])
    assert not dec.ok[0]


def test_gev_batch_matches_scipy(rng):
    from scipy.linalg import eigh

    a = np.stack([random_hermitian(rng, 4) for _ in range(20)])
    b = np.stack([random_pd(rng, 4) for _ in range(20)])
    dec = gev_batch(a, b)
    for i in range(20):
        np.testing.assert_allclose(dec.values[i], eigh(a[i], b[i], eigvals_only=True), atol=1e-10)
        v = dec.vectors[i]
        np.testing.assert_allclose(v.conj().T @ b[i] @ v, np.eye(4), atol=1e-10)


def test_canonicalize_and_helpers():
    w = canonicalize(np.array([0.0, -2j]))
    np.testing.assert_allclose(w, [0, 1])
    np.testing.assert_array_equal(canonicalize(np.zeros(3)), np.zeros(3))
    a = np.array([[1.0, 2j], [0.0, 1.0]])
    h = hermitize(a)
    np.testing.assert_allclose(h, h.conj().T)
    np.testing.assert_allclose(load(np.eye(2), 0.5), 1.5 * np.eye(2))


def test_covariance_set_psd_check(rng):
    good = np.stack([random_pd(rng, 3) for _ in range(4)])
    CovarianceSet(phi_x=good).check_psd()
    with pytest.raises(NumericalError):
        CovarianceSet(phi_s=-good).check_psd()
