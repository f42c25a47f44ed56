import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from maskbf.errors import ConstraintViolation, InvalidInput
from maskbf.masks import (
    MaskSet,
    irm,
    load_mask_csv,
    mn_from_ms,
    ms_from_mn,
    project_constraints,
    save_mask_csv,
    smm,
)

finite = st.floats(-10, 10, allow_nan=False)
masks_2d = hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=12),
                      elements=st.floats(0, 10, allow_nan=False))


def cell(s, n):
    return np.array([[s]], dtype=complex), np.array([[n]], dtype=complex)


def test_irm_examples():
    m = irm(*cell(1.0, 1j), beta=1.0)
    assert m.m_s[0, 0] == 0.5 and m.m_n[0, 0] == 0.5
    m = irm(*cell(1.0, -1.0), beta=0.5)
    assert m.m_s[0, 0] == pytest.approx(1 / np.sqrt(2))
    m = irm(*cell(np.sqrt(3), 1.0), beta=1.0)
    assert m.m_s[0, 0] == pytest.approx(0.75) and m.m_n[0, 0] == pytest.approx(0.25)
    m = irm(*cell(0.0, 0.0), beta=0.5)
    assert m.m_s[0, 0] == pytest.approx(0.5 ** 0.5) and m.m_n[0, 0] == pytest.approx(0.5 ** 0.5)


def test_irm_errors():
    with pytest.raises(InvalidInput):
        irm(np.zeros((2, 3)), np.zeros((2, 4)))
    with pytest.raises(InvalidInput):
        irm(np.zeros((2, 3)), np.zeros((2, 3)), beta=0)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 0.5, 2.0]))
def test_irm_sum_rule(seed, beta):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal((3, 5, 7)) + 1j * rng.standard_normal((3, 5, 7))
    n = rng.standard_normal((3, 5, 7)) + 1j * rng.standard_normal((3, 5, 7))
    s[1, 0, 0] = n[1, 0, 0] = 0
    m = irm(s, n, ref_mic=1, beta=beta)
    np.testing.assert_allclose(m.m_s ** (1 / beta) + m.m_n ** (1 / beta), 1.0, atol=1e-15)


def test_smm_examples():
    m = smm(np.array([[1.0, 2.0j]]), np.zeros((1, 2)))
    np.testing.assert_allclose(m.m_s, 1.0)
    np.testing.assert_allclose(m.m_n, 0.0)
    m = smm(*cell(1.0, -0.5))
    assert m.m_s[0, 0] == pytest.approx(2.0) and m.m_n[0, 0] == pytest.approx(1.0)
    m = smm(*cell(1.0, -1.0))
    assert m.m_s[0, 0] == 0 and m.m_n[0, 0] == 0


@given(st.integers(0, 2**32 - 1))
def test_smm_ratio_oracle(seed):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
    n = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
    m = smm(s, n)
    np.testing.assert_allclose(m.m_s / m.m_n, np.abs(s) / np.abs(n), rtol=1e-12)


def test_conversion_examples():
    np.testing.assert_allclose(ms_from_mn(np.array([[0.0, 1.0, 0.5]])), [[1.0, 0.0, 0.5]])
    np.testing.assert_array_equal(mn_from_ms(np.full((2, 4), 0.3)), np.zeros((2, 4)))
    with pytest.raises(InvalidInput):
        ms_from_mn(np.zeros((3, 0)))
    with pytest.raises(ConstraintViolation):
        mn_from_ms(np.array([[1.0, -1.0]]))


@given(masks_2d)
def test_conversion_sum_is_constant(m):
    out = ms_from_mn(m)
    assert np.all(out >= 0)
    np.testing.assert_allclose(out + m, np.broadcast_to(m.max(axis=1, keepdims=True), m.shape))


@given(masks_2d, st.data())
def test_conversion_round_trip_with_zero(m, data):
    col = data.draw(st.integers(0, m.shape[1] - 1))
    m = m.copy()
    m[:, col] = 0
    np.testing.assert_allclose(ms_from_mn(mn_from_ms(m)), m, atol=1e-12)


def test_projection_examples():
    np.testing.assert_array_equal(project_constraints(np.ones((1, 4))), np.ones((1, 4)))
    np.testing.assert_allclose(project_constraints(np.array([[-1.0, 2.0, 0.0, 0.0]])), [[0, 2, 0, 0]])
    np.testing.assert_array_equal(project_constraints(np.zeros((2, 5))), np.ones((2, 5)))
    np.testing.assert_array_equal(project_constraints(-np.ones((1, 3))), np.ones((1, 3)))


@given(hnp.arrays(np.float64, (3, 9), elements=finite))
def test_projection_invariants(m):
    p = project_constraints(m)
    assert np.all(p >= 0)
    np.testing.assert_allclose(np.mean(p ** 2, axis=1), 1.0, rtol=1e-12)
    np.testing.assert_allclose(project_constraints(p), p, rtol=1e-12, atol=1e-15)


@given(hnp.arrays(np.float64, (2, 6), elements=st.floats(0.01, 10)))
def test_projection_preserves_direction(m):
    p = project_constraints(m)
    ratio = p / m
    np.testing.assert_allclose(ratio, ratio[:, :1] * np.ones_like(ratio), rtol=1e-12)


def test_maskset_validation():
    with pytest.raises(ConstraintViolation):
        MaskSet(m_s=np.array([[-0.1]]))
    with pytest.raises(InvalidInput):
        MaskSet(m_n=np.array([[np.nan]]))
    ms = MaskSet(m_s=np.ones((2, 2)))
    assert ms.has("m_s") and not ms.has("m_n")
    np.testing.assert_array_equal(ms.scaled(3.0).m_s, 3.0)


def test_csv_round_trip(tmp_path, rng):
    m = rng.uniform(0, 3, (5, 11))
    save_mask_csv(tmp_path / "m.csv", m)
    np.testing.assert_array_equal(load_mask_csv(tmp_path / "m.csv"), m)
    save_mask_csv(tmp_path / "row.csv", m[:1])
    assert load_mask_csv(tmp_path / "row.csv").shape == (1, 11)
