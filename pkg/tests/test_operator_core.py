from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opgauge import operator_core as oc
from opgauge.errors import ConditioningError, DimensionMismatchError, RangeError

X, Y, Z = oc.PAULI_X, oc.PAULI_Y, oc.PAULI_Z
seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.sampled_from([1, 2, 3, 4, 8])


def test_commutator_pauli():
    # oracle: explicit 2x2 products
    xy = np.array([[1j, 0], [0, -1j]])
    yx = np.array([[-1j, 0], [0, 1j]])
    np.testing.assert_allclose(oc.commutator(X, Y), xy - yx, atol=0)
    np.testing.assert_allclose(oc.commutator(X, Y), 2j * Z, atol=0)


def test_commutator_trivial_cases():
    m = oc.random_hermitian(1, 3)
    assert np.all(oc.commutator(np.eye(3), m) == 0)
    assert np.all(oc.commutator(np.diag([1, 2]), np.diag([3, 4])) == 0)


def test_commutator_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        oc.commutator(np.eye(2), np.eye(3))


def test_conjugate_examples():
    m = oc.random_hermitian(3, 2)
    np.testing.assert_allclose(oc.conjugate(np.eye(2), m), m, atol=1e-15)
    u = oc.matrix_exp(1j * oc.random_hermitian(4, 2))
    assert np.all(oc.conjugate(u, np.zeros((2, 2))) == 0)


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.1, -2.0])
def test_conjugate_rotation(theta):
    # oracle: exp(i theta sigma_z) = diag(e^{i theta}, e^{-i theta}) written out by hand
    s = np.diag([np.exp(1j * theta), np.exp(-1j * theta)])
    expected = np.cos(2 * theta) * X - np.sin(2 * theta) * Y
    np.testing.assert_allclose(oc.conjugate(s, X), expected, atol=1e-14)


def test_conjugate_refuses_ill_conditioned():
    s = np.diag([1.0, 1e-12])
    with pytest.raises(ConditioningError):
        oc.conjugate(s, X)


def test_conjugate_preserves_hermiticity():
    u = oc.matrix_exp(1j * oc.random_hermitian(5, 4))
    g = oc.random_hermitian(6, 4)
    assert oc.is_hermitian(oc.conjugate(u, g))


def test_matrix_exp_examples():
    np.testing.assert_allclose(oc.matrix_exp(np.zeros((3, 3))), np.eye(3), atol=0)
    theta = 0.7
    # eigendecomposition oracle for i theta sigma_z
    np.testing.assert_allclose(oc.matrix_exp(1j * theta * Z), np.diag([np.exp(1j * theta), np.exp(-1j * theta)]),
                               atol=1e-15)
    np.testing.assert_allclose(oc.matrix_exp(np.diag([0.5, -2.0])), np.diag(np.exp([0.5, -2.0])), rtol=1e-15)


@pytest.mark.parametrize("dim", [2, 4, 8])
def test_matrix_exp_matches_eigendecomposition(dim):
    h = oc.random_hermitian(dim, dim, 2.0)
    w, v = np.linalg.eigh(h)
    ref = v @ np.diag(np.exp(1j * w)) @ v.conj().T
    got = oc.matrix_exp(1j * h)
    assert np.linalg.norm(got - ref) / np.linalg.norm(ref) <= 1e-13
    assert oc.is_unitary(got, 1e-12)


def test_matrix_exp_overflow_reports_norm():
    with pytest.raises(RangeError, match=r"\|m\|_F = 1.000e\+04"):
        oc.matrix_exp(np.diag([1e4, 0.0]))


def test_exp_frechet_trivial():
    m = oc.random_hermitian(2, 3) * 1j
    e_m, lz = oc.exp_frechet(m, np.zeros((3, 3)))
    np.testing.assert_allclose(e_m, oc.matrix_exp(m), atol=1e-14)
    assert np.max(np.abs(lz)) == 0
    e = oc.random_hermitian(3, 3)
    e0, l0 = oc.exp_frechet(np.zeros((3, 3)), e)
    np.testing.assert_allclose(e0, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(l0, e, atol=1e-15)


def test_exp_frechet_commuting_closed_form():
    m = np.diag([0.3, -0.2, 1.0]).astype(complex)
    e = np.diag([1.0, 2.0, -0.5]).astype(complex)
    e_m, l = oc.exp_frechet(m, e)
    np.testing.assert_allclose(l, oc.matrix_exp(m) @ e, atol=1e-14)


@pytest.mark.parametrize("dim", [2, 4])
def test_exp_frechet_against_finite_difference(dim):
    m = 1j * oc.random_hermitian(10, dim)
    e = oc.random_hermitian(11, dim)
    _, l = oc.exp_frechet(m, e)
    h = 1e-5
    fd = (oc.matrix_exp(m + h * e) - oc.matrix_exp(m - h * e)) / (2 * h)
    np.testing.assert_allclose(l, fd, atol=1e-9)


def test_exp_frechet_block_identity():
    m = 1j * oc.random_hermitian(12, 3)
    e = oc.random_hermitian(13, 3)
    e_m, l = oc.exp_frechet(m, e)
    block = np.block([[m, e], [np.zeros((3, 3)), m]])
    big = oc.matrix_exp(block)
    np.testing.assert_allclose(big[:3, 3:], l, atol=1e-12)
    np.testing.assert_allclose(big[3:, 3:], e_m, atol=1e-12)


def test_random_hermitian_determinism():
    a = oc.random_hermitian(7, 2, 0.5)
    b = oc.random_hermitian(7, 2, 0.5)
    assert np.array_equal(a, b)
    assert np.array_equal(a, a.conj().T)
    assert np.linalg.norm(a - oc.random_hermitian(8, 2, 0.5)) > 0


def test_random_hermitian_rejects_bad_args():
    with pytest.raises(ValueError):
        oc.random_hermitian(1, 0)
    with pytest.raises(ValueError):
        oc.random_hermitian(1, 2, 0.0)


def test_physical_constants_validation():
    k = oc.PhysicalConstants(q=2.0, hbar=0.5, c=4.0)
    assert k.kappa == pytest.approx(1.0)
    with pytest.raises(ValueError):
        oc.PhysicalConstants(hbar=0.0)
    with pytest.raises(ValueError):
        oc.PhysicalConstants(c=float("inf"))


def test_matmul_fast_path_agrees():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3000, 2, 2)) + 1j * rng.standard_normal((3000, 2, 2))
    b = rng.standard_normal((3000, 2, 2)) + 1j * rng.standard_normal((3000, 2, 2))
    np.testing.assert_allclose(oc.matmul(a, b), a @ b, atol=1e-14)
    big = np.tile(a, (4, 1, 1))
    np.testing.assert_allclose(oc.matmul(big, big), big @ big, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(seeds, dims)
def test_jacobi_identity(seed, dim):
    a, b, c = (oc.random_hermitian(seed + i, dim) for i in range(3))
    total = (oc.commutator(a, oc.commutator(b, c)) + oc.commutator(b, oc.commutator(c, a))
             + oc.commutator(c, oc.commutator(a, b)))
    scale = max(np.linalg.norm(m) for m in (a, b, c)) ** 3
    assert np.linalg.norm(total) <= 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(seeds, dims)
def test_conjugation_is_bracket_homomorphism(seed, dim):
    s = oc.matrix_exp(1j * oc.random_hermitian(seed, dim))
    a, b = oc.random_hermitian(seed + 1, dim), oc.random_hermitian(seed + 2, dim)
    lhs = oc.conjugate(s, oc.commutator(a, b))
    rhs = oc.commutator(oc.conjugate(s, a), oc.conjugate(s, b))
    assert np.linalg.norm(lhs - rhs) <= 1e-11


@settings(max_examples=40, deadline=None)
@given(seeds, dims, st.floats(-3, 3), st.floats(-3, 3))
def test_frechet_linear_in_direction(seed, dim, alpha, beta):
    m = 1j * oc.random_hermitian(seed, dim)
    e1, e2 = oc.random_hermitian(seed + 1, dim), oc.random_hermitian(seed + 2, dim)
    _, l1 = oc.exp_frechet(m, e1)
    _, l2 = oc.exp_frechet(m, e2)
    _, l12 = oc.exp_frechet(m, alpha * e1 + beta * e2)
    assert np.linalg.norm(l12 - (alpha * l1 + beta * l2)) <= 1e-11


@settings(max_examples=40, deadline=None)
@given(seeds, dims, st.floats(0.1, 5.0))
def test_exp_of_i_hermitian_is_unitary(seed, dim, scale):
    u = oc.matrix_exp(1j * oc.random_hermitian(seed, dim, scale))
    assert np.linalg.norm(u @ u.conj().T - np.eye(dim)) <= 1e-12
