from __future__ import annotations

import numpy as np
import pytest

from conftest import const, make_random_case
from opgauge import field_expr as fe
from opgauge import gauge as g
from opgauge import operator_core as oc
from opgauge import strength as st

X, Y, Z = oc.PAULI_X, oc.PAULI_Y, oc.PAULI_Z
I2 = np.eye(2, dtype=complex)


def potential(*comps, dim=2):
    comps = [fe.zero(dim) if c is None else c for c in comps]
    return g.GaugePotential(tuple(comps))


def scalar(basis, dim=2):
    return fe.AnalyticField([(basis, np.eye(dim, dtype=complex))])


def test_zero_potential_gives_zero_strength():
    f = st.field_strength(g.GaugePotential.zero(2))
    assert np.all(f.evaluate(np.zeros(4)) == 0)
    assert np.all(st.dual_tensor(f).evaluate(np.zeros(4)) == 0)
    assert st.electric_field(f).max_norm(np.zeros(4)) == 0
    assert st.magnetic_field(f).max_norm(np.zeros(4)) == 0


def test_antisymmetry_is_structural():
    a, _, _, pts = make_random_case(1, 2)
    vals = st.field_strength(a).evaluate(pts)
    assert np.all(vals + np.swapaxes(vals, 1, 2) == 0)


def test_constant_commutator_example():
    a_, b_ = 0.7, 1.3
    a = potential(const(a_ * X), const(b_ * Y), None, None)
    f01 = fe.evaluate(st.field_strength(a)[0, 1], np.zeros(4))
    np.testing.assert_allclose(f01, -2 * a_ * b_ * Z, atol=1e-15)


def test_abelian_plane_wave_matches_scalar_oracle():
    k = np.array([1.0, 2.0, -1.0, 0.5])
    pol = np.array([0.3, -0.7, 0.2, 1.1])
    a = potential(*(scalar(fe.Trig("sin", tuple(k), amplitude=p)) for p in pol))
    x = np.array([0.2, 0.4, 0.6, 0.8])
    f = st.field_strength(a).evaluate(x)[0]
    fd = st.field_strength_derivative_form(a).evaluate(x)[0]
    c = np.cos(k @ x)
    for mu in range(4):
        for nu in range(4):
            expected = (k[mu] * pol[nu] - k[nu] * pol[mu]) * c
            np.testing.assert_allclose(f[mu, nu], expected * I2, atol=1e-14)
            np.testing.assert_allclose(fd[mu, nu], expected * I2, atol=1e-14)


def test_forms_agree_on_random_potentials():
    for seed in range(10):
        a, _, _, pts = make_random_case(seed, (2, 4, 8)[seed % 3])
        ev = fe.Evaluator(pts)
        scale = g.scale_at(ev, list(a))
        res = st.max_component_distance(
            st.field_strength_commutator_form(a), st.field_strength_derivative_form(a), ev, per_point=True
        )
        assert np.all(res <= 1e-12 * scale)


def test_gauge_covariance_random():
    for seed in range(6):
        a, lam, s, pts = make_random_case(seed, (2, 4, 8)[seed % 3])
        ev = fe.Evaluator(pts)
        scale = g.scale_at(ev, list(a) + [lam])
        assert np.all(st.gauge_covariance_residual(a, s, ev, per_point=True) <= 1e-10 * scale)


def test_gauge_covariance_trivial_generator():
    a, _, _, pts = make_random_case(3, 2)
    s = g.GaugeTransformation.from_generator(fe.zero(2))
    assert st.gauge_covariance_residual(a, s, pts) <= 1e-14


def test_printed_convention_breaks_covariance():
    a, lam, _, pts = make_random_case(4, 2)
    s = g.GaugeTransformation.from_generator(lam, convention=g.PRINTED)
    assert st.gauge_covariance_residual(a, s, pts) > 1e-6


def test_pure_gauge_is_flat():
    for seed in range(5):
        _, lam, s, pts = make_random_case(seed, 4, basis="trig")
        ev = fe.Evaluator(pts)
        f = st.field_strength(g.transform_potential(g.GaugePotential.zero(4), s))
        scale = g.scale_at(ev, [lam])
        norm = np.zeros(len(pts))
        for pair in st.PAIRS:
            norm = np.maximum(norm, oc.frobenius(ev(f[pair])))
        assert np.all(norm <= 1e-10 * scale)


def test_static_potential_electric_field():
    a = potential(scalar(fe.Monomial((0, 1, 0, 0))), None, None, None)
    f = st.field_strength(a)
    x = np.array([0.1, 0.5, 0.2, 0.3])
    e = st.electric_field(f).evaluate(x)[0]
    np.testing.assert_allclose(e[0], -I2, atol=0)
    np.testing.assert_allclose(e[1:], 0, atol=0)
    assert st.magnetic_field(f).max_norm(x) == 0


def test_uniform_magnetic_field_oracle():
    # vector potential (-x2, x1, 0)/2 has curl (0, 0, 1); covariant spatial components flip sign
    a = potential(
        None,
        scalar(fe.Monomial((0, 0, 1, 0), 0.5)),
        scalar(fe.Monomial((0, 1, 0, 0), -0.5)),
        None,
    )
    b = st.magnetic_field(st.field_strength(a)).evaluate(np.array([0.0, 0.3, 0.7, 0.2]))[0]
    np.testing.assert_allclose(b[2], I2, atol=1e-15)
    np.testing.assert_allclose(b[:2], 0, atol=0)


def test_magnetic_bracket_normalizations():
    a_, b_ = 0.7, 1.3
    # contravariant A^1 = a sigma_x, A^2 = b sigma_y
    a = potential(None, const(-a_ * X), const(-b_ * Y), None)
    x = np.zeros(4)
    tensor = st.magnetic_bracket(a, "tensor").evaluate(x)[0]
    printed = st.magnetic_bracket(a, "printed").evaluate(x)[0]
    np.testing.assert_allclose(tensor[2], 2 * a_ * b_ * Z, atol=1e-15)
    np.testing.assert_allclose(printed[2], 4 * a_ * b_ * Z, atol=1e-15)
    full = st.magnetic_field(st.field_strength(a)).evaluate(x)[0]
    np.testing.assert_allclose(full, tensor, atol=0)
    with pytest.raises(ValueError):
        st.magnetic_bracket(a, "other")


def test_electric_bracket_matches_strength():
    a, _, _, pts = make_random_case(5, 2)
    ev = fe.Evaluator(pts)
    e = st.electric_field(st.field_strength(a)) - st.electric_field(st.classical_field_strength(a))
    np.testing.assert_allclose(e.evaluate(ev), st.electric_bracket(a).evaluate(ev), atol=1e-13)


def test_abelian_brackets_vanish():
    a = potential(*(scalar(fe.Monomial(tuple(np.eye(4, dtype=int)[m]))) for m in range(4)))
    x = np.array([0.3, 0.1, 0.2, 0.9])
    assert st.electric_bracket(a).max_norm(x) == 0
    assert st.magnetic_bracket(a).max_norm(x) == 0


def test_dual_of_single_component():
    m = oc.random_hermitian(2, 2)
    zero = fe.zero(2)
    comps = {pair: zero for pair in st.PAIRS}
    comps[(0, 1)] = const(m)
    f = st.FieldStrength(comps, oc.PhysicalConstants())
    d = st.dual_tensor(f).evaluate(np.zeros(4))[0]
    # eps^{2301} = +1 and lowering (2,3) gives (+1)
    for mu, nu in st.PAIRS:
        expected = m if (mu, nu) == (2, 3) else np.zeros((2, 2))
        np.testing.assert_allclose(d[mu, nu], expected, atol=0)


def test_levi_civita_values():
    assert st.levi_civita_upper(0, 1, 2, 3) == 1
    assert st.levi_civita_upper(1, 0, 2, 3) == -1
    assert st.levi_civita_upper(2, 3, 0, 1) == 1
    assert st.levi_civita_upper(0, 0, 2, 3) == 0
    assert st.levi_civita_3(1, 2, 3) == 1
    assert st.levi_civita_3(2, 1, 3) == -1
    assert st.levi_civita_3(3, 1, 2) == 1


def test_double_dual_is_minus_identity():
    a, _, _, pts = make_random_case(6, 4)
    f = st.field_strength(a)
    dd = st.dual_tensor(st.dual_tensor(f))
    np.testing.assert_allclose(dd.evaluate(pts), -f.evaluate(pts), atol=1e-13)
