"""Operator gauge transformations and the two generalized derivatives.

Conventions: metric diag(+1, -1, -1, -1); potentials are covariant,
``A_0 = phi``; ``d_t = c d_0``; coupling ``kappa = q / (hbar c)``.

A transformation is built from a Hermitian generator field ``Lambda``.  The
default ("covariant") convention takes ``S = exp(-i kappa Lambda)`` and

    A'_mu = S A_mu S^-1 - (i/kappa) S d_mu S^-1
    H'    = S H S^-1   - i hbar S d_t S^-1

which makes ``D_mu = d_mu + i kappa A_mu`` covariant (``D' = S D S^-1``) and
reduces to ``A' = A + d Lambda`` for commuting fields.  The "printed"
convention flips all three signs (``S = exp(+i kappa Lambda)``, ``+`` in both
inhomogeneous terms); it still reduces to ``A + d Lambda`` in the Abelian case
but does not leave the field strength covariant for non-commuting fields.  It
is kept only so that reports can quantify that discrepancy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import field_expr as fe
from . import operator_core as oc
from .errors import CouplingError, DimensionMismatchError
from .field_expr import Evaluator, Expr

METRIC = (1.0, -1.0, -1.0, -1.0)

COVARIANT = "covariant"
PRINTED = "printed"


def evaluator(x) -> Evaluator:
    """Accept a point, a batch of points, or an existing evaluator."""
    return x if isinstance(x, Evaluator) else Evaluator(x)


def scale_at(ev: Evaluator, exprs) -> np.ndarray:
    """``1 + max_k |e_k(x)|_F`` per point: the reference scale for residual bounds."""
    out = np.zeros(ev.npoints)
    for e in exprs:
        if not e.is_zero:
            out = np.maximum(out, oc.frobenius(ev(e)))
    return 1.0 + out


def _reduce(values: np.ndarray, per_point: bool):
    return values if per_point else float(np.max(values))


@dataclass(frozen=True)
class GaugePotential:
    """Covariant components ``A_mu`` as operator fields."""

    components: tuple[Expr, Expr, Expr, Expr]
    constants: oc.PhysicalConstants = field(default_factory=oc.PhysicalConstants)

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != 4:
            raise ValueError(f"a potential has 4 components, got {len(comps)}")
        if len({c.dim for c in comps}) != 1:
            raise DimensionMismatchError("potential components have different dimensions")
        object.__setattr__(self, "components", comps)

    @classmethod
    def zero(cls, dim: int, constants: oc.PhysicalConstants | None = None) -> GaugePotential:
        z = fe.zero(dim)
        return cls((z, z, z, z), constants or oc.PhysicalConstants())

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def phi(self) -> Expr:
        return self.components[0]

    @property
    def kappa(self) -> float:
        return self.constants.kappa

    def __getitem__(self, mu: int) -> Expr:
        return self.components[mu]

    def __iter__(self):
        return iter(self.components)

    def upper(self, mu: int) -> Expr:
        """Contravariant component ``A^mu``."""
        return fe.scale(METRIC[mu], self.components[mu])

    @property
    def certified_hermitian(self) -> bool:
        return all(c.hermitian or c.is_zero for c in self.components)

    @property
    def is_central(self) -> bool:
        return all(c.central for c in self.components)


@dataclass(frozen=True)
class GaugeTransformation:
    generator: Expr
    constants: oc.PhysicalConstants
    s: Expr
    s_inv: Expr
    convention: str = COVARIANT

    @classmethod
    def from_generator(
        cls, generator: Expr, constants: oc.PhysicalConstants | None = None, convention: str = COVARIANT
    ) -> GaugeTransformation:
        constants = constants or oc.PhysicalConstants()
        if not (generator.hermitian or generator.is_zero):
            raise ValueError("gauge generator must be a Hermitian-certified field")
        if convention not in (COVARIANT, PRINTED):
            raise ValueError(f"unknown convention {convention!r}")
        sign = _sign(convention)
        arg = fe.scale(sign * 1j * constants.kappa, generator)
        # S^-1 is the exponential of the negated argument, never a numerical inverse
        return cls(generator, constants, fe.exp_field(arg), fe.exp_field(fe.scale(-1.0, arg)), convention)

    @property
    def dim(self) -> int:
        return self.generator.dim

    @property
    def sign(self) -> float:
        return _sign(self.convention)

    def inverse(self) -> GaugeTransformation:
        return GaugeTransformation.from_generator(fe.scale(-1.0, self.generator), self.constants, self.convention)

    def maurer_cartan(self, mu: int) -> Expr:
        """``S d_mu S^-1``, anti-Hermitian because S is unitary."""
        return fe.certify(fe.product(self.s, self.s_inv.derive(mu)), fe.ANTIHERMITIAN)


def _sign(convention: str) -> float:
    return 1.0 if convention == PRINTED else -1.0


def _check_dims(*objs):
    dims = {o.dim for o in objs}
    if len(dims) != 1:
        raise DimensionMismatchError(f"dimension mismatch: {sorted(dims)}")


def transform_potential(a: GaugePotential, s: GaugeTransformation) -> GaugePotential:
    """``A'_mu = S A_mu S^-1 + sign (i hbar c / q) S d_mu S^-1`` as exact expression nodes."""
    _check_dims(a, s)
    kappa = s.constants.kappa
    if kappa == 0:
        raise CouplingError("the inhomogeneous term i hbar c / q is undefined for q = 0")
    comps = []
    for mu in range(4):
        homogeneous = fe.conjugation(s.s, a[mu], s.s_inv)
        inhomogeneous = fe.scale(s.sign * 1j / kappa, s.maurer_cartan(mu))
        comps.append(fe.add(homogeneous, inhomogeneous))
    return GaugePotential(tuple(comps), a.constants)


def transform_observable(g: Expr, s: GaugeTransformation) -> Expr:
    """``G' = S G S^-1``."""
    _check_dims(g, s)
    return fe.conjugation(s.s, g, s.s_inv)


def transform_state(psi, s: GaugeTransformation, x) -> np.ndarray:
    """``psi' = S(x) psi`` for a normalized ket."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (s.dim,):
        raise DimensionMismatchError(f"state has shape {psi.shape}, expected ({s.dim},)")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-12:
        raise ValueError("state must be normalized to within 1e-12")
    return fe.evaluate(s.s, np.asarray(x, dtype=float)) @ psi


def covariant_derivative_first(a: GaugePotential, f: Expr, mu: int) -> Expr:
    """``D_mu f = d_mu f + i kappa A_mu f`` (left multiplication)."""
    _check_dims(a, f)
    return fe.add(f.derive(mu), fe.scale(1j * a.kappa, fe.product(a[mu], f)))


def covariant_derivative_second(a: GaugePotential, g: Expr, mu: int) -> Expr:
    """``D_mu g = d_mu g + i kappa [A_mu, g]`` (adjoint action, for observables)."""
    _check_dims(a, g)
    return fe.add(g.derive(mu), fe.scale(1j * a.kappa, fe.commutator(a[mu], g)))


def transform_hamiltonian(h: Expr, s: GaugeTransformation) -> Expr:
    """``H' = S H S^-1 + sign i hbar S d_t S^-1`` with ``d_t = c d_0``."""
    _check_dims(h, s)
    k = s.constants
    return fe.add(
        fe.conjugation(s.s, h, s.s_inv),
        fe.scale(s.sign * 1j * k.hbar * k.c, s.maurer_cartan(0)),
    )


def energy_operator(h: Expr, a: GaugePotential) -> Expr:
    """``E = H - q phi``."""
    _check_dims(h, a)
    return fe.add(h, fe.scale(-a.constants.q, a.phi))


def covariance_of_first_derivative(
    a: GaugePotential, s: GaugeTransformation, f: Expr, mu: int, x, per_point: bool = False
):
    """``|D'_mu (S f) - S (D_mu f)|`` at ``x``.

    This is the operator identity ``D' = S D S^-1`` applied to ``S f``; the
    first-kind derivative acts by left multiplication, so ``f`` transforms like
    a ket.
    """
    ev = evaluator(x)
    a_new = transform_potential(a, s)
    lhs = covariant_derivative_first(a_new, fe.product(s.s, f), mu)
    rhs = fe.product(s.s, covariant_derivative_first(a, f, mu))
    return _reduce(oc.frobenius(ev(lhs) - ev(rhs)), per_point)


def abelian_reduction_residual(a: GaugePotential, s: GaugeTransformation, x, per_point: bool = False):
    """``max_mu |A'_mu - (A_mu + d_mu Lambda)|``; vanishes when everything commutes."""
    ev = evaluator(x)
    a_new = transform_potential(a, s)
    out = np.zeros(ev.npoints)
    for mu in range(4):
        diff = ev(a_new[mu]) - ev(a[mu]) - ev(s.generator.derive(mu))
        out = np.maximum(out, oc.frobenius(diff))
    return _reduce(out, per_point)


def group_residual(a: GaugePotential, s: GaugeTransformation, x, per_point: bool = False):
    """Transform by ``Lambda`` then by ``-Lambda``; distance back to ``A``."""
    ev = evaluator(x)
    back = transform_potential(transform_potential(a, s), s.inverse())
    out = np.zeros(ev.npoints)
    for mu in range(4):
        out = np.maximum(out, oc.frobenius(ev(back[mu]) - ev(a[mu])))
    return _reduce(out, per_point)


def expectation_residual(g: Expr, s: GaugeTransformation, psi, x) -> float:
    """``|<S psi| G' |S psi> - <psi| G |psi>|`` at a single point."""
    x = np.asarray(x, dtype=float)
    psi = np.asarray(psi, dtype=complex)
    psi_new = transform_state(psi, s, x)
    g_new = transform_observable(g, s)
    before = np.vdot(psi, fe.evaluate(g, x) @ psi)
    after = np.vdot(psi_new, fe.evaluate(g_new, x) @ psi_new)
    return float(abs(after - before))
