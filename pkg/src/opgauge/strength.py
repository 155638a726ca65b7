"""Field-strength tensor, its dual, and the electric/magnetic fields.

Sign conventions: ``E_i = F_{0i}``, ``B_k = -1/2 eps_{kij} F_{ij}``,
``eps^{0123} = +1`` (so ``eps_{0123} = -1``).  With ``A_mu = (phi, -A)`` these
reproduce ``E = -grad phi - d_t A / c`` and ``B = curl A`` for commuting
fields.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import field_expr as fe
from . import operator_core as oc
from .errors import DimensionMismatchError
from .field_expr import Expr
from .gauge import (
    METRIC,
    GaugePotential,
    GaugeTransformation,
    _reduce,
    covariant_derivative_first,
    evaluator,
    transform_potential,
)

PAIRS = tuple(itertools.combinations(range(4), 2))


def _perm_sign(p) -> int:
    p = list(p)
    sign = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def levi_civita_upper(mu, nu, alpha, beta) -> int:
    """``eps^{mu nu alpha beta}`` with ``eps^{0123} = +1``."""
    idx = (mu, nu, alpha, beta)
    if len(set(idx)) < 4:
        return 0
    return _perm_sign(idx)


def levi_civita_3(i, j, k) -> int:
    """Spatial symbol on indices 1..3 with ``eps_{123} = +1``."""
    idx = (i - 1, j - 1, k - 1)
    if len(set(idx)) < 3:
        return 0
    return _perm_sign(idx)


class FieldStrength:
    """Antisymmetric 4x4 array of operator fields with lower indices.

    Only the upper triangle is stored; the lower triangle is its negation and
    the diagonal is zero, so antisymmetry holds by construction.  Raised
    components ``F^{mu nu}`` are built eagerly.
    """

    def __init__(self, upper_triangle: dict[tuple[int, int], Expr], constants: oc.PhysicalConstants, potential=None):
        dims = {e.dim for e in upper_triangle.values()}
        if len(dims) != 1 or set(upper_triangle) != set(PAIRS):
            raise DimensionMismatchError("field strength needs the six (mu<nu) components of one dimension")
        self.dim = dims.pop()
        self.constants = constants
        self.potential = potential
        zero = fe.zero(self.dim)
        self._lower = [[zero] * 4 for _ in range(4)]
        self._upper = [[zero] * 4 for _ in range(4)]
        for (mu, nu), e in upper_triangle.items():
            self._lower[mu][nu] = e
            self._lower[nu][mu] = fe.scale(-1.0, e)
            raised = fe.scale(METRIC[mu] * METRIC[nu], e)
            self._upper[mu][nu] = raised
            self._upper[nu][mu] = fe.scale(-1.0, raised)

    def __getitem__(self, idx: tuple[int, int]) -> Expr:
        mu, nu = idx
        return self._lower[mu][nu]

    def upper(self, mu: int, nu: int) -> Expr:
        return self._upper[mu][nu]

    def components(self):
        return [self._lower[mu][nu] for mu, nu in PAIRS]

    def evaluate(self, x) -> np.ndarray:
        """Lower components as an array of shape ``(P, 4, 4, N, N)``."""
        ev = evaluator(x)
        out = np.zeros((ev.npoints, 4, 4, self.dim, self.dim), dtype=complex)
        for mu in range(4):
            for nu in range(4):
                if mu != nu:
                    out[:, mu, nu] = ev(self._lower[mu][nu])
        return out


def classical_field_strength(a: GaugePotential) -> FieldStrength:
    """``d_mu A_nu - d_nu A_mu`` without the bracket."""
    return FieldStrength({(m, n): fe.add(a[n].derive(m), fe.scale(-1.0, a[m].derive(n))) for m, n in PAIRS},
                         a.constants, a)


def bracket_part(a: GaugePotential) -> FieldStrength:
    """``i kappa [A_mu, A_nu]``."""
    return FieldStrength({(m, n): fe.scale(1j * a.kappa, fe.commutator(a[m], a[n])) for m, n in PAIRS},
                         a.constants, a)


def field_strength_commutator_form(a: GaugePotential) -> FieldStrength:
    """``F_{mu nu} = d_mu A_nu - d_nu A_mu + i kappa [A_mu, A_nu]``."""
    comps = {}
    for m, n in PAIRS:
        comps[(m, n)] = fe.add(
            a[n].derive(m),
            fe.scale(-1.0, a[m].derive(n)),
            fe.scale(1j * a.kappa, fe.commutator(a[m], a[n])),
        )
    return FieldStrength(comps, a.constants, a)


def field_strength_derivative_form(a: GaugePotential) -> FieldStrength:
    """``F_{mu nu} = D_mu A_nu - D_nu A_mu`` with the first-kind derivative."""
    comps = {}
    for m, n in PAIRS:
        comps[(m, n)] = fe.add(
            covariant_derivative_first(a, a[n], m),
            fe.scale(-1.0, covariant_derivative_first(a, a[m], n)),
        )
    return FieldStrength(comps, a.constants, a)


field_strength = field_strength_commutator_form


def max_component_distance(f: FieldStrength, g: FieldStrength, x, per_point: bool = False):
    ev = evaluator(x)
    out = np.zeros(ev.npoints)
    for pair in PAIRS:
        out = np.maximum(out, oc.frobenius(ev(f[pair]) - ev(g[pair])))
    return _reduce(out, per_point)


def gauge_covariance_residual(a: GaugePotential, s: GaugeTransformation, x, per_point: bool = False):
    """``max_{mu<nu} |F(A')_{mu nu} - S F(A)_{mu nu} S^-1|``."""
    ev = evaluator(x)
    f_new = field_strength(transform_potential(a, s))
    f_old = field_strength(a)
    out = np.zeros(ev.npoints)
    for pair in PAIRS:
        rotated = fe.conjugation(s.s, f_old[pair], s.s_inv)
        out = np.maximum(out, oc.frobenius(ev(f_new[pair]) - ev(rotated)))
    return _reduce(out, per_point)


def dual_tensor(f: FieldStrength) -> FieldStrength:
    """``*F^{mu nu} = 1/2 eps^{mu nu alpha beta} F_{alpha beta}``, returned with lower indices."""
    comps = {}
    for m, n in PAIRS:
        terms = []
        for al, be in PAIRS:
            eps = levi_civita_upper(m, n, al, be)
            if eps:
                # the 1/2 cancels against summing both (al, be) and (be, al)
                terms.append(fe.scale(eps, f[al, be]))
        upper = fe.add(*terms)
        comps[(m, n)] = fe.scale(METRIC[m] * METRIC[n], upper)
    return FieldStrength(comps, f.constants, f.potential)


@dataclass(frozen=True)
class FieldVector3:
    """Three spatial operator-field components, indexed 1..3 externally."""

    components: tuple[Expr, Expr, Expr]

    def __post_init__(self):
        if len(self.components) != 3 or len({c.dim for c in self.components}) != 1:
            raise DimensionMismatchError("a 3-vector needs three components of one dimension")
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def zero(cls, dim: int) -> FieldVector3:
        z = fe.zero(dim)
        return cls((z, z, z))

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def __getitem__(self, i: int) -> Expr:
        """1-based spatial index."""
        if i not in (1, 2, 3):
            raise IndexError("spatial index runs over 1..3")
        return self.components[i - 1]

    def __add__(self, other: FieldVector3) -> FieldVector3:
        return FieldVector3(tuple(fe.add(a, b) for a, b in zip(self.components, other.components)))

    def __sub__(self, other: FieldVector3) -> FieldVector3:
        return self + other.scaled(-1.0)

    def scaled(self, c) -> FieldVector3:
        return FieldVector3(tuple(fe.scale(c, a) for a in self.components))

    def evaluate(self, x) -> np.ndarray:
        """Shape ``(P, 3, N, N)``."""
        ev = evaluator(x)
        return np.stack([ev(c) for c in self.components], axis=1)

    def max_norm(self, x, per_point: bool = False):
        ev = evaluator(x)
        out = np.zeros(ev.npoints)
        for c in self.components:
            if not c.is_zero:
                out = np.maximum(out, oc.frobenius(ev(c)))
        return _reduce(out, per_point)


def electric_field(f: FieldStrength) -> FieldVector3:
    """``E_i = F_{0i}``."""
    return FieldVector3(tuple(f[0, i] for i in (1, 2, 3)))


def magnetic_field(f: FieldStrength) -> FieldVector3:
    """``B_k = -1/2 eps_{kij} F_{ij}``."""
    comps = []
    for k in (1, 2, 3):
        terms = []
        for i in (1, 2, 3):
            for j in (1, 2, 3):
                eps = levi_civita_3(k, i, j)
                if eps:
                    terms.append(fe.scale(-0.5 * eps, f[i, j]))
        comps.append(fe.add(*terms))
    return FieldVector3(tuple(comps))


def electric_bracket(a: GaugePotential) -> FieldVector3:
    """Bracket part of ``E``: ``i kappa [phi, A_i]`` with covariant ``A_i``."""
    return electric_field(bracket_part(a))


def magnetic_bracket(a: GaugePotential, normalization: str = "tensor") -> FieldVector3:
    """Bracket part of ``B``.

    ``"tensor"`` is what the field strength actually contains,
    ``-1/2 i kappa eps_{kij} [A^i, A^j]``.  ``"printed"`` omits the 1/2:
    ``-i kappa eps_{ijk} [A^i, A^j]``.
    """
    if normalization == "tensor":
        return magnetic_field(bracket_part(a))
    if normalization != "printed":
        raise ValueError(f"unknown normalization {normalization!r}")
    comps = []
    for k in (1, 2, 3):
        terms = []
        for i in (1, 2, 3):
            for j in (1, 2, 3):
                eps = levi_civita_3(i, j, k)
                if eps:
                    terms.append(fe.scale(-1j * a.kappa * eps, fe.commutator(a.upper(i), a.upper(j))))
        comps.append(fe.add(*terms))
    return FieldVector3(tuple(comps))
