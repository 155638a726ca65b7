"""Operator Maxwell equations and the residuals of their conservation laws.

The inhomogeneous equation ``D_mu F^{mu nu} = j^nu / c`` (second-kind
derivative) is used as the *definition* of the real current induced by a
potential; a prescribed current can be supplied instead for the continuity
experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import field_expr as fe
from . import operator_core as oc
from .errors import DimensionMismatchError
from .field_expr import Expr
from .gauge import GaugePotential, GaugeTransformation, _reduce, evaluator, scale_at, transform_potential
from .strength import FieldStrength, classical_field_strength, dual_tensor, field_strength

REAL = "real"
VIRTUAL = "virtual"
TOTAL = "total"


@dataclass(frozen=True)
class CurrentDensity:
    """Contravariant four-current ``j^nu``."""

    components: tuple[Expr, Expr, Expr, Expr]
    flavor: str = REAL
    constants: oc.PhysicalConstants = field(default_factory=oc.PhysicalConstants)

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != 4 or len({c.dim for c in comps}) != 1:
            raise DimensionMismatchError("a four-current needs four components of one dimension")
        if self.flavor not in (REAL, VIRTUAL, TOTAL):
            raise ValueError(f"unknown current flavor {self.flavor!r}")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def __getitem__(self, nu: int) -> Expr:
        return self.components[nu]

    def __iter__(self):
        return iter(self.components)


def _bracket_divergence_term(a: GaugePotential, f: FieldStrength, nu: int) -> Expr:
    """``sum_mu [A_mu, F^{mu nu}]``."""
    return fe.add(*(fe.commutator(a[mu], f.upper(mu, nu)) for mu in range(4)))


def _divergence(f: FieldStrength, nu: int) -> Expr:
    """``sum_mu d_mu F^{mu nu}``."""
    return fe.add(*(f.upper(mu, nu).derive(mu) for mu in range(4)))


def covariant_divergence(a: GaugePotential, f: FieldStrength, nu: int) -> Expr:
    """``D_mu F^{mu nu} = d_mu F^{mu nu} + i kappa [A_mu, F^{mu nu}]``."""
    return fe.add(_divergence(f, nu), fe.scale(1j * a.kappa, _bracket_divergence_term(a, f, nu)))


def induced_current(a: GaugePotential, f: FieldStrength | None = None) -> CurrentDensity:
    """``j^nu = c (d_mu F^{mu nu} + i kappa [A_mu, F^{mu nu}])``."""
    f = f if f is not None else field_strength(a)
    c = a.constants.c
    return CurrentDensity(tuple(fe.scale(c, covariant_divergence(a, f, nu)) for nu in range(4)), REAL, a.constants)


def virtual_current(a: GaugePotential, f: FieldStrength) -> CurrentDensity:
    """``-(i q / hbar) [A_mu, F^{mu nu}]``."""
    k = a.constants
    return CurrentDensity(
        tuple(fe.scale(-1j * k.q / k.hbar, _bracket_divergence_term(a, f, nu)) for nu in range(4)), VIRTUAL, k
    )


def total_current(a: GaugePotential, f: FieldStrength, j_real: CurrentDensity) -> CurrentDensity:
    """``J^nu = j^nu - (i q / hbar) [A_mu, F^{mu nu}]``."""
    v = virtual_current(a, f)
    return CurrentDensity(tuple(fe.add(j, w) for j, w in zip(j_real, v)), TOTAL, a.constants)


def _max_over(ev, exprs) -> np.ndarray:
    out = np.zeros(ev.npoints)
    for e in exprs:
        if not e.is_zero:
            out = np.maximum(out, oc.frobenius(ev(e)))
    return out


def current_covariance_residual(a: GaugePotential, s: GaugeTransformation, x, per_point: bool = False):
    """``max_nu |j(A')^nu - S j(A)^nu S^-1|``."""
    ev = evaluator(x)
    j_new = induced_current(transform_potential(a, s))
    j_old = induced_current(a)
    diffs = [fe.add(jn, fe.scale(-1.0, fe.conjugation(s.s, jo, s.s_inv))) for jn, jo in zip(j_new, j_old)]
    return _reduce(_max_over(ev, diffs), per_point)


def bianchi_residual(a: GaugePotential, x, per_point: bool = False):
    """``max_nu |d_mu *F^{mu nu} + i kappa [A_mu, *F^{mu nu}]|``."""
    ev = evaluator(x)
    dual = dual_tensor(field_strength(a))
    return _reduce(_max_over(ev, [covariant_divergence(a, dual, nu) for nu in range(4)]), per_point)


def total_current_divergence(a: GaugePotential) -> Expr:
    f = field_strength(a)
    big_j = total_current(a, f, induced_current(a, f))
    return fe.add(*(big_j[nu].derive(nu) for nu in range(4)))


def total_conservation_residual(a: GaugePotential, x, per_point: bool = False):
    """``|d_nu J^nu|`` for the total current of the induced configuration."""
    ev = evaluator(x)
    return _reduce(_max_over(ev, [total_current_divergence(a)]), per_point)


def decomposition_residual(a: GaugePotential, x, per_point: bool = False):
    """``max_nu |J^nu - c d_mu F^{mu nu}|`` when ``j`` is the induced current."""
    ev = evaluator(x)
    f = field_strength(a)
    big_j = total_current(a, f, induced_current(a, f))
    c = a.constants.c
    diffs = [fe.add(big_j[nu], fe.scale(-c, _divergence(f, nu))) for nu in range(4)]
    return _reduce(_max_over(ev, diffs), per_point)


def real_current_divergence(a: GaugePotential, j: CurrentDensity) -> Expr:
    """``D_mu j^mu = d_mu j^mu + i kappa [A_mu, j^mu]``."""
    terms = [j[mu].derive(mu) for mu in range(4)]
    terms += [fe.scale(1j * a.kappa, fe.commutator(a[mu], j[mu])) for mu in range(4)]
    return fe.add(*terms)


def real_conservation_residual(a: GaugePotential, j: CurrentDensity, x, per_point: bool = False):
    ev = evaluator(x)
    return _reduce(_max_over(ev, [real_current_divergence(a, j)]), per_point)


def virtual_divergence(a: GaugePotential, f: FieldStrength) -> Expr:
    """``d_nu [A_mu, F^{mu nu}]``."""
    return fe.add(*(_bracket_divergence_term(a, f, nu).derive(nu) for nu in range(4)))


def virtual_conservation_residual(a: GaugePotential, f: FieldStrength, x, per_point: bool = False):
    ev = evaluator(x)
    return _reduce(_max_over(ev, [virtual_divergence(a, f)]), per_point)


def current_bracket(a: GaugePotential, j: CurrentDensity) -> Expr:
    """``[A_mu, j^mu]``."""
    return fe.add(*(fe.commutator(a[mu], j[mu]) for mu in range(4)))


def eq17_residual(a: GaugePotential, f: FieldStrength, j: CurrentDensity, x, per_point: bool = False):
    """Two readings of the current/field bracket relation.

    Returns ``(printed, rederived)``.  The first is
    ``|[A_mu, j^mu] - d_nu [A_mu, F^{mu nu}]|``, the relation with unit
    coefficient.  The second is ``|[A_mu, j^mu] + c d_nu [A_mu, F^{mu nu}]|``.
    Only the second follows from conservation of the total current once
    ``D_mu j^mu = 0`` is imposed, so only it is expected to vanish.
    """
    ev = evaluator(x)
    bracket = current_bracket(a, j)
    div = virtual_divergence(a, f)
    printed = fe.add(bracket, fe.scale(-1.0, div))
    rederived = fe.add(bracket, fe.scale(a.constants.c, div))
    return _reduce(_max_over(ev, [printed]), per_point), _reduce(_max_over(ev, [rederived]), per_point)


def maxwell_reduction_gap(a: GaugePotential, x, per_point: bool = False):
    """Distance between the operator and the ordinary Maxwell left-hand sides.

    ``max_nu`` over both ``|D_mu F^{mu nu} - d_mu F_cl^{mu nu}|`` and the
    homogeneous analogue with duals.  Zero in a commutative gauge.
    """
    ev = evaluator(x)
    f = field_strength(a)
    fc = classical_field_strength(a)
    df, dfc = dual_tensor(f), dual_tensor(fc)
    diffs = []
    for nu in range(4):
        diffs.append(fe.add(covariant_divergence(a, f, nu), fe.scale(-1.0, _divergence(fc, nu))))
        diffs.append(fe.add(covariant_divergence(a, df, nu), fe.scale(-1.0, _divergence(dfc, nu))))
    return _reduce(_max_over(ev, diffs), per_point)


@dataclass(frozen=True)
class CommutativityReport:
    commutative: bool
    max_potential_bracket: float
    max_field_bracket: float
    maxwell_gap: float
    tolerance: float

    @property
    def classification(self) -> str:
        return "commutative" if self.commutative else "non-commutative"


def commutative_gauge_probe(a: GaugePotential, sample, tol: float = 1e-12) -> CommutativityReport:
    """Classify a configuration by its brackets at the sample points (scaled bound)."""
    sample = np.asarray(sample, dtype=float)
    if sample.ndim == 1:
        sample = sample[None, :]
    if sample.shape[0] == 0:
        raise ValueError("sample must be nonempty")
    ev = evaluator(sample)
    scale = scale_at(ev, a.components)
    f = field_strength(a)
    pot = [fe.commutator(a[m], a[n]) for m in range(4) for n in range(m + 1, 4)]
    fld = [fe.commutator(a[m], f.upper(m, n)) for m in range(4) for n in range(4) if m != n]
    pot_r = _max_over(ev, pot) / scale
    fld_r = _max_over(ev, fld) / scale
    gap = maxwell_reduction_gap(a, ev, per_point=True) / scale
    commutative = bool(np.max(pot_r) <= tol and np.max(fld_r) <= tol)
    return CommutativityReport(commutative, float(np.max(pot_r)), float(np.max(fld_r)), float(np.max(gap)), tol)
