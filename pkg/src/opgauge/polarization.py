"""Vacuum polarization and magnetization read off the bracket terms.

``P_vac_i = -(i q eps0 / hbar c) [phi, A_i]`` (covariant ``A_i``) and
``M_vac_k = (i q / hbar c mu0) eps_{ijk} [A^i, A^j]``.  The magnetization
carries a normalization switch: ``"printed"`` is the expression above,
``"tensor"`` halves it so that ``-mu0 M_vac`` equals the bracket part of the
magnetic field as it actually appears in ``F``.  With covariant ``A_i`` the
electric bracket part is ``-P_vac / eps0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import field_expr as fe
from .gauge import GaugePotential, evaluator, scale_at
from .maxwell import commutative_gauge_probe
from .operator_core import PhysicalConstants
from .strength import (
    FieldVector3,
    classical_field_strength,
    electric_bracket,
    electric_field,
    field_strength,
    levi_civita_3,
    magnetic_bracket,
    magnetic_field,
)

TENSOR = "tensor"
PRINTED = "printed"


@dataclass(frozen=True)
class MediumResponse:
    """Material polarization and magnetization; default to zero."""

    p_old: FieldVector3 | None = None
    m_old: FieldVector3 | None = None

    def polarization(self, dim: int) -> FieldVector3:
        return self.p_old if self.p_old is not None else FieldVector3.zero(dim)

    def magnetization(self, dim: int) -> FieldVector3:
        return self.m_old if self.m_old is not None else FieldVector3.zero(dim)


def vacuum_polarization(a: GaugePotential, k: PhysicalConstants | None = None) -> FieldVector3:
    k = k or a.constants
    coeff = -1j * k.q * k.eps0 / (k.hbar * k.c)
    return FieldVector3(tuple(fe.scale(coeff, fe.commutator(a.phi, a[i])) for i in (1, 2, 3)))


def vacuum_magnetization(
    a: GaugePotential, k: PhysicalConstants | None = None, normalization: str = TENSOR
) -> FieldVector3:
    k = k or a.constants
    if normalization not in (TENSOR, PRINTED):
        raise ValueError(f"unknown normalization {normalization!r}")
    coeff = 1j * k.q / (k.hbar * k.c * k.mu0)
    if normalization == TENSOR:
        coeff /= 2
    comps = []
    for kk in (1, 2, 3):
        terms = []
        for i in (1, 2, 3):
            for j in (1, 2, 3):
                eps = levi_civita_3(i, j, kk)
                if eps:
                    terms.append(fe.scale(coeff * eps, fe.commutator(a.upper(i), a.upper(j))))
        comps.append(fe.add(*terms))
    return FieldVector3(tuple(comps))


def displacement_field(e: FieldVector3, p_new: FieldVector3, k: PhysicalConstants) -> FieldVector3:
    """``D_i = eps0 E_i + P_i``."""
    return e.scaled(k.eps0) + p_new


def h_field(b: FieldVector3, m_new: FieldVector3, k: PhysicalConstants) -> FieldVector3:
    """``H_k = B_k / mu0 - M_k``."""
    return b.scaled(1.0 / k.mu0) - m_new


def total_polarization(a: GaugePotential, medium: MediumResponse | None = None) -> FieldVector3:
    medium = medium or MediumResponse()
    return medium.polarization(a.dim) + vacuum_polarization(a)


def total_magnetization(
    a: GaugePotential, medium: MediumResponse | None = None, normalization: str = TENSOR
) -> FieldVector3:
    medium = medium or MediumResponse()
    return medium.magnetization(a.dim) + vacuum_magnetization(a, normalization=normalization)


def polarization_consistency(a: GaugePotential, x, per_point: bool = False):
    """Residuals of ``E_bracket + P_vac/eps0`` and ``B_bracket + mu0 M_vac`` (tensor normalization)."""
    ev = evaluator(x)
    k = a.constants
    e_gap = electric_bracket(a) + vacuum_polarization(a).scaled(1.0 / k.eps0)
    b_gap = magnetic_bracket(a, TENSOR) + vacuum_magnetization(a, normalization=TENSOR).scaled(k.mu0)
    e_res = e_gap.max_norm(ev, per_point=True)
    b_res = b_gap.max_norm(ev, per_point=True)
    if per_point:
        return e_res, b_res
    return float(np.max(e_res)), float(np.max(b_res))


def magnetic_normalization_ratio(a: GaugePotential, x) -> float | None:
    """Least-squares ratio of the tensor bracket to the printed bracket (``None`` if both vanish)."""
    ev = evaluator(x)
    t = magnetic_bracket(a, TENSOR).evaluate(ev).ravel()
    p = magnetic_bracket(a, PRINTED).evaluate(ev).ravel()
    denom = np.vdot(p, p).real
    if denom <= 1e-300:
        return None
    return float(np.vdot(p, t).real / denom)


@dataclass(frozen=True)
class HiddenPolarizationReport:
    commutative: bool
    hidden: bool
    max_vacuum_polarization: float
    max_vacuum_magnetization: float
    max_field_shift: float
    tolerance: float


def hidden_polarization_check(a: GaugePotential, sample, tol: float = 1e-12) -> HiddenPolarizationReport:
    """Whether vacuum terms vanish and ``(E, B)`` coincide with their classical parts.

    All quantities are divided by the per-point scale ``1 + max |A_mu|``.
    """
    sample = np.asarray(sample, dtype=float)
    if sample.ndim == 1:
        sample = sample[None, :]
    if sample.shape[0] == 0:
        raise ValueError("sample must be nonempty")
    ev = evaluator(sample)
    scale = scale_at(ev, a.components)
    probe = commutative_gauge_probe(a, sample, tol)
    p = vacuum_polarization(a).max_norm(ev, per_point=True) / scale
    m = vacuum_magnetization(a).max_norm(ev, per_point=True) / scale
    f, fc = field_strength(a), classical_field_strength(a)
    shift = np.maximum(
        (electric_field(f) - electric_field(fc)).max_norm(ev, per_point=True),
        (magnetic_field(f) - magnetic_field(fc)).max_norm(ev, per_point=True),
    ) / scale
    hidden = bool(max(p.max(), m.max(), shift.max()) <= tol)
    return HiddenPolarizationReport(probe.commutative, hidden, float(p.max()), float(m.max()), float(shift.max()), tol)
