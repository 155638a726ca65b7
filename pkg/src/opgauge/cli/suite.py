"""Verification suite plus the lattice convergence studies and residual maps.

Each check is a named, equation-tagged residual with a tolerance.  Residuals
are divided point by point by ``1 + max |input|`` (the potential components
and the generator) before taking the maximum, unless a check is documented
as absolute.  Checks that do not apply to a scenario (no generator, not a
commutative configuration, ...) are recorded as skipped with a reason.

Every check builds its own :class:`~opgauge.field_expr.Evaluator`, so the
numbers do not depend on the order in which checks run or on how many run
at once.
"""

from __future__ import annotations

import datetime as _dt
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import __version__
from .. import field_expr as fe
from .. import lattice as lt
from .. import maxwell as mx
from .. import operator_core as oc
from .. import polarization as po
from .. import strength as st
from ..errors import ScenarioError
from ..field_expr import Evaluator
from ..gauge import (
    COVARIANT,
    PRINTED,
    GaugePotential,
    GaugeTransformation,
    abelian_reduction_residual,
    covariance_of_first_derivative,
    covariant_derivative_second,
    energy_operator,
    group_residual,
    scale_at,
    transform_hamiltonian,
    transform_observable,
    transform_potential,
)
from . import scenario as sc

REPORT_SCHEMA = "ogt-report/1"

CONVENTIONS = {
    "metric": "diag(+1, -1, -1, -1)",
    "potential": "covariant A_mu with A_0 = phi, A_i = -(vector potential)_i",
    "time_derivative": "d_t = c d_0",
    "coupling": "kappa = q / (hbar c)",
    "levi_civita": "eps^{0123} = +1, eps_{123} = +1",
    "fields": "E_i = F_{0i}, B_k = -1/2 eps_{kij} F_{ij}",
    "gauge_transformation": "S = exp(-i kappa Lambda); A' = S A S^-1 - (i/kappa) S dS^-1; H' = S H S^-1 - i hbar S d_t S^-1",
    "first_derivative_covariance": "|D'_mu (S f) - S D_mu f|, f transforming as a ket",
    "magnetization_normalization": "tensor: M_vac = (i kappa / 2 mu0) eps_{ijk} [A^i, A^j] so that B_bracket = -mu0 M_vac",
    "polarization_index": "P_vac_i = -(i kappa eps0) [phi, A_i] with covariant A_i, so E_bracket = -P_vac / eps0",
    "eq17_form": "asserted: [A_mu, j^mu] + c d_nu [A_mu, F^{mu nu}] = 0; printed form reported only",
    "scale": "residuals divided pointwise by 1 + max_k |X_k|_F over potential components and generator",
    "norm": "Frobenius",
}


def _units(k: oc.PhysicalConstants) -> str:
    natural = all(v == 1.0 for v in k.as_dict().values())
    return "natural (q = hbar = c = eps0 = mu0 = 1)" if natural else "user-specified constants (see constants)"


# ---------------------------------------------------------------------------
# context shared by the checks of one run


class Context:
    """Expressions and sample points for one scenario run."""

    def __init__(self, scenario: sc.Scenario):
        self.scenario = scenario
        self.k = scenario.constants
        self.a = scenario.potential
        self.dim = scenario.dim
        self.points = scenario.sampling.sample_points()
        inputs = list(self.a)
        self.generator = scenario.generator
        if self.generator is not None:
            inputs.append(self.generator)
        self.inputs = inputs
        self.s = None
        self.a_new = None
        if self.generator is not None:
            self.s = GaugeTransformation.from_generator(self.generator, self.k, COVARIANT)
            self.a_new = transform_potential(self.a, self.s)
        rng = np.random.default_rng([scenario.seed, 101])
        self.observable = scenario.observable
        if self.observable is None:
            # a non-trivial default observable: a constant plus a potential component
            self.observable = fe.add(fe.constant(oc.random_hermitian(int(rng.integers(2**32)), self.dim)), self.a[1])
        self.hamiltonian = scenario.hamiltonian
        if self.hamiltonian is None:
            self.hamiltonian = fe.constant(oc.random_hermitian(int(rng.integers(2**32)), self.dim))
        self._probe = None
        self.states = np.stack([oc.random_state(rng, self.dim) for _ in range(len(self.points))])

    def evaluator(self) -> Evaluator:
        return Evaluator(self.points)

    def scale(self, ev: Evaluator) -> np.ndarray:
        return scale_at(ev, self.inputs)

    def commutative(self) -> mx.CommutativityReport:
        if self._probe is None:
            self._probe = mx.commutative_gauge_probe(self.a, self.points, tol=1e-12)
        return self._probe


# ---------------------------------------------------------------------------
# check registry


@dataclass(frozen=True)
class Outcome:
    value: float | None = None
    skip: str | None = None
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Check:
    id: str
    equation: str
    tolerance: float | None  # None marks a diagnostic: recorded, never asserted
    run: Callable[[Context], Outcome]
    kind: str = "max"  # "max": pass iff value <= tol; "min": pass iff value >= tol
    absolute: bool = False
    description: str = ""


CHECKS: list[Check] = []


def check(cid, equation, tolerance, kind="max", absolute=False, description=""):
    def deco(fn):
        CHECKS.append(Check(cid, equation, tolerance, fn, kind, absolute, description))
        return fn

    return deco


def _scaled(ev, ctx, per_point_values) -> float:
    return float(np.max(np.asarray(per_point_values) / ctx.scale(ev)))


def _needs_generator(ctx) -> Outcome | None:
    if ctx.s is None:
        return Outcome(skip="scenario has no gauge generator")
    return None


def _max_norm(ev, exprs) -> np.ndarray:
    out = np.zeros(ev.npoints)
    for e in exprs:
        if not e.is_zero:
            out = np.maximum(out, oc.frobenius(ev(e)))
    return out


@check("unitarity", "Eq. 2", 1e-11, absolute=True, description="|S S^+ - I| and |S S^-1 - I|")
def _unitarity(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    s, s_inv = ev(ctx.s.s), ev(ctx.s.s_inv)
    eye = np.eye(ctx.dim)
    r = np.maximum(oc.frobenius(s @ oc.dagger(s) - eye), oc.frobenius(s @ s_inv - eye))
    return Outcome(float(np.max(r)))


@check("eq10_eq12", "Eq. 10, Eq. 12", 1e-12, description="commutator form vs first-kind derivative form of F")
def _eq10_eq12(ctx):
    ev = ctx.evaluator()
    r = st.max_component_distance(st.field_strength_commutator_form(ctx.a), st.field_strength_derivative_form(ctx.a),
                                  ev, per_point=True)
    if ctx.a_new is not None:
        r = np.maximum(r, st.max_component_distance(st.field_strength_commutator_form(ctx.a_new),
                                                    st.field_strength_derivative_form(ctx.a_new), ev, per_point=True))
    return Outcome(_scaled(ev, ctx, r))


@check("covariance_F", "Eq. 7, Eq. 10", 1e-10, description="|F(A') - S F(A) S^-1|")
def _covariance_f(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    return Outcome(_scaled(ev, ctx, st.gauge_covariance_residual(ctx.a, ctx.s, ev, per_point=True)))


@check("pure_gauge", "Eq. 7, Eq. 10", 1e-10, description="|F(transform(0, S))|")
def _pure_gauge(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    f = st.field_strength(transform_potential(GaugePotential.zero(ctx.dim, ctx.k), ctx.s))
    return Outcome(_scaled(ev, ctx, _max_norm(ev, f.components())))


@check("covariance_D1", "Eq. 11", 1e-10, description="max_mu |D'_mu (S f) - S D_mu f|")
def _covariance_d1(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    r = np.max([covariance_of_first_derivative(ctx.a, ctx.s, ctx.observable, mu, ev, per_point=True)
                for mu in range(4)], axis=0)
    return Outcome(_scaled(ev, ctx, r))


@check("covariance_D2", "second-kind derivative", 1e-10, description="max_mu |D2'_mu (S g S^-1) - S (D2_mu g) S^-1|")
def _covariance_d2(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    g = ctx.observable
    g_new = transform_observable(g, ctx.s)
    diffs = [
        fe.add(covariant_derivative_second(ctx.a_new, g_new, mu),
               fe.scale(-1.0, transform_observable(covariant_derivative_second(ctx.a, g, mu), ctx.s)))
        for mu in range(4)
    ]
    return Outcome(_scaled(ev, ctx, _max_norm(ev, diffs)))


@check("group", "Eq. 7", 1e-10, description="transform by Lambda then -Lambda returns A")
def _group(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    return Outcome(_scaled(ev, ctx, group_residual(ctx.a, ctx.s, ev, per_point=True)))


@check("current_covariance", "Eq. 9, Eq. 13", 1e-10, description="|j(A') - S j(A) S^-1|")
def _current_covariance(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    return Outcome(_scaled(ev, ctx, mx.current_covariance_residual(ctx.a, ctx.s, ev, per_point=True)))


@check("bianchi", "homogeneous Eq. 13", 1e-9, description="max_nu |D2_mu *F^{mu nu}| for A")
def _bianchi(ctx):
    ev = ctx.evaluator()
    return Outcome(_scaled(ev, ctx, mx.bianchi_residual(ctx.a, ev, per_point=True)))


@check("bianchi_transformed", "homogeneous Eq. 13", 1e-9, description="max_nu |D2_mu *F^{mu nu}| for A'")
def _bianchi_t(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    return Outcome(_scaled(ev, ctx, mx.bianchi_residual(ctx.a_new, ev, per_point=True)))


@check("eq14_total_conservation", "Eq. 14", 1e-8, description="|d_nu J^nu| for A")
def _eq14(ctx):
    ev = ctx.evaluator()
    return Outcome(_scaled(ev, ctx, mx.total_conservation_residual(ctx.a, ev, per_point=True)))


@check("eq14_total_conservation_transformed", "Eq. 14", 1e-8, description="|d_nu J^nu| for A'")
def _eq14_t(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    return Outcome(_scaled(ev, ctx, mx.total_conservation_residual(ctx.a_new, ev, per_point=True)))


@check("eq15_decomposition", "Eq. 15", 1e-11, description="|J^nu - c d_mu F^{mu nu}| with the induced j")
def _eq15(ctx):
    ev = ctx.evaluator()
    return Outcome(_scaled(ev, ctx, mx.decomposition_residual(ctx.a, ev, per_point=True)))


@check("eq16_induced", "Eq. 16", 1e-8, description="|D2_mu j^mu| for the induced current")
def _eq16(ctx):
    ev = ctx.evaluator()
    j = mx.induced_current(ctx.a)
    return Outcome(_scaled(ev, ctx, mx.real_conservation_residual(ctx.a, j, ev, per_point=True)))


@check("eq17_rederived", "Eq. 17", 1e-8, description="|[A_mu, j^mu] + c d_nu [A_mu, F^{mu nu}]|, induced j")
def _eq17(ctx):
    ev = ctx.evaluator()
    f = st.field_strength(ctx.a)
    printed, rederived = mx.eq17_residual(ctx.a, f, mx.induced_current(ctx.a, f), ev, per_point=True)
    return Outcome(_scaled(ev, ctx, rederived))


@check("eq16_prescribed", "Eq. 16", 1e-10, description="|D2_mu j^mu| for the prescribed current")
def _eq16_p(ctx):
    j = ctx.scenario.prescribed_current
    if j is None:
        return Outcome(skip="scenario has no prescribed current")
    ev = ctx.evaluator()
    return Outcome(_scaled(ev, ctx, mx.real_conservation_residual(ctx.a, j, ev, per_point=True)))


@check("current_bracket_prescribed", "Eq. 17", 1e-12, description="|[A_mu, j^mu]| for the prescribed current")
def _bracket_p(ctx):
    j = ctx.scenario.prescribed_current
    if j is None:
        return Outcome(skip="scenario has no prescribed current")
    ev = ctx.evaluator()
    return Outcome(_scaled(ev, ctx, _max_norm(ev, [mx.current_bracket(ctx.a, j)])))


@check("eq18_virtual_conservation", "Eq. 18", 1e-8, description="|d_nu [A_mu, F^{mu nu}]| in a commutative configuration")
def _eq18(ctx):
    ev = ctx.evaluator()
    if not ctx.commutative().commutative:
        return Outcome(skip="non-commutative configuration: value reported as diagnostic eq18_virtual_value")
    f = st.field_strength(ctx.a)
    return Outcome(_scaled(ev, ctx, mx.virtual_conservation_residual(ctx.a, f, ev, per_point=True)))


def _bracket_terms(a: GaugePotential):
    f = st.field_strength(a)
    exprs = list(st.bracket_part(a).components())  # field strength
    exprs += list(mx.virtual_current(a, f))  # virtual current
    exprs += list(st.electric_bracket(a).components) + list(st.magnetic_bracket(a).components)  # E, B
    exprs += list(po.vacuum_polarization(a).components) + list(po.vacuum_magnetization(a).components)  # P, M
    return exprs


@check("commutative_brackets", "Eq. 10, 15, 19, 20, 22, 23", 1e-12, description="all bracket corrections vanish")
def _commutative_brackets(ctx):
    ev = ctx.evaluator()
    if not ctx.commutative().commutative:
        return Outcome(skip="non-commutative configuration")
    return Outcome(_scaled(ev, ctx, _max_norm(ev, _bracket_terms(ctx.a))))


@check("maxwell_reduction", "Eq. 13", 1e-12, description="operator minus ordinary Maxwell left-hand sides")
def _maxwell_reduction(ctx):
    ev = ctx.evaluator()
    if not ctx.commutative().commutative:
        return Outcome(skip="non-commutative configuration")
    return Outcome(_scaled(ev, ctx, mx.maxwell_reduction_gap(ctx.a, ev, per_point=True)))


def _generator_commutes(ctx, ev) -> bool:
    lam = ctx.generator
    brackets = [fe.commutator(c, lam) for c in ctx.a]
    brackets += [fe.commutator(lam, lam.derive(mu)) for mu in range(4)]
    brackets += [fe.commutator(lam.derive(m), lam.derive(n)) for m in range(4) for n in range(m + 1, 4)]
    return bool(np.max(_max_norm(ev, brackets) / ctx.scale(ev)) <= 1e-12)


@check("abelian_reduction", "Eq. 4, Eq. 7", 1e-11, description="|A' - (A + d Lambda)| when A and Lambda commute")
def _abelian(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    if not (ctx.commutative().commutative and _generator_commutes(ctx, ev)):
        return Outcome(skip="potential and generator do not commute")
    return Outcome(_scaled(ev, ctx, abelian_reduction_residual(ctx.a, ctx.s, ev, per_point=True)))


@check("hidden_polarization", "Eq. 21-23", 1e-12, description="vacuum terms and field shifts in a commutative gauge")
def _hidden(ctx):
    if not ctx.commutative().commutative:
        return Outcome(skip="non-commutative configuration")
    rep = po.hidden_polarization_check(ctx.a, ctx.points, tol=1e-12)
    return Outcome(max(rep.max_vacuum_polarization, rep.max_vacuum_magnetization, rep.max_field_shift))


@check("polarization_consistency", "Eq. 19-20, Eq. 22-23", 1e-12,
       description="E_bracket + P_vac/eps0 and B_bracket + mu0 M_vac")
def _pol_consistency(ctx):
    ev = ctx.evaluator()
    e_res, b_res = po.polarization_consistency(ctx.a, ev, per_point=True)
    return Outcome(_scaled(ev, ctx, np.maximum(e_res, b_res)))


@check("expectation_invariance", "Eq. 8, Eq. 9", 1e-11, absolute=True,
       description="|<S psi|G'|S psi> - <psi|G|psi>| for one random state per point")
def _expectation(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    s = ev(ctx.s.s)
    g = ev(ctx.observable)
    g_new = ev(transform_observable(ctx.observable, ctx.s))
    psi = ctx.states
    psi_new = np.einsum("pij,pj->pi", s, psi)
    before = np.einsum("pi,pij,pj->p", psi.conj(), g, psi)
    after = np.einsum("pi,pij,pj->p", psi_new.conj(), g_new, psi_new)
    return Outcome(float(np.max(np.abs(after - before))))


@check("energy_covariance", "Eq. 6", 1e-10, description="|(H' - q phi') - S (H - q phi) S^-1|")
def _energy(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    e_new = energy_operator(transform_hamiltonian(ctx.hamiltonian, ctx.s), ctx.a_new)
    e_rot = transform_observable(energy_operator(ctx.hamiltonian, ctx.a), ctx.s)
    return Outcome(_scaled(ev, ctx, _max_norm(ev, [fe.add(e_new, fe.scale(-1.0, e_rot))])))


@check("hamiltonian_gauge_dependence", "Eq. 6", 1e-6, kind="min",
       description="|H' - S H S^-1| is nonzero for a time-dependent generator")
def _raw_h(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    if ctx.generator.derive(0).is_zero:
        return Outcome(skip="generator does not depend on time")
    ev = ctx.evaluator()
    gap = fe.add(transform_hamiltonian(ctx.hamiltonian, ctx.s), fe.scale(-1.0, transform_observable(ctx.hamiltonian, ctx.s)))
    return Outcome(_scaled(ev, ctx, _max_norm(ev, [gap])))


# diagnostics: recorded, never asserted


@check("commutative_probe", "commutative gauge", None, description="largest [A_mu, A_nu] and [A_mu, F^{mu nu}]")
def _probe(ctx):
    rep = ctx.commutative()
    return Outcome(max(rep.max_potential_bracket, rep.max_field_bracket),
                   detail={"classification": rep.classification, "maxwell_gap": rep.maxwell_gap})


@check("eq17_printed", "Eq. 17", None, description="|[A_mu, j^mu] - d_nu [A_mu, F^{mu nu}]| as printed")
def _eq17_printed(ctx):
    ev = ctx.evaluator()
    f = st.field_strength(ctx.a)
    printed, rederived = mx.eq17_residual(ctx.a, f, mx.induced_current(ctx.a, f), ev, per_point=True)
    return Outcome(_scaled(ev, ctx, printed))


@check("eq18_virtual_value", "Eq. 18", None, description="|d_nu [A_mu, F^{mu nu}]| (vanishes iff [A_mu, j^mu] does)")
def _eq18_value(ctx):
    ev = ctx.evaluator()
    f = st.field_strength(ctx.a)
    j = mx.induced_current(ctx.a, f)
    return Outcome(_scaled(ev, ctx, mx.virtual_conservation_residual(ctx.a, f, ev, per_point=True)),
                   detail={"current_bracket": _scaled(ev, ctx, _max_norm(ev, [mx.current_bracket(ctx.a, j)]))})


@check("printed_convention_covariance", "Eq. 7, Eq. 10", None,
       description="|F(A') - S F(A) S^-1| with the sign-flipped transformation law")
def _printed_convention(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    s = GaugeTransformation.from_generator(ctx.generator, ctx.k, PRINTED)
    return Outcome(_scaled(ev, ctx, st.gauge_covariance_residual(ctx.a, s, ev, per_point=True)))


@check("eq20_normalization_ratio", "Eq. 20", None, description="tensor bracket / printed bracket of B")
def _eq20(ctx):
    ratio = po.magnetic_normalization_ratio(ctx.a, ctx.evaluator())
    if ratio is None:
        return Outcome(skip="magnetic bracket vanishes")
    return Outcome(ratio)


@check("vacuum_gauge_dependence", "Eq. 22", None, description="|P_vac(A') - S P_vac(A) S^-1|")
def _vac_gauge(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    p_new = po.vacuum_polarization(ctx.a_new)
    p_old = po.vacuum_polarization(ctx.a)
    diffs = [fe.add(p_new[i], fe.scale(-1.0, transform_observable(p_old[i], ctx.s))) for i in (1, 2, 3)]
    return Outcome(_scaled(ev, ctx, _max_norm(ev, diffs)))


@check("noncommutativity_witness", "Eq. 7", None, description="max_mu |[A_mu, Lambda]|")
def _witness(ctx):
    if (skip := _needs_generator(ctx)) is not None:
        return skip
    ev = ctx.evaluator()
    return Outcome(_scaled(ev, ctx, _max_norm(ev, [fe.commutator(c, ctx.generator) for c in ctx.a])))


CHECK_IDS = tuple(c.id for c in CHECKS)


# ---------------------------------------------------------------------------
# running


def _num_threads() -> int:
    return lt.num_threads()


def _record(chk: Check, out: Outcome, tol_scale: float, overrides: dict) -> dict:
    rec = {"id": chk.id, "equation": chk.equation}
    if out.skip is not None:
        rec["status"] = "skipped"
        rec["reason"] = out.skip
        return rec
    value = float(out.value)
    if chk.tolerance is None:
        rec["status"] = "info"
        rec["value"] = value
    else:
        tol = overrides.get(chk.id, chk.tolerance)
        if chk.kind == "max":
            tol = tol * tol_scale
            passed = value <= tol
        else:
            passed = value >= tol
        rec["status"] = "pass" if passed else "fail"
        rec["kind"] = chk.kind
        rec["max_residual" if chk.kind == "max" else "min_value"] = value
        rec["tolerance"] = tol
        rec["scaled"] = not chk.absolute
    if out.detail:
        rec["detail"] = out.detail
    return rec


def _header(scenario: sc.Scenario) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "scenario": scenario.name,
        "environment": {
            "package": "opgauge",
            "version": __version__,
            "dim": scenario.dim,
            "seed": scenario.seed,
            "points": scenario.sampling.points,
            "box": list(scenario.sampling.box),
        },
        "units": _units(scenario.constants),
        "constants": scenario.constants.as_dict(),
        "conventions": CONVENTIONS,
    }


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run_verify(scenario: sc.Scenario, tol_scale: float = 1.0, checks=None) -> dict:
    """Run the invariant suite and return the report dictionary."""
    if not (tol_scale > 0 and math.isfinite(tol_scale)):
        raise ScenarioError("tol-scale must be a positive number")
    unknown = sorted(set(scenario.tolerances) - set(CHECK_IDS))
    if unknown:
        raise ScenarioError(f"field tolerances: unknown check ids {unknown}; valid ids are {list(CHECK_IDS)}")
    selected = [c for c in CHECKS if checks is None or c.id in checks]
    ctx = Context(scenario)
    workers = _num_threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outcomes = list(pool.map(lambda c: c.run(ctx), selected))
    else:
        outcomes = [c.run(ctx) for c in selected]
    records = [_record(c, o, tol_scale, scenario.tolerances) for c, o in zip(selected, outcomes)]
    asserted = [r for r in records if r["status"] in ("pass", "fail")]
    report = _header(scenario)
    report["checks"] = records
    report["summary"] = {
        "passed": sum(r["status"] == "pass" for r in asserted),
        "failed": sum(r["status"] == "fail" for r in asserted),
        "skipped": sum(r["status"] == "skipped" for r in records),
        "diagnostics": sum(r["status"] == "info" for r in records),
    }
    report["overall"] = "pass" if all(r["status"] == "pass" for r in asserted) else "fail"
    report["timestamp"] = _timestamp()
    return report


# ---------------------------------------------------------------------------
# convergence


def _lattice_setup(scenario: sc.Scenario, grids) -> tuple:
    grids = [int(n) for n in grids]
    if len(grids) < 3:
        raise ScenarioError(f"a convergence study needs at least 3 grids, got {grids}")
    if sorted(set(grids)) != grids:
        raise ScenarioError(f"grid sizes must be strictly increasing, got {grids}")
    box = scenario.lattice_box or scenario.sampling.box
    for e in scenario.potential:
        fe.check_periodic(e, box)
    return [lt.LatticeGrid(box, (n,) * 4) for n in grids], box


def run_converge(scenario: sc.Scenario, grids=None, tol: float = 0.2) -> tuple[dict, list[dict]]:
    """Lattice-vs-exact errors per pipeline and fitted orders.

    Returns the report and the rows of the convergence table.
    """
    grids = list(grids) if grids else list(scenario.lattice_grids or (8, 16, 32))
    lattices, box = _lattice_setup(scenario, grids)
    errors = {name: [] for name in lt.PIPELINES}
    rows = []
    for g in lattices:
        errs = lt.pipeline_errors(scenario.potential, g)
        row = {"n": g.points[0], "h": g.spacing[0]}
        for name in lt.PIPELINES:
            errors[name].append(errs[name])
            row[name] = errs[name]
        rows.append(row)
    records = []
    for name in lt.PIPELINES:
        res = lt.fit_order([g.spacing[0] for g in lattices], errors[name])
        rec = {"id": f"converge_{name}", "status": "pass" if res.within(2.0, tol) else "fail",
               "classification": res.status, "slope": res.slope, "target": 2.0, "tolerance": tol,
               "spacings": list(res.spacings), "errors": list(res.errors)}
        records.append(rec)
    report = _header(scenario)
    report["lattice"] = {"box": list(box), "grids": grids}
    report["checks"] = records
    report["overall"] = "pass" if all(r["status"] == "pass" for r in records) else "fail"
    report["timestamp"] = _timestamp()
    return report, rows


# ---------------------------------------------------------------------------
# residual maps


def _lattice_map(name):
    def run(scenario, grid):
        a = scenario.potential
        for e in a:
            fe.check_periodic(e, grid.extent)
        pot = lt.lattice_potential(a, grid)
        f_lat = lt.lattice_field_strength(pot, a.kappa)
        if name == "bianchi":
            return {"residual": lt.lattice_bianchi(pot, f_lat, a.kappa)}
        if name == "field_strength":
            f_exact = st.field_strength(a)
            r = np.zeros(grid.shape)
            for pair in st.PAIRS:
                r = np.maximum(r, oc.frobenius(f_lat[pair] - lt.sample(f_exact[pair], grid).values))
            return {"residual": r}
        j_lat = lt.lattice_induced_current(pot, f_lat, a.constants)
        j_exact = mx.induced_current(a)
        r = np.zeros(grid.shape)
        for nu in range(4):
            r = np.maximum(r, oc.frobenius(j_lat[nu] - lt.sample(j_exact[nu], grid).values))
        return {"residual": r}

    return run


def _exact_map(fn):
    def run(scenario, grid):
        pts = grid.site_points()
        cols: dict[str, list] = {}
        for start in range(0, grid.nsites, lt.CHUNK):
            ev = Evaluator(pts[start : start + lt.CHUNK])
            for key, val in fn(scenario, ev).items():
                cols.setdefault(key, []).append(val)
        return {k: np.concatenate(v).reshape(grid.shape) for k, v in cols.items()}

    return run


def _eq17_cols(scenario, ev):
    a = scenario.potential
    f = st.field_strength(a)
    printed, rederived = mx.eq17_residual(a, f, mx.induced_current(a, f), ev, per_point=True)
    return {"residual": rederived, "residual_printed": printed}


def _transform_needed(scenario):
    if scenario.generator is None:
        raise ScenarioError("this residual map needs a gauge generator in the scenario")
    return GaugeTransformation.from_generator(scenario.generator, scenario.constants)


MAPS = {
    "bianchi": _lattice_map("bianchi"),
    "field_strength": _lattice_map("field_strength"),
    "current": _lattice_map("current"),
    "eq10_eq12": _exact_map(lambda s, ev: {"residual": st.max_component_distance(
        st.field_strength_commutator_form(s.potential), st.field_strength_derivative_form(s.potential), ev,
        per_point=True)}),
    "eq14": _exact_map(lambda s, ev: {"residual": mx.total_conservation_residual(s.potential, ev, per_point=True)}),
    "eq16": _exact_map(lambda s, ev: {"residual": mx.real_conservation_residual(
        s.potential, mx.induced_current(s.potential), ev, per_point=True)}),
    "eq17": _exact_map(_eq17_cols),
    "covariance_F": _exact_map(lambda s, ev: {"residual": st.gauge_covariance_residual(
        s.potential, _transform_needed(s), ev, per_point=True)}),
}


def run_residual_map(scenario: sc.Scenario, check_id: str, n: int, path) -> dict[str, np.ndarray]:
    """Write a per-site residual CSV for ``check_id`` on an ``n^4`` grid over the lattice box."""
    if check_id not in MAPS:
        raise ScenarioError(f"unknown check id {check_id!r}; valid ids: {', '.join(sorted(MAPS))}")
    if n is None or n < 4:
        raise ScenarioError(f"grid must have at least 4 points per direction, got {n}")
    box = scenario.lattice_box or scenario.sampling.box
    grid = lt.LatticeGrid(box, (n,) * 4)
    cols = MAPS[check_id](scenario, grid)
    lt.write_residual_csv(path, grid, cols)
    return cols
