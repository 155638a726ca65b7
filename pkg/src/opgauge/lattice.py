"""Periodic finite-difference backend for cross-checking the exact engine.

Fields are sampled on a periodic 4D grid and differentiated with the
second-order central stencil ``(f[i+1] - f[i-1]) / 2h``.  Only periodic
fields (trig terms commensurate with the box, constants) are meaningful
here; the pipelines and convergence studies refuse anything else.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import field_expr as fe
from . import operator_core as oc
from .errors import OGTError
from .field_expr import Evaluator, Expr
from .gauge import METRIC, GaugePotential
from .strength import PAIRS, levi_civita_upper

# Fixed so that results do not depend on the thread count.
CHUNK = 4096


def num_threads() -> int:
    try:
        return max(1, int(os.environ.get("OGT_NUM_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class LatticeGrid:
    extent: tuple[float, float, float, float]
    points: tuple[int, int, int, int]

    def __post_init__(self):
        extent = tuple(float(e) for e in self.extent)
        points = tuple(int(n) for n in self.points)
        if len(extent) != 4 or len(points) != 4:
            raise ValueError("a lattice grid needs 4 extents and 4 point counts")
        if any(n < 4 for n in points):
            raise ValueError(f"central differences need at least 4 points per direction, got {points}")
        if any(not (e > 0 and math.isfinite(e)) for e in extent):
            raise ValueError(f"box lengths must be positive, got {extent}")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "points", points)

    @classmethod
    def cubic(cls, n: int, length: float = 1.0) -> LatticeGrid:
        return cls((length,) * 4, (n,) * 4)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / n for e, n in zip(self.extent, self.points))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def nsites(self) -> int:
        return math.prod(self.points)

    def coordinates(self, mu: int) -> np.ndarray:
        return np.arange(self.points[mu]) * self.spacing[mu]

    def site_indices(self) -> np.ndarray:
        """``(nsites, 4)`` integer indices in C order."""
        return np.stack(np.unravel_index(np.arange(self.nsites), self.points), axis=1)

    def site_points(self) -> np.ndarray:
        return self.site_indices() * np.asarray(self.spacing)


@dataclass
class LatticeField:
    grid: LatticeGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape[:4] != self.grid.shape or self.values.ndim != 6:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    def __add__(self, other: LatticeField) -> LatticeField:
        return LatticeField(self.grid, self.values + other.values)

    def __sub__(self, other: LatticeField) -> LatticeField:
        return LatticeField(self.grid, self.values - other.values)

    def scaled(self, c) -> LatticeField:
        return LatticeField(self.grid, c * self.values)

    def __matmul__(self, other: LatticeField) -> LatticeField:
        return LatticeField(self.grid, oc.matmul(self.values, other.values))

    def norms(self) -> np.ndarray:
        """Per-site Frobenius norm, shape ``grid.shape``."""
        return oc.frobenius(self.values)


def _sample_chunk(expr: Expr, pts: np.ndarray, start: int) -> np.ndarray:
    try:
        return Evaluator(pts)(expr)
    except OGTError as exc:
        raise type(exc)(f"evaluation failed in chunk starting at site {start}: {exc}") from exc


def sample(expr: Expr, grid: LatticeGrid, check_periodic: bool = False) -> LatticeField:
    """Evaluate ``expr`` at every site.

    Evaluation runs in fixed blocks of :data:`CHUNK` sites (optionally on
    ``OGT_NUM_THREADS`` threads), so the values never depend on the schedule.
    """
    if check_periodic:
        fe.check_periodic(expr, grid.extent)
    pts = grid.site_points()
    starts = range(0, grid.nsites, CHUNK)
    out = np.empty((grid.nsites, expr.dim, expr.dim), dtype=complex)
    jobs = [(s, pts[s : s + CHUNK]) for s in starts]
    workers = num_threads()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda job: _sample_chunk(expr, job[1], job[0]), jobs))
    else:
        results = [_sample_chunk(expr, p, s) for s, p in jobs]
    for (s, _), vals in zip(jobs, results):
        out[s : s + len(vals)] = vals
    return LatticeField(grid, out.reshape(grid.shape + (expr.dim, expr.dim)))


def central_diff(f: LatticeField, mu: int) -> LatticeField:
    """``(f[i+1] - f[i-1]) / (2 h_mu)`` with periodic wraparound."""
    h = f.grid.spacing[mu]
    return LatticeField(f.grid, (np.roll(f.values, -1, axis=mu) - np.roll(f.values, 1, axis=mu)) / (2 * h))


def interior_mask(grid: LatticeGrid, mu: int | None = None) -> np.ndarray:
    """Boolean site mask that drops the first and last slice along ``mu``.

    Those are the rows whose central difference straddles the periodic seam;
    comparing a non-periodic field (a linear ramp, say) is only meaningful
    away from them.  ``mu=None`` keeps every site.
    """
    mask = np.ones(grid.shape, dtype=bool)
    if mu is not None:
        idx = [slice(None)] * 4
        for edge in (0, grid.points[mu] - 1):
            idx[mu] = edge
            mask[tuple(idx)] = False
    return mask


def max_distance(f: LatticeField, g: LatticeField, mask: np.ndarray | None = None) -> float:
    """Max over (masked) sites of the Frobenius distance."""
    d = (f - g).norms()
    return float(np.max(d[mask] if mask is not None else d))


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return oc.matmul(a, b) - oc.matmul(b, a)


# ---------------------------------------------------------------------------
# residual pipelines on the lattice


def lattice_potential(a: GaugePotential, grid: LatticeGrid) -> list[LatticeField]:
    return [sample(a[mu], grid, check_periodic=True) for mu in range(4)]


def lattice_field_strength(pot: list[LatticeField], kappa: float) -> dict[tuple[int, int], np.ndarray]:
    """Lower-index ``F_{mu nu}`` for ``mu < nu`` from central differences."""
    out = {}
    for m, n in PAIRS:
        out[(m, n)] = (
            central_diff(pot[n], m).values
            - central_diff(pot[m], n).values
            + 1j * kappa * _commutator(pot[m].values, pot[n].values)
        )
    return out


def _upper(f: dict, mu: int, nu: int) -> np.ndarray | None:
    if mu == nu:
        return None
    if mu < nu:
        return METRIC[mu] * METRIC[nu] * f[(mu, nu)]
    return -METRIC[mu] * METRIC[nu] * f[(nu, mu)]


def _lattice_dual(f: dict) -> dict:
    out = {}
    for m, n in PAIRS:
        acc = 0
        for al, be in PAIRS:
            eps = levi_civita_upper(m, n, al, be)
            if eps:
                acc = acc + eps * f[(al, be)]
        out[(m, n)] = METRIC[m] * METRIC[n] * acc
    return out


def _lattice_cov_divergence(grid, pot, f, kappa, nu) -> np.ndarray:
    acc = 0
    for mu in range(4):
        fu = _upper(f, mu, nu)
        if fu is None:
            continue
        acc = acc + central_diff(LatticeField(grid, fu), mu).values + 1j * kappa * _commutator(pot[mu].values, fu)
    return acc


def lattice_induced_current(pot: list[LatticeField], f: dict, constants: oc.PhysicalConstants) -> list[np.ndarray]:
    grid = pot[0].grid
    return [constants.c * _lattice_cov_divergence(grid, pot, f, constants.kappa, nu) for nu in range(4)]


def lattice_bianchi(pot: list[LatticeField], f: dict, kappa: float) -> np.ndarray:
    """Per-site ``max_nu |D_mu *F^{mu nu}|``."""
    grid = pot[0].grid
    dual = _lattice_dual(f)
    out = np.zeros(grid.shape)
    for nu in range(4):
        out = np.maximum(out, oc.frobenius(_lattice_cov_divergence(grid, pot, dual, kappa, nu)))
    return out


PIPELINES = ("field_strength", "current", "bianchi")


def pipeline_errors(a: GaugePotential, grid: LatticeGrid, pipelines=PIPELINES) -> dict[str, float]:
    """Max-over-sites distance between lattice pipelines and the exact engine."""
    from .maxwell import bianchi_residual, induced_current
    from .strength import field_strength

    k = a.constants
    pot = lattice_potential(a, grid)
    f_lat = lattice_field_strength(pot, k.kappa)
    f_exact = field_strength(a)
    errors = {}
    if "field_strength" in pipelines:
        err = 0.0
        for pair in PAIRS:
            exact = sample(f_exact[pair], grid).values
            err = max(err, float(np.max(oc.frobenius(f_lat[pair] - exact))))
        errors["field_strength"] = err
    if "current" in pipelines:
        j_lat = lattice_induced_current(pot, f_lat, k)
        j_exact = induced_current(a, f_exact)
        err = 0.0
        for nu in range(4):
            exact = sample(j_exact[nu], grid).values
            err = max(err, float(np.max(oc.frobenius(j_lat[nu] - exact))))
        errors["current"] = err
    if "bianchi" in pipelines:
        lat = lattice_bianchi(pot, f_lat, k.kappa)
        exact = np.concatenate(
            [np.atleast_1d(bianchi_residual(a, p, per_point=True)) for p in _chunks(grid.site_points())]
        ).reshape(grid.shape)
        errors["bianchi"] = float(np.max(np.abs(lat - exact)))
    return errors


def _chunks(pts):
    return [pts[s : s + CHUNK] for s in range(0, len(pts), CHUNK)]


# ---------------------------------------------------------------------------
# convergence studies


@dataclass(frozen=True)
class ConvergenceResult:
    status: str  # "ok", "exact" or "non-monotone"
    slope: float | None
    spacings: tuple[float, ...]
    errors: tuple[float, ...]

    def within(self, target: float = 2.0, tol: float = 0.2) -> bool:
        if self.status == "exact":
            return True
        return self.status == "ok" and abs(self.slope - target) <= tol


def fit_order(spacings, errors, exact_tol: float = 1e-11) -> ConvergenceResult:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    hs = tuple(float(h) for h in spacings)
    errs = tuple(float(e) for e in errors)
    if len(hs) < 3:
        raise ValueError("a convergence study needs at least 3 grids")
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("grid spacings must be strictly decreasing")
    if max(errs) <= exact_tol:
        return ConvergenceResult("exact", None, hs, errs)
    if any(b >= a for a, b in zip(errs, errs[1:])) or min(errs) <= 0:
        return ConvergenceResult("non-monotone", None, hs, errs)
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return ConvergenceResult("ok", slope, hs, errs)


def convergence_order(expr: Expr, mu: int, grids: list[LatticeGrid]) -> ConvergenceResult:
    """Order of the central difference of ``expr`` along ``mu`` against the exact derivative."""
    if len(grids) < 3:
        raise ValueError("a convergence study needs at least 3 grids")
    d_exact = expr.derive(mu)
    errs = []
    for grid in grids:
        f = sample(expr, grid, check_periodic=True)
        fd = central_diff(f, mu)
        exact = sample(d_exact, grid)
        errs.append(float(np.max((fd - exact).norms())))
    return fit_order([g.spacing[mu] for g in grids], errs)


def write_residual_csv(path, grid: LatticeGrid, columns: dict[str, np.ndarray]) -> None:
    """CSV with ``idx0..idx3, x0..x3`` followed by one column per residual."""
    idx = grid.site_indices()
    pts = grid.site_points()
    names = list(columns)
    data = [np.asarray(columns[n]).reshape(-1) for n in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"idx{m}" for m in range(4)] + [f"x{m}" for m in range(4)] + names)
        for s in range(grid.nsites):
            w.writerow(
                [int(i) for i in idx[s]] + [repr(float(p)) for p in pts[s]] + [repr(float(d[s])) for d in data]
            )
