"""Operator-valued fields over spacetime with exact partial derivatives.

An expression is an immutable DAG whose leaves are analytic fields
``sum_k f_k(x) T_k`` (``f_k`` a monomial or a sinusoid, ``T_k`` a constant
matrix) and whose interior nodes are sums, complex multiples, products,
commutators, conjugations and matrix exponentials.  ``derive`` returns a new
expression; nothing is approximated except the matrix exponential itself.

Derivatives of ``exp(X(x))`` up to order ``MAX_JET_ORDER`` are evaluated with a
truncated-Taylor ("jet") algebra: for a multi-index ``alpha`` the block
matrix of ``X(x + t)`` restricted to monomials ``t^beta`` with
``beta <= alpha`` is exponentiated, and the ``(beta, 0)`` block holds
``d^beta exp(X) / beta!``.  The first-order case is the familiar
``exp([[X, E], [0, X]])`` Frechet identity.

Evaluation is batched: an :class:`Evaluator` is bound to an array of points
of shape ``(P, 4)`` and returns stacks of shape ``(P, N, N)``.  It memoizes
every node it has seen, so many expressions sharing sub-trees (the sixteen
components of a field strength, say) are cheap to evaluate together.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import operator_core as oc
from .errors import CapabilityError, DimensionMismatchError, PeriodicityError, RangeError

MAX_JET_ORDER = 4

HERMITIAN = "hermitian"
ANTIHERMITIAN = "antihermitian"


# ---------------------------------------------------------------------------
# scalar basis


@dataclass(frozen=True)
class Monomial:
    exponents: tuple[int, int, int, int]
    amplitude: float = 1.0

    def __post_init__(self):
        if len(self.exponents) != 4 or any(int(e) != e or e < 0 for e in self.exponents):
            raise ValueError(f"monomial needs 4 non-negative integer exponents, got {self.exponents}")
        object.__setattr__(self, "exponents", tuple(int(e) for e in self.exponents))

    def value(self, points: np.ndarray) -> np.ndarray:
        out = np.full(points.shape[0], float(self.amplitude))
        for mu, e in enumerate(self.exponents):
            if e:
                out = out * points[:, mu] ** e
        return out

    def derive(self, mu: int) -> Monomial | None:
        e = self.exponents[mu]
        if e == 0 or self.amplitude == 0:
            return None
        exps = list(self.exponents)
        exps[mu] -= 1
        return Monomial(tuple(exps), self.amplitude * e)

    @property
    def is_constant(self) -> bool:
        return not any(self.exponents)

    def periodic_on(self, extent) -> bool:
        return self.is_constant

    def to_dict(self) -> dict:
        return {"kind": "monomial", "exponents": list(self.exponents), "amplitude": self.amplitude}


@dataclass(frozen=True)
class Trig:
    """``amplitude * sin(k.x + phase)`` or the cosine analogue."""

    function: str
    wavevector: tuple[float, float, float, float]
    phase: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.function not in ("sin", "cos"):
            raise ValueError(f"trig function must be 'sin' or 'cos', got {self.function!r}")
        if len(self.wavevector) != 4:
            raise ValueError("wavevector needs 4 components")
        object.__setattr__(self, "wavevector", tuple(float(k) for k in self.wavevector))

    def value(self, points: np.ndarray) -> np.ndarray:
        arg = points @ np.asarray(self.wavevector) + self.phase
        f = np.sin if self.function == "sin" else np.cos
        return self.amplitude * f(arg)

    def derive(self, mu: int) -> Trig | None:
        k = self.wavevector[mu]
        if k == 0 or self.amplitude == 0:
            return None
        if self.function == "sin":
            return Trig("cos", self.wavevector, self.phase, self.amplitude * k)
        return Trig("sin", self.wavevector, self.phase, -self.amplitude * k)

    @property
    def is_constant(self) -> bool:
        return not any(self.wavevector)

    def periodic_on(self, extent) -> bool:
        for k, length in zip(self.wavevector, extent):
            turns = k * length / (2 * math.pi)
            if abs(turns - round(turns)) > 1e-9:
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "kind": "trig",
            "function": self.function,
            "wavevector": list(self.wavevector),
            "phase": self.phase,
            "amplitude": self.amplitude,
        }


ScalarBasis = Monomial | Trig


# ---------------------------------------------------------------------------
# expression nodes


class Expr:
    """Base class of operator-field expressions. Instances are immutable."""

    __slots__ = ("dim", "symmetry", "central", "_dcache")

    def __init__(self, dim: int, symmetry: str | None = None, central: bool = False):
        self.dim = int(dim)
        self.symmetry = symmetry
        # central: value is a multiple of the identity at every point
        self.central = central
        self._dcache: dict[int, Expr] = {}

    @property
    def is_zero(self) -> bool:
        return False

    @property
    def hermitian(self) -> bool:
        return self.symmetry == HERMITIAN

    def children(self) -> tuple[Expr, ...]:
        return ()

    def derive(self, mu: int) -> Expr:
        if mu not in (0, 1, 2, 3):
            raise ValueError(f"direction must be 0..3, got {mu!r}")
        d = self._dcache.get(mu)
        if d is None:
            d = self._derive(mu)
            if self.symmetry and not d.is_zero and d.symmetry != self.symmetry:
                d = Certified(d, self.symmetry)
            # dict assignment is atomic; a racing thread builds an equivalent node
            self._dcache[mu] = d
        return d

    def _derive(self, mu: int) -> Expr:
        raise NotImplementedError

    def _eval(self, ev: Evaluator) -> np.ndarray:
        raise NotImplementedError

    # algebra sugar
    def __add__(self, other: Expr) -> Expr:
        return add(self, other)

    def __sub__(self, other: Expr) -> Expr:
        return add(self, scale(-1.0, other))

    def __neg__(self) -> Expr:
        return scale(-1.0, self)

    def __mul__(self, c) -> Expr:
        return scale(c, self)

    __rmul__ = __mul__

    def __matmul__(self, other: Expr) -> Expr:
        return product(self, other)


class Zero(Expr):
    __slots__ = ()

    def __init__(self, dim: int):
        super().__init__(dim, None, True)

    @property
    def is_zero(self) -> bool:
        return True

    def _derive(self, mu):
        return self

    def _eval(self, ev):
        return np.zeros((ev.npoints, self.dim, self.dim), dtype=complex)

    def __repr__(self):
        return f"Zero({self.dim})"


class AnalyticField(Expr):
    """Leaf ``sum_k f_k(x) T_k`` with scalar basis functions ``f_k``."""

    __slots__ = ("terms", "_coeffs")

    def __init__(self, terms, dim: int | None = None, htol: float = oc.HERMITIAN_TOL):
        terms = tuple((basis, oc.as_operator(coef)) for basis, coef in terms)
        if dim is None:
            if not terms:
                raise ValueError("dim is required for an empty field")
            dim = terms[0][1].shape[-1]
        for _, coef in terms:
            if coef.shape != (dim, dim):
                raise DimensionMismatchError(f"coefficient shape {coef.shape} does not match dim {dim}")
        herm = all(oc.is_hermitian(c, htol) for _, c in terms)
        eye = np.eye(dim)
        central = all(np.max(np.abs(c - c[0, 0] * eye)) == 0 for _, c in terms)
        super().__init__(dim, HERMITIAN if herm else None, central)
        self.terms = terms
        self._coeffs = np.array([c for _, c in terms]).reshape(len(terms), dim * dim) if terms else None

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def _derive(self, mu):
        out = []
        for basis, coef in self.terms:
            d = basis.derive(mu)
            if d is not None:
                out.append((d, coef))
        if not out:
            return Zero(self.dim)
        return AnalyticField(out, self.dim)

    def _eval(self, ev):
        if not self.terms:
            return np.zeros((ev.npoints, self.dim, self.dim), dtype=complex)
        scalars = np.stack([basis.value(ev.points) for basis, _ in self.terms], axis=1)
        return (scalars @ self._coeffs).reshape(ev.npoints, self.dim, self.dim)

    def __repr__(self):
        return f"AnalyticField({len(self.terms)} terms, dim={self.dim})"


class Certified(Expr):
    """Pass-through node recording a symmetry that holds by a theorem, not by structure."""

    __slots__ = ("inner",)

    def __init__(self, inner: Expr, symmetry: str):
        super().__init__(inner.dim, symmetry, inner.central)
        self.inner = inner

    def children(self):
        return (self.inner,)

    def _derive(self, mu):
        d = self.inner.derive(mu)
        return d if d.is_zero else Certified(d, self.symmetry)

    def _eval(self, ev):
        return ev.value(self.inner)


class Sum(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple[Expr, ...]):
        syms = {t.symmetry for t in terms}
        sym = syms.pop() if len(syms) == 1 else None
        super().__init__(terms[0].dim, sym, all(t.central for t in terms))
        self.terms = terms

    def children(self):
        return self.terms

    def _derive(self, mu):
        return add(*(t.derive(mu) for t in self.terms))

    def _eval(self, ev):
        out = ev.value(self.terms[0]).copy()
        for t in self.terms[1:]:
            out += ev.value(t)
        return out


class Scaled(Expr):
    __slots__ = ("factor", "inner")

    def __init__(self, factor: complex, inner: Expr):
        factor = complex(factor)
        sym = None
        if inner.symmetry is not None:
            flip = {HERMITIAN: ANTIHERMITIAN, ANTIHERMITIAN: HERMITIAN}
            if factor.imag == 0:
                sym = inner.symmetry
            elif factor.real == 0:
                sym = flip[inner.symmetry]
        super().__init__(inner.dim, sym, inner.central)
        self.factor = factor
        self.inner = inner

    def children(self):
        return (self.inner,)

    def _derive(self, mu):
        return scale(self.factor, self.inner.derive(mu))

    def _eval(self, ev):
        return self.factor * ev.value(self.inner)


class Product(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple[Expr, ...]):
        super().__init__(factors[0].dim, None, all(f.central for f in factors))
        self.factors = factors

    def children(self):
        return self.factors

    def _derive(self, mu):
        terms = []
        for i, f in enumerate(self.factors):
            d = f.derive(mu)
            if not d.is_zero:
                terms.append(product(*self.factors[:i], d, *self.factors[i + 1 :]))
        return add(*terms) if terms else Zero(self.dim)

    def _eval(self, ev):
        out = ev.value(self.factors[0])
        for f in self.factors[1:]:
            out = oc.matmul(out, ev.value(f))
        return out


class Commutator(Expr):
    __slots__ = ("a", "b")

    def __init__(self, a: Expr, b: Expr):
        sym = None
        if a.symmetry is not None and b.symmetry is not None:
            sym = ANTIHERMITIAN if a.symmetry == b.symmetry else HERMITIAN
        super().__init__(a.dim, sym, False)
        self.a = a
        self.b = b

    def children(self):
        return (self.a, self.b)

    def _derive(self, mu):
        return add(commutator(self.a.derive(mu), self.b), commutator(self.a, self.b.derive(mu)))

    def _eval(self, ev):
        va = ev.value(self.a)
        vb = ev.value(self.b)
        return oc.matmul(va, vb) - oc.matmul(vb, va)


class Conjugation(Expr):
    """``s g s_inv`` where ``s``/``s_inv`` are supplied as a matched pair."""

    __slots__ = ("s", "g", "s_inv")

    def __init__(self, s: Expr, g: Expr, s_inv: Expr):
        sym = g.symmetry if _unitary_pair(s, s_inv) else None
        super().__init__(g.dim, sym, g.central)
        self.s = s
        self.g = g
        self.s_inv = s_inv

    def children(self):
        return (self.s, self.g, self.s_inv)

    def _derive(self, mu):
        ds = self.s.derive(mu)
        dg = self.g.derive(mu)
        dsi = self.s_inv.derive(mu)
        terms = []
        if not ds.is_zero:
            terms.append(product(ds, self.g, self.s_inv))
        if not dg.is_zero:
            terms.append(conjugation(self.s, dg, self.s_inv))
        if not dsi.is_zero:
            terms.append(product(self.s, self.g, dsi))
        return add(*terms) if terms else Zero(self.dim)

    def _eval(self, ev):
        return oc.matmul(oc.matmul(ev.value(self.s), ev.value(self.g)), ev.value(self.s_inv))


class ExpJet(Expr):
    """``d^alpha exp(arg)``: the exponential of ``arg`` differentiated by a multi-index."""

    __slots__ = ("arg", "alpha")

    def __init__(self, arg: Expr, alpha: tuple[int, int, int, int] = (0, 0, 0, 0)):
        super().__init__(arg.dim, None, arg.central)
        self.arg = arg
        self.alpha = tuple(alpha)

    @property
    def order(self) -> int:
        return sum(self.alpha)

    @property
    def unitary(self) -> bool:
        return self.order == 0 and self.arg.symmetry == ANTIHERMITIAN

    def children(self):
        return (self.arg,)

    def _derive(self, mu):
        alpha = list(self.alpha)
        alpha[mu] += 1
        if sum(alpha) > MAX_JET_ORDER:
            raise CapabilityError(
                f"exponential derivative of order {sum(alpha)} exceeds supported order {MAX_JET_ORDER}"
            )
        return ExpJet(self.arg, tuple(alpha))

    def _eval(self, ev):
        return ev.jet(self.arg, self.alpha)

    def __repr__(self):
        return f"ExpJet(alpha={self.alpha}, dim={self.dim})"


def _unitary_pair(s: Expr, s_inv: Expr) -> bool:
    """Structural check that s = exp(X), s_inv = exp(-X) with X anti-Hermitian."""
    if not (isinstance(s, ExpJet) and isinstance(s_inv, ExpJet) and s.order == 0 and s_inv.order == 0):
        return False
    x, y = s.arg, s_inv.arg
    if x.symmetry != ANTIHERMITIAN:
        return False
    if isinstance(y, Scaled) and y.inner is x and y.factor == -1:
        return True
    if isinstance(x, Scaled) and x.inner is y and x.factor == -1:
        return True
    return isinstance(x, Scaled) and isinstance(y, Scaled) and x.inner is y.inner and x.factor == -y.factor


# ---------------------------------------------------------------------------
# smart constructors


def zero(dim: int) -> Zero:
    return Zero(dim)


def constant(matrix) -> AnalyticField:
    m = oc.as_operator(matrix)
    return AnalyticField([(Monomial((0, 0, 0, 0)), m)])


def identity(dim: int) -> AnalyticField:
    return constant(np.eye(dim))


def add(*terms: Expr) -> Expr:
    flat: list[Expr] = []
    for t in terms:
        if isinstance(t, Sum):
            flat.extend(t.terms)
        elif not t.is_zero:
            flat.append(t)
    _same_dim(terms)
    if not flat:
        return Zero(terms[0].dim)
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def scale(c, e: Expr) -> Expr:
    c = complex(c)
    if c == 0 or e.is_zero:
        return Zero(e.dim)
    if c == 1:
        return e
    if isinstance(e, Scaled):
        return scale(c * e.factor, e.inner)
    return Scaled(c, e)


def product(*factors: Expr) -> Expr:
    _same_dim(factors)
    flat: list[Expr] = []
    for f in factors:
        if f.is_zero:
            return Zero(f.dim)
        if isinstance(f, Product):
            flat.extend(f.factors)
        else:
            flat.append(f)
    if len(flat) == 1:
        return flat[0]
    return Product(tuple(flat))


def commutator(a: Expr, b: Expr) -> Expr:
    _same_dim((a, b))
    if a.is_zero or b.is_zero or a.central or b.central or a is b:
        return Zero(a.dim)
    return Commutator(a, b)


def conjugation(s: Expr, g: Expr, s_inv: Expr) -> Expr:
    _same_dim((s, g, s_inv))
    if g.is_zero:
        return Zero(g.dim)
    return Conjugation(s, g, s_inv)


def exp_field(arg: Expr) -> ExpJet:
    return ExpJet(arg)


def certify(e: Expr, symmetry: str) -> Expr:
    if e.is_zero or e.symmetry == symmetry:
        return e
    return Certified(e, symmetry)


def derive(expr: Expr, mu: int) -> Expr:
    return expr.derive(mu)


def derive_multi(expr: Expr, alpha) -> Expr:
    """Apply ``d^alpha`` in canonical direction order."""
    for mu, n in enumerate(alpha):
        for _ in range(n):
            expr = expr.derive(mu)
    return expr


def _same_dim(exprs):
    dims = {e.dim for e in exprs}
    if len(dims) > 1:
        raise DimensionMismatchError(f"operator field dimensions differ: {sorted(dims)}")


def walk(expr: Expr):
    """Yield every node of the DAG once."""
    seen = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        stack.extend(node.children())


def check_periodic(expr: Expr, extent) -> None:
    """Raise :class:`PeriodicityError` unless every leaf is periodic on the box."""
    for node in walk(expr):
        if isinstance(node, AnalyticField):
            for basis, _ in node.terms:
                if not basis.periodic_on(extent):
                    raise PeriodicityError(
                        f"basis {basis.to_dict()} is not periodic on box {list(extent)}; "
                        "lattice runs need constant or trig terms with k_mu L_mu / 2pi integral"
                    )


# ---------------------------------------------------------------------------
# evaluation


def _multi_indices_below(alpha):
    return sorted(itertools.product(*(range(a + 1) for a in alpha)), key=lambda b: (sum(b), b))


def _factorial(beta) -> int:
    return math.prod(math.factorial(b) for b in beta)


class Evaluator:
    """Batched, memoizing evaluator bound to a fixed set of spacetime points."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != 4:
            raise ValueError(f"points must have shape (P, 4), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("spacetime points must be finite")
        self.points = pts
        self.npoints = pts.shape[0]
        self._values: dict[int, tuple[Expr, np.ndarray]] = {}
        self._jets: dict[tuple[int, tuple], np.ndarray] = {}
        self._walked: dict[int, Expr] = {}

    def __call__(self, expr: Expr) -> np.ndarray:
        self._prefetch(expr)
        return self.value(expr)

    def value(self, expr: Expr) -> np.ndarray:
        hit = self._values.get(id(expr))
        if hit is not None:
            return hit[1]
        v = expr._eval(self)
        # keep the node alive so its id stays unique for the evaluator's lifetime
        self._values[id(expr)] = (expr, v)
        return v

    def jet(self, arg: Expr, alpha) -> np.ndarray:
        alpha = tuple(alpha)
        key = (id(arg), alpha)
        if key not in self._jets:
            self._compute_jet(arg, alpha)
        return self._jets[key]

    def _prefetch(self, expr: Expr) -> None:
        # Compute only maximal multi-indices per exponent; sub-jets come for free.
        wanted: dict[int, tuple[Expr, set]] = {}
        stack = [expr]
        while stack:
            node = stack.pop()
            if id(node) in self._walked:
                continue
            self._walked[id(node)] = node
            if isinstance(node, ExpJet):
                wanted.setdefault(id(node.arg), (node.arg, set()))[1].add(node.alpha)
            stack.extend(node.children())
        for arg, alphas in wanted.values():
            maximal = [
                a for a in alphas if not any(b != a and all(x <= y for x, y in zip(a, b)) for b in alphas)
            ]
            for a in sorted(maximal):
                if (id(arg), a) not in self._jets:
                    self._compute_jet(arg, a)

    def _compute_jet(self, arg: Expr, alpha: tuple) -> None:
        n = arg.dim
        basis = _multi_indices_below(alpha)
        index = {b: i for i, b in enumerate(basis)}
        taylor = {g: self.value(derive_multi(arg, g)) / _factorial(g) for g in basis}
        nb = len(basis)
        block = np.zeros((self.npoints, nb * n, nb * n), dtype=complex)
        for b in basis:
            i = index[b]
            for b2 in basis:
                if all(x <= y for x, y in zip(b2, b)):
                    g = tuple(y - x for x, y in zip(b2, b))
                    j = index[b2]
                    block[:, i * n : (i + 1) * n, j * n : (j + 1) * n] = taylor[g]
        try:
            big = oc.matrix_exp(block)
        except RangeError as exc:
            raise RangeError(f"exponential node overflowed at order {sum(alpha)}: {exc}") from None
        for b in basis:
            i = index[b]
            self._jets.setdefault((id(arg), b), big[:, i * n : (i + 1) * n, :n] * _factorial(b))
        # jets are keyed by id(arg); caching arg's value keeps it alive
        self.value(arg)


def evaluate(expr: Expr, x) -> np.ndarray:
    """Evaluate at one point (shape ``(4,)``) or a batch (shape ``(P, 4)``)."""
    x = np.asarray(x, dtype=float)
    out = Evaluator(x)(expr)
    return out[0] if x.ndim == 1 else out


def finite_diff_check(expr: Expr, x, mu: int, h: float) -> float:
    """Frobenius distance between a central difference and the exact derivative."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    step = np.zeros(4)
    step[mu] = h
    pts = np.stack([x + step, x - step])
    vals = evaluate(expr, pts)
    fd = (vals[0] - vals[1]) / (2 * h)
    exact = evaluate(expr.derive(mu), x)
    return float(oc.frobenius(fd - exact))
