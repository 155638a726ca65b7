"""Dense complex-matrix kernel.

Operators are plain ``numpy`` complex arrays of shape ``(N, N)``; most
functions also accept stacks of shape ``(..., N, N)`` so that a whole batch
of spacetime points can be processed in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConditioningError, DimensionMismatchError, RangeError

HERMITIAN_TOL = 1e-10
CONDITION_BOUND = 1e8

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class PhysicalConstants:
    """Coupling constants ``q, hbar, c`` together with ``eps0, mu0``.

    Natural units (everything 1) are the default.
    """

    q: float = 1.0
    hbar: float = 1.0
    c: float = 1.0
    eps0: float = 1.0
    mu0: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "c", "eps0", "mu0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not math.isfinite(self.q):
            raise ValueError(f"q must be finite, got {self.q!r}")
        if not math.isfinite(self.kappa):
            raise ValueError("coupling q/(hbar c) is not finite")

    @property
    def kappa(self) -> float:
        """Coupling q/(hbar c)."""
        return self.q / (self.hbar * self.c)

    def as_dict(self) -> dict[str, float]:
        return {"q": self.q, "hbar": self.hbar, "c": self.c, "eps0": self.eps0, "mu0": self.mu0}


def as_operator(m) -> np.ndarray:
    """Validate and convert to a complex square matrix (or a stack of them)."""
    m = np.asarray(m, dtype=complex)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2] or m.shape[-1] < 1:
        raise DimensionMismatchError(f"expected square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("operator has non-finite entries")
    return m


def _check_same_dim(*ms):
    dims = {m.shape[-1] for m in ms}
    if len(dims) != 1:
        raise DimensionMismatchError(f"operator dimensions differ: {sorted(dims)}")


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def frobenius(m: np.ndarray) -> np.ndarray | float:
    """Frobenius norm over the last two axes."""
    return np.sqrt(np.sum(np.abs(m) ** 2, axis=(-2, -1)))


def is_hermitian(m: np.ndarray, htol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= htol)


def is_unitary(m: np.ndarray, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    eye = np.eye(m.shape[-1])
    return bool(np.max(frobenius(m @ dagger(m) - eye)) <= tol)


def _matmul2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
    a00, a01, a10, a11 = a[..., 0, 0], a[..., 0, 1], a[..., 1, 0], a[..., 1, 1]
    b00, b01, b10, b11 = b[..., 0, 0], b[..., 0, 1], b[..., 1, 0], b[..., 1, 1]
    out[..., 0, 0] = a00 * b00 + a01 * b10
    out[..., 0, 1] = a00 * b01 + a01 * b11
    out[..., 1, 0] = a10 * b00 + a11 * b10
    out[..., 1, 1] = a10 * b01 + a11 * b11
    return out


_MATMUL_BLOCK = 4096


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched matrix product with an elementwise fast path for 2x2 stacks.

    numpy's batched ``matmul`` loops over tiny matrices one at a time; for
    ``N = 2`` spelling the product out is several times faster.  Large
    equal-shape stacks are processed in cache-sized blocks.
    """
    if a.shape[-1] != 2 or a.ndim < 3 or b.ndim < 3:
        return a @ b
    if a.shape != b.shape or a.size // 4 <= _MATMUL_BLOCK:
        return _matmul2(a, b)
    fa, fb = a.reshape(-1, 2, 2), b.reshape(-1, 2, 2)
    out = np.empty(fa.shape, dtype=np.result_type(a, b))
    for s in range(0, len(fa), _MATMUL_BLOCK):
        out[s : s + _MATMUL_BLOCK] = _matmul2(fa[s : s + _MATMUL_BLOCK], fb[s : s + _MATMUL_BLOCK])
    return out.reshape(a.shape)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return ``ab - ba``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _check_same_dim(a, b)
    return a @ b - b @ a


def conjugate(s: np.ndarray, g: np.ndarray, cond_bound: float = CONDITION_BOUND) -> np.ndarray:
    """Return ``s g s^{-1}``; refuses ill-conditioned ``s``."""
    s = as_operator(s)
    g = as_operator(g)
    _check_same_dim(s, g)
    cond = np.linalg.cond(s)
    if not np.all(cond < cond_bound):
        raise ConditioningError(f"condition number {np.max(cond):.3e} exceeds bound {cond_bound:.1e}")
    # s g s^{-1} = (s^{-T} (s g)^T)^T
    sg = s @ g
    return np.swapaxes(np.linalg.solve(np.swapaxes(s, -1, -2), np.swapaxes(sg, -1, -2)), -1, -2)


def _checked(result: np.ndarray, m: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(result)):
        raise RangeError(f"matrix exponential overflowed (|m|_F = {np.max(frobenius(m)):.3e})")
    return result


def matrix_exp(m: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring (accepts stacks)."""
    m = as_operator(m)
    with np.errstate(over="ignore", invalid="ignore"):
        return _checked(scipy.linalg.expm(m), m)


def exp_frechet(m: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(exp(m), L(m, e))`` with ``L`` the directional derivative of exp at ``m``.

    Uses exp([[m, e], [0, m]]) = [[exp(m), L], [0, exp(m)]].
    """
    m = as_operator(m)
    e = as_operator(e)
    _check_same_dim(m, e)
    n = m.shape[-1]
    shape = np.broadcast_shapes(m.shape, e.shape)
    block = np.zeros(shape[:-2] + (2 * n, 2 * n), dtype=complex)
    block[..., :n, :n] = m
    block[..., n:, n:] = m
    block[..., :n, n:] = e
    big = matrix_exp(block)
    return big[..., :n, :n], big[..., :n, n:]


def random_hermitian(seed: int, dim: int, scale: float = 1.0) -> np.ndarray:
    """Deterministic random Hermitian matrix with entries of order ``scale``."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not scale > 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (g + g.conj().T) / 2


def random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Normalized random complex vector."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)
