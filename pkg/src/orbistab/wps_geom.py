"""Weighted projective spaces as graded vector spaces with hermitian metrics.

The Fubini-Study fibre norm is implicit: a point v has norm 1/lambda(v) where
lambda is the positive root of sum_i (k+i) lambda^(2(k+i)) |v_{k+i}|^2 = c.
All routines here work with that root.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core_arith import WeightSequence


@dataclass(frozen=True)
class GradedVectorSpace:
    k: int
    dims: tuple[int, ...]

    def __post_init__(self):
        if any(d < 0 for d in self.dims) or not any(self.dims):
            raise ValueError("dims must be non-negative with at least one positive")

    @property
    def degrees(self) -> np.ndarray:
        return self.k + np.arange(len(self.dims))

    @property
    def total_dim(self) -> int:
        return sum(self.dims)


class GradedMetric:
    """Positive-definite hermitian block per degree k+i."""

    def __init__(self, blocks: Sequence[np.ndarray], check: bool = True):
        self.blocks = [np.atleast_2d(np.asarray(b, dtype=complex)) for b in blocks]
        self._chol = None
        if check:
            self.cholesky()

    @classmethod
    def identity(cls, dims: Sequence[int]) -> "GradedMetric":
        return cls([np.eye(d) for d in dims])

    @classmethod
    def diagonal(cls, diags: Sequence[np.ndarray]) -> "GradedMetric":
        return cls([np.diag(np.asarray(d, dtype=float)) for d in diags])

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(b.shape[0] for b in self.blocks)

    def cholesky(self) -> list[np.ndarray]:
        if self._chol is None:
            out = []
            for i, b in enumerate(self.blocks):
                if b.shape[0] != b.shape[1]:
                    raise ValueError(f"block {i} is not square")
                if not np.allclose(b, b.conj().T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(b).max())):
                    raise ValueError(f"block {i} is not hermitian")
                try:
                    out.append(np.linalg.cholesky(b) if b.size else b)
                except np.linalg.LinAlgError as exc:
                    raise ValueError(f"block {i} is not positive definite") from exc
            self._chol = out
        return self._chol

    def is_diagonal(self) -> bool:
        return all(np.count_nonzero(b - np.diag(np.diag(b))) == 0 for b in self.blocks)

    def norms_sq(self, v: "GradedPoint") -> np.ndarray:
        return np.array([np.real(np.vdot(x, b @ x)) for x, b in zip(v.components, self.blocks)])

    def orthonormal_coords(self, v: "GradedPoint") -> list[np.ndarray]:
        """Coordinates of v in a G-orthonormal basis: y = L^H v with G = L L^H."""
        return [ch.conj().T @ x for ch, x in zip(self.cholesky(), v.components)]

    def to_list(self) -> list:
        return [b.tolist() for b in self.blocks]


@dataclass
class GradedPoint:
    components: list

    def __post_init__(self):
        self.components = [np.atleast_1d(np.asarray(x, dtype=complex)) for x in self.components]
        if all(not np.any(x) for x in self.components):
            raise ValueError("the zero vector has no Fubini-Study norm")

    def scaled(self, t: float, k: int) -> "GradedPoint":
        """Graded action: the degree k+i component is multiplied by t^(k+i)."""
        return GradedPoint([t ** (k + i) * x for i, x in enumerate(self.components)])


@dataclass
class HamiltonianMatrix:
    blocks: list

    def __post_init__(self):
        self.blocks = [np.atleast_2d(np.asarray(b, dtype=complex)) for b in self.blocks]
        for i, b in enumerate(self.blocks):
            if not np.allclose(b, b.conj().T):
                raise ValueError(f"block {i} is not hermitian")


def c_constant(w: WeightSequence, k: int, dims: Sequence[int]) -> Fraction:
    """c = sum_i (k+i) c_i dim V^(k+i)."""
    return sum((Fraction(k + i) * ci * d for i, (ci, d) in enumerate(zip(w.c, dims))), Fraction(0))


def solve_lambda_sq(norms_sq: np.ndarray, degrees: np.ndarray, c: float,
                    rtol: float = 1e-15, max_iter: int = 200) -> np.ndarray:
    """Vectorised root Lambda = lambda^2 of sum_d d Lambda^d n_d = c, one per row of norms_sq."""
    n = np.atleast_2d(np.asarray(norms_sq, dtype=float))
    if np.any(n < 0):
        raise ValueError("negative squared norms")
    with np.errstate(divide="ignore"):
        logn = np.log(n)
    return np.exp(2 * solve_log_lambda(logn, degrees, c, rtol, max_iter))


def solve_log_lambda(log_norms_sq: np.ndarray, degrees: np.ndarray, c: float,
                     rtol: float = 1e-15, max_iter: int = 200) -> np.ndarray:
    """u = log lambda solving sum_d d exp(2 d u + log n_d) = c, one per row.

    Degrees may be any positive reals.  Newton starts from the smallest
    single-degree closed form, which lies to the right of the root; the
    function is convex and increasing in u so the iterates decrease
    monotonically.  Rows where Newton stalls are finished by bisection on the
    bracket [lower, start].
    """
    logn = np.atleast_2d(np.asarray(log_norms_sq, dtype=float))
    d = np.asarray(degrees, dtype=float)
    if np.any(~np.any(np.isfinite(logn), axis=1)):
        raise ValueError("a zero vector has no Fubini-Study norm")
    logw = np.log(d)[None, :] + logn  # -inf where a degree is absent
    with np.errstate(invalid="ignore"):
        single = (np.log(c) - logw) / (2 * d[None, :])
    upper = np.min(single, axis=1)
    active = np.sum(np.isfinite(logw), axis=1)
    lower = np.min(single - np.log(active)[:, None] / (2 * d[None, :]), axis=1)

    def residual(u):
        return np.exp(logw + 2 * d[None, :] * u[:, None]).sum(axis=1) / c - 1.0

    u = upper.copy()
    for _ in range(max_iter):
        terms = np.exp(logw + 2 * d[None, :] * u[:, None])
        f = terms.sum(axis=1) / c - 1.0
        fp = (2 * d[None, :] * terms).sum(axis=1) / c
        step = f / fp
        u_new = u - step
        bad = ~np.isfinite(u_new)
        u_new[bad] = u[bad]
        done = np.abs(step) <= rtol * np.maximum(1.0, np.abs(u))
        u = u_new
        if np.all(done | bad):
            break
    res = residual(u)
    bad = ~np.isfinite(res) | (np.abs(res) > 1e-13)
    if np.any(bad):
        lo, hi = lower[bad], upper[bad]
        sub_logw = logw[bad]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            val = np.exp(sub_logw + 2 * d[None, :] * mid[:, None]).sum(axis=1) / c - 1.0
            hi = np.where(val > 0, mid, hi)
            lo = np.where(val > 0, lo, mid)
        u[bad] = 0.5 * (lo + hi)
    return u


def lambda_residual(lam: float, norms_sq: np.ndarray, degrees: np.ndarray, c: float) -> float:
    """|sum_d d lambda^(2d) n_d - c|."""
    d = np.asarray(degrees, dtype=float)
    return float(abs(np.sum(d * lam ** (2 * d) * np.asarray(norms_sq)) - c))


def lambda_solve(v: GradedPoint, G: GradedMetric, w: WeightSequence, k: int) -> float:
    dims = [len(x) for x in v.components]
    c = float(c_constant(w, k, dims))
    norms = G.norms_sq(v)
    degrees = k + np.arange(len(dims))
    return float(np.sqrt(solve_lambda_sq(norms[None, :], degrees, c)[0]))


def hfs_norms(v: GradedPoint, G: GradedMetric, w: WeightSequence, k: int):
    """(|v|_{h_FS}, per-degree arrays of |t_alpha|^2_{h_FS} for a G-orthonormal dual basis)."""
    lam = lambda_solve(v, G, w, k)
    coords = G.orthonormal_coords(v)
    sections = [lam ** (2 * (k + i)) * np.abs(y) ** 2 for i, y in enumerate(coords)]
    return 1.0 / lam, sections


def moment_map(v: GradedPoint, G: GradedMetric, w: WeightSequence, k: int) -> list[np.ndarray]:
    """Blocks (1/2)(lambda^(2(k+i)) y y^* - c_i Id) in G-orthonormal coordinates."""
    lam = lambda_solve(v, G, w, k)
    out = []
    for i, y in enumerate(G.orthonormal_coords(v)):
        ci = float(w.c[i])
        out.append(0.5 * (lam ** (2 * (k + i)) * np.outer(y, y.conj()) - ci * np.eye(len(y))))
    return out


def hamiltonian(v: GradedPoint, A: HamiltonianMatrix, G: GradedMetric, w: WeightSequence, k: int) -> float:
    """(1/c) sum_i lambda^(2(k+i)) <A^(k+i) y, y> with A in G-orthonormal coordinates."""
    dims = [len(x) for x in v.components]
    c = float(c_constant(w, k, dims))
    lam = lambda_solve(v, G, w, k)
    total = 0.0
    for i, (y, a) in enumerate(zip(G.orthonormal_coords(v), A.blocks)):
        total += lam ** (2 * (k + i)) * np.real(np.vdot(y, a @ y))
    return total / c


def equivariant_weight(A, dims: Sequence[int] | None = None) -> tuple[int, int]:
    """Exact (trace, trace of square) of a graded action with integer weights.

    ``A`` is a list of blocks, each a square integer matrix or a list of
    eigenvalues; ``dims`` is only used to check block sizes.
    """
    total = square = 0
    for i, block in enumerate(A):
        arr = np.asarray(block)
        if arr.ndim == 1:
            eig = [int(x) for x in arr]
            t, s = sum(eig), sum(x * x for x in eig)
            size = len(eig)
        else:
            ints = [[int(x) for x in row] for row in arr.tolist()]
            size = len(ints)
            t = sum(ints[j][j] for j in range(size))
            s = sum(ints[a][b] * ints[b][a] for a in range(size) for b in range(size))
        if dims is not None and size != dims[i]:
            raise ValueError(f"block {i} has size {size}, expected {dims[i]}")
        total += t
        square += s
    return total, square
