"""Exact rational arithmetic: quasi-polynomials, their fitting, and weight sequences.

Rationals are :class:`fractions.Fraction` throughout.  A quasi-polynomial is stored
as a polynomial part plus one correction polynomial per residue class; the
polynomial part is the average of the per-class interpolants, so every slot of
the correction table sums to zero over a period.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, Sequence

Rational = Fraction


def as_rational(value) -> Fraction:
    """Parse ints, Fractions and "num/den" strings into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floats are not accepted as exact rationals")
    return Fraction(value)


def rational_str(value: Fraction) -> str:
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


# ---------------------------------------------------------------- polynomials
# Univariate polynomials are coefficient lists, lowest degree first.

def poly_eval(coeffs: Sequence[Fraction], x) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def poly_trim(coeffs: Sequence[Fraction]) -> list[Fraction]:
    out = list(coeffs)
    while out and out[-1] == 0:
        out.pop()
    return out


def poly_add(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def poly_scale(a: Sequence[Fraction], s) -> list[Fraction]:
    return [c * s for c in a]


def poly_mul(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def poly_deriv(a: Sequence[Fraction]) -> list[Fraction]:
    return [i * a[i] for i in range(1, len(a))]


def poly_integral(a: Sequence[Fraction], lo, hi) -> Fraction:
    """Exact definite integral of a polynomial over [lo, hi]."""
    lo, hi = Fraction(lo), Fraction(hi)
    return sum((c * (hi ** (i + 1) - lo ** (i + 1)) / (i + 1) for i, c in enumerate(a)), Fraction(0))


def poly_shift(a: Sequence[Fraction], s) -> list[Fraction]:
    """Coefficients of x -> a(x + s)."""
    out = [Fraction(0)] * len(a)
    for n, c in enumerate(a):
        for j in range(n + 1):
            out[j] += c * comb(n, j) * Fraction(s) ** (n - j)
    return out


def solve_exact(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Gauss-Jordan elimination over Q for a square nonsingular system."""
    n = len(matrix)
    aug = [list(map(Fraction, row)) + [Fraction(r)] for row, r in zip(matrix, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise ValueError("singular interpolation system")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [v - f * w for v, w in zip(aug[r], aug[col])]
    return [aug[r][n] for r in range(n)]


def interpolate(points: Sequence[tuple[int, Fraction]], degree: int) -> list[Fraction]:
    """Polynomial of the given degree through degree+1 points (Vandermonde solve)."""
    if len(points) != degree + 1:
        raise ValueError("need exactly degree+1 points")
    matrix = [[Fraction(k) ** e for e in range(degree + 1)] for k, _ in points]
    return solve_exact(matrix, [v for _, v in points])


# ------------------------------------------------------------ quasi-polynomials

@dataclass(frozen=True)
class QuasiPolynomial:
    """k -> poly(k) + periodic[k mod period](k).

    ``poly`` has ``degree + 1`` coefficients; each row of ``periodic`` has
    ``degree`` coefficients, so corrections have degree at most ``degree - 1``.
    ``periodic_known`` is False when only the polynomial part is available.
    """

    degree: int
    period: int
    poly: tuple[Fraction, ...]
    periodic: tuple[tuple[Fraction, ...], ...]
    periodic_known: bool = True

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("period must be positive")
        if len(self.poly) != self.degree + 1:
            raise ValueError("poly must have degree+1 coefficients")
        if len(self.periodic) != self.period or any(len(r) != self.degree for r in self.periodic):
            raise ValueError("periodic table has the wrong shape")

    @classmethod
    def from_poly(cls, coeffs: Sequence, period: int = 1) -> "QuasiPolynomial":
        coeffs = tuple(Fraction(c) for c in coeffs) or (Fraction(0),)
        d = len(coeffs) - 1
        zero = tuple(tuple(Fraction(0) for _ in range(d)) for _ in range(period))
        return cls(d, period, coeffs, zero)

    def __call__(self, k: int) -> Fraction:
        return self.eval(k)

    def eval(self, k: int) -> Fraction:
        return poly_eval(self.poly, k) + poly_eval(self.periodic[k % self.period], k)

    def poly_eval(self, k) -> Fraction:
        return poly_eval(self.poly, k)

    def coefficient(self, power: int) -> Fraction:
        return self.poly[power] if 0 <= power <= self.degree else Fraction(0)

    def leading(self, shift: int = 0) -> Fraction:
        """Coefficient of k^(degree - shift) in the polynomial part."""
        return self.coefficient(self.degree - shift)

    def periodic_average(self) -> list[Fraction]:
        """Average of the periodic table in each coefficient slot (zero by construction)."""
        return [sum((row[s] for row in self.periodic), Fraction(0)) / self.period for s in range(self.degree)]

    def is_polynomial(self) -> bool:
        return all(c == 0 for row in self.periodic for c in row)

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "period": self.period,
            "poly": [rational_str(c) for c in self.poly],
            "periodic": [[rational_str(c) for c in row] for row in self.periodic],
        }

    @classmethod
    def from_json(cls, data: dict) -> "QuasiPolynomial":
        return cls(
            int(data["degree"]),
            int(data["period"]),
            tuple(Fraction(c) for c in data["poly"]),
            tuple(tuple(Fraction(c) for c in row) for row in data["periodic"]),
        )


def qp_fit(samples: Iterable[tuple[int, object]], degree: int, period: int) -> QuasiPolynomial:
    """Fit the unique quasi-polynomial of the given degree and period through exact samples.

    Each residue class needs at least degree+1 distinct sample points.  Extra
    samples are used as consistency checks.  Raises ValueError when a class has
    too few samples, when the samples disagree with any fit, or when the
    per-class leading coefficients differ (no correction of degree < degree).
    """
    if degree < 0 or period < 1:
        raise ValueError("degree must be >= 0 and period >= 1")
    by_class: dict[int, dict[int, Fraction]] = {r: {} for r in range(period)}
    for k, v in samples:
        v = as_rational(v)
        bucket = by_class[k % period]
        if k in bucket and bucket[k] != v:
            raise ValueError(f"conflicting samples at k={k}")
        bucket[k] = v

    interpolants = []
    for r in range(period):
        pts = sorted(by_class[r].items())
        if len(pts) < degree + 1:
            raise ValueError(
                f"residue class {r} mod {period} has {len(pts)} samples, needs {degree + 1}"
            )
        coeffs = interpolate(pts[: degree + 1], degree)
        for k, v in pts[degree + 1:]:
            if poly_eval(coeffs, k) != v:
                raise ValueError(f"samples inconsistent with degree {degree}, period {period} at k={k}")
        interpolants.append(coeffs)

    tops = {c[degree] for c in interpolants}
    if len(tops) > 1:
        raise ValueError("leading coefficient varies with the residue class")
    poly = [sum((c[s] for c in interpolants), Fraction(0)) / period for s in range(degree + 1)]
    periodic = tuple(tuple(c[s] - poly[s] for s in range(degree)) for c in interpolants)
    return QuasiPolynomial(degree, period, tuple(poly), periodic)


# --------------------------------------------------- bivariate quasi-polynomials

def _monomials(total_degree: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(total_degree + 1) for b in range(total_degree + 1 - a)]


def _bivariate_eval(coeffs: dict, k, j) -> Fraction:
    return sum((c * Fraction(k) ** a * Fraction(j) ** b for (a, b), c in coeffs.items()), Fraction(0))


@dataclass(frozen=True)
class QuasiPolynomial2:
    """(k, j) -> p(k, j) + periodic[(k mod m, j mod m)](k, j).

    Coefficient maps are keyed by exponent pairs (a, b) for k^a j^b.
    Corrections have total degree at most ``total_degree - 1``.
    """

    total_degree: int
    period: int
    poly: dict
    periodic: dict = field(repr=False)

    def __call__(self, k: int, j: int) -> Fraction:
        return self.eval(k, j)

    def eval(self, k: int, j: int) -> Fraction:
        corr = self.periodic[(k % self.period, j % self.period)]
        return _bivariate_eval(self.poly, k, j) + _bivariate_eval(corr, k, j)

    def poly_eval(self, k, j) -> Fraction:
        return _bivariate_eval(self.poly, k, j)

    def periodic_average(self) -> dict:
        n = self.period ** 2
        keys = _monomials(self.total_degree - 1) if self.total_degree > 0 else []
        return {key: sum((row.get(key, Fraction(0)) for row in self.periodic.values()), Fraction(0)) / n for key in keys}

    def diagonal_coefficients(self, x) -> list[Fraction]:
        """Coefficients of k^d in p(k, x k), lowest degree first."""
        out = [Fraction(0)] * (self.total_degree + 1)
        for (a, b), c in self.poly.items():
            out[a + b] += c * Fraction(x) ** b
        return out


def qp2_fit(samples: Iterable[tuple[tuple[int, int], object]], total_degree: int, period: int) -> QuasiPolynomial2:
    """Bivariate analogue of :func:`qp_fit` on residue pairs mod ``period``."""
    mons = _monomials(total_degree)
    by_class: dict[tuple[int, int], dict] = {
        (r, s): {} for r in range(period) for s in range(period)
    }
    for (k, j), v in samples:
        by_class[(k % period, j % period)][(k, j)] = as_rational(v)

    fits = {}
    for key, pts in by_class.items():
        items = sorted(pts.items())
        chosen, rows = [], []
        # greedily pick a unisolvent subset, then check the remainder
        for (k, j), v in items:
            row = [Fraction(k) ** a * Fraction(j) ** b for a, b in mons]
            trial = rows + [row]
            if _rank(trial) == len(trial):
                rows.append(row)
                chosen.append(((k, j), v))
            if len(rows) == len(mons):
                break
        if len(rows) < len(mons):
            raise ValueError(f"residue pair {key} lacks a unisolvent sample set")
        sol = solve_exact(rows, [v for _, v in chosen])
        coeffs = dict(zip(mons, sol))
        for (k, j), v in items:
            if _bivariate_eval(coeffs, k, j) != v:
                raise ValueError(f"samples inconsistent with total degree {total_degree} at {(k, j)}")
        fits[key] = coeffs

    top = [m for m in mons if sum(m) == total_degree]
    for m in top:
        if len({f[m] for f in fits.values()}) > 1:
            raise ValueError("top-degree coefficients vary with the residue pair")
    n = len(fits)
    poly = {m: sum((f[m] for f in fits.values()), Fraction(0)) / n for m in mons}
    periodic = {
        key: {m: f[m] - poly[m] for m in mons if sum(m) < total_degree} for key, f in fits.items()
    }
    return QuasiPolynomial2(total_degree, period, poly, periodic)


def _rank(rows: list[list[Fraction]]) -> int:
    mat = [list(r) for r in rows]
    rank, ncols = 0, len(mat[0]) if mat else 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(mat)) if mat[r][col] != 0), None)
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        for r in range(rank + 1, len(mat)):
            if mat[r][col] != 0:
                f = mat[r][col] / mat[rank][col]
                mat[r] = [a - f * b for a, b in zip(mat[r], mat[rank])]
        rank += 1
    return rank


# ------------------------------------------------------------- weight sequence

@dataclass(frozen=True)
class WeightSequence:
    """Coefficients c_0..c_M of (t^(ord-1) + ... + 1)^(p+1), M = (ord-1)(p+1)."""

    ord: int
    p: int
    c: tuple[Fraction, ...]

    @property
    def M(self) -> int:
        return len(self.c) - 1

    def __iter__(self):
        return iter(self.c)

    def __len__(self):
        return len(self.c)

    def __getitem__(self, i):
        return self.c[i]


def ci_weights(ord: int, p: int = 5) -> WeightSequence:
    if ord < 1 or p < 1:
        raise ValueError("ord and p must be positive")
    coeffs = [1]
    base = [1] * ord
    for _ in range(p + 1):
        out = [0] * (len(coeffs) + ord - 1)
        for i, a in enumerate(coeffs):
            for j, b in enumerate(base):
                out[i + j] += a * b
        coeffs = out
    return WeightSequence(ord, p, tuple(Fraction(c) for c in coeffs))


def residue_moment(w: WeightSequence, power: int, residue: int) -> Fraction:
    """Sum of c_i * i^power over indices i congruent to ``residue`` mod ord."""
    if power < 0 or not 0 <= residue < w.ord:
        raise ValueError("need power >= 0 and 0 <= residue < ord")
    return sum((c * Fraction(i) ** power for i, c in enumerate(w.c) if i % w.ord == residue), Fraction(0))


def weighted_shift_sum(H: QuasiPolynomial, w: WeightSequence, extra_factor: bool = False) -> QuasiPolynomial:
    """Exact quasi-polynomial k -> sum_i c_i H(k+i), optionally weighted by (k+i).

    The result has period ord; it is recovered by exact sampling and fitting.
    """
    if w.ord % H.period != 0:
        raise ValueError(f"period {H.period} does not divide ord {w.ord}")
    degree = H.degree + (1 if extra_factor else 0)
    period = w.ord

    def value(k):
        total = Fraction(0)
        for i, c in enumerate(w.c):
            term = c * H.eval(k + i)
            total += term * (k + i) if extra_factor else term
        return total

    ks = range(0, period * (degree + 2))
    return qp_fit([(k, value(k)) for k in ks], degree, period)


__all__ = [
    "Rational", "as_rational", "rational_str", "poly_eval", "poly_add", "poly_mul", "poly_scale",
    "poly_deriv", "poly_integral", "poly_shift", "poly_trim", "solve_exact", "interpolate",
    "QuasiPolynomial", "QuasiPolynomial2", "qp_fit", "qp2_fit",
    "WeightSequence", "ci_weights", "residue_moment", "weighted_shift_sum",
]
