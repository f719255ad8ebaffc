"""Orbifold Riemann surfaces, Q-divisors and exact section counts.

Exact section spaces are genus 0 only: points are affine coordinates on the
projective line with ``INFINITY`` allowed.  For higher genus the curve carries
only its genus and marking orders, which is all the degree formulas need.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .core_arith import QuasiPolynomial, as_rational, qp_fit

INFINITY = "infinity"
BASE_POINT = "o"  # unmarked point used for integral parts on higher genus curves


def _parse_point(value):
    if value is None or (isinstance(value, str) and value.lower() in ("inf", "infinity", "∞")):
        return INFINITY
    return as_rational(value)


def _point_sort_key(point):
    if point == INFINITY:
        return (1, 0, "")
    if isinstance(point, str):
        return (2, 0, point)
    return (0, point, "")


@dataclass(frozen=True)
class Marking:
    label: str
    coord: object  # Fraction, INFINITY, or None when genus > 0
    m: int


@dataclass(frozen=True)
class OrbiCurve:
    genus: int
    markings: tuple[Marking, ...] = ()

    def __post_init__(self):
        if self.genus < 0:
            raise ValueError("genus must be non-negative")
        labels = [mk.label for mk in self.markings]
        if len(set(labels)) != len(labels):
            raise ValueError("marking labels must be distinct")
        for mk in self.markings:
            if mk.m < 2:
                raise ValueError(f"marking {mk.label} has order {mk.m} < 2")
        if self.genus == 0:
            coords = [mk.coord for mk in self.markings]
            if any(c is None for c in coords):
                raise ValueError("genus 0 markings need coordinates")
            if len(set(coords)) != len(coords):
                raise ValueError("marked coordinates must be distinct")

    @classmethod
    def build(cls, genus: int = 0, markings: Iterable = ()) -> "OrbiCurve":
        """Markings as (coord, m) or (label, coord, m) tuples."""
        out = []
        for idx, item in enumerate(markings, start=1):
            if len(item) == 2:
                coord, m = item
                label = f"p{idx}"
            else:
                label, coord, m = item
            out.append(Marking(label, _parse_point(coord) if genus == 0 else None, int(m)))
        return cls(genus, tuple(out))

    @property
    def orders(self) -> list[int]:
        return [mk.m for mk in self.markings]

    @property
    def ord(self) -> int:
        return math.lcm(*self.orders) if self.markings else 1

    def resolve(self, point):
        """Canonical key for a point given by label, coordinate or 'infinity'."""
        for mk in self.markings:
            if point == mk.label:
                return mk.coord if self.genus == 0 else mk.label
        if self.genus > 0:
            if not isinstance(point, str):
                raise ValueError("points on higher genus curves are referenced by label")
            return point
        return _parse_point(point)

    def marking_at(self, point) -> Marking | None:
        key = self.resolve(point)
        for mk in self.markings:
            if (mk.coord if self.genus == 0 else mk.label) == key:
                return mk
        return None

    def order_at(self, point) -> int:
        mk = self.marking_at(point)
        return mk.m if mk else 1

    def free_point(self):
        """An unmarked point, used to carry integral divisor parts."""
        if self.genus > 0:
            return BASE_POINT
        taken = {mk.coord for mk in self.markings}
        if INFINITY not in taken:
            return INFINITY
        n = 0
        while Fraction(n) in taken:
            n += 1
        return Fraction(n)

    def to_json(self) -> dict:
        return {
            "genus": self.genus,
            "markings": [
                {"label": mk.label, "coord": _point_json(mk.coord), "m": mk.m} for mk in self.markings
            ],
        }


def _point_json(point):
    if point is None or point == INFINITY or isinstance(point, str):
        return point
    return f"{point.numerator}/{point.denominator}" if point.denominator != 1 else point.numerator


@dataclass(frozen=True)
class QDivisor:
    """Finite formal sum of points with rational coefficients (zero terms dropped)."""

    terms: tuple[tuple[object, Fraction], ...] = ()

    @classmethod
    def of(cls, mapping) -> "QDivisor":
        items = mapping.items() if hasattr(mapping, "items") else mapping
        acc: dict = {}
        for point, coeff in items:
            acc[point] = acc.get(point, Fraction(0)) + as_rational(coeff)
        clean = tuple(sorted(((p, c) for p, c in acc.items() if c != 0), key=lambda t: _point_sort_key(t[0])))
        return cls(clean)

    def as_dict(self) -> dict:
        return dict(self.terms)

    def coefficient(self, point) -> Fraction:
        return self.as_dict().get(point, Fraction(0))

    @property
    def support(self) -> list:
        return [p for p, _ in self.terms]

    def __add__(self, other: "QDivisor") -> "QDivisor":
        return QDivisor.of(list(self.terms) + list(other.terms))

    def __neg__(self) -> "QDivisor":
        return QDivisor.of([(p, -c) for p, c in self.terms])

    def __sub__(self, other: "QDivisor") -> "QDivisor":
        return self + (-other)

    def __mul__(self, scalar) -> "QDivisor":
        s = as_rational(scalar)
        return QDivisor.of([(p, c * s) for p, c in self.terms])

    __rmul__ = __mul__

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for _, c in self.terms)

    def to_json(self) -> list:
        return [{"coord": _point_json(p), "coeff": f"{c.numerator}/{c.denominator}"} for p, c in self.terms]


def make_divisor(X: OrbiCurve, mapping) -> QDivisor:
    """Build a divisor on X, resolving labels, and validate denominators."""
    items = mapping.items() if hasattr(mapping, "items") else mapping
    D = QDivisor.of([(X.resolve(p), c) for p, c in items])
    check_divisor(X, D)
    return D


def check_divisor(X: OrbiCurve, D: QDivisor) -> None:
    for point, coeff in D.terms:
        m = X.order_at(point)
        if m % coeff.denominator != 0:
            raise ValueError(
                f"coefficient {coeff} at {point} has denominator not dividing the local order {m}"
            )


def deg_orb(D: QDivisor) -> Fraction:
    return sum((c for _, c in D.terms), Fraction(0))


def canonical_orb(X: OrbiCurve) -> QDivisor:
    """K_X + sum (1 - 1/m_i) p_i, with K_X placed on an unmarked point."""
    terms = [(X.free_point(), Fraction(2 * X.genus - 2))]
    for mk in X.markings:
        key = mk.coord if X.genus == 0 else mk.label
        terms.append((key, 1 - Fraction(1, mk.m)))
    return QDivisor.of(terms)


def deg_canonical(X: OrbiCurve) -> Fraction:
    return 2 * X.genus - 2 + sum((1 - Fraction(1, m) for m in X.orders), Fraction(0))


def round_down(D: QDivisor) -> QDivisor:
    return QDivisor.of([(p, math.floor(c)) for p, c in D.terms])


def _require_genus0(X: OrbiCurve):
    if X.genus != 0:
        raise ValueError("exact section spaces are implemented for genus 0 only")


def h0_exact(X: OrbiCurve, D: QDivisor) -> int:
    _require_genus0(X)
    d = int(deg_orb(round_down(D)))
    return d + 1 if d >= 0 else 0


@dataclass(frozen=True)
class SectionBasis:
    """Rational functions (x - a)^e / prod (x - p_j)^(d_j), e = 0..N, spanning H^0.

    ``center`` is the expansion point a (0 by default, INFINITY means plain
    monomials x^e).  Elements have pairwise distinct vanishing orders at the
    center, which makes vanishing-order counts dimension counts.
    """

    divisor: QDivisor  # the rounded-down integral divisor
    source: QDivisor
    poles: tuple[tuple[Fraction, int], ...]
    size: int
    center: object = Fraction(0)

    @property
    def N(self) -> int:
        return self.size - 1

    def __len__(self):
        return self.size

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Values of every basis function at complex points x, shape (size, len(x))."""
        x = np.asarray(x, dtype=complex)
        denom = np.ones_like(x)
        for p, d in self.poles:
            denom = denom * (x - float(p)) ** d
        base = x if self.center == INFINITY else x - float(self.center)
        return np.array([base ** e / denom for e in range(self.size)])

    def order_at(self, e: int, point) -> int:
        """Vanishing order at ``point`` of the e-th element as a section of the rounded divisor."""
        if point == INFINITY:
            return self.N - e
        return e if point == self.center else 0

    def orbifold_order_at(self, e: int, point) -> Fraction:
        """Vanishing order as a section of the Q-divisor: adds the fractional part there."""
        c = self.source.coefficient(point)
        return self.order_at(e, point) + (c - math.floor(c))

    def laurent_exponents(self) -> list[int]:
        """Exponents j of x^j when the support lies in {0, infinity}."""
        if any(p != 0 for p, _ in self.poles):
            raise ValueError("laurent form needs the divisor supported on 0 and infinity")
        d0 = dict(self.poles).get(Fraction(0), 0)
        return [e - d0 for e in range(self.size)]


def section_basis(X: OrbiCurve, D: QDivisor, center=Fraction(0)) -> SectionBasis:
    _require_genus0(X)
    check_divisor(X, D)
    rd = round_down(D)
    n = h0_exact(X, D)
    poles = tuple((p, int(c)) for p, c in rd.terms if p != INFINITY)
    return SectionBasis(rd, D, poles, n, center)


def is_orbi_ample(X: OrbiCurve, L: QDivisor) -> tuple[bool, str]:
    try:
        check_divisor(X, L)
    except ValueError as exc:
        return False, str(exc)
    for mk in X.markings:
        key = mk.coord if X.genus == 0 else mk.label
        coeff = L.coefficient(key)
        if coeff.denominator != mk.m:
            return False, (
                f"not locally ample at {mk.label}: coefficient {coeff} has denominator "
                f"{coeff.denominator}, stabiliser order {mk.m}"
            )
    deg = deg_orb(L)
    if deg <= 0:
        return False, f"degree {deg} is not positive"
    return True, "locally ample at every marked point and of positive degree"


def power_is_ample(X: OrbiCurve, L: QDivisor, k: int) -> bool:
    return is_orbi_ample(X, L * k)[0]


def h0_quasi(X: OrbiCurve, L: QDivisor) -> QuasiPolynomial:
    """Quasi-polynomial k -> h^0(L^k) of degree 1 and period ord(X).

    Genus 0: fitted from exact counts and checked against k deg L - deg K_orb / 2.
    Higher genus: the polynomial part only, with ``periodic_known`` False.
    """
    ok, reason = is_orbi_ample(X, L)
    if not ok:
        raise ValueError(reason)
    deg = deg_orb(L)
    const = -deg_canonical(X) / 2
    period = X.ord
    if X.genus > 0:
        zero = tuple((Fraction(0),) for _ in range(period))
        return QuasiPolynomial(1, period, (const, deg), zero, periodic_known=False)
    # below this k the round-down can have degree < -1 and the count is clipped at 0
    k0 = math.ceil(Fraction(len(L.terms) + 1) / deg)
    samples = [(k, h0_exact(X, L * k)) for k in range(k0, k0 + 2 * period + 1)]
    qp = qp_fit(samples, 1, period)
    if qp.poly != (const, deg):
        raise ArithmeticError(f"fitted polynomial part {qp.poly} disagrees with Riemann-Roch")
    return qp


# ------------------------------------------------------------------ examples

def weighted_line(m: int) -> tuple[OrbiCurve, QDivisor]:
    """P(1, m): one point of order m at 0, L = O(1) = (1/m)(0)."""
    X = OrbiCurve.build(0, [("p1", 0, m)])
    return X, make_divisor(X, {Fraction(0): Fraction(1, m)})


def football(m1: int, m2: int | None = None) -> tuple[OrbiCurve, QDivisor]:
    """Orders m1 at 0 and m2 at infinity, L = (1/m1)(0) + (1/m2)(infinity)."""
    m2 = m1 if m2 is None else m2
    X = OrbiCurve.build(0, [("p1", 0, m1), ("p2", INFINITY, m2)])
    return X, make_divisor(X, {Fraction(0): Fraction(1, m1), INFINITY: Fraction(1, m2)})


def projective_line() -> tuple[OrbiCurve, QDivisor]:
    X = OrbiCurve(0, ())
    return X, make_divisor(X, {INFINITY: 1})


def weighted_projective_line(a: int, b: int) -> tuple[OrbiCurve, QDivisor]:
    """P(a, b) with coprime weights: order b at 0, order a at infinity, L = O(1).

    O(1) = (p/b)(0) + (q/a)(infinity) with p a + q b = 1, of degree 1/(ab).
    """
    if math.gcd(a, b) != 1:
        raise ValueError("weights must be coprime")
    g, p, q = _ext_gcd(a, b)
    marks = []
    if b > 1:
        marks.append(("p1", 0, b))
    if a > 1:
        marks.append(("p2", INFINITY, a))
    X = OrbiCurve.build(0, marks)
    return X, make_divisor(X, {Fraction(0): Fraction(p, b), INFINITY: Fraction(q, a)})


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    if b == 0:
        return a, 1, 0
    g, x, y = _ext_gcd(b, a % b)
    return g, y, x - (a // b) * y


# ---------------------------------------------------------------------- JSON

def curve_from_json(data) -> OrbiCurve:
    if isinstance(data, str):
        data = json.loads(data)
    genus = int(data.get("genus", 0))
    marks = []
    for idx, item in enumerate(data.get("markings", []), start=1):
        label = item.get("label", f"p{idx}")
        marks.append((label, item.get("coord") if genus == 0 else None, int(item["m"])))
    return OrbiCurve.build(genus, marks)


def divisor_from_json(X: OrbiCurve, entries) -> QDivisor:
    if isinstance(entries, str):
        entries = json.loads(entries)
    if isinstance(entries, dict):
        entries = entries.get("divisor", [])
    pairs = []
    for item in entries:
        point = item["label"] if "label" in item else item.get("coord")
        pairs.append((point, item["coeff"]))
    return make_divisor(X, pairs)


def load_problem(data) -> tuple[OrbiCurve, QDivisor | None]:
    """Parse {genus, markings, divisor} into a curve and (optional) divisor."""
    if isinstance(data, str):
        data = json.loads(data)
    X = curve_from_json(data)
    D = divisor_from_json(X, data["divisor"]) if data.get("divisor") else None
    return X, D
