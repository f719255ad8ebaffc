"""Exact slope and K-stability calculators for polarised orbifolds.

Everything here is rational arithmetic.  Curve computations use the model
a0(x) = deg L - x q and a1(x) = -deg K_orb / 2 for a point divisor Z of degree q,
since blowing up a point on a curve changes nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core_arith import (
    QuasiPolynomial,
    as_rational,
    poly_add,
    poly_deriv,
    poly_eval,
    poly_integral,
    poly_scale,
    qp_fit,
    rational_str,
)
from .orbicurve import (
    INFINITY,
    OrbiCurve,
    QDivisor,
    deg_canonical,
    deg_orb,
    is_orbi_ample,
    section_basis,
    weighted_projective_line,
)

STABLE = "stable"
BOUNDARY = "semistable-boundary"
UNSTABLE = "unstable"


@dataclass(frozen=True)
class SlopeData:
    """Leading Hilbert coefficients of X and of its blow-up along Z as polynomials in x."""

    n: int
    a0: Fraction
    a1: Fraction
    a0_of_x: tuple[Fraction, ...]
    a1_of_x: tuple[Fraction, ...]

    def __post_init__(self):
        if self.a0 <= 0:
            raise ValueError("a0 must be positive")
        if poly_eval(self.a0_of_x, 0) != self.a0 or poly_eval(self.a1_of_x, 0) != self.a1:
            raise ValueError("a_i(0) must equal a_i")

    @property
    def mu(self) -> Fraction:
        return self.a1 / self.a0


def curve_slope_data(X: OrbiCurve, L: QDivisor, q) -> SlopeData:
    deg = deg_orb(L)
    a1 = -deg_canonical(X) / 2
    return SlopeData(1, deg, a1, (deg, -as_rational(q)), (a1,))


def point_slope_data(n: int, a0, a1, e) -> SlopeData:
    """Blow-up of a reduced orbifold point with exceptional volume e (e = 1/|G|)."""
    a0, a1, e = map(as_rational, (a0, a1, e))
    p0 = [Fraction(0)] * (n + 1)
    p0[0] = a0
    p0[n] -= e / math.factorial(n)
    p1 = [Fraction(0)] * max(n, 1)
    p1[0] = a1
    if n >= 2:
        p1[n - 1] -= (n - 1) * e / (2 * math.factorial(n - 1))
    return SlopeData(n, a0, a1, tuple(p0), tuple(p1))


def surface_divisor_slope_data(L2, LZ, KZ, Z2, KL=0) -> SlopeData:
    """Surface with a divisor Z, from intersection numbers L^2, L.Z, K_orb.Z, Z^2, K_orb.L."""
    L2, LZ, KZ, Z2, KL = map(as_rational, (L2, LZ, KZ, Z2, KL))
    a0 = L2 / 2
    a1 = -KL / 2
    return SlopeData(2, a0, a1, (a0, -LZ, Z2 / 2), (a1, KZ / 2))


def _ratio(num: Fraction, den: Fraction) -> Fraction:
    if den == 0:
        raise ZeroDivisionError("degenerate Z: zero denominator in slope")
    return num / den


def slope_ideal(sd: SlopeData, c) -> Fraction:
    c = as_rational(c)
    if c <= 0:
        raise ValueError("c must be positive")
    integrand = poly_add(sd.a1_of_x, poly_scale(poly_deriv(sd.a0_of_x), Fraction(1, 2)))
    return _ratio(poly_integral(integrand, 0, c), poly_integral(sd.a0_of_x, 0, c))


def slope_quotient(sd: SlopeData, c) -> Fraction:
    c = as_rational(c)
    if c <= 0:
        raise ValueError("c must be positive")
    t0 = poly_add([sd.a0], poly_scale(sd.a0_of_x, -1))
    t1 = poly_add([sd.a1], poly_scale(sd.a1_of_x, -1))
    integrand = poly_add(t1, poly_scale(poly_deriv(t0), Fraction(1, 2)))
    return _ratio(poly_integral(integrand, 0, c), poly_integral(t0, 0, c))


def slope_orb(X: OrbiCurve, L: QDivisor) -> Fraction:
    ok, reason = is_orbi_ample(X, L)
    if not ok:
        raise ValueError(reason)
    return -deg_canonical(X) / (2 * deg_orb(L))


def _point_of(Z: QDivisor):
    if len(Z.terms) != 1:
        raise ValueError("Z must be supported at a single point")
    return Z.terms[0]


def seshadri_point(X: OrbiCurve, L: QDivisor, Z: QDivisor) -> Fraction:
    ok, reason = is_orbi_ample(X, L)
    if not ok:
        raise ValueError(reason)
    q = deg_orb(Z)
    if q <= 0:
        raise ValueError("Z must have positive degree")
    return deg_orb(L) / q


# ----------------------------------------------------------- Futaki invariant

@dataclass(frozen=True)
class TestConfigData:
    """Total weight w (degree n+1) and Hilbert function h (degree n) of a test configuration."""

    w: QuasiPolynomial
    h: QuasiPolynomial

    def __post_init__(self):
        if self.w.degree != self.h.degree + 1:
            raise ValueError("weight must have degree one more than the Hilbert function")


def futaki_from_qp(tc: TestConfigData) -> Fraction:
    """(a0 b1 - a1 b0) / a0^2 from the polynomial parts only."""
    a0, a1 = tc.h.leading(0), tc.h.leading(1)
    b0, b1 = tc.w.leading(0), tc.w.leading(1)
    if a0 == 0:
        raise ZeroDivisionError("a0 = 0")
    return (a0 * b1 - a1 * b0) / a0 ** 2


def futaki_normal_cone(X: OrbiCurve, L: QDivisor, Z: QDivisor, c) -> Fraction:
    """F1 of the deformation to the normal cone of Z, for 0 < c <= Seshadri constant."""
    c = as_rational(c)
    eps = seshadri_point(X, L, Z)
    if not 0 < c <= eps:
        raise ValueError(f"c = {c} outside (0, {eps}]")
    sd = curve_slope_data(X, L, deg_orb(Z))
    return (sd.mu - slope_ideal(sd, c)) * poly_integral(sd.a0_of_x, 0, c) / sd.a0


def weights_brute_force(
    X: OrbiCurve, L: QDivisor, Z: QDivisor, c, k: int, t_weight: int = 1
) -> tuple[Fraction, int]:
    """Total weight of the central fibre of the deformation to the normal cone, by counting.

    Sections of L^k are expanded in a basis adapted to the point of Z; each basis
    element's vanishing order upstairs in the orbifold chart is read off, giving
    h(j) = dim of sections vanishing to order >= j along Z.  The weight is
    t_weight * sum_{j=1}^{ck} j (h(ck-j) - h(ck-j+1)), where t_weight is the
    weight carried by the deformation parameter.
    """
    c = as_rational(c)
    ck = c * k
    if ck.denominator != 1:
        raise ValueError("c k must be an integer")
    ck = int(ck)
    point, q = _point_of(Z)
    m = X.order_at(point)
    lift = q * m  # Z is cut out upstairs by z^lift
    if lift.denominator != 1 or lift <= 0:
        raise ValueError("Z must be a positive multiple of the reduced orbifold point")
    lift = int(lift)
    Lk = L * k
    basis = section_basis(X, Lk, center=point if point != INFINITY else INFINITY)
    orders = [int(m * basis.orbifold_order_at(e, point)) for e in range(len(basis))]

    def h(j):
        return sum(1 for o in orders if o >= j * lift)

    if ck == 0:
        return Fraction(0), len(basis)
    total = sum(j * (h(ck - j) - h(ck - j + 1)) for j in range(1, ck + 1))
    return Fraction(t_weight * total), len(basis)


def futaki_brute_force(X: OrbiCurve, L: QDivisor, Z: QDivisor, c, samples_per_class: int = 5) -> Fraction:
    """F1 from exact weight enumeration and quasi-polynomial fits.

    A rational c is made integral by passing to L^d, c d (d = denominator of c),
    which leaves F1 unchanged.
    """
    c = as_rational(c)
    d = c.denominator
    L, c = L * d, c * d
    period = X.ord
    k0 = 1
    ks = range(k0, k0 + samples_per_class * period)
    data = [(k, *weights_brute_force(X, L, Z, c, k)) for k in ks]
    w = qp_fit([(k, wk) for k, wk, _ in data], 2, period)
    h = qp_fit([(k, hk) for k, _, hk in data], 1, period)
    return futaki_from_qp(TestConfigData(w, h))


# -------------------------------------------------------------------- verdicts

@dataclass
class StabilityVerdict:
    status: str
    witness: dict | None = None
    slopes: dict = field(default_factory=dict)
    futaki: Fraction | None = None
    formula: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in (STABLE, BOUNDARY, UNSTABLE):
            raise ValueError(f"unknown status {self.status}")
        if (self.witness is not None) != (self.status != STABLE):
            raise ValueError("a witness is required exactly when the status is not stable")

    @property
    def unstable(self) -> bool:
        return self.status == UNSTABLE

    def to_json(self) -> dict:
        def enc(v):
            if isinstance(v, Fraction):
                return rational_str(v)
            if isinstance(v, dict):
                return {k: enc(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [enc(x) for x in v]
            return v

        out = {"status": self.status, "witness": enc(self.witness), "slopes": enc(self.slopes)}
        out["futaki"] = rational_str(self.futaki) if self.futaki is not None else None
        if self.formula:
            out["formula"] = self.formula
        out.update(enc(self.extra))
        return out


def _sign_status(margin: Fraction) -> str:
    return STABLE if margin > 0 else BOUNDARY if margin == 0 else UNSTABLE


def curve_stability_margin(X: OrbiCurve) -> Fraction:
    """2g + sum(1 - 1/m_i) - 2 max(1 - 1/m_i); negative exactly when unstable."""
    defects = [1 - Fraction(1, m) for m in X.orders]
    return 2 * X.genus + sum(defects, Fraction(0)) - 2 * max(defects, default=Fraction(0))


def classify_curve(X: OrbiCurve, L: QDivisor) -> StabilityVerdict:
    ok, reason = is_orbi_ample(X, L)
    if not ok:
        raise ValueError(reason)
    status = _sign_status(curve_stability_margin(X))
    if X.genus == 0 and not X.markings:
        status = STABLE
    mu = slope_orb(X, L)
    slopes = {"mu_X": mu}
    witness = futaki = None
    if X.markings:
        top = max(X.markings, key=lambda mk: mk.m)
        key = top.coord if X.genus == 0 else top.label
        q = Fraction(1, top.m)
        eps = deg_orb(L) / q
        sd = curve_slope_data(X, L, q)
        slopes.update(mu_c_OZ=slope_quotient(sd, eps), mu_c_IZ=slope_ideal(sd, eps))
        futaki = (sd.mu - slopes["mu_c_IZ"]) * poly_integral(sd.a0_of_x, 0, eps) / sd.a0
        if status != STABLE:
            witness = {"point": top.label, "coord": key, "q": q, "c": eps}
    return StabilityVerdict(
        status, witness, slopes, futaki,
        formula="2g + sum(1-1/m_i) vs 2 max(1-1/m_i); quotient slope 1/c at the top-order point",
    )


def slope_search(X: OrbiCurve, L: QDivisor, c_steps: int = 16) -> str:
    """Status from a direct scan of point divisors q p_i, q in {1/m_i, ..., 1}, and c in (0, eps]."""
    mu = slope_orb(X, L)
    points = [(mk.m, mk.coord if X.genus == 0 else mk.label) for mk in X.markings]
    points.append((1, X.free_point()))
    worst = None
    for m, _ in points:
        for num in range(1, m + 1):
            q = Fraction(num, m)
            sd = curve_slope_data(X, L, q)
            eps = deg_orb(L) / q
            for s in range(1, c_steps + 1):
                c = eps * Fraction(s, c_steps)
                gap = slope_quotient(sd, c) - mu
                worst = gap if worst is None else min(worst, gap)
    return _sign_status(worst) if X.markings else STABLE


@dataclass(frozen=True)
class IndexResult:
    verdict: StabilityVerdict
    mu_X: Fraction
    mu_r: Fraction


def index_check(n: int, k: int, r) -> IndexResult:
    """Index obstruction for a Fano orbifold with K_orb^(-k) = O(k r D)."""
    r = as_rational(r)
    if r <= 0 or n < 1 or k < 1:
        raise ValueError("need n >= 1, k >= 1 and r > 0")
    mu_X = Fraction(n, 2)
    mu_r = Fraction((n + 1) * ((n - 1) * r + 1), 2 * n * r)
    status = _sign_status(n + 1 - r)
    witness = None if status == STABLE else {"point": "D", "q": Fraction(1), "c": r}
    verdict = StabilityVerdict(
        status, witness, {"mu_X": mu_X, "mu_c_OZ": mu_r}, None,
        formula="mu_r(O_D) = (n+1)((n-1)r+1)/(2nr) against mu = n/2",
        extra={"r": r, "n": n},
    )
    return IndexResult(verdict, mu_X, mu_r)


def wps_check(weights: Sequence[int]) -> StabilityVerdict:
    """Weighted projective space P(weights): r = sum / min against n + 1."""
    if not weights:
        raise ValueError("empty weight list")
    if any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")
    n = len(weights) - 1
    if n == 0:
        raise ValueError("need at least two weights")
    r = Fraction(sum(weights), min(weights))
    return index_check(n, 1, r).verdict


def wps_curve(a: int, b: int):
    """The effective orbifold underlying P(a, b) with its O(1)."""
    g = math.gcd(a, b)
    return weighted_projective_line(a // g, b // g)


@dataclass(frozen=True)
class HyperplaneResult:
    verdict: StabilityVerdict
    fano: bool
    total: Fraction


def pn_hyperplane_check(n: int, m: Sequence[int]) -> HyperplaneResult:
    """P^n with n+2 hyperplanes of orders m_i: Fano flag and the index necessary condition."""
    if len(m) != n + 2:
        raise ValueError(f"need exactly n+2 = {n + 2} orders")
    if any(mi < 2 for mi in m):
        raise ValueError("orders must be >= 2")
    total = sum((Fraction(1, mi) for mi in m), Fraction(0))
    bound = 1 + (n + 1) * min(Fraction(1, mi) for mi in m)
    status = _sign_status(bound - total)
    witness = None
    if status != STABLE:
        j = max(range(len(m)), key=lambda i: m[i])
        witness = {"point": f"H{j + 1}/{m[j]}", "q": Fraction(1, m[j]), "c": m[j] * (total - 1)}
    verdict = StabilityVerdict(
        status, witness, {}, None,
        formula="sum 1/m_i <= 1 + (n+1) min 1/m_i",
        extra={"sum_inv": total, "bound": bound},
    )
    return HyperplaneResult(verdict, total > 1, total)


def pardeg(deg, flags: Sequence[tuple[int, int, int]]) -> Fraction:
    """Parabolic degree: deg + sum multiplicity * p_j / ord(x) over (multiplicity, p_j, ord)."""
    return as_rational(deg) + sum((Fraction(mult * p, o) for mult, p, o in flags), Fraction(0))


@dataclass(frozen=True)
class RuledResult:
    sign: int
    factor: Fraction
    difference_over_C: Fraction
    verdict: StabilityVerdict


def parabolic_ruled_check(mu_E, mu_F, r: int, m, mu_Sigma) -> RuledResult:
    """Sign of mu_1(O_P(F)) - mu(P(E)) = C (mu_E - mu_F)(r m + (r-1) mu_Sigma - r mu_E)."""
    mu_E, mu_F, m, mu_Sigma = map(as_rational, (mu_E, mu_F, m, mu_Sigma))
    factor = r * m + (r - 1) * mu_Sigma - r * mu_E
    if factor <= 0:
        raise ValueError(f"m = {m} is outside the adiabatic range (factor {factor} <= 0)")
    diff = (mu_E - mu_F) * factor
    sign = (diff > 0) - (diff < 0)
    status = _sign_status(diff)
    witness = None if status == STABLE else {"point": "P(F)", "q": Fraction(1), "c": Fraction(1)}
    verdict = StabilityVerdict(status, witness, {"mu_E": mu_E, "mu_F": mu_F}, None,
                               formula="(mu_E - mu_F)(r m + (r-1) mu_Sigma - r mu_E)")
    return RuledResult(sign, factor, diff, verdict)
