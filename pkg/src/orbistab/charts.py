"""Background geometry and quadrature for S^1-invariant metrics on genus-zero orbifold curves.

Only curves whose orbifold points sit at 0 and infinity are handled.  Each
hemisphere |x| <= 1 and |x| >= 1 is covered by a uniformising disc with
x = z^m0 and 1/x = w^minf, and every integral is a sum of disc integrals
divided by the chart order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .orbicurve import INFINITY, OrbiCurve, QDivisor, deg_canonical, deg_orb
from .wps_geom import solve_log_lambda


@dataclass(frozen=True)
class ImplicitProfile:
    """Potential Phi(t), t = log|x|^2, given by sum_j q_j Lambda^d_j e^(e_j t) = 1 and Phi = -log Lambda.

    Phi' increases from lo = min e_j/d_j to hi = max e_j/d_j.  A nonzero
    ``bump`` adds eps * B(Phi') with B(tau) = (w/2pi)^2 (1 - cos(2 pi (tau - lo)/w)),
    w = hi - lo.  Since Phi' is a smooth function on the orbifold, so is the
    perturbation, and its effect on the curvature stays relatively bounded
    near the orbifold points.
    """

    terms: tuple[tuple[float, float, float], ...]
    bump: float = 0.0

    def __post_init__(self):
        if len(self.terms) < 2:
            raise ValueError("need at least two terms")
        for q, d, _ in self.terms:
            if q <= 0 or d <= 0:
                raise ValueError("profile terms need q > 0 and d > 0")

    @property
    def slopes(self) -> tuple[float, float]:
        s = [e / d for _, d, e in self.terms]
        return min(s), max(s)

    def with_bump(self, eps: float) -> "ImplicitProfile":
        return ImplicitProfile(self.terms, eps)

    def evaluate(self, t):
        """(Phi, Phi' - lo, hi - Phi', Phi'') with both slope gaps computed without cancellation."""
        t = np.asarray(t, dtype=float)
        shape = t.shape
        t = t.reshape(-1, 1)
        q, d, e = (np.array(col) for col in zip(*self.terms))
        lo, hi = self.slopes
        logn = np.log(q)[None, :] + e[None, :] * t - np.log(d)[None, :]
        ell = 2 * solve_log_lambda(logn, d, 1.0)
        T = np.exp(np.log(q)[None, :] + d[None, :] * ell[:, None] + e[None, :] * t)
        D = (d * T).sum(axis=1)
        gap_lo = ((e - lo * d) * T).sum(axis=1) / D
        gap_hi = ((hi * d - e) * T).sum(axis=1) / D
        # e_j - d_j Phi', expanded around whichever end is closer
        sigma = np.where((gap_lo <= gap_hi)[:, None],
                         (e - lo * d)[None, :] - d[None, :] * gap_lo[:, None],
                         (e - hi * d)[None, :] + d[None, :] * gap_hi[:, None])
        phi2 = (sigma ** 2 * T).sum(axis=1) / D
        phi = -ell
        if self.bump:
            phi3 = ((sigma ** 3 * T).sum(axis=1) - 3 * phi2 * (d * sigma * T).sum(axis=1)) / D
            w = hi - lo
            angle = 2 * np.pi * gap_lo / w
            b0 = (w / (2 * np.pi)) ** 2 * (1 - np.cos(angle))
            b1 = w / (2 * np.pi) * np.sin(angle)
            b2 = np.cos(angle)
            g1 = self.bump * b1 * phi2
            phi = phi + self.bump * b0
            phi2 = phi2 + self.bump * (b2 * phi2 ** 2 + b1 * phi3)
            gap_lo, gap_hi = gap_lo + g1, gap_hi - g1
        return phi.reshape(shape), gap_lo.reshape(shape), gap_hi.reshape(shape), phi2.reshape(shape)


def standard_profile(m0: int, minf: int, a0, ainf) -> ImplicitProfile:
    """Two-term profile smooth in both uniformising charts.

    Gives the round metric on P^1 and on footballs with equal orders, and the
    weighted Fubini-Study metric on P(1, m).
    """
    deg = float(a0) + float(ainf)
    d_inf = 1.0 / (minf * deg)
    d_0 = 1.0 / (m0 * deg)
    return ImplicitProfile(((1.0, d_inf, -float(a0) * d_inf), (1.0, d_0, float(ainf) * d_0)))


@dataclass
class Chart:
    """Uniformising disc at 0 (sign +1) or at infinity (sign -1)."""

    name: str
    m: int
    sign: int
    slope: Fraction  # a0 or ainf

    def exponents(self, lo_j: int, hi_j: int, d: int) -> np.ndarray:
        j = np.arange(lo_j, hi_j + 1)
        if self.sign > 0:
            n = self.m * (j + d * self.slope)
        else:
            n = self.m * (d * self.slope - j)
        return np.array([int(v) for v in n])

    def t_of(self, z) -> np.ndarray:
        return self.sign * self.m * np.log(np.abs(z) ** 2)

    def potential(self, profile: ImplicitProfile, z):
        """(phi, dphi, ddphi): chart weight and its derivatives in log|z|^2."""
        t = self.t_of(z)
        phi, gap_lo, gap_hi, phi2 = profile.evaluate(t)
        if self.sign > 0:
            return phi + float(self.slope) * t, self.m * gap_lo, self.m ** 2 * phi2
        return phi - float(self.slope) * t, self.m * gap_hi, self.m ** 2 * phi2


@dataclass
class BackgroundGeometry:
    curve: OrbiCurve
    L: QDivisor
    profile: ImplicitProfile
    a0: Fraction
    ainf: Fraction
    charts: tuple[Chart, Chart] = field(init=False)
    curvature_matches: bool = True

    def __post_init__(self):
        self.charts = (Chart("zero", self.m0, 1, self.a0), Chart("infinity", self.minf, -1, self.ainf))
        lo, hi = self.profile.slopes
        if not (math.isclose(lo, -float(self.a0), abs_tol=1e-12) and math.isclose(hi, float(self.ainf), abs_tol=1e-12)):
            raise ValueError("profile slopes do not match the polarisation")

    @property
    def m0(self) -> int:
        return self.curve.order_at(Fraction(0))

    @property
    def minf(self) -> int:
        return self.curve.order_at(INFINITY)

    @property
    def vol(self) -> float:
        return float(self.a0 + self.ainf)

    @property
    def scal_average(self) -> float:
        """S-bar = -deg K_orb / deg L, which equals twice the slope of (X, L)."""
        return float(-deg_canonical(self.curve) / (self.a0 + self.ainf))

    def section_range(self, d: int) -> tuple[int, int]:
        """Exponents j with x^j a section of L^d."""
        return -math.floor(d * self.a0), math.floor(d * self.ainf)

    def h0(self, d: int) -> int:
        lo, hi = self.section_range(d)
        return hi - lo + 1

    def density(self, chart: Chart, z) -> np.ndarray:
        """Kahler form density with respect to area in the chart coordinate."""
        _, _, ddphi = chart.potential(self.profile, z)
        return ddphi / (np.pi * np.abs(z) ** 2)

    def scalar_curvature(self, chart: Chart, z, step: float = 1e-4) -> np.ndarray:
        return scal_estimate(lambda u: self.density(chart, u), z, step)


def scal_estimate(density, z, step: float = 1e-4) -> np.ndarray:
    """Scal = -(1/(4 pi rho)) Laplacian(log rho) for an area density rho in a local coordinate.

    Five-point Cartesian stencil with one Richardson step.  The 1/(4 pi)
    makes the round sphere of area 1 have Scal = 2, so the average equals
    -deg K / deg L.
    """
    z = np.asarray(z, dtype=complex)
    centre = density(z)
    if np.any(~(centre > 0)):
        raise ValueError("density must be positive")
    log_centre = np.log(centre)

    def lap(h):
        ring = sum(np.log(density(z + h * u)) for u in (1, -1, 1j, -1j))
        return (ring - 4 * log_centre) / (h * h)

    laplacian = (4 * lap(step) - lap(2 * step)) / 3
    return -laplacian / (4 * np.pi * centre)


def split_polarisation(X: OrbiCurve, L: QDivisor) -> tuple[Fraction, Fraction]:
    """Write L as a0 (0) + ainf (infinity) with a0, ainf >= 0 up to linear equivalence."""
    if X.genus != 0:
        raise ValueError("numerics are implemented for genus zero only")
    for mk in X.markings:
        if mk.coord not in (Fraction(0), INFINITY):
            raise ValueError(f"orbifold point {mk.label} must sit at 0 or infinity")
    a0 = L.coefficient(Fraction(0))
    rest = deg_orb(L) - a0
    for point, coeff in L.terms:
        if point not in (Fraction(0), INFINITY) and coeff.denominator != 1:
            raise ValueError("non-integral coefficient at a smooth point")
    if a0 < 0:
        shift = math.ceil(-a0)
        a0, rest = a0 + shift, rest - shift
    if rest < 0:
        shift = math.ceil(-rest)
        a0, rest = a0 - shift, rest + shift
    if a0 < 0 or a0 + rest <= 0:
        raise ValueError("polarisation must have positive degree")
    for value, point in ((a0, Fraction(0)), (rest, INFINITY)):
        if (value * X.order_at(point)).denominator != 1:
            raise ValueError("coefficient times chart order must be an integer")
    return a0, rest


def background(X: OrbiCurve, L: QDivisor, profile: ImplicitProfile | None = None,
               bump: float = 0.0) -> BackgroundGeometry:
    a0, ainf = split_polarisation(X, L)
    if profile is None:
        profile = standard_profile(X.order_at(Fraction(0)), X.order_at(INFINITY), a0, ainf)
    if bump:
        profile = profile.with_bump(bump)
    bg = BackgroundGeometry(X, L, profile, a0, ainf)
    t = np.linspace(-60, 60, 4001)
    if np.any(profile.evaluate(t)[3] <= 0):
        raise ValueError("background form is not positive")
    return bg


@dataclass
class ChartNodes:
    chart: Chart
    z: np.ndarray
    weights: np.ndarray  # area weight divided by the chart order
    phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray


@dataclass
class QuadratureScheme:
    """Gauss-Legendre in the chart radius times the trapezoid rule in angle.

    In mode "1d" a single angle carries the full 2 pi; this is exact for
    rotation-invariant integrands and is the only mode in which Gram
    matrices are assumed diagonal.
    """

    mode: str = "1d"
    n_radial: int = 96
    n_angular: int = 48

    def __post_init__(self):
        if self.mode not in ("1d", "2d"):
            raise ValueError("mode must be '1d' or '2d'")
        if self.n_radial < 4 or (self.mode == "2d" and self.n_angular < 4):
            raise ValueError("too few quadrature nodes")

    @property
    def diagonal(self) -> bool:
        return self.mode == "1d"

    def refined(self) -> "QuadratureScheme":
        return QuadratureScheme(self.mode, 2 * self.n_radial, 2 * self.n_angular)

    def nodes(self, bg: BackgroundGeometry) -> list[ChartNodes]:
        x, wx = np.polynomial.legendre.leggauss(self.n_radial)
        r, wr = 0.5 * (x + 1), 0.5 * wx
        if self.diagonal:
            theta, wt = np.zeros(1), np.full(1, 2 * np.pi)
        else:
            theta = 2 * np.pi * np.arange(self.n_angular) / self.n_angular
            wt = np.full(self.n_angular, 2 * np.pi / self.n_angular)
        z = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
        w = (r * wr)[:, None] * wt[None, :]
        out = []
        for chart in bg.charts:
            phi, dphi, ddphi = chart.potential(bg.profile, z)
            out.append(ChartNodes(chart, z, w.ravel() / chart.m, phi, dphi, ddphi))
        return out
