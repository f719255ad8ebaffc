"""Hilb and FS maps, weighted Bergman kernels and the balancing iteration.

A graded metric is stored as the Gram matrices of the monomial sections
x^j of L^(k+i), i = 0..M.  A metric pair (h, omega) is stored at quadrature
nodes as log(h / h_background) together with the area density of omega in
each chart coordinate.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .charts import BackgroundGeometry, Chart, ChartNodes, QuadratureScheme, scal_estimate
from .core_arith import WeightSequence, ci_weights
from .wps_geom import GradedMetric, c_constant, solve_log_lambda


@dataclass
class Embedding:
    """Degrees k..k+M with the monomial exponents of each section space."""

    bg: BackgroundGeometry
    w: WeightSequence
    k: int
    ranges: list = field(init=False)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        self.ranges = [self.bg.section_range(d) for d in self.degrees]
        if any(hi < lo for lo, hi in self.ranges):
            raise ValueError("a section space is empty; increase k")

    @property
    def degrees(self) -> list[int]:
        return [self.k + i for i in range(len(self.w.c))]

    @property
    def dims(self) -> list[int]:
        return [hi - lo + 1 for lo, hi in self.ranges]

    @property
    def c(self) -> float:
        return float(c_constant(self.w, self.k, self.dims))

    def scales(self) -> list[float]:
        """c_i vol per degree."""
        return [float(ci) * self.bg.vol for ci in self.w.c]

    def exponents(self, chart: Chart) -> list[np.ndarray]:
        return [chart.exponents(lo, hi, d) for (lo, hi), d in zip(self.ranges, self.degrees)]


def make_embedding(bg: BackgroundGeometry, k: int, p: int = 5, w: WeightSequence | None = None) -> Embedding:
    return Embedding(bg, w or ci_weights(bg.curve.ord, p), k)


@dataclass
class NodeField:
    """Values on the quadrature nodes of one chart."""

    nodes: ChartNodes
    log_ratio: np.ndarray  # log(h / h_background)
    density: np.ndarray  # omega per unit chart area
    f: np.ndarray | None = None


@dataclass
class MetricPair:
    fields: list  # one NodeField per chart

    def integral(self, values=None) -> float:
        total = 0.0
        for fld, vals in zip(self.fields, values or [None] * len(self.fields)):
            integrand = fld.density if vals is None else vals * fld.density
            total += float(np.sum(fld.nodes.weights * integrand))
        return total


def background_pair(bg: BackgroundGeometry, quad: QuadratureScheme) -> MetricPair:
    fields = []
    for nodes in quad.nodes(bg):
        dens = nodes.ddphi / (np.pi * np.abs(nodes.z) ** 2)
        fields.append(NodeField(nodes, np.zeros(len(nodes.z)), dens))
    return MetricPair(fields)


def _section_values(z, phi, exps: np.ndarray, d: int) -> np.ndarray:
    """z^n e^(-d phi / 2) for each exponent n, shape (nodes, sections)."""
    logz = np.log(z)
    return np.exp(logz[:, None] * exps[None, :] - 0.5 * d * phi[:, None])


def hilb_map(pair: MetricPair, emb: Embedding, quad: QuadratureScheme) -> GradedMetric:
    """G^i_{jl} = (1 / (c_i vol)) sum over nodes of conj(s_j) s_l h^(k+i) omega."""
    blocks = [np.zeros((n, n), dtype=complex) for n in emb.dims]
    for fld in pair.fields:
        nodes = fld.nodes
        for b, (d, exps, scale) in enumerate(zip(emb.degrees, emb.exponents(nodes.chart), emb.scales())):
            vals = _section_values(nodes.z, nodes.phi, exps, d)
            wt = nodes.weights * fld.density * np.exp(d * fld.log_ratio)
            if quad.diagonal:
                blocks[b] += np.diag((np.abs(vals) ** 2 * wt[:, None]).sum(axis=0)) / scale
            else:
                blocks[b] += (vals.conj().T * wt[None, :]) @ vals / scale
    if quad.diagonal:
        blocks = [b.real for b in blocks]
    else:
        blocks = [0.5 * (b + b.conj().T) for b in blocks]
    if not all(np.all(np.isfinite(b)) for b in blocks):
        raise FloatingPointError("non-finite Gram entry; the chart substitution failed")
    return GradedMetric(blocks)


def _inverse_conj(G: GradedMetric) -> list[np.ndarray]:
    return [np.linalg.inv(b.conj()) for b in G.blocks]


@dataclass
class FSPoint:
    """Fubini-Study data at a set of chart points."""

    log_ratio: np.ndarray  # log(h_FS / h)
    density: np.ndarray  # omega_FS per unit chart area
    f: np.ndarray
    bergman: np.ndarray  # sum_d d N_d, the weighted Bergman kernel of h


def fs_at(G: GradedMetric, emb: Embedding, chart: Chart, z, P: list | None = None) -> FSPoint:
    """Evaluate h_FS / h and the omega_FS density at points of one chart.

    Derivatives of the implicit root are taken analytically: with
    N_d = sum conj(s) P s e^(-d phi) and ell = log(h_FS / h) solving
    sum_d d e^(d ell) N_d = c, differentiate the identity twice.
    omega_FS = omega_{h_FS} + (i / (2 pi c)) ddbar f.
    """
    z = np.asarray(z, dtype=complex).ravel()
    if P is None:
        P = _inverse_conj(G)
    phi, dphi, ddphi = chart.potential(emb.bg.profile, z)
    absz2 = np.abs(z) ** 2
    deg = np.array(emb.degrees, dtype=float)
    nd = len(deg)
    N = np.empty((len(z), nd))
    dN = np.empty((len(z), nd), dtype=complex)
    ddN = np.empty((len(z), nd))
    for b, (d, exps) in enumerate(zip(emb.degrees, emb.exponents(chart))):
        S = _section_values(z, phi, exps, d)
        Sp = S * (exps[None, :] / z[:, None])
        Q = S.conj() @ P[b]
        A = np.real(np.sum(Q * S, axis=1))
        dA = np.sum(Q * Sp, axis=1)
        ddA = np.real(np.sum((Sp.conj() @ P[b]) * Sp, axis=1))
        N[:, b] = A
        dN[:, b] = dA - d * dphi * A / z
        ddN[:, b] = (ddA - 2 * d * dphi * np.real(dA / z.conj())
                     + d * (d * dphi ** 2 - ddphi) * A / absz2)
    if np.any(N.max(axis=1) <= 0):
        raise FloatingPointError("all sections vanish at a node; k is too small")
    c = emb.c
    with np.errstate(divide="ignore"):
        ell = 2 * solve_log_lambda(np.log(N), deg, c)
    E = np.exp(deg[None, :] * ell[:, None])
    T = E * N
    G_l = (deg ** 2 * T).sum(axis=1)
    G_ll = (deg ** 3 * T).sum(axis=1)
    G_x = (deg * E * dN).sum(axis=1)
    G_lx = (deg ** 2 * E * dN).sum(axis=1)
    G_xx = (deg * E * ddN).sum(axis=1)
    d_ell = -G_x / G_l
    dd_ell = -(G_ll * np.abs(d_ell) ** 2 + 2 * np.real(np.conj(G_lx) * d_ell) + G_xx) / G_l
    f = T.sum(axis=1)
    dd_f = ((deg[None, :] * dd_ell[:, None] + deg[None, :] ** 2 * np.abs(d_ell)[:, None] ** 2) * T
            + 2 * deg[None, :] * np.real(d_ell[:, None] * np.conj(E * dN)) + E * ddN).sum(axis=1)
    density = (ddphi / absz2 - dd_ell + dd_f / c) / np.pi
    return FSPoint(ell, density, f, (deg * N).sum(axis=1))


def fs_map(G: GradedMetric, emb: Embedding, quad: QuadratureScheme) -> MetricPair:
    """(h_FS, omega_FS) at the quadrature nodes, relative to the background h."""
    P = _inverse_conj(G)
    fields = []
    for nodes in quad.nodes(emb.bg):
        pt = fs_at(G, emb, nodes.chart, nodes.z, P)
        if np.any(~(pt.density > 0)):
            raise FloatingPointError("Fubini-Study form is not positive at a node")
        fields.append(NodeField(nodes, pt.log_ratio, pt.density, pt.f))
    return MetricPair(fields)


def bergman_kernel(pair: MetricPair, emb: Embedding, quad: QuadratureScheme):
    """Weighted Bergman kernel of (h, omega) at the nodes and its sup relative deviation from c."""
    G = hilb_map(pair, emb, quad)
    P = _inverse_conj(G)
    values = []
    for fld in pair.fields:
        values.append(_bergman_for_pair(emb, fld, P))
    c = emb.c
    dev = max(float(np.max(np.abs(v - c))) for v in values) / c
    return values, dev


def _bergman_for_pair(emb: Embedding, fld: NodeField, P) -> np.ndarray:
    nodes = fld.nodes
    total = np.zeros(len(nodes.z))
    for b, (d, exps) in enumerate(zip(emb.degrees, emb.exponents(nodes.chart))):
        S = _section_values(nodes.z, nodes.phi, exps, d)
        A = np.real(np.sum((S.conj() @ P[b]) * S, axis=1))
        total += d * A * np.exp(d * fld.log_ratio)
    return total


def fibre_ratio_deviation(pair: MetricPair, emb: Embedding, quad: QuadratureScheme) -> float:
    """sup |h_FS / h - 1| for (h_FS, omega_FS) = FS(Hilb(h, omega))."""
    fs = fs_map(hilb_map(pair, emb, quad), emb, quad)
    return max(float(np.max(np.abs(np.expm1(f2.log_ratio - f1.log_ratio))))
               for f1, f2 in zip(pair.fields, fs.fields))


def m_matrix(G: GradedMetric, H: GradedMetric, emb: Embedding, basis: list | None = None) -> list[np.ndarray]:
    """Blocks (1/2)(int t_a conj(t_b) h_FS omega_FS - c_i vol delta_ab), the v (x) v^* convention.

    H is Hilb(FS(G)).  The coordinates t = B s default to B = conj(L^-1)
    with G = L L^*, a G-orthonormal basis; any other G-orthonormal basis may
    be passed as the list of B blocks.
    """
    out = []
    for b, (g, h, scale) in enumerate(zip(G.blocks, H.blocks, emb.scales())):
        B = np.linalg.inv(np.linalg.cholesky(g)).conj() if basis is None else basis[b]
        core = B @ h.T @ B.conj().T
        out.append(0.5 * scale * (core - np.eye(len(g))))
    return out


def frobenius(blocks) -> float:
    return float(np.sqrt(sum(np.sum(np.abs(b) ** 2) for b in blocks)))


@dataclass
class IterationState:
    k: int
    G: GradedMetric
    residual: float
    iteration: int


@dataclass
class IterationTrace:
    states: list
    residuals: list
    converged: bool
    diverged: bool
    best: IterationState
    seconds: float

    @property
    def final(self) -> IterationState:
        return self.states[-1]


def t_iterate(emb: Embedding, quad: QuadratureScheme, G0: GradedMetric | None = None,
              max_iters: int = 60, tol: float = 1e-8) -> IterationTrace:
    """Repeat G <- Hilb(FS(G)) until ||M|| < tol, starting from Hilb of the background."""
    start = time.perf_counter()
    G = G0 if G0 is not None else hilb_map(background_pair(emb.bg, quad), emb, quad)
    states, residuals = [], []
    best = None
    converged = diverged = False
    for it in range(max_iters + 1):
        H = hilb_map(fs_map(G, emb, quad), emb, quad)
        res = frobenius(m_matrix(G, H, emb))
        state = IterationState(emb.k, G, res, it)
        states.append(state)
        residuals.append(res)
        if best is None or res < best.residual:
            best = state
        if res < tol:
            converged = True
            break
        if res > 10 * best.residual:
            diverged = True
            break
        if it < max_iters:
            G = H
    return IterationTrace(states, residuals, converged, diverged, best, time.perf_counter() - start)


def fs_scalar_curvature(G: GradedMetric, emb: Embedding, quad: QuadratureScheme, step: float = 1e-4) -> np.ndarray:
    P = _inverse_conj(G)
    values = []
    for nodes in quad.nodes(emb.bg):
        dens = lambda u, ch=nodes.chart: fs_at(G, emb, ch, u, P).density
        values.append(scal_estimate(dens, nodes.z, step))
    return np.concatenate(values)


@dataclass
class ExpansionRow:
    k: int
    deviation: float  # sup |h_FS/h - 1|
    corrected: float  # sup |h_FS/h - 1 - (Sbar - S) / (2 k^2)|
    m_norm: float


@dataclass
class ExpansionReport:
    rows: list
    exponent: float
    corrected_exponent: float
    m_exponent: float

    def to_json(self) -> dict:
        return {
            "rows": [vars(r) for r in self.rows],
            "exponent": self.exponent,
            "corrected_exponent": self.corrected_exponent,
            "m_exponent": self.m_exponent,
        }


def fitted_exponent(ks, values) -> float:
    """Least-squares slope of log(value) against log(k)."""
    return float(np.polyfit(np.log(np.asarray(ks, dtype=float)), np.log(np.asarray(values)), 1)[0])


def expansion_check(bg: BackgroundGeometry, ks, quad: QuadratureScheme | None = None, p: int = 5) -> ExpansionReport:
    if not bg.curvature_matches:
        raise ValueError("the expansion needs omega to be the curvature of h")
    quad = quad or QuadratureScheme()
    pair = background_pair(bg, quad)
    scal = [bg.scalar_curvature(fld.nodes.chart, fld.nodes.z) for fld in pair.fields]
    sbar = bg.scal_average
    rows = []
    for k in ks:
        emb = make_embedding(bg, k, p)
        G = hilb_map(pair, emb, quad)
        fs = fs_map(G, emb, quad)
        H = hilb_map(fs, emb, quad)
        dev = corr = 0.0
        for fld, s in zip(fs.fields, scal):
            ratio = np.expm1(fld.log_ratio)
            dev = max(dev, float(np.max(np.abs(ratio))))
            corr = max(corr, float(np.max(np.abs(ratio - (sbar - s) / (2 * k * k)))))
        rows.append(ExpansionRow(k, dev, corr, frobenius(m_matrix(G, H, emb))))
    ks = [r.k for r in rows]
    return ExpansionReport(
        rows,
        fitted_exponent(ks, [r.deviation for r in rows]),
        fitted_exponent(ks, [r.corrected for r in rows]),
        fitted_exponent(ks, [r.m_norm for r in rows]),
    )


def run_report(emb: Embedding, trace: IterationTrace, quad: QuadratureScheme, with_scal: bool = True) -> dict:
    G = trace.best.G
    t0 = time.perf_counter()
    fs = fs_map(G, emb, quad)
    _, dev = bergman_kernel(fs, emb, quad)
    report = {
        "k": emb.k,
        "iterations": trace.final.iteration,
        "converged": trace.converged,
        "diverged": trace.diverged,
        "residuals": trace.residuals,
        "bergman_dev": dev,
    }
    if with_scal:
        scal = fs_scalar_curvature(G, emb, quad)
        report["scal"] = {"mean": float(np.mean(scal)), "max": float(np.max(scal)), "min": float(np.min(scal))}
    report["timings"] = {"iterate": trace.seconds, "report": time.perf_counter() - t0}
    return report


def node_rows(G: GradedMetric, emb: Embedding, quad: QuadratureScheme) -> list[dict]:
    """Per-node plot data: chart, coordinate, omega_FS density, Bergman kernel and Scal."""
    fs = fs_map(G, emb, quad)
    kernels, _ = bergman_kernel(fs, emb, quad)
    scal = fs_scalar_curvature(G, emb, quad)
    rows, offset = [], 0
    for fld, bk in zip(fs.fields, kernels):
        for i, z in enumerate(fld.nodes.z):
            rows.append({
                "chart": fld.nodes.chart.name,
                "re_z": float(z.real),
                "im_z": float(z.imag),
                "density": float(fld.density[i]),
                "bergman": float(bk[i]),
                "scal": float(scal[offset + i]),
            })
        offset += len(fld.nodes.z)
    return rows


def write_csv(path, rows: list[dict]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else [])
        writer.writeheader()
        writer.writerows(rows)
    tmp.replace(path)


def write_json(path, data) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(data, indent=2))
    tmp.replace(path)


def hermitian_exp(A: np.ndarray, s: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(A)
    return (vecs * np.exp(s * vals)) @ vecs.conj().T


def orbit_trace(emb: Embedding, quad: QuadratureScheme, G0: GradedMetric, A: list, s_values) -> np.ndarray:
    """tr(M(X_s) A) along X_s = exp(s A) X, with A graded hermitian in G0-orthonormal coordinates.

    Moving the embedded curve by exp(s A) is the same as replacing the basis
    t = B0 s of sections by exp(s A) t and declaring it orthonormal.
    """
    B0 = [np.linalg.inv(np.linalg.cholesky(g)).conj() for g in G0.blocks]
    out = []
    for s in s_values:
        Bs = [hermitian_exp(a, s) @ b for a, b in zip(A, B0)]
        Gs = GradedMetric([np.linalg.inv(b.T @ b.conj()) for b in Bs])
        H = hilb_map(fs_map(Gs, emb, quad), emb, quad)
        M = m_matrix(Gs, H, emb, basis=Bs)
        out.append(float(sum(np.real(np.trace(m @ a)) for m, a in zip(M, A))))
    return np.array(out)
