from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from orbistab.core_arith import WeightSequence, ci_weights
from orbistab.wps_geom import (
    GradedMetric, GradedPoint, GradedVectorSpace, HamiltonianMatrix, c_constant, equivariant_weight,
    hamiltonian, hfs_norms, lambda_residual, lambda_solve, moment_map, solve_lambda_sq,
)

ONE = WeightSequence(1, 5, (Fraction(1),))


def random_setup(rng, k=3, M=2, ord_=2):
    w = ci_weights(ord_, 1) if M == 2 else WeightSequence(ord_, 1, tuple(Fraction(1) for _ in range(M + 1)))
    dims = [int(rng.integers(1, 4)) for _ in range(M + 1)]
    blocks = []
    for n in dims:
        X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        blocks.append(X @ X.conj().T + n * np.eye(n))
    v = GradedPoint([rng.normal(size=n) + 1j * rng.normal(size=n) for n in dims])
    return w, GradedMetric(blocks), v


def test_single_degree_closed_form():
    v = GradedPoint([[1.0, 0.0]])
    G = GradedMetric.identity([2])
    assert lambda_solve(v, G, ONE, 1) == pytest.approx(np.sqrt(2), rel=1e-15)
    norm, sections = hfs_norms(v, G, ONE, 1)
    assert norm == pytest.approx(1 / np.sqrt(2), rel=1e-15)


def test_two_degrees_chosen_root():
    w = WeightSequence(2, 0, (Fraction(1), Fraction(1)))
    c = float(c_constant(w, 1, [1, 1]))
    assert c == 3
    lam = solve_lambda_sq(np.array([[1.0, 1.0]]), np.array([1, 2]), c)[0]
    assert lam == pytest.approx(1.0, abs=1e-15)
    assert lambda_residual(1.0, np.array([1.0, 1.0]), np.array([1, 2]), c) == 0


def test_unit_norm_on_zero_level():
    w = WeightSequence(2, 0, (Fraction(1), Fraction(1)))
    v = GradedPoint([[1.0], [1.0]])
    assert hfs_norms(v, GradedMetric.identity([1, 1]), w, 1)[0] == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 10))
def test_graded_scaling(seed, t):
    rng = np.random.default_rng(seed)
    w, G, v = random_setup(rng)
    k = 3
    lam = lambda_solve(v, G, w, k)
    assert lambda_solve(v.scaled(t, k), G, w, k) == pytest.approx(lam / t, rel=1e-12)
    m1, m2 = moment_map(v, G, w, k), moment_map(v.scaled(t, k), G, w, k)
    assert max(np.abs(a - b).max() for a, b in zip(m1, m2)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_bergman_sum_and_trace_identities(seed):
    rng = np.random.default_rng(seed)
    w, G, v = random_setup(rng)
    k = 3
    dims = [len(x) for x in v.components]
    c = float(c_constant(w, k, dims))
    _, sections = hfs_norms(v, G, w, k)
    assert sum((k + i) * s.sum() for i, s in enumerate(sections)) == pytest.approx(c, rel=1e-12)
    m = moment_map(v, G, w, k)
    assert abs(sum((k + i) * np.trace(b).real for i, b in enumerate(m))) < 1e-10 * c


def test_balanced_point_has_zero_moment():
    w = WeightSequence(2, 0, (Fraction(1), Fraction(1)))
    m = moment_map(GradedPoint([[1.0], [1.0]]), GradedMetric.identity([1, 1]), w, 1)
    assert all(np.abs(b).max() < 1e-15 for b in m)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_hamiltonians(seed):
    rng = np.random.default_rng(seed)
    w, G, v = random_setup(rng)
    k = 3
    dims = [len(x) for x in v.components]
    c = float(c_constant(w, k, dims))
    lam = lambda_solve(v, G, w, k)
    ident = HamiltonianMatrix([np.eye(n) for n in dims])
    coords = G.orthonormal_coords(v)
    expected = sum(lam ** (2 * (k + i)) * np.vdot(y, y).real for i, y in enumerate(coords)) / c
    assert hamiltonian(v, ident, G, w, k) == pytest.approx(expected, rel=1e-12)
    graded = HamiltonianMatrix([(k + i) * np.eye(n) for i, n in enumerate(dims)])
    assert hamiltonian(v, graded, G, w, k) == pytest.approx(1.0, rel=1e-12)
    A = []
    for n in dims:
        X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        A.append(X + X.conj().T)
    hA = hamiltonian(v, HamiltonianMatrix(A), G, w, k)
    hneg = hamiltonian(v, HamiltonianMatrix([-a for a in A]), G, w, k)
    assert hneg == pytest.approx(-hA, abs=1e-12)
    # H_A = (1/c)(2 tr(m A) + sum c_i tr A_i)
    m = moment_map(v, G, w, k)
    rhs = (2 * sum(np.trace(mi @ a).real for mi, a in zip(m, A))
           + sum(float(ci) * np.trace(a).real for ci, a in zip(w.c, A))) / c
    assert hA == pytest.approx(rhs, rel=1e-10, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 50), st.integers(1, 8)),
              elements=st.floats(1e-6, 1e6)), st.integers(1, 40))
def test_solver_residual(norms, k):
    deg = k + np.arange(norms.shape[1])
    c = float(deg.sum()) * 3.5
    lam = solve_lambda_sq(norms, deg, c)
    res = np.abs((deg[None, :] * lam[:, None] ** deg[None, :] * norms).sum(axis=1) - c)
    assert np.all(res <= 1e-12 * c)


def test_solver_rejects_zero_vector():
    with pytest.raises(ValueError):
        solve_lambda_sq(np.zeros((1, 3)), np.array([1, 2, 3]), 2.0)
    with pytest.raises(ValueError):
        GradedPoint([[0.0], [0.0]])


def test_metric_validation():
    with pytest.raises(ValueError):
        GradedMetric([np.array([[1.0, 2.0], [0.0, 1.0]])])
    with pytest.raises(ValueError):
        GradedMetric([np.array([[-1.0]])])
    with pytest.raises(ValueError):
        HamiltonianMatrix([np.array([[0, 1j], [1j, 0]])])
    assert GradedVectorSpace(2, (1, 2)).total_dim == 3


def test_equivariant_weight():
    assert equivariant_weight([np.zeros((2, 2))]) == (0, 0)
    assert equivariant_weight([[1, 2, 3]]) == (6, 14)
    assert equivariant_weight([np.diag([1, 2, 3])], dims=[3]) == (6, 14)
    with pytest.raises(ValueError):
        equivariant_weight([[1, 2]], dims=[3])
