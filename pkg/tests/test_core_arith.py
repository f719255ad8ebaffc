from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbistab.core_arith import (
    QuasiPolynomial, as_rational, ci_weights, interpolate, poly_integral, poly_mul, qp2_fit, qp_fit,
    rational_str, residue_moment, solve_exact, weighted_shift_sum,
)
from orbistab.orbicurve import h0_exact, make_divisor, weighted_line


def test_ci_weights_small_cases():
    assert list(ci_weights(1, 5).c) == [1]
    assert list(ci_weights(2, 1).c) == [1, 2, 1]
    assert list(ci_weights(3, 1).c) == [1, 2, 3, 2, 1]


@given(st.integers(1, 7), st.integers(1, 7))
def test_ci_weights_match_numpy_power(ord_, p):
    ref = np.polynomial.polynomial.polypow([1] * ord_, p + 1)
    w = ci_weights(ord_, p)
    assert w.M == (ord_ - 1) * (p + 1)
    assert [int(c) for c in w.c] == [int(round(x)) for x in ref]


def test_residue_moment_examples():
    w = ci_weights(2, 1)
    assert residue_moment(w, 0, 0) == residue_moment(w, 0, 1) == 2
    w3 = ci_weights(2, 3)
    assert len({residue_moment(w3, 3, r) for r in range(2)}) == 1
    w1 = ci_weights(1, 4)
    assert residue_moment(w1, 3, 0) == 0  # only i = 0
    with pytest.raises(ValueError):
        residue_moment(w, 0, 2)


@given(st.integers(2, 6), st.integers(1, 6))
def test_residue_moments_equal_below_p(ord_, p):
    # the moments of degree < p+1 see every residue class alike
    w = ci_weights(ord_, p)
    for power in range(p + 1):
        assert len({residue_moment(w, power, r) for r in range(ord_)}) == 1


def test_floor_decomposition():
    qp = qp_fit([(k, k // 2 + 1) for k in range(10)], 1, 2)
    assert qp.poly == (Fraction(3, 4), Fraction(1, 2))
    assert qp.periodic == ((Fraction(1, 4),), (Fraction(-1, 4),))
    assert qp.periodic_average() == [0]


def test_polynomial_samples_have_no_periodic_part():
    qp = qp_fit([(k, k * k) for k in range(12)], 2, 3)
    assert qp.is_polynomial()
    assert qp.poly == (0, 0, 1)


def test_qp_fit_errors():
    with pytest.raises(ValueError):
        qp_fit([(0, 1), (2, 1)], 1, 2)  # class 1 empty
    with pytest.raises(ValueError):
        qp_fit([(k, k ** 3) for k in range(10)], 1, 1)  # inconsistent
    with pytest.raises(ValueError):
        qp_fit([(0, 0), (2, 2), (1, 0), (3, 6)], 1, 2)  # leading coefficient depends on the class


@settings(max_examples=60)
@given(st.integers(1, 5), st.integers(0, 3), st.data())
def test_qp_fit_roundtrip(period, degree, data):
    rat = st.fractions(min_value=-5, max_value=5, max_denominator=7)
    poly = [data.draw(rat) for _ in range(degree + 1)]
    rows = [[data.draw(rat) for _ in range(degree)] for _ in range(period)]
    for s in range(degree):
        mean = sum(r[s] for r in rows) / period
        for r in rows:
            r[s] -= mean
    qp = QuasiPolynomial(degree, period, tuple(poly), tuple(tuple(r) for r in rows))
    fit = qp_fit([(k, qp.eval(k)) for k in range(period * (degree + 2))], degree, period)
    assert fit == qp
    assert all(a == 0 for a in fit.periodic_average())
    assert QuasiPolynomial.from_json(fit.to_json()) == fit


def test_bivariate_fits():
    grid = [((k, j), k * j) for k in range(6) for j in range(6)]
    qp = qp2_fit(grid, 2, 1)
    assert qp.poly[(1, 1)] == 1 and all(v == 0 for key, v in qp.poly.items() if key != (1, 1))
    floor = qp2_fit([((k, j), j // 2) for k in range(8) for j in range(8)], 1, 2)
    assert floor.poly[(0, 1)] == Fraction(1, 2)
    assert floor.poly[(0, 0)] == Fraction(-1, 4)
    assert all(v == 0 for v in floor.periodic_average().values())


def test_bivariate_section_counts_on_p12():
    X, L = weighted_line(2)
    Z = make_divisor(X, {Fraction(0): Fraction(1, 2)})
    samples = [((k, j), h0_exact(X, L * k - Z * j)) for k in range(6, 14) for j in range(0, 4)]
    qp = qp2_fit(samples, 1, 2)
    assert qp.poly[(1, 0)] == Fraction(1, 2)
    assert qp.poly[(0, 1)] == Fraction(-1, 2)


def test_weighted_shift_sum():
    H = qp_fit([(k, k // 2 + 1) for k in range(10)], 1, 2)
    out = weighted_shift_sum(H, ci_weights(2, 5))
    assert out.is_polynomial()
    poly = QuasiPolynomial.from_poly([1, 2])
    w = ci_weights(3, 1)
    res = weighted_shift_sum(poly, w)
    for k in range(5):
        assert res.eval(k) == sum(c * (1 + 2 * (k + i)) for i, c in enumerate(w.c))


def test_exact_linear_algebra():
    sol = solve_exact([[Fraction(2), Fraction(1)], [Fraction(1), Fraction(3)]], [Fraction(3), Fraction(5)])
    assert sol == [Fraction(4, 5), Fraction(7, 5)]
    with pytest.raises(ValueError):
        solve_exact([[Fraction(1), Fraction(2)], [Fraction(2), Fraction(4)]], [Fraction(1), Fraction(2)])
    assert interpolate([(0, Fraction(1)), (1, Fraction(3)), (2, Fraction(7))], 2) == [1, 1, 1]
    assert poly_mul([1, 1], [1, -1]) == [1, 0, -1]
    assert poly_integral([0, 2], 0, 3) == 9


def test_rational_helpers():
    assert as_rational("3/6") == Fraction(1, 2)
    assert rational_str(Fraction(4)) == "4/1"
    with pytest.raises(TypeError):
        as_rational(0.5)
