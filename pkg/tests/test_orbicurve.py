import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbistab.orbicurve import (
    INFINITY, OrbiCurve, QDivisor, canonical_orb, curve_from_json, deg_canonical, deg_orb, football,
    h0_exact, h0_quasi, is_orbi_ample, load_problem, make_divisor, power_is_ample, projective_line,
    round_down, section_basis, weighted_line, weighted_projective_line,
)

from helpers import ample_divisor, random_curve


def lattice_count(a0: Fraction, ainf: Fraction) -> int:
    """Sections of a0 (0) + ainf (infinity) are x^j with -a0 <= j <= ainf."""
    return sum(1 for j in range(-200, 201) if -a0 <= j <= ainf)


def test_degrees():
    X = OrbiCurve.build(0, [("p1", 0, 2), ("p2", 1, 3)])
    assert deg_orb(make_divisor(X, {0: Fraction(1, 2), 1: Fraction(1, 3)})) == Fraction(5, 6)
    assert deg_orb(QDivisor()) == 0
    for a, b in ((1, 2), (2, 3), (3, 5), (1, 1)):
        assert deg_orb(weighted_projective_line(a, b)[1]) == Fraction(1, a * b)


def test_canonical_degrees():
    assert deg_canonical(weighted_line(3)[0]) == Fraction(-4, 3)
    for m in range(2, 7):
        assert deg_canonical(football(m)[0]) == Fraction(-2, m)
    assert deg_canonical(OrbiCurve(2)) == 2
    X = random_curve(random.Random(4))
    assert deg_orb(canonical_orb(X)) == deg_canonical(X)


def test_round_down():
    X = OrbiCurve.build(0, [("p", 0, 3)])
    assert round_down(make_divisor(X, {0: Fraction(7, 3)})) == QDivisor.of({Fraction(0): 2})
    assert round_down(make_divisor(X, {0: Fraction(-1, 3)})) == QDivisor.of({Fraction(0): -1})
    D = QDivisor.of({Fraction(5): 2})
    assert round_down(D) == D


def test_h0_examples():
    X, L = weighted_line(3)
    assert h0_exact(X, L * 7) == 3
    X2, L2 = football(2, 2)
    assert h0_exact(X2, L2 * 5) == 5
    assert h0_exact(X, QDivisor.of({Fraction(0): -1})) == 0


@given(st.integers(1, 7), st.integers(1, 7), st.integers(0, 40))
def test_h0_matches_lattice_count(m0, minf, k):
    X = OrbiCurve.build(0, [(p, c, m) for p, c, m in (("a", 0, m0), ("b", "inf", minf)) if m > 1])
    D = QDivisor.of({Fraction(0): Fraction(k, m0), INFINITY: Fraction(k, minf)})
    assert h0_exact(X, D) == lattice_count(Fraction(k, m0), Fraction(k, minf))


def test_section_basis():
    X, L = weighted_line(3)
    B = section_basis(X, L * 7, center=INFINITY)
    assert len(B) == 3 and B.laurent_exponents() == [-2, -1, 0]  # poles allowed at 0
    assert len(section_basis(X, QDivisor())) == 1
    X2, L2 = football(2, 2)
    B2 = section_basis(X2, L2 * 2)
    assert len(B2) == 3
    x = np.exp(1j * np.linspace(0, 6, 9)) * np.linspace(0.5, 2, 9)
    V = B2.evaluate(x)
    gram = V.conj() @ V.T
    assert np.all(np.linalg.eigvalsh(gram) > 0)


def test_orbi_ample():
    X, L = weighted_line(3)
    assert is_orbi_ample(X, L)[0]
    X2, _ = football(2, 2)
    assert not is_orbi_ample(X2, make_divisor(X2, {0: 1, INFINITY: Fraction(1, 2)}))[0]
    Xt, Lt = weighted_line(2)
    assert not is_orbi_ample(Xt, Lt * 2)[0]
    assert [power_is_ample(Xt, Lt, k) for k in range(1, 6)] == [True, False, True, False, True]


def test_divisor_validation():
    X, _ = weighted_line(2)
    with pytest.raises(ValueError):
        make_divisor(X, {0: Fraction(1, 3)})
    with pytest.raises(ValueError):
        OrbiCurve.build(0, [("a", 0, 2), ("b", 0, 3)])
    with pytest.raises(ValueError):
        OrbiCurve.build(0, [("a", 0, 1)])


def test_h0_quasi_examples():
    X, L = weighted_line(2)
    qp = h0_quasi(X, L)
    assert qp.poly == (Fraction(3, 4), Fraction(1, 2))
    qp1 = h0_quasi(*projective_line())
    assert qp1.poly == (1, 1) and qp1.is_polynomial()
    X3, L3 = football(3, 3)
    qp3 = h0_quasi(X3, L3)
    assert qp3.poly[1] == Fraction(2, 3) and all(a == 0 for a in qp3.periodic_average())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_h0_quasi_agrees_with_counts(seed):
    rng = random.Random(seed)
    X = random_curve(rng, max_genus=0, max_points=3, max_order=6)
    L = ample_divisor(X, rng)
    qp = h0_quasi(X, L)
    for k in range(8, 20):
        assert qp.eval(k) == h0_exact(X, L * k)
    assert qp.poly[0] == -deg_canonical(X) / 2


def test_json_roundtrip():
    X, L = load_problem({"genus": 0, "markings": [{"label": "p1", "coord": 0, "m": 5}],
                         "divisor": [{"coord": 0, "coeff": "1/5"}]})
    assert X.orders == [5] and deg_orb(L) == Fraction(1, 5)
    assert curve_from_json(X.to_json()) == X
