"""Shared generators and independent oracles for the tests."""

import random
from fractions import Fraction

from orbistab.orbicurve import OrbiCurve, make_divisor


def random_curve(rng: random.Random, max_genus: int = 3, max_points: int = 6, max_order: int = 12) -> OrbiCurve:
    g = rng.randint(0, max_genus)
    r = rng.randint(0, max_points)
    orders = [rng.randint(2, max_order) for _ in range(r)]
    if g == 0:
        coords = rng.sample(range(-20, 20), r)
        return OrbiCurve.build(0, [(f"p{i + 1}", c, m) for i, (c, m) in enumerate(zip(coords, orders))])
    return OrbiCurve.build(g, [(f"p{i + 1}", None, m) for i, m in enumerate(orders)])


def ample_divisor(X: OrbiCurve, rng: random.Random | None = None):
    """sum (a_i/m_i) p_i with a_i coprime to m_i, plus enough of a smooth point to make the degree positive."""
    rng = rng or random.Random(0)
    terms = {}
    for mk in X.markings:
        a = rng.choice([a for a in range(1, mk.m) if _gcd(a, mk.m) == 1])
        terms[mk.coord if X.genus == 0 else mk.label] = Fraction(a, mk.m)
    frac = sum(terms.values(), Fraction(0))
    terms[X.free_point()] = rng.randint(1, 3) - int(frac)
    return make_divisor(X, terms)


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def stability_margin_oracle(genus: int, orders) -> Fraction:
    """2g + sum(1 - 1/m) - 2 max(1 - 1/m), written out directly."""
    defects = [Fraction(m - 1, m) for m in orders]
    top = max(defects) if defects else Fraction(0)
    return 2 * genus + sum(defects) - 2 * top
