import math
from fractions import Fraction as F

import pytest

from weightlab.bounds import (
    INF,
    BoundPair,
    EnclosureError,
    Surd,
    bp_max,
    bp_min,
    bp_sum,
    frac_to_float,
    pow2_bounds,
    rational_between,
    sqrt_frac_bounds,
)


def test_exact_lane_stays_exact():
    a = BoundPair.exact(F(3, 7))
    b = BoundPair.exact(F(2, 5))
    for r in (a + b, a - b, a * b, a / b):
        assert r.is_exact
    assert (a * b).lo == F(6, 35)
    assert (a / b).lo == F(15, 14)


def test_directed_conversion_brackets_value():
    for x in (F(1, 3), F(10, 7), F(-22, 7), F(1, 10**40), F(10**40), -F(10**321)):
        lo = frac_to_float(x, up=False)
        hi = frac_to_float(x, up=True)
        if not math.isinf(lo):
            assert F(lo) <= x
        if not math.isinf(hi):
            assert x <= F(hi)


def test_overflow_and_underflow_guards():
    assert frac_to_float(F(10**400), up=False) == pytest.approx(1.7976931348623157e308)
    assert frac_to_float(F(10**400), up=True) == INF
    assert frac_to_float(F(1, 10**400), up=False) == 0.0
    assert frac_to_float(F(1, 10**400), up=True) == 5e-324


def test_mixed_lane_mul_encloses():
    a = BoundPair(F(1, 3))
    b = BoundPair(0.2, 0.3)
    r = a * b
    assert r.lo_float() <= (1 / 3) * 0.2 <= (1 / 3) * 0.3001 <= r.hi_float() * 1.001


def test_transcendental_constant_enclosures():
    import mpmath
    from weightlab.bounds import E_HI, E_LO, LOG2_HI, LOG2_LO

    mpmath.mp.dps = 50
    e_ref = mpmath.exp(1)
    log2_ref = mpmath.log(2)
    assert mpmath.mpf(E_LO.numerator) / E_LO.denominator < e_ref
    assert e_ref < mpmath.mpf(E_HI.numerator) / E_HI.denominator
    assert E_HI - E_LO == F(1, 10**37)
    assert mpmath.mpf(LOG2_LO.numerator) / LOG2_LO.denominator < log2_ref
    assert log2_ref < mpmath.mpf(LOG2_HI.numerator) / LOG2_HI.denominator


def test_ln_exact_powers_of_two():
    r = BoundPair(F(1, 8)).ln()
    assert isinstance(r.lo, F) and isinstance(r.hi, F)
    # brackets -3*ln2 far more tightly than a double could
    assert r.lo < F(-207944154167983592825169636437452970415, 10**38) < r.hi
    assert float(r.width()) < 1e-30


def test_ln_of_huge_fraction():
    n = 10**500
    r = BoundPair(F(n)).ln()
    true = 500 * math.log(10)
    assert r.lo_float() <= true <= r.hi_float()
    assert r.hi_float() - r.lo_float() < 1e-9


def test_exp_overflow_encoding():
    r = BoundPair(800.0).exp()
    assert r.lo == pytest.approx(1.7976931348623157e308)
    assert r.hi == INF
    r = BoundPair(-800.0).exp()
    assert r.lo == 0.0
    assert r.hi == 5e-324


def test_pow_integer_exact():
    r = BoundPair.exact(F(3, 2)).pow(4)
    assert r.is_exact and r.lo == F(81, 16)
    r = BoundPair.exact(F(3, 2)).pow(-2)
    assert r.is_exact and r.lo == F(4, 9)


def test_pow_fractional_brackets():
    r = BoundPair.exact(2).pow(F(1, 2))
    s = math.sqrt(2)
    assert r.lo_float() <= s <= r.hi_float()
    assert r.hi_float() - r.lo_float() < 1e-10


def test_pow2_bounds_huge_exponents():
    r = pow2_bounds(F(-3000000))
    assert r.lo == 0 or r.lo_float() == 0.0
    assert F(r.hi) == F(1, 1 << 3000000)
    r = pow2_bounds(F(10**9))  # beyond the cap
    assert r.hi == INF


def test_squeeze_caps_mantissa():
    b = BoundPair(F(10**30000 + 1, 10**30000))  # ~200k bits total
    # endpoints must still bracket the value but carry small mantissas
    assert b.lo <= F(10**30000 + 1, 10**30000) <= b.hi
    assert min(b.lo.numerator.bit_length(), b.lo.denominator.bit_length()) <= 520


def test_infinite_note_propagates():
    inf = BoundPair.pos_infinite("divergent-moment")
    assert (inf + 1).note == "divergent-moment"
    assert (BoundPair.exact(3) * inf).note == "divergent-moment"
    assert (inf / 4).note == "divergent-moment"


def test_zero_times_infinity_is_zero():
    z = BoundPair.exact(0)
    inf = BoundPair.pos_infinite()
    assert (z * inf).lo == 0 and (z * inf).hi == 0


def test_reciprocal_across_zero_rejected():
    with pytest.raises(EnclosureError):
        BoundPair(-1, 1).reciprocal()


def test_hull_min_max_sum():
    a = BoundPair.exact(1)
    b = BoundPair(F(2), F(3))
    assert bp_max([a, b]).lo == 2 and bp_max([a, b]).hi == 3
    assert bp_min([a, b]).lo == 1 and bp_min([a, b]).hi == 1
    assert bp_sum([a, b]).lo == 3 and bp_sum([a, b]).hi == 4
    h = a.hull(b)
    assert h.lo == 1 and h.hi == 3


def test_sqrt_frac_exact_on_squares():
    lo, hi = sqrt_frac_bounds(F(9, 4))
    assert lo == hi == F(3, 2)
    lo, hi = sqrt_frac_bounds(F(2))
    assert lo < hi and hi - lo < F(1, 2**78)
    assert lo * lo <= 2 <= hi * hi


def test_surd_comparisons_exact():
    s = Surd(1) - Surd.sqrt(F(3, 4))  # 1 - sqrt(3)/2 ~ 0.1339
    assert s.compare(F(1, 8)) > 0
    assert s.compare(F(1, 7)) < 0
    assert Surd.sqrt(2).compare(Surd.sqrt(2)) == 0
    assert Surd.sqrt(2).compare(Surd.sqrt(3)) < 0
    assert (Surd(1, 1, 2)).compare(Surd(0, 1, 9)) < 0  # 1+sqrt2 < 3
    assert Surd(0, 2, 2).compare(Surd(0, 1, 8)) == 0  # 2*sqrt2 == sqrt8


def test_surd_perfect_square_collapses():
    s = Surd(1, 2, F(9, 16))
    assert s.is_rational and s.as_fraction() == 1 + 2 * F(3, 4)


def test_rational_between_is_strictly_between():
    a = Surd(1) - Surd.sqrt(F(3, 4))
    b = F(1, 7)
    m = rational_between(a, b)
    assert a.compare(m) < 0 and Surd.of(b).compare(m) > 0


def test_boundpair_rejects_inverted():
    with pytest.raises(EnclosureError):
        BoundPair(2, 1)


def test_definitely_comparisons():
    b = BoundPair(F(2), F(3))
    assert b.definitely_ge(2) and not b.definitely_ge(F(5, 2))
    assert b.definitely_le(3) and b.definitely_gt(1) and b.definitely_lt(4)
