"""Profile, transform, and tail behavior, oracle-checked where possible."""

import math
from fractions import Fraction as F

import mpmath
import pytest

from weightlab.bounds import BoundPair, EnclosureError, Surd
from weightlab.profiles import (
    IDENTITY,
    LOG,
    AnalyticTail,
    ConstantTail,
    DivergentMomentError,
    ForbidTail,
    IndicatorAbove,
    LogEPlusRelative,
    LogPlusRelative,
    MassAbove,
    NonIntegrableError,
    Piece,
    Power,
    PowerProfile,
    ProfileFormatError,
    RangeTail,
    StepProfile,
    TailError,
    arc_of_scale,
    parse_decimal,
    profile_from_json,
    s_of_u,
    top_window,
    u_of_s,
)

mpmath.mp.dps = 40


def contains(bp, value, where="", tol=0.0):
    """Assert the enclosure contains ``value``; ``tol`` is relative slack
    for values that are themselves approximate (quadrature oracles)."""
    slack = tol * max(1.0, abs(float(value)))
    lo = bp.lo_float() - slack
    hi = bp.hi_float() + slack
    assert lo <= float(value) <= hi, f"{value} outside [{lo}, {hi}] {where}"


# ---------------------------------------------------------------------------
# coordinates
# ---------------------------------------------------------------------------

def test_coordinate_round_trip_exact_for_rationals():
    for u in (F(1, 2), F(1, 3), F(3, 4), F(1, 1024), F(999, 1000)):
        s = s_of_u(u)
        back = u_of_s(s)
        assert back.is_rational and back.as_fraction() == u


def test_scale_map_special_points():
    assert s_of_u(F(1)) == 1
    assert u_of_s(F(3, 4)).as_fraction() == F(1, 2)
    w = u_of_s(F(1, 2))  # 1 - sqrt(1/2) is irrational
    assert not w.is_rational
    enc = w.enclosure()
    contains(enc, 1 - math.sqrt(0.5))


def test_top_window_forms():
    lo, hi = top_window(F(1, 4), "u")
    assert (lo, hi) == (F(1, 8), F(1, 4))
    lo, hi = top_window(F(1, 4), "s")
    assert lo == F(1, 4) * (1 - F(1, 16)) and hi == F(1, 4) * F(7, 4)
    # full-scale arc: window (3/4, 1] in s
    lo, hi = top_window(F(1), "s")
    assert (lo, hi) == (F(3, 4), F(1))
    # surd arc: endpoints stay exact surds
    ell = arc_of_scale(F(1, 2))
    lo, hi = top_window(ell, "s")
    assert hi.compare(F(1, 2)) == 0  # l(2 - l) = x by construction
    assert lo.compare(F(1, 2)) < 0


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def test_transform_keys_distinguish_parameters():
    assert Power(F(2)).key != Power(F(3)).key
    assert IndicatorAbove(F(2)).key != IndicatorAbove(F(5, 2)).key
    c1 = LogPlusRelative(BoundPair(F(1), F(2)))
    c2 = LogPlusRelative(BoundPair(F(1), F(3)))
    assert c1.key != c2.key


def test_indicator_is_strictly_above():
    ind = IndicatorAbove(F(2))
    assert ind.apply(F(2)).is_exact and ind.apply(F(2)).lo == 0
    assert ind.apply(F(3)).lo == 1
    mass = MassAbove(F(2))
    assert mass.apply(F(2)).lo == 0
    assert mass.apply(F(3)).lo == 3


def test_logplus_clamps_below_level():
    t = LogPlusRelative(F(1))
    assert t.apply(F(1, 2)).is_exact and t.apply(F(1, 2)).lo == 0
    v = t.apply(F(4))
    contains(v, 4 * math.log(4))


def test_logep_monotone_sandwich():
    c = F(3, 2)
    plus = LogPlusRelative(c)
    smooth = LogEPlusRelative(c)
    for v in (F(1, 10), F(3, 2), F(50)):
        lo_ref = plus.apply(v)
        hi_ref = plus.apply(v) + BoundPair.exact(v) * BoundPair.exact(F(17, 10))
        s = smooth.apply(v)
        assert s.hi_float() >= lo_ref.lo_float()
        assert s.lo_float() <= hi_ref.hi_float()
        contains(s, float(v) * math.log(math.e + float(v) / float(c)))


# ---------------------------------------------------------------------------
# step profiles
# ---------------------------------------------------------------------------

def two_block(coord="s"):
    pieces = [Piece(F(1, 64), F(1, 4), F(8)), Piece(F(1, 4), F(1), F(1))]
    return StepProfile(coord, pieces, ConstantTail(
        F(1, 64) if coord == "s" else s_of_u(F(1, 64)), F(2)))


def test_step_moment_exact():
    prof = two_block()
    m = prof.moment(F(1), IDENTITY)
    expected = F(2) * F(1, 64) + F(8) * (F(1, 4) - F(1, 64)) + F(1) * F(3, 4)
    assert m.is_exact and m.lo == expected
    # partial scale cuts the last piece
    m2 = prof.moment(F(1, 2), IDENTITY)
    expected2 = F(2) * F(1, 64) + F(8) * (F(1, 4) - F(1, 64)) + F(1) * F(1, 4)
    assert m2.is_exact and m2.lo == expected2


def test_step_moment_u_native_matches_s_integration():
    pieces = [Piece(F(1, 4), F(1, 2), F(3)), Piece(F(1, 2), F(1), F(1))]
    prof = StepProfile("u", pieces, ConstantTail(s_of_u(F(1, 4)), F(1, 2)))
    # s-pieces: (7/16, 3/4] value 3, (3/4, 1] value 1
    m = prof.moment(F(1), IDENTITY)
    expected = F(1, 2) * F(7, 16) + F(3) * (F(3, 4) - F(7, 16)) + F(1, 4)
    assert m.is_exact and m.lo == expected


def test_step_average_and_power_moment():
    prof = two_block()
    avg = prof.average(F(1, 4))
    mass = F(2) * F(1, 64) + F(8) * F(15, 64)
    assert avg.is_exact and avg.lo == mass * 4
    sq = prof.moment(F(1, 4), Power(F(2)))
    assert sq.is_exact and sq.lo == F(4) * F(1, 64) + F(64) * F(15, 64)


def test_certified_infinite_tail_short_circuits():
    calls = []

    def moment_fn(transform):
        calls.append(transform.key)
        return BoundPair.pos_infinite("series-divergence")

    tail = AnalyticTail(F(1, 64), moment_fn, F(1), F(2))
    pieces = [Piece(F(1, 64), F(1), F(1))]
    prof = StepProfile("s", pieces, tail)
    m = prof.moment(F(1), IDENTITY)
    assert m.lo_is_infinite and m.note == "series-divergence"
    # memoized: second call does not re-invoke the tail
    prof.moment(F(1), IDENTITY)
    assert calls == ["id"]


def test_forbid_tail_raises_tail_error():
    pieces = [Piece(F(1, 64), F(1), F(1))]
    prof = StepProfile("s", pieces, ForbidTail(F(1, 64)))
    with pytest.raises(TailError):
        prof.moment(F(1), IDENTITY)


def test_scale_too_deep_rejected():
    prof = two_block()  # tail boundary 1/64
    with pytest.raises(TailError):
        prof.moment(F(1, 128), IDENTITY)
    # moments work right above the boundary ...
    assert prof.moment(F(1, 32), IDENTITY).is_exact
    # ... but order statistics need the 4x slack margin
    with pytest.raises(TailError):
        prof.median(F(1, 32))


def test_range_tail_geometric_identity_only():
    tail = RangeTail(F(1, 16), F(0), F(4), mass_first=F(1, 100), ratio=F(1, 2))
    pieces = [Piece(F(1, 16), F(1), F(1))]
    prof = StepProfile("s", pieces, tail)
    m = prof.moment(F(1), IDENTITY)
    assert m.lo == F(1, 100) + F(15, 16)
    assert m.hi == F(1, 50) + F(15, 16)
    # non-identity transforms fall back to the range bound
    sq = prof.moment(F(1), Power(F(2)))
    assert sq.lo == F(15, 16) and sq.hi == F(16) * F(1, 16) + F(15, 16)


def test_median_two_block():
    prof = two_block()
    med = prof.median(F(1))  # half of the scale sits in the value-1 block
    assert med.is_exact and med.lo == 1
    med2 = prof.median(F(1, 4))  # mostly the value-8 block
    assert med2.is_exact and med2.lo == 8


def test_median_brackets_when_tail_straddles():
    # target x/2 = 1/8; value-3 block has length 1/8 - 1/64 just below it,
    # so the tail slack (1/64) makes the lower and upper medians differ.
    pieces = [Piece(F(1, 64), F(1, 8), F(3)), Piece(F(1, 8), F(1), F(5))]
    prof = StepProfile("s", pieces, ConstantTail(F(1, 64), F(1)))
    med = prof.median(F(1, 4))
    assert (med.lo, med.hi) == (F(3), F(5))


def test_ess_range_with_surd_window():
    prof = two_block()
    lo, hi = top_window(F(1), "s")  # (3/4, 1]
    inf, sup = prof.ess_range(lo, hi)
    assert inf.is_exact and inf.lo == 1 and sup.is_exact and sup.lo == 1
    # window crossing the piece edge at 1/4
    inf, sup = prof.ess_range(F(1, 8), F(1, 2))
    assert inf.lo == 1 and sup.lo == 8
    # zero-measure touch at an endpoint does not count
    inf, sup = prof.ess_range(F(1, 4), F(1, 2))
    assert inf.lo == 1 and sup.lo == 1
    # window dipping into the tail picks up the tail range
    inf, sup = prof.ess_range(F(1, 128), F(1, 32))
    assert inf.lo == 2 and sup.lo == 8


def test_values_monotone_flags():
    inc_pieces = [Piece(F(1, 16), F(1, 2), F(1)), Piece(F(1, 2), F(1), F(3))]
    prof = StepProfile("s", inc_pieces, ConstantTail(F(1, 16), F(1, 2)))
    assert prof.values_nondecreasing_in_t()
    assert prof.disc_monotone() == "DEC"
    dec_pieces = [Piece(F(1, 16), F(1, 2), F(3)), Piece(F(1, 2), F(1), F(1))]
    prof2 = StepProfile("s", dec_pieces, ConstantTail(F(1, 16), F(4)))
    assert not prof2.values_nondecreasing_in_t()
    assert prof2.disc_monotone() == "INC"
    # tail breaks the monotonicity certificate
    prof3 = StepProfile("s", dec_pieces, ConstantTail(F(1, 16), F(2)))
    assert prof3.disc_monotone() is None


# ---------------------------------------------------------------------------
# power profiles, oracle-checked against direct quadrature
# ---------------------------------------------------------------------------

def quad(fn, a, b, splits=()):
    pts = [a] + [p for p in sorted(splits) if a < p < b] + [b]
    return float(mpmath.quad(fn, pts))


@pytest.mark.parametrize("r", [F(1, 2), F(2), F(-1, 2), F(-3, 4)])
@pytest.mark.parametrize("x", [F(1, 3), F(1), F(9, 10)])
def test_power_identity_moment_matches_quadrature(r, x):
    prof = PowerProfile(r)
    m = prof.moment(x, IDENTITY)
    oracle = quad(lambda s: (1 - s) ** float(r), 0, float(x))
    contains(m, oracle, f"r={r} x={x}", tol=1e-9)


def test_power_moment_divergence_rule():
    prof = PowerProfile(F(-1, 2))
    with pytest.raises(DivergentMomentError):
        prof.moment(F(1), Power(F(2)))  # exponent -1 at full scale
    # away from full scale the same moment is finite
    m = prof.moment(F(99, 100), Power(F(2)))
    oracle = quad(lambda s: 1 / (1 - s), 0, 0.99)
    contains(m, oracle, tol=1e-12)
    # integrability guard at construction
    with pytest.raises(NonIntegrableError):
        PowerProfile(F(-3, 2))


def test_power_log_moment():
    prof = PowerProfile(F(1, 2))
    m = prof.moment(F(1), LOG)
    assert m.is_exact and m.lo == F(-1, 2)  # r * (-1)
    m2 = prof.moment(F(1, 2), LOG)
    oracle = quad(lambda s: 0.5 * math.log(1 - s), 0, 0.5)
    contains(m2, oracle, tol=1e-12)


@pytest.mark.parametrize("r", [F(1, 2), F(-1, 2)])
@pytest.mark.parametrize("lam", [F(1, 4), F(3, 4), F(2)])
def test_power_superlevel_matches_quadrature(r, lam):
    prof = PowerProfile(r)
    x = F(4, 5)
    meas = prof.moment(x, IndicatorAbove(lam))
    mass = prof.moment(x, MassAbove(lam))
    fr = float(r)
    fl = float(lam)
    cut = 1.0 - fl ** (1.0 / fr)  # level crossing of (1-s)^r = lam
    oracle_meas = quad(lambda s: 1.0 if (1 - s) ** fr > fl else 0.0,
                       0, float(x), splits=[cut])
    oracle_mass = quad(lambda s: (1 - s) ** fr if (1 - s) ** fr > fl else 0.0,
                       0, float(x), splits=[cut])
    contains(meas, oracle_meas, f"measure r={r} lam={lam}", tol=1e-9)
    contains(mass, oracle_mass, f"mass r={r} lam={lam}", tol=1e-9)


@pytest.mark.parametrize("r", [F(1, 2), F(-1, 2)])
@pytest.mark.parametrize("c", [F(1, 2), F(5, 4)])
def test_power_entropy_moment_matches_quadrature(r, c):
    prof = PowerProfile(r)
    x = F(3, 4)
    got = prof.moment(x, LogPlusRelative(c))
    fr, fc = float(r), float(c)

    def integrand(s):
        v = (1 - s) ** fr
        return v * math.log(v / fc) if v > fc else 0.0

    cut = 1.0 - fc ** (1.0 / fr)
    oracle = quad(integrand, 0, float(x), splits=[cut])
    contains(got, oracle, f"entropy r={r} c={c}", tol=1e-9)


def test_power_logep_brackets_quadrature():
    prof = PowerProfile(F(-1, 2))
    c = F(2)
    x = F(9, 10)
    got = prof.moment(x, LogEPlusRelative(c))

    def integrand(s):
        v = (1 - s) ** -0.5
        return v * math.log(math.e + v / 2.0)

    oracle = quad(integrand, 0, float(x))
    assert got.lo_float() <= oracle <= got.hi_float()


def test_power_median_and_ess():
    prof = PowerProfile(F(2))
    med = prof.median(F(1, 2))
    assert med.is_exact and med.lo == F(9, 16)  # (1 - 1/4)^2
    inf, sup = prof.ess_range(F(0), F(1, 2))
    assert sup.is_exact and sup.lo == 1
    contains(inf, 0.25)
    # negative exponent: singular at full scale
    prof2 = PowerProfile(F(-1, 2))
    inf2, sup2 = prof2.ess_range(F(3, 4), F(1))
    assert not sup2.is_finite
    contains(inf2, 2.0)


def test_power_average_scaling():
    prof = PowerProfile(F(1))  # f = 1 - s, mass over (0,x] = x - x^2/2
    avg = prof.average(F(1, 2))
    assert avg.is_exact and avg.lo == F(3, 4)


# ---------------------------------------------------------------------------
# JSON I/O
# ---------------------------------------------------------------------------

def test_profile_json_round_trip():
    doc = """
    {"coordinate": "u",
     "breakpoints": ["0.015625", "0.25", "1"],
     "values": ["4", "1"],
     "tail": {"kind": "constant", "value": "2"}}
    """
    prof = profile_from_json(doc, name="demo")
    assert prof.coordinate == "u"
    assert prof.native_pieces[0] == Piece(F(1, 64), F(1, 4), F(4))
    assert prof.s_boundary == s_of_u(F(1, 64))
    m = prof.moment(F(1), IDENTITY)
    assert m.is_exact


@pytest.mark.parametrize("doc", [
    "not json",
    "[1, 2]",
    '{"coordinate": "s", "breakpoints": ["0.5"], "values": []}',
    '{"coordinate": "s", "breakpoints": ["0.5", "0.25", "1"], "values": ["1", "2"]}',
    '{"coordinate": "q", "breakpoints": ["0.25", "1"], "values": ["1"]}',
    '{"coordinate": "s", "breakpoints": ["0.25", "1"], "values": ["-1"]}',
    '{"coordinate": "s", "breakpoints": ["0.25", "1"], "values": ["1"],'
    ' "tail": {"kind": "mystery"}}',
    '{"coordinate": "s", "breakpoints": ["0.25", "1"], "values": ["1"],'
    ' "tail": {"kind": "constant"}}',
    '{"coordinate": "s", "breakpoints": ["0.25", "0.9"], "values": ["1x"]}',
])
def test_profile_json_malformed(doc):
    with pytest.raises(ProfileFormatError):
        profile_from_json(doc)


def test_parse_decimal_forms():
    assert parse_decimal("0.125") == F(1, 8)
    assert parse_decimal("1e-3") == F(1, 1000)
    assert parse_decimal("3/7") == F(3, 7)
    with pytest.raises(ProfileFormatError):
        parse_decimal("zebra")
