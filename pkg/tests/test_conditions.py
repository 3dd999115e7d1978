import math
from fractions import Fraction as F

import pytest

from weightlab.bounds import BoundPair, Surd
from weightlab.profiles import (
    ConstantTail,
    Piece,
    PowerProfile,
    RangeTail,
    StepProfile,
    arc_of_scale,
)
from weightlab.conditions import (
    ALPHA_COARSE,
    P8_BETA_GRID,
    P_GRID,
    RunConfig,
    ac_ratio,
    ac_sweep,
    b1_functional,
    classify,
    classify_samples,
    concentration_curve,
    p1_functional,
    p5_functional,
    p6_functional,
    p6e_functional,
    p7_functional,
    p8_worst,
    rh_functional,
    rj_functional,
    sweep_scales,
)

mp = pytest.importorskip("mpmath")
mp.mp.dps = 40


def contains(bp, value, where="", tol=0.0):
    lo, hi = bp.lo_float(), bp.hi_float()
    v = float(value)
    slack = tol * max(1.0, abs(v))
    assert lo - slack <= v <= hi + slack, f"{where}: {v} not in [{lo}, {hi}]"


def exact_profile(pieces, coordinate="s"):
    return StepProfile(coordinate, pieces, ConstantTail(0, 1), name="test")


@pytest.fixture
def flat():
    return exact_profile([Piece(F(0), F(1), F(5))])


@pytest.fixture
def two_block():
    return exact_profile([Piece(F(0), F(1, 4), F(8)),
                          Piece(F(1, 4), F(1), F(1))])


# ---------------------------------------------------------------------------
# pointwise functionals against hand oracles
# ---------------------------------------------------------------------------

def test_p1_constant_is_one(flat):
    for p in (F(3, 2), F(2), F(5)):
        v = p1_functional(flat, F(1), p)
        contains(v, 1, f"p1 p={p}", tol=1e-12)


def test_p1_two_block_exact(two_block):
    # avg = 11/4, avg f^-1 = 25/32, p = 2
    v = p1_functional(two_block, F(1), F(2))
    contains(v, F(11, 4) * F(25, 32), "p1 two_block", tol=1e-12)


def test_rj_two_block_oracle(two_block):
    v = rj_functional(two_block, F(1))
    oracle = (11 / 4) / float(mp.exp(mp.log(8) / 4))
    contains(v, oracle, "rj", tol=1e-9)
    assert v.lo_float() >= 1 - 1e-12


def test_rh_two_block_oracle(two_block):
    v = rh_functional(two_block, F(1), F(2))
    oracle = float(mp.sqrt(F(67, 4)) / F(11, 4))
    contains(v, oracle, "rh", tol=1e-9)
    assert v.lo_float() >= 1 - 1e-12


def test_p5_two_block_exact(two_block):
    v = p5_functional(two_block, F(1))
    contains(v, F(11, 4), "p5", tol=0.0)
    assert v.is_exact


def test_p6_two_block_oracle(two_block):
    v = p6_functional(two_block, F(1))
    oracle = float(2 * mp.log(F(32, 11)) / F(11, 4))
    contains(v, oracle, "p6", tol=1e-9)


def test_p6_sandwich(two_block):
    for x in (F(1), F(1, 2), F(1, 8)):
        p6 = p6_functional(two_block, x)
        p6e = p6e_functional(two_block, x)
        assert p6.lo_float() <= p6e.hi_float() + 1e-12
        assert p6e.lo_float() <= 1 + math.log(2) + p6.hi_float() + 1e-9


def test_p7_nondecreasing_profile_is_exactly_one():
    increasing = exact_profile([Piece(F(0), F(1, 4), F(1)),
                                Piece(F(1, 4), F(1), F(8))])
    v = p7_functional(increasing, F(1))
    assert v.is_exact and v.lo == 1


def test_p7_exceeds_one_for_decreasing(two_block):
    v = p7_functional(two_block, F(1))
    assert v.lo_float() > 1.0
    assert v.hi_float() < 10.0


def test_b1_exact_and_tail_zero_inf(two_block):
    v = b1_functional(two_block, F(1))
    contains(v, F(11, 4), "b1", tol=0.0)
    # a tail whose essential infimum is exactly zero certifies divergence
    prof = StepProfile(
        "s",
        [Piece(F(1, 16), F(1, 4), F(8)), Piece(F(1, 4), F(1), F(1))],
        RangeTail(F(1, 16), F(0), F(1), mass_first=F(1, 32), ratio=F(1, 2)),
        name="zero-inf")
    v2 = b1_functional(prof, F(1))
    assert v2.lo_is_infinite


def test_b1_power_profiles():
    dec = PowerProfile(F(1, 2))       # f decreasing in s, inf -> 0 at x = 1
    assert b1_functional(dec, F(1)).lo_is_infinite
    inc = PowerProfile(F(-1, 2))      # f increasing from 1: ess inf = 1
    contains(b1_functional(inc, F(1)), 2, "b1 power", tol=1e-12)


# ---------------------------------------------------------------------------
# p8
# ---------------------------------------------------------------------------

def test_p8_constant_vacuous(flat):
    for beta in P8_BETA_GRID:
        v, aux = p8_worst(flat, F(1), beta)
        assert v.is_exact and v.lo == 0


def test_p8_two_block_exact(two_block):
    v, aux = p8_worst(two_block, F(1), F(1))
    assert v.is_exact and v.lo == F(32, 11)
    assert aux["lam"] is not None
    v2, _ = p8_worst(two_block, F(1), F(1, 2))
    assert v2.is_exact and v2.lo == F(32, 11)


def test_p8_candidates_beat_dense_grid(two_block):
    for beta in (F(1), F(1, 4)):
        value, _ = p8_worst(two_block, F(1), beta)
        best = 0.0
        avg = 11 / 4
        for i in range(2000):
            lam = F(avg * (1.0001 ** i)).limit_denominator(10 ** 9)
            from weightlab.conditions import _level_stats
            stats = _level_stats(two_block, F(1))
            r = stats.ratio(BoundPair.exact(lam), beta)
            best = max(best, r.lo_float())
        assert best <= value.hi_float() + 1e-9


def test_p8_unbounded_tail_needs_hook():
    from weightlab.profiles import AnalyticTail, IDENTITY

    def tail_moment(transform):
        if transform.kind == "identity":
            return BoundPair(F(1, 64), F(1, 32))
        raise NotImplementedError

    tail = AnalyticTail(F(1, 16), tail_moment,
                        value_inf=BoundPair.exact(1),
                        value_sup=BoundPair(F(1), float("inf")))
    prof = StepProfile("s", [Piece(F(1, 16), F(1), F(2))], tail, name="hookless")
    v, _ = p8_worst(prof, F(1), F(1, 2))
    assert math.isinf(v.hi_float())

    tail2 = AnalyticTail(F(1, 16), tail_moment,
                         value_inf=BoundPair.exact(1),
                         value_sup=BoundPair(F(1), float("inf")))
    tail2.weak_ratio_fn = lambda beta: F(7)
    prof2 = StepProfile("s", [Piece(F(1, 16), F(1), F(2))], tail2, name="hooked")
    v2, _ = p8_worst(prof2, F(1), F(1, 2))
    assert v2.hi_float() <= 7.0 + 1e-12


def test_p8_power_profile_sane():
    prof = PowerProfile(F(-1, 2))
    v, aux = p8_worst(prof, F(1), F(1, 2))
    # exact constant region: beta^(-1/r)/(r+1) = (1/2)^2 / (1/2) = 1/2;
    # the supremum is max(avg-candidate, constant) and avg = 2
    assert v.lo_float() > 0
    assert v.hi_float() < 10
    const = (1 / 2) ** 2 / (1 / 2)
    assert v.hi_float() >= const - 1e-9
    prof2 = PowerProfile(F(2))
    v2, _ = p8_worst(prof2, F(1, 2), F(1, 2))
    assert 0 <= v2.lo_float() <= v2.hi_float() < 50


# ---------------------------------------------------------------------------
# concentration
# ---------------------------------------------------------------------------

def test_concentration_two_block_exact(two_block):
    curve = concentration_curve(two_block, F(1))
    assert curve.at(F(0)).lo == 0
    for alpha, want in [(F(1, 8), F(4, 11)), (F(1, 4), F(8, 11)),
                        (F(1, 2), F(9, 11)), (F(1), F(1))]:
        got = curve.at(alpha)
        assert got.is_exact and got.lo == want, (alpha, got)


def test_concentration_spec_example():
    prof = exact_profile([Piece(F(0), F(1, 2), F(3)),
                          Piece(F(1, 2), F(1), F(1))])
    assert concentration_curve(prof, F(1)).at(F(1, 2)).lo == F(3, 4)


def test_concentration_exhaustive_small():
    import itertools
    lengths = [F(1, 8), F(1, 8), F(1, 4), F(1, 8), F(1, 4), F(1, 8)]
    values = [F(7), F(2), F(5), F(1), F(3), F(4)]
    edges = [F(0)]
    for ln in lengths:
        edges.append(edges[-1] + ln)
    prof = exact_profile([Piece(a, b, v) for a, b, v in
                          zip(edges, edges[1:], values)])
    curve = concentration_curve(prof, F(1))
    for mask in itertools.product([0, 1], repeat=6):
        measure = sum(l for l, m in zip(lengths, mask) if m)
        mass = sum(l * v for l, v, m in zip(lengths, values, mask) if m)
        total = sum(l * v for l, v in zip(lengths, values))
        assert mass / total <= curve.at(measure).hi_float() + 1e-15


def test_concentration_curve_concave_nondecreasing(two_block):
    curve = concentration_curve(two_block, F(1))
    grid = [F(k, 16) for k in range(17)]
    vals = [curve.at(a).lo for a in grid]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    diffs = [b - a for a, b in zip(vals, vals[1:])]
    assert all(d2 <= d1 + F(1, 10 ** 12) for d1, d2 in zip(diffs, diffs[1:]))


def test_concentration_power_profiles():
    curve = concentration_curve(PowerProfile(F(2)), F(1))
    contains(curve.at(F(1, 2)), F(7, 8), "power r=2 K(1/2)", tol=1e-12)
    assert curve.at(F(1)).lo == 1
    curve2 = concentration_curve(PowerProfile(F(-1, 2)), F(1))
    contains(curve2.at(F(1, 2)), math.sqrt(2) / 2, "power r=-1/2", tol=1e-9)


# ---------------------------------------------------------------------------
# the sample classifier
# ---------------------------------------------------------------------------

def bps(vals):
    return [BoundPair.exact(F(v)) if not (isinstance(v, float) and math.isinf(v))
            else BoundPair.pos_infinite("cert") for v in vals]


def test_classifier_certified():
    samples = bps([1, 2, float("inf"), 2])
    status, reason, idx, _ = classify_samples(samples, F(1000))
    assert (status, reason, idx) == ("Fails", "certified", 2)


def test_classifier_absolute():
    samples = bps([1500 + i for i in range(41)])
    status, reason, idx, _ = classify_samples(samples, F(1000))
    assert (status, reason) == ("Fails", "absolute")
    assert idx == 40


def test_classifier_trend():
    samples = bps([F(3, 2) ** i for i in range(41)])
    status, reason, idx, _ = classify_samples(samples, F(10 ** 12))
    assert (status, reason, idx) == ("Fails", "trend", 40)


def test_classifier_bounded_with_transient():
    samples = bps([100] + [1] * 40)
    status, reason, _, bound = classify_samples(samples, F(1000))
    assert (status, reason) == ("Holds", "bounded")
    assert bound == 100.0


def test_classifier_plateau_is_not_trend():
    samples = bps([1, 2, 4, 8] + [8] * 37)
    status, reason, _, _ = classify_samples(samples, F(1000))
    assert status == "Holds"


def test_classifier_inconclusive_on_unresolved_hi():
    samples = [BoundPair.exact(F(1))] * 40 + [BoundPair(F(1), float("inf"))]
    status, reason, _, _ = classify_samples(samples, F(1000))
    assert status == "Inconclusive"


# ---------------------------------------------------------------------------
# verdict engine end to end (synthetic profiles)
# ---------------------------------------------------------------------------

CFG = RunConfig(n_max=8)


def test_constant_profile_all_conditions_hold(flat):
    for cond in ("P1", "P2", "P3", "P4", "P4a", "P4b", "P5", "P6", "P6e",
                 "P7", "P8", "B1", "AC"):
        report = classify(flat, cond, CFG)
        assert report.status == "Holds", (cond, report.verdict)
        assert report.verdict.caveat


def test_power_profile_p1_exists_node():
    prof = PowerProfile(F(1))
    report = classify(prof, "P1", CFG)
    assert report.status == "Holds"
    by_label = {o.label: o for o in report.outcomes}
    assert by_label["p=2"].status == "Fails"
    assert by_label["p=2"].reason == "certified"
    assert by_label["p=2"].witness["note"] == "divergent-moment"
    assert by_label["p=2"].witness["at"] == "n=0"
    assert by_label["p=10"].status == "Holds"


def test_b1_certified_fails_via_zero_tail_inf():
    prof = StepProfile(
        "s",
        [Piece(F(1, 2 ** 12), F(1), F(1))],
        RangeTail(F(1, 2 ** 12), F(0), F(1),
                  mass_first=F(1, 2 ** 13), ratio=F(1, 2)),
        name="sink")
    report = classify(prof, "B1", CFG)
    assert report.status == "Fails"
    assert report.verdict.reason == "certified"


def test_ac_sweep_dyadic_blocks():
    # u-native staircase: value 2^-k on u in (2^-k-1, 2^-k]
    from weightlab.profiles import s_of_u
    pieces = [Piece(F(1, 2 ** (k + 1)), F(1, 2 ** k), F(1, 2 ** k))
              for k in range(12, -1, -1)]
    prof = StepProfile("u", pieces,
                       ConstantTail(s_of_u(F(1, 2 ** 13)), F(1, 2 ** 13)),
                       name="stairs")
    cfg = RunConfig(n_max=8)
    sweep = ac_sweep(prof, cfg)
    assert len(sweep.band_samples) == 9
    assert abs(sweep.sup_hi - 2) < 1e-9
    for _, bp in sweep.band_samples:
        assert bp.hi_float() <= 2 + 1e-9
    report = classify(prof, "AC", cfg)
    assert report.status == "Holds"


def test_ac_ratio_straddles_edge(two_block):
    # ell=1/5 gives the s-window (19/100, 9/25], straddling the edge at 1/4
    v = ac_ratio(two_block, F(1, 5))
    assert v.is_exact and v.lo == 8
    # ell=arc_of_scale(1/2) has window (0.271.., 0.5]: constant value there
    flat_ratio = ac_ratio(two_block, arc_of_scale(F(1, 2)))
    assert flat_ratio.lo_float() == 1.0


def test_p4_reports_on_two_block(two_block):
    rep = classify(two_block, "P4", CFG)
    assert rep.status == "Holds"
    assert "pair" in rep.verdict.reason
    rep_a = classify(two_block, "P4a", CFG)
    assert rep_a.status == "Holds"
    rep_b = classify(two_block, "P4b", CFG)
    assert rep_b.status == "Holds"


def test_p4_fails_when_mass_concentrates():
    # nearly all mass on a sliver at every dyadic scale: K_x(alpha) ~ 1
    pieces = []
    for k in range(14):
        lo = F(1, 2 ** (k + 1))
        sliver_hi = lo + F(1, 2 ** (k + 24))
        pieces.append(Piece(lo, sliver_hi, F(2 ** (3 * k + 40))))
        pieces.append(Piece(sliver_hi, F(1, 2 ** k), F(1)))
    prof = StepProfile("s", sorted(pieces, key=lambda p: p.lo),
                       ConstantTail(F(1, 2 ** 14), F(1)), name="spikes")
    rep = classify(prof, "P4", RunConfig(n_max=10))
    assert rep.status == "Fails"
    rep_b = classify(prof, "P4b", RunConfig(n_max=10))
    assert rep_b.status == "Fails"


def test_sweep_report_serialization(two_block):
    rep = classify(two_block, "P5", CFG)
    doc = rep.to_jsonable()
    assert doc["condition"] == "P5"
    assert doc["verdict"]["status"] == rep.status
    assert len(doc["outcomes"][0]["samples"]) == CFG.n_max + 1
    assert doc["outcomes"][0]["samples"][0]["at"] == "n=0"


def test_scales_are_dyadic():
    assert sweep_scales(RunConfig(n_max=8)) == [F(1, 2 ** n) for n in range(9)]
