"""Condition functionals over radial profiles and the sweep verdict engine.

Each functional compares local behavior of a profile over the scale sweep
x_n = 2**-n, n = 0..n_max, and returns a two-sided enclosure.  ``classify``
folds the per-scale samples (and, for parameterized conditions, the
parameter grid) into a Holds / Fails / Inconclusive verdict.  Verdicts are
finite-sweep classifications; every report carries that caveat explicitly.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cmp_to_key
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .bounds import (
    INF,
    BoundPair,
    EnclosureError,
    Surd,
    bp_max,
    bp_min,
    rational_between,
)
from .maximal import maximal_integral
from .profiles import (
    IDENTITY,
    LOG,
    DivergentMomentError,
    NonIntegrableError,
    arc_of_scale,
    IndicatorAbove,
    LogEPlusRelative,
    LogPlusRelative,
    MassAbove,
    Power,
    PowerProfile,
    StepProfile,
    TailError,
    top_window,
    u_of_s,
)

__all__ = [
    "CONDITION_IDS",
    "RunConfig",
    "Verdict",
    "SweepOutcome",
    "SweepReport",
    "sweep_scales",
    "classify",
    "classify_samples",
    "p1_functional",
    "rj_functional",
    "rh_functional",
    "p5_functional",
    "p6_functional",
    "p6e_functional",
    "p7_functional",
    "p8_worst",
    "b1_functional",
    "ac_ratio",
    "ac_sweep",
    "concentration_curve",
    "p4_check",
    "p4a_check",
    "p4b_check",
    "P_GRID",
    "Q_GRID",
    "P8_BETA_GRID",
    "ALPHA_COARSE",
    "ALPHA_FINE",
    "BETA_FINE",
]

CONDITION_IDS = ("P1", "P2", "P3", "P4", "P4a", "P4b",
                 "P5", "P6", "P6e", "P7", "P8", "B1", "AC")

CAVEAT = ("finite-sweep classification: the verdict describes the sampled "
          "scales n <= n_max only and is not a proof about the condition")

P_GRID: Tuple[Fraction, ...] = tuple(sorted(
    {Fraction(1) + Fraction(1, 2 ** j) for j in range(7)}
    | {Fraction(2), Fraction(3), Fraction(5), Fraction(10)}))
Q_GRID: Tuple[Fraction, ...] = P_GRID
P8_BETA_GRID: Tuple[Fraction, ...] = (
    Fraction(1), Fraction(1, 2), Fraction(1, 4), Fraction(1, 8))
ALPHA_COARSE: Tuple[Fraction, ...] = tuple(Fraction(k, 10) for k in range(1, 10))
ALPHA_FINE: Tuple[Fraction, ...] = tuple(sorted(
    set(ALPHA_COARSE) | {Fraction(1, 2 ** j) for j in range(1, 21)}))
BETA_FINE: Tuple[Fraction, ...] = tuple(sorted(
    set(ALPHA_COARSE) | {Fraction(1) - Fraction(1, 2 ** j) for j in range(1, 21)}))


@dataclass(frozen=True)
class RunConfig:
    """Sweep depth and the divergence threshold for the classifier."""

    n_max: int = 40
    divergence_factor: Fraction = Fraction(1000)

    def __post_init__(self):
        if self.n_max < 8:
            raise ValueError("n_max must be at least 8 (the classifier "
                             "needs nondegenerate quartiles)")
        object.__setattr__(self, "divergence_factor",
                           Fraction(self.divergence_factor))
        if self.divergence_factor <= 1:
            raise ValueError("divergence_factor must exceed 1")


DEFAULT_CONFIG = RunConfig()


def sweep_scales(config: RunConfig) -> List[Fraction]:
    return [Fraction(1, 2 ** n) for n in range(config.n_max + 1)]


# ---------------------------------------------------------------------------
# pointwise functionals
# ---------------------------------------------------------------------------

def p1_functional(profile, x, exp_p) -> BoundPair:
    """(avg f) * (avg f**(1-p'))**(p-1) with p' the conjugate exponent."""
    p = Fraction(exp_p)
    if p <= 1:
        raise ValueError("p1 needs an exponent > 1")
    x = Fraction(x)
    avg = profile.average(x)
    dual = profile.moment(x, Power(Fraction(-1, 1) / (p - 1))) / BoundPair.exact(x)
    return avg * dual.pow(p - 1)


def rj_functional(profile, x) -> BoundPair:
    """(avg f) / exp(avg log f)."""
    x = Fraction(x)
    avg = profile.average(x)
    log_avg = profile.moment(x, LOG) / BoundPair.exact(x)
    return avg / log_avg.exp()


def rh_functional(profile, x, q) -> BoundPair:
    """(avg f**q)**(1/q) / (avg f)."""
    q = Fraction(q)
    if q <= 1:
        raise ValueError("rh needs an exponent > 1")
    x = Fraction(x)
    q_avg = profile.moment(x, Power(q)) / BoundPair.exact(x)
    return q_avg.pow(Fraction(1) / q) / profile.average(x)


def p5_functional(profile, x) -> BoundPair:
    """(avg f) / median of f on (0, x]."""
    x = Fraction(x)
    return profile.average(x) / profile.median(x)


def p6_functional(profile, x) -> BoundPair:
    """Normalized entropy: (integral f log+(f/avg)) / (integral f)."""
    x = Fraction(x)
    mass = profile.moment(x, IDENTITY)
    avg = mass / BoundPair.exact(x)
    return profile.moment(x, LogPlusRelative(avg)) / mass


def p6e_functional(profile, x) -> BoundPair:
    """Smooth entropy variant with log(e + f/avg)."""
    x = Fraction(x)
    mass = profile.moment(x, IDENTITY)
    avg = mass / BoundPair.exact(x)
    return profile.moment(x, LogEPlusRelative(avg)) / mass


def p7_functional(profile, x) -> BoundPair:
    """(integral of the one-sided maximal function) / (integral f)."""
    x = Fraction(x)
    return maximal_integral(profile, x) / profile.moment(x, IDENTITY)


def _guarded_ratio(num: BoundPair, den: BoundPair, note: str) -> BoundPair:
    if den.lo == 0 and den.hi == 0:
        return BoundPair.pos_infinite(note)
    return num / den


def b1_functional(profile, x) -> BoundPair:
    """(avg f) / (ess inf of f on (0, x])."""
    x = Fraction(x)
    hi_pt = x if profile.coordinate == "s" else u_of_s(x)
    inf, _sup = profile.ess_range(Fraction(0), hi_pt)
    return _guarded_ratio(profile.average(x), inf,
                          "essential infimum vanishes on (0, x]")


def ac_ratio(profile, ell) -> BoundPair:
    """ess sup / ess inf over the top window of the arc of length ``ell``."""
    lo_pt, hi_pt = top_window(ell, profile.coordinate)
    inf, sup = profile.ess_range(lo_pt, hi_pt)
    return _guarded_ratio(sup, inf,
                          "essential infimum vanishes on the top window")


# ---------------------------------------------------------------------------
# superlevel statistics and the weak-type functional (P8)
# ---------------------------------------------------------------------------

def _ep_is_pinf(ep) -> bool:
    return isinstance(ep, float) and math.isinf(ep) and ep > 0


class _LevelStats:
    """Suffix sums over the materialized value set of a step profile,
    with tail ranges folded in as two-sided corrections."""

    def __init__(self, profile: StepProfile, x: Fraction):
        agg: Dict[Fraction, Tuple[Fraction, Fraction]] = {}
        for length, v in profile.pieces_within(x):
            ln, ms = agg.get(v, (Fraction(0), Fraction(0)))
            agg[v] = (ln + length, ms + length * v)
        self.values: List[Fraction] = sorted(agg)
        self._suf_len: List[Fraction] = []
        self._suf_mass: List[Fraction] = []
        run_len = Fraction(0)
        run_mass = Fraction(0)
        for v in reversed(self.values):
            ln, ms = agg[v]
            run_len += ln
            run_mass += ms
            self._suf_len.append(run_len)
            self._suf_mass.append(run_mass)
        self._suf_len.reverse()
        self._suf_mass.reverse()
        self.has_tail = profile.s_boundary > 0
        if self.has_tail:
            self.t_measure = profile.s_boundary
            self.t_mass = profile.tail.moment(IDENTITY)
            self.t_inf = profile.tail.value_inf()
            self.t_sup = profile.tail.value_sup()
        else:
            self.t_measure = Fraction(0)
            self.t_mass = BoundPair.exact(0)
            self.t_inf = self.t_sup = None

    def _suffix(self, arr: List[Fraction], level) -> Fraction:
        # strictly-above convention: pieces at the level do not count
        if _ep_is_pinf(level):
            return Fraction(0)
        idx = bisect_right(self.values, level)
        if idx >= len(arr):
            return Fraction(0)
        return arr[idx]

    def _tail_bracket(self, lam: BoundPair, full_lo, full_hi):
        if not self.has_tail:
            return Fraction(0), Fraction(0)
        lo_add = full_lo if not _ep_is_pinf(lam.hi) and self.t_inf.lo > lam.hi \
            else Fraction(0)
        hi_add = Fraction(0) if lam.lo >= self.t_sup.hi else full_hi
        return lo_add, hi_add

    def measure_above(self, lam: BoundPair) -> BoundPair:
        mat_lo = self._suffix(self._suf_len, lam.hi)
        mat_hi = self._suffix(self._suf_len, lam.lo)
        t_lo, t_hi = self._tail_bracket(lam, self.t_measure, self.t_measure)
        return BoundPair(mat_lo + t_lo, mat_hi + t_hi)

    def mass_above(self, lam: BoundPair) -> BoundPair:
        mat = BoundPair(self._suffix(self._suf_mass, lam.hi),
                        self._suffix(self._suf_mass, lam.lo))
        t_lo, t_hi = self._tail_bracket(lam, self.t_mass.lo, self.t_mass.hi)
        return mat + BoundPair(t_lo, t_hi)

    def ratio(self, lam: BoundPair, beta: Fraction) -> BoundPair:
        mass = self.mass_above(lam)
        if mass.hi == 0:
            return BoundPair.exact(0)
        meas = self.measure_above(lam * BoundPair.exact(beta))
        if meas.hi == 0:
            return BoundPair.pos_infinite(
                "superlevel measure vanishes below a positive mass")
        return mass / (lam * meas)


def _level_stats(profile: StepProfile, x: Fraction) -> _LevelStats:
    memo = profile.__dict__.setdefault("_level_stats_memo", {})
    stats = memo.get(x)
    if stats is None:
        stats = _LevelStats(profile, x)
        memo[x] = stats
    return stats


def _p8_step(profile: StepProfile, x: Fraction, beta: Fraction):
    stats = _level_stats(profile, x)
    avg = profile.average(x)
    breakpoints = set()
    for v in stats.values:
        breakpoints.add(v)
        breakpoints.add(v / beta)
    unresolved_tail_top = False
    if stats.has_tail:
        for ep in (stats.t_inf.lo, stats.t_inf.hi, stats.t_sup.lo, stats.t_sup.hi):
            if isinstance(ep, Fraction):
                breakpoints.add(ep)
                breakpoints.add(ep / beta)
        unresolved_tail_top = _ep_is_pinf(stats.t_sup.hi)
    # between consecutive candidates both superlevel functions are constant,
    # so the ratio is c/lam there and the supremum sits at the left ends
    sup_lo = Fraction(0)
    sup_hi = Fraction(0)
    best_lam: Optional[str] = None
    tail_ambiguous = False
    gen = [avg] + [BoundPair.exact(c) for c in sorted(breakpoints)
                   if c > avg.lo]
    for lam in gen:
        r = stats.ratio(lam, beta)
        rigorous = lam is avg or lam.lo >= avg.hi
        if rigorous and not _ep_le_frac(r.lo, sup_lo):
            sup_lo = r.lo
            best_lam = _lam_label(lam)
        if unresolved_tail_top and _ep_is_pinf(r.hi):
            # with an unbounded tail an infinite upper endpoint can only come
            # from a level whose superlevel sets are determined by the tail
            # alone (the materialized denominator vanished); those levels are
            # bounded collectively by the tail's own ratio bound, if provided
            tail_ambiguous = True
        elif not _ep_le_frac(r.hi, sup_hi):
            sup_hi = r.hi
    if tail_ambiguous:
        hook = getattr(profile.tail, "weak_ratio_fn", None)
        cap = hook(beta) if hook is not None else INF
        if not _ep_le_frac(cap, sup_hi):
            sup_hi = cap
    return BoundPair(sup_lo, sup_hi), {"lam": best_lam, "beta": str(beta)}


def _ep_le_frac(a, b) -> bool:
    """a <= b for mixed Fraction/float endpoints (inf-aware)."""
    if _ep_is_pinf(a):
        return _ep_is_pinf(b)
    if _ep_is_pinf(b):
        return True
    return a <= b


def _lam_label(lam: BoundPair) -> str:
    if isinstance(lam.lo, Fraction) and lam.is_exact:
        return str(lam.lo)
    return f"~{lam.mid_float():.6g}"


def _p8_power(profile: PowerProfile, x: Fraction, beta: Fraction):
    """Candidate/gap evaluation of the weak-type supremum for power
    profiles; the value range on (0, x] is an interval, so gaps are
    interval-evaluated through the closed-form superlevel moments."""
    avg = profile.average(x)
    r = profile.r
    lo_anchor = Fraction(avg.lo)

    def point(lam: BoundPair) -> BoundPair:
        mass = profile.moment(x, MassAbove(lam))
        if mass.hi == 0:
            return BoundPair.exact(0)
        meas = profile.moment(x, IndicatorAbove(lam * BoundPair.exact(beta)))
        if meas.hi == 0:
            return BoundPair.pos_infinite(
                "superlevel measure vanishes below a positive mass")
        return mass / (lam * meas)

    sup_lo = Fraction(0)
    sup_hi = Fraction(0)
    best_lam = None

    def absorb(val: BoundPair, lam_label, rigorous: bool):
        nonlocal sup_lo, sup_hi, best_lam
        if rigorous and not _ep_le_frac(val.lo, sup_lo):
            sup_lo = val.lo
            best_lam = lam_label
        if not _ep_le_frac(val.hi, sup_hi):
            sup_hi = val.hi

    absorb(point(avg), _lam_label(avg), True)

    if r < 0 and x == 1:
        # for lam with beta*lam >= 1 the ratio is exactly constant
        const = BoundPair.exact(beta).pow(Fraction(-1) / r) \
            / BoundPair.exact(r + 1)
        absorb(const, "constant-region", True)
        top = max(Fraction(avg.hi), Fraction(1) / beta, Fraction(2))
    else:
        top_val = profile.value_at(x) if r < 0 else BoundPair.exact(1)
        top = Fraction(top_val.hi)
    if top > lo_anchor:
        # geometric grid over (avg, top]; each gap is interval-evaluated
        cells = 32
        lg = math.log2(float(top / lo_anchor)) if top > lo_anchor else 0.0
        cuts = [lo_anchor]
        for i in range(1, cells):
            c = lo_anchor * Fraction(2.0 ** (lg * i / cells))
            if c > cuts[-1] and c < top:
                cuts.append(c)
        cuts.append(top)
        for a, b in zip(cuts, cuts[1:]):
            absorb(point(BoundPair(a, b)), None, False)
            absorb(point(BoundPair.exact(b)), str(b), b >= avg.hi)
    return BoundPair(sup_lo, sup_hi), {"lam": best_lam, "beta": str(beta)}


def p8_worst(profile, x, beta):
    """sup over levels lam > avg of mass{f > lam} / (lam * |{f > beta lam}|).

    Returns ``(value, aux)`` where aux records the maximizing level of the
    rigorous lane.  The supremum over each constancy gap of the level-set
    functions sits at the gap's left end, so the candidate set
    {avg} + {values} + {values/beta} is exhaustive for step profiles.
    """
    beta = Fraction(beta)
    if not 0 < beta <= 1:
        raise ValueError("p8 needs beta in (0, 1]")
    x = Fraction(x)
    if isinstance(profile, PowerProfile):
        return _p8_power(profile, x, beta)
    profile.check_scale(x)
    return _p8_step(profile, x, beta)


# ---------------------------------------------------------------------------
# concentration curves (P4 family)
# ---------------------------------------------------------------------------

def _clamp01(v: BoundPair) -> BoundPair:
    return bp_min([bp_max([v, BoundPair.exact(0)]), BoundPair.exact(1)])


class ConcentrationCurve:
    """alpha -> K_x(alpha): the extremal mass fraction carried by a subset
    of (0, x] of measure alpha*x; greedy filling by value (descending) is
    exactly optimal for step profiles."""

    def __init__(self, profile: StepProfile, x):
        self.x = profile.check_scale(Fraction(x))
        items = sorted(profile.pieces_within(self.x),
                       key=lambda lv: lv[1], reverse=True)
        self.breakpoints: List[Tuple[Fraction, Fraction]] = [(Fraction(0),
                                                              Fraction(0))]
        cum_len = Fraction(0)
        cum_mass = Fraction(0)
        self._values: List[Fraction] = []
        for length, v in items:
            cum_len += length
            cum_mass += length * v
            self._values.append(v)
            self.breakpoints.append((cum_len, cum_mass))
        self.mass = profile.moment(self.x, IDENTITY)
        if profile.s_boundary > 0:
            self._tail_mass_hi = profile.tail.moment(IDENTITY).hi
        else:
            self._tail_mass_hi = Fraction(0)

    def greedy_mass(self, budget: Fraction) -> Fraction:
        """Exact extremal mass over the materialized pieces alone."""
        if budget <= 0:
            return Fraction(0)
        lens = [bp[0] for bp in self.breakpoints]
        idx = bisect_right(lens, budget) - 1
        if idx >= len(self._values):
            return self.breakpoints[-1][1]
        part_len, part_mass = self.breakpoints[idx]
        return part_mass + (budget - part_len) * self._values[idx]

    def at(self, alpha) -> BoundPair:
        alpha = Fraction(alpha)
        if not 0 <= alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if alpha == 0:
            return BoundPair.exact(0)
        greedy = self.greedy_mass(alpha * self.x)
        if _ep_is_pinf(self.mass.hi):
            lo = Fraction(0)
        else:
            lo = greedy / Fraction(self.mass.hi)
        hi_num = BoundPair.exact(greedy) + BoundPair(Fraction(0),
                                                     self._tail_mass_hi)
        return _clamp01(BoundPair(lo, (hi_num / self.mass).hi))


class PowerConcentrationCurve:
    """Closed-form concentration for monotone power profiles: the extremal
    subset is the end of (0, x] where the profile is largest."""

    def __init__(self, profile: PowerProfile, x):
        self.profile = profile
        self.x = profile.check_scale(Fraction(x))
        self.mass = profile.moment(self.x, IDENTITY)

    def at(self, alpha) -> BoundPair:
        alpha = Fraction(alpha)
        if not 0 <= alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if alpha == 0:
            return BoundPair.exact(0)
        if alpha == 1:
            return BoundPair.exact(1)
        if self.profile.r > 0:
            part = self.profile.moment(alpha * self.x, IDENTITY)
            return _clamp01(part / self.mass)
        part = self.profile.moment((1 - alpha) * self.x, IDENTITY)
        return _clamp01(BoundPair.exact(1) - part / self.mass)


def concentration_curve(profile, x):
    memo = profile.__dict__.setdefault("_conc_memo", {})
    x = Fraction(x)
    curve = memo.get(x)
    if curve is None:
        if isinstance(profile, PowerProfile):
            curve = PowerConcentrationCurve(profile, x)
        else:
            curve = ConcentrationCurve(profile, x)
        memo[x] = curve
    return curve


# ---------------------------------------------------------------------------
# verdicts and the sample classifier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    status: str                      # "Holds" | "Fails" | "Inconclusive"
    reason: str
    bound: Optional[float] = None    # Holds: max observed upper endpoint
    witness: Optional[dict] = None   # Fails: divergence payload
    caveat: str = CAVEAT

    def to_jsonable(self) -> dict:
        return {"status": self.status, "reason": self.reason,
                "bound": self.bound, "witness": self.witness,
                "caveat": self.caveat}


@dataclass
class SweepOutcome:
    """One classified sample row (a single parameter choice)."""

    label: str
    status: str
    reason: str
    witness: Optional[dict]
    samples: List[Tuple[str, BoundPair]]
    diagnostic: bool = False

    def to_jsonable(self) -> dict:
        return {
            "label": self.label,
            "status": self.status,
            "reason": self.reason,
            "witness": self.witness,
            "diagnostic": self.diagnostic,
            "samples": [
                {"at": at, "lo": bp.lo_float(), "hi": bp.hi_float(),
                 "note": bp.note}
                for at, bp in self.samples
            ],
        }


@dataclass
class SweepReport:
    condition: str
    profile_name: str
    verdict: Verdict
    outcomes: List[SweepOutcome] = field(default_factory=list)

    @property
    def status(self) -> str:
        return self.verdict.status

    def to_jsonable(self) -> dict:
        return {
            "condition": self.condition,
            "profile": self.profile_name,
            "verdict": self.verdict.to_jsonable(),
            "outcomes": [o.to_jsonable() for o in self.outcomes],
        }


def _ep_to_frac(ep) -> Optional[Fraction]:
    if isinstance(ep, Fraction):
        return ep
    if math.isinf(ep):
        return None
    return Fraction(ep)


def classify_samples(samples: Sequence[BoundPair], factor: Fraction):
    """(status, reason, witness_index, bound) for one sample row.

    Order matters: certified divergence, then absolute divergence, then the
    monotone-trend rule, then the bounded-plateau rule, else inconclusive.
    Fails shapes are checked before Holds shapes on purpose: a uniformly
    huge row satisfies both, and huge wins.
    """
    factor = Fraction(factor)
    m = len(samples)
    for i, s in enumerate(samples):
        if s.lo_is_infinite:
            return "Fails", "certified", i, None
    los = [Fraction(s.lo) for s in samples]
    if min(los) >= factor:
        peak = max(range(m), key=lambda i: los[i])
        return "Fails", "absolute", peak, None
    q1_end = (m + 3) // 4
    q3_start = (3 * m) // 4
    first_q = los[:q1_end]
    last_q = los[q3_start:]
    tail_monotone = all(a <= b for a, b in zip(last_q, last_q[1:]))
    strict_increase = los[-1] > los[0]
    t_last = los[-1]
    sustained = (t_last >= 2 * max(first_q)
                 and t_last - los[q3_start] >= (los[m // 2] - los[m // 4]) / 2)
    jumped = t_last >= 4 * max(first_q)
    if tail_monotone and strict_increase and (sustained or jumped):
        return "Fails", "trend", m - 1, None
    his = [_ep_to_frac(s.hi) for s in samples]
    if all(h is not None for h in his):
        first5 = his[:5]
        if (max(his) <= min(first5) * factor
                and max(his[q3_start:]) <= max(his[:q1_end]) * factor):
            return "Holds", "bounded", None, float(max(his))
    return "Inconclusive", "mixed-signals", None, None


def _sample_rows(config: RunConfig, fn: Callable[[Fraction], BoundPair]):
    rows: List[Tuple[str, BoundPair]] = []
    for n, x in enumerate(sweep_scales(config)):
        try:
            value = fn(x)
        except DivergentMomentError as exc:
            value = BoundPair.pos_infinite(
                getattr(exc, "certificate", "divergent-moment"))
        rows.append((f"n={n}", value))
    return rows


def _witness_from(rows, idx) -> Optional[dict]:
    if idx is None:
        return None
    at, bp = rows[idx]
    return {"at": at, "lo": bp.lo_float(), "hi": bp.hi_float(),
            "note": bp.note}


def _classified_outcome(profile, config, fn, label="",
                        diagnostic=False) -> SweepOutcome:
    rows = _sample_rows(config, fn)
    status, reason, idx, _bound = classify_samples(
        [bp for _, bp in rows], config.divergence_factor)
    return SweepOutcome(label, status, reason, _witness_from(rows, idx),
                        rows, diagnostic)


def _bound_of(outcome: SweepOutcome) -> Optional[float]:
    his = [bp.hi_float() for _, bp in outcome.samples]
    return max(his) if his and all(math.isfinite(h) for h in his) else None


def _scalar_report(profile, config, name, fn) -> SweepReport:
    outcome = _classified_outcome(profile, config, fn)
    verdict = Verdict(outcome.status, outcome.reason,
                      bound=_bound_of(outcome) if outcome.status == "Holds" else None,
                      witness=outcome.witness)
    return SweepReport(name, profile.name, verdict, [outcome])


def _exists_report(profile, config, name, grid, fn, fmt) -> SweepReport:
    outcomes = [
        _classified_outcome(profile, config,
                            (lambda x, _p=param: fn(x, _p)), fmt(param))
        for param in grid
    ]
    return SweepReport(name, profile.name,
                       _exists_verdict(outcomes), outcomes)


def _exists_verdict(outcomes: Sequence[SweepOutcome]) -> Verdict:
    folded = [o for o in outcomes if not o.diagnostic]
    for o in folded:
        if o.status == "Holds":
            return Verdict("Holds", f"witness {o.label}",
                           bound=_bound_of(o))
    if all(o.status == "Fails" for o in folded):
        worst = folded[-1]
        return Verdict("Fails", "every grid parameter fails",
                       witness=worst.witness)
    return Verdict("Inconclusive", "no grid parameter holds and not all fail")


# ---------------------------------------------------------------------------
# P4 node machinery
# ---------------------------------------------------------------------------

@dataclass
class _AlphaRow:
    alpha: Fraction
    samples: List[Tuple[str, BoundPair]]
    sup_lo: Fraction
    sup_hi: Fraction
    growth: Fraction
    stable: bool
    safety: Fraction


def _alpha_row(profile, config: RunConfig, alpha: Fraction) -> _AlphaRow:
    rows = []
    his: List[Fraction] = []
    los: List[Fraction] = []
    for n, x in enumerate(sweep_scales(config)):
        k = concentration_curve(profile, x).at(alpha)
        rows.append((f"n={n}", k))
        his.append(Fraction(k.hi))   # K is clamped into [0, 1]
        los.append(Fraction(k.lo))
    m = len(his)
    sup_hi = max(his)
    sup_lo = max(los)
    growth = max(Fraction(0), his[-1] - his[(3 * m) // 4])
    stable = growth <= (Fraction(1) - sup_hi) / 10
    safety = max(4 * growth, Fraction(1, 2 ** 24))
    return _AlphaRow(alpha, rows, sup_lo, sup_hi, growth, stable, safety)


def _row_outcome(row: _AlphaRow, status: str, reason: str,
                 witness=None) -> SweepOutcome:
    return SweepOutcome(f"alpha={row.alpha}", status, reason, witness,
                        row.samples)


def _stable_holds(row: _AlphaRow, beta: Fraction) -> bool:
    return row.stable and row.sup_hi + row.safety < beta


def p4_check(profile, config: RunConfig, alpha, beta) -> Verdict:
    """Single-pair check: does sup over the sweep of K_x(alpha) stay <= beta?"""
    alpha, beta = Fraction(alpha), Fraction(beta)
    row = _alpha_row(profile, config, alpha)
    if row.sup_lo > beta:
        worst = max(row.samples, key=lambda r: Fraction(r[1].lo))
        return Verdict("Fails", "concentration exceeds beta",
                       witness={"alpha": str(alpha), "beta": str(beta),
                                "at": worst[0], "lo": worst[1].lo_float()})
    if row.sup_hi <= beta:
        return Verdict("Holds", "concentration stays below beta",
                       bound=float(row.sup_hi))
    return Verdict("Inconclusive", "concentration enclosure straddles beta")


def _p4_report(profile, config: RunConfig) -> SweepReport:
    rows = {a: _alpha_row(profile, config, a) for a in ALPHA_COARSE}
    witness_pair = None
    for a in ALPHA_COARSE:
        for b in ALPHA_COARSE:
            if _stable_holds(rows[a], b):
                witness_pair = (a, b)
                break
        if witness_pair:
            break
    outcomes = []
    for a in ALPHA_COARSE:
        row = rows[a]
        if witness_pair and witness_pair[0] == a:
            status, reason = "Holds", f"beta={witness_pair[1]} dominates"
        elif row.sup_lo >= Fraction(9, 10):
            status, reason = "Fails", "saturates the beta grid"
        else:
            status, reason = "Inconclusive", "between grid betas"
        outcomes.append(_row_outcome(row, status, reason))
    if witness_pair:
        a, b = witness_pair
        verdict = Verdict("Holds", f"pair alpha={a}, beta={b}",
                          bound=float(rows[a].sup_hi))
    elif all(rows[a].sup_lo >= Fraction(9, 10) for a in ALPHA_COARSE):
        worst = rows[ALPHA_COARSE[0]]
        peak = max(worst.samples, key=lambda r: Fraction(r[1].lo))
        verdict = Verdict("Fails", "every alpha saturates the beta grid",
                          witness={"alpha": str(worst.alpha), "at": peak[0],
                                   "lo": peak[1].lo_float()})
    else:
        verdict = Verdict("Inconclusive",
                          "no stable pair and no saturation certificate")
    return SweepReport("P4", profile.name, verdict, outcomes)


def p4a_check(profile, config: RunConfig = DEFAULT_CONFIG) -> Verdict:
    return _p4a_report(profile, config).verdict


def _p4a_report(profile, config: RunConfig) -> SweepReport:
    rows = {a: _alpha_row(profile, config, a) for a in ALPHA_FINE}
    outcomes = [
        _row_outcome(rows[a], "Inconclusive", "per-alpha concentration row")
        for a in sorted(rows)
    ]
    failing_beta = None
    unresolved = []
    for beta in ALPHA_COARSE:
        if any(_stable_holds(rows[a], beta) for a in ALPHA_FINE):
            continue
        if all(rows[a].sup_lo >= beta for a in ALPHA_FINE):
            failing_beta = beta
            break
        unresolved.append(beta)
    if failing_beta is not None:
        verdict = Verdict(
            "Fails", "some beta defeats every alpha",
            witness={"beta": str(failing_beta),
                     "sup_lo": float(min(rows[a].sup_lo for a in ALPHA_FINE))})
    elif not unresolved:
        bound = float(max(rows[a].sup_hi for a in ALPHA_FINE))
        verdict = Verdict("Holds", "every beta admits a stable alpha",
                          bound=bound)
    else:
        verdict = Verdict(
            "Inconclusive",
            f"betas {', '.join(str(b) for b in unresolved)} unresolved")
    return SweepReport("P4a", profile.name, verdict, outcomes)


def p4b_check(profile, config: RunConfig = DEFAULT_CONFIG) -> Verdict:
    return _p4b_report(profile, config).verdict


def _p4b_report(profile, config: RunConfig) -> SweepReport:
    beta_top = BETA_FINE[-1]           # 1 - 2^-20
    outcomes = []
    statuses = []
    witness = None
    for a in ALPHA_COARSE:
        row = _alpha_row(profile, config, a)
        if row.sup_lo >= beta_top:
            status, reason = "Fails", "concentration reaches the top beta"
            peak = max(row.samples, key=lambda r: Fraction(r[1].lo))
            if witness is None:
                witness = {"alpha": str(a), "at": peak[0],
                           "lo": peak[1].lo_float()}
        elif _stable_holds(row, beta_top):
            betas = [b for b in BETA_FINE if row.sup_hi + row.safety < b]
            status, reason = "Holds", f"beta={betas[0]} dominates"
        else:
            status, reason = "Inconclusive", "row unstable or near the top beta"
        statuses.append(status)
        outcomes.append(_row_outcome(row, status, reason))
    if "Fails" in statuses:
        verdict = Verdict("Fails", "some alpha defeats every beta",
                          witness=witness)
    elif all(s == "Holds" for s in statuses):
        verdict = Verdict("Holds", "every alpha admits a dominating beta")
    else:
        verdict = Verdict("Inconclusive", "some alpha row is unresolved")
    return SweepReport("P4b", profile.name, verdict, outcomes)


# ---------------------------------------------------------------------------
# AC sweep
# ---------------------------------------------------------------------------

def _arc_scale(ell):
    """Dictionary scale of the arc: x = ell*(2 - ell), exactly."""
    if isinstance(ell, Surd):
        return Surd.of(2) * ell - ell * ell
    ell = Fraction(ell)
    return ell * (2 - ell)


def _critical_arcs(profile, min_scale: Fraction):
    """Arc lengths whose top window starts or ends at a piece edge."""
    if isinstance(profile, PowerProfile):
        return []
    edges = set()
    for p in profile.native_pieces:
        edges.add(p.lo)
        edges.add(p.hi)
    edges.discard(Fraction(0))
    out = []
    for e in sorted(edges):
        if profile.coordinate == "u":
            # window (ell/2, ell]: hit at ell = e and ell = 2e
            for ell in (e, 2 * e):
                if ell <= 1:
                    out.append(ell)
        else:
            # window (ell(1-ell/4), ell(2-ell)]: top at ell = 1-sqrt(1-e),
            # bottom at ell = 2-2*sqrt(1-e) (only reaches <= 1 for e <= 3/4)
            root = Surd.of(1) - Surd.sqrt(Fraction(1) - e)
            out.append(root)
            if e <= Fraction(3, 4):
                out.append(Surd.of(2) - Surd.sqrt(Fraction(1) - e) * 2)
    return [ell for ell in out
            if Surd.of(_arc_scale(ell)).compare(min_scale) > 0]


@dataclass
class ACSweep:
    band_samples: List[Tuple[str, BoundPair]]
    band_witnesses: List[str]
    arc_count: int

    @property
    def sup_hi(self):
        return bp_max([bp for _, bp in self.band_samples]).hi


def ac_sweep(profile, config: RunConfig = DEFAULT_CONFIG) -> ACSweep:
    """Oscillation samples per dyadic scale band.

    Arcs: the dyadic-scale arcs, every piece-edge-critical arc, and a
    rational arc strictly between each consecutive pair; each arc lands in
    the band holding its dictionary scale and every band keeps the
    enclosure of its maximal oscillation.
    """
    memo = profile.__dict__.setdefault("_ac_memo", {})
    cached = memo.get(config.n_max)
    if cached is not None:
        return cached
    min_scale = Fraction(1, 2 ** (config.n_max + 1))
    arcs = [Fraction(1)]
    for n in range(1, config.n_max + 1):
        arcs.append(arc_of_scale(Fraction(1, 2 ** n)))
    arcs.extend(_critical_arcs(profile, min_scale))
    keyed = [(Surd.of(a), a) for a in arcs]
    keyed.sort(key=cmp_to_key(lambda p, q: p[0].compare(q[0])))
    deduped = [keyed[0]]
    for item in keyed[1:]:
        if deduped[-1][0].compare(item[0]) != 0:
            deduped.append(item)
    enriched = []
    for (ka, ea), (kb, eb) in zip(deduped, deduped[1:]):
        enriched.append((ka, ea))
        mid = rational_between(ka, kb)
        enriched.append((Surd.of(mid), mid))
    enriched.append(deduped[-1])

    bands: Dict[int, BoundPair] = {}
    witnesses: Dict[int, Tuple[float, str]] = {}
    count = 0
    for key, ell in enriched:
        scale = Surd.of(_arc_scale(ell))
        if scale.compare(min_scale) <= 0:
            continue
        band = None
        for n in range(config.n_max + 1):
            if scale.compare(Fraction(1, 2 ** n)) <= 0 and \
               scale.compare(Fraction(1, 2 ** (n + 1))) > 0:
                band = n
                break
        if band is None:
            continue
        count += 1
        ratio = ac_ratio(profile, ell)
        label = f"ell~{key.enclosure().mid_float():.8g}"
        bands[band] = bp_max([bands[band], ratio]) if band in bands else ratio
        hi_f = ratio.hi_float()
        if band not in witnesses or hi_f > witnesses[band][0]:
            witnesses[band] = (hi_f, label)
    ordered = sorted(bands)
    sweep = ACSweep(
        band_samples=[(f"n={n}", bands[n]) for n in ordered],
        band_witnesses=[witnesses[n][1] for n in ordered],
        arc_count=count)
    memo[config.n_max] = sweep
    return sweep


def _ac_report(profile, config: RunConfig) -> SweepReport:
    sweep = ac_sweep(profile, config)
    samples = [bp for _, bp in sweep.band_samples]
    status, reason, idx, bound = classify_samples(samples,
                                                  config.divergence_factor)
    witness = None
    if idx is not None:
        at, bp = sweep.band_samples[idx]
        witness = {"at": at, "arc": sweep.band_witnesses[idx],
                   "lo": bp.lo_float(), "hi": bp.hi_float(), "note": bp.note}
    outcome = SweepOutcome("", status, reason, witness, sweep.band_samples)
    verdict = Verdict(status, reason,
                      bound=bound if status == "Holds" else None,
                      witness=witness)
    return SweepReport("AC", profile.name, verdict, [outcome])


# ---------------------------------------------------------------------------
# the public verdict engine
# ---------------------------------------------------------------------------

def _p8_report(profile, config: RunConfig) -> SweepReport:
    outcomes = []
    for beta in P8_BETA_GRID:
        outcomes.append(_classified_outcome(
            profile, config,
            (lambda x, _b=beta: p8_worst(profile, x, _b)[0]),
            f"beta={beta}"))
    try:
        ac_hi = ac_sweep(profile, config).sup_hi
    except (TailError, EnclosureError):
        ac_hi = INF
    if not _ep_is_pinf(ac_hi) and ac_hi > 0:
        beta_ad = Fraction(1) / (4 * Fraction(ac_hi))
        beta_ad = min(max(beta_ad, Fraction(1, 2 ** 20)), Fraction(1))
        outcomes.append(_classified_outcome(
            profile, config,
            (lambda x, _b=beta_ad: p8_worst(profile, x, _b)[0]),
            f"beta=adaptive({float(beta_ad):.4g})", diagnostic=True))
    return SweepReport("P8", profile.name, _exists_verdict(outcomes),
                       outcomes)


def classify(profile, condition: str,
             config: RunConfig = DEFAULT_CONFIG) -> SweepReport:
    """Evaluate one condition over the sweep and fold it into a verdict."""
    if condition != "AC" and getattr(profile, "non_integrable", False):
        # every condition except the oscillation ratio compares masses, and
        # the mass of a full-scale window must be finite for the comparison
        # to mean anything
        raise NonIntegrableError("inadmissible: non-integrable")
    if condition == "P1":
        return _exists_report(profile, config, "P1", P_GRID,
                              lambda x, p: p1_functional(profile, x, p),
                              lambda p: f"p={p}")
    if condition == "P2":
        return _scalar_report(profile, config, "P2",
                              lambda x: rj_functional(profile, x))
    if condition == "P3":
        return _exists_report(profile, config, "P3", Q_GRID,
                              lambda x, q: rh_functional(profile, x, q),
                              lambda q: f"q={q}")
    if condition == "P4":
        return _p4_report(profile, config)
    if condition == "P4a":
        return _p4a_report(profile, config)
    if condition == "P4b":
        return _p4b_report(profile, config)
    if condition == "P5":
        return _scalar_report(profile, config, "P5",
                              lambda x: p5_functional(profile, x))
    if condition == "P6":
        return _scalar_report(profile, config, "P6",
                              lambda x: p6_functional(profile, x))
    if condition == "P6e":
        return _scalar_report(profile, config, "P6e",
                              lambda x: p6e_functional(profile, x))
    if condition == "P7":
        return _scalar_report(profile, config, "P7",
                              lambda x: p7_functional(profile, x))
    if condition == "P8":
        return _p8_report(profile, config)
    if condition == "B1":
        return _scalar_report(profile, config, "B1",
                              lambda x: b1_functional(profile, x))
    if condition == "AC":
        return _ac_report(profile, config)
    raise ValueError(f"unknown condition id {condition!r}")
