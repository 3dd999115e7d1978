"""Catalog of step-weight families with certified analytic tails.

Each catalog entry builds a profile from a *block rule* ``b`` (the level
assigned to dyadic block ``k``) and a family-specific *coupling* that
fixes the sliver width ``a_k`` carried by that level.  Blocks are
materialized exactly down to a chosen depth ``K``; below it an
``AnalyticTail`` answers moment queries by summing a 64-term exact
window and bounding the remainder with a per-family certificate: a
geometric ratio, a term-growth divergence, or a harmonic minorant.  The
certificates are derived from the couplings' closed forms, and the
engine re-verifies each one on the materializable window, raising
``TailError`` rather than guessing when a rule does not apply.

Block levels that are not rational in closed form are stored as dyadic
roundings on the materialized range; the analytic tail uses enclosures
of the ideal values.  The resulting hybrid object is the profile under
test; every reported enclosure is rigorous for it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .bounds import INF, BoundPair, E_HI, E_LO, bp_max
from .profiles import (
    AnalyticTail,
    Piece,
    PowerProfile,
    S_COORD,
    StepProfile,
    TailError,
    U_COORD,
    log_plus,
    parse_decimal,
    s_of_u,
)

__all__ = [
    "FamilyError",
    "BlockRule",
    "block_rule",
    "FAMILY_IDS",
    "DEFAULT_DEPTH",
    "MIN_DEPTH",
    "MAX_DEPTH",
    "instantiate",
    "parse_family",
    "ExpectedBehavior",
    "expected_behavior",
    "series_tail",
    "series_tail_bound",
]


class FamilyError(ValueError):
    """A catalog request violated a family's construction contract."""


DEFAULT_DEPTH = 104
MIN_DEPTH = 8
MAX_DEPTH = 2048

_WINDOW = 64
_SEARCH_CAP = 4096
_RHO_LOG = Fraction(13, 25)
_SLOP = Fraction(1, 2 ** 30)
_RHO_HALF = Fraction(1, 2) * (1 + _SLOP)


def _frac(v) -> Fraction:
    if isinstance(v, str):
        return parse_decimal(v)
    if isinstance(v, float):
        return parse_decimal(repr(v))
    return Fraction(v)


def _rat(bp: BoundPair) -> BoundPair:
    """Move finite float endpoints to the exact-rational lane.

    Floats are dyadic rationals, so the conversion is exact; it keeps
    later products with extreme-magnitude rationals out of the float
    range caps."""
    lo = bp.lo if isinstance(bp.lo, Fraction) else Fraction(bp.lo)
    hi = bp.hi if isinstance(bp.hi, Fraction) else Fraction(bp.hi)
    return BoundPair(lo, hi, note=bp.note)


def _dyadic_floor(value, bits: int = 64) -> Fraction:
    """Largest dyadic rational with ~``bits`` significant bits below value."""
    value = Fraction(value)
    if value <= 0:
        raise FamilyError("dyadic rounding needs a positive value")
    num, den = value.numerator, value.denominator
    mag = num.bit_length() - den.bit_length()
    shift = max(bits - mag, 0) + bits
    return Fraction((num << shift) // den, 1 << shift)


def _dyadic_ceil(value, bits: int = 64) -> Fraction:
    value = Fraction(value)
    if value <= 0:
        raise FamilyError("dyadic rounding needs a positive value")
    num, den = value.numerator, value.denominator
    mag = num.bit_length() - den.bit_length()
    shift = max(bits - mag, 0) + bits
    return Fraction(-((-num << shift) // den), 1 << shift)


# ---------------------------------------------------------------------------
# strand sums: exact window + certified remainder
# ---------------------------------------------------------------------------

def _window_sum(term: Callable[[int], BoundPair], start: int,
                end: int) -> BoundPair:
    total = BoundPair.exact(0)
    for k in range(start, end):
        total = total + term(k)
    return total


def _check_geometric(term, start: int, rho: Fraction) -> None:
    prev = term(start)
    for k in range(start + 1, start + _WINDOW + 1):
        cur = term(k)
        if not cur.hi <= rho * prev.lo:
            raise TailError(
                f"geometric tail certificate (ratio {rho}) failed "
                f"between terms {k - 1} and {k}")
        prev = cur


def _check_growth(term, start: int) -> None:
    prev = term(start)
    if not prev.lo > 0:
        raise TailError("divergence certificate needs positive terms")
    for k in range(start + 1, start + _WINDOW + 1):
        cur = term(k)
        if not cur.lo >= prev.hi:
            raise TailError(
                f"term-growth certificate failed between terms {k - 1} "
                f"and {k}")
        prev = cur


def _check_harmonic(term, start: int) -> None:
    prev = term(start) * BoundPair.exact(max(start, 1))
    if not prev.lo > 0:
        raise TailError("divergence certificate needs positive terms")
    for k in range(start + 1, start + _WINDOW + 1):
        cur = term(k) * BoundPair.exact(k)
        if not cur.lo >= prev.hi:
            raise TailError(
                f"harmonic-minorant certificate failed between terms "
                f"{k - 1} and {k}")
        prev = cur


def _check_ratio_growth(term, start: int) -> None:
    """Verify that consecutive-term ratios are positive and nondecreasing.

    Used by rules whose closed form shows the term ratio grows without
    bound: the series then diverges even when the ratio is still below
    one on the materializable window, because some deeper block pushes
    it past one and the terms grow geometrically from there.
    """
    prev = term(start)
    if not prev.lo > 0:
        raise TailError("divergence certificate needs positive terms")
    last_ratio = None
    for k in range(start + 1, start + _WINDOW + 1):
        cur = term(k)
        if not cur.lo > 0:
            raise TailError("divergence certificate needs positive terms")
        ratio = cur / prev
        if last_ratio is not None and not ratio.lo >= last_ratio.hi:
            raise TailError(
                f"ratio-growth certificate failed between terms {k - 1} "
                f"and {k}")
        last_ratio = ratio
        prev = cur


def _strand(term: Callable[[int], BoundPair], start: int,
            rule: Tuple) -> BoundPair:
    """Enclosure of ``sum_{k >= start} term(k)`` for nonnegative terms."""
    kind = rule[0]
    if kind == "zero":
        return BoundPair.exact(0)
    if kind == "finite":
        return _window_sum(term, start, rule[1])
    if kind == "geom":
        rho = rule[1]
        if not 0 < rho < 1:
            raise TailError(f"geometric tail ratio {rho} is not in (0, 1)")
        _check_geometric(term, start, rho)
        part = _window_sum(term, start, start + _WINDOW)
        first_rem = term(start + _WINDOW)
        return part + BoundPair(first_rem.lo,
                                (first_rem * (1 / (1 - rho))).hi)
    if kind == "grow":
        _check_growth(term, start)
        return BoundPair.pos_infinite(
            f"tail series diverges: nondecreasing terms from block {start}")
    if kind == "harm":
        _check_harmonic(term, start)
        return BoundPair.pos_infinite(
            f"tail series diverges: harmonic minorant from block {start}")
    if kind == "ratio_grow":
        _check_ratio_growth(term, start)
        return BoundPair.pos_infinite(
            f"tail series diverges: term ratios grow without bound "
            f"from block {start}")
    raise TailError(f"unknown tail remainder rule {kind!r}")


def _computed_rho(two_exponent: Fraction) -> Fraction:
    """A rational ratio bound slightly above ``2**two_exponent``."""
    rho = BoundPair.exact(2).pow(two_exponent).hi * (1 + _SLOP)
    if not rho < 1:
        raise TailError(
            f"no contracting tail ratio at exponent 2^{two_exponent}")
    return rho


def _transient_rho(base: Fraction, mag: Fraction, start: int) -> Fraction:
    """Ratio bound ``base * ((start+2)/(start+1))**mag`` for strands whose
    term ratio decays toward ``base`` from above as the index grows."""
    step = BoundPair.exact(Fraction(start + 2, start + 1)).pow(mag)
    rho = (BoundPair.exact(base) * step).hi * (1 + _SLOP)
    if not rho < 1:
        raise TailError(
            f"no contracting tail ratio at block {start} for polynomial "
            f"factor of degree {mag}")
    return rho


def _cut_bounds(direction: str, level, term, rule, start: int,
                lam: BoundPair) -> Tuple:
    """Lower/upper sums of ``term(k)`` over blocks with ``level(k) > lam``.

    Levels must be monotone (``direction``): the above-level set is then a
    suffix (increasing) or a prefix (decreasing) of the block range.  When
    a cut point cannot be certified within the search cap the bound falls
    back to the whole-tail sum (upper) or zero (lower).
    """
    lam_lo, lam_hi = lam.lo, lam.hi

    def first(pred):
        for k in range(start, start + _SEARCH_CAP):
            if pred(k):
                return k
        return None

    if direction == "inc":
        j_up = first(lambda k: not level(k).hi <= lam_lo)
        j_lo = first(lambda k: isinstance(lam_hi, Fraction)
                     and level(k).lo > lam_hi)
        upper = _strand(term, j_up, rule).hi if j_up is not None \
            else _strand(term, start, rule).hi
        lower = _strand(term, j_lo, rule).lo if j_lo is not None \
            else Fraction(0)
        return lower, upper
    j_up = first(lambda k: level(k).hi <= lam_lo)
    j_lo = first(lambda k: not (isinstance(lam_hi, Fraction)
                                and level(k).lo > lam_hi))
    upper = _window_sum(term, start, j_up).hi if j_up is not None \
        else _strand(term, start, rule).hi
    lower = _window_sum(term, start, j_lo).lo if j_lo is not None \
        else Fraction(0)
    return lower, upper


# ---------------------------------------------------------------------------
# block rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlockRule:
    """Exact (or enclosed) block level as a function of the block index."""

    kind: str
    direction: str                      # "inc" | "dec"
    exact: Optional[Callable[[int], Fraction]]
    nominal: Callable[[int], BoundPair]
    label: str
    params: Tuple = ()


def _rule_pow2sq() -> BlockRule:
    f = lambda k: Fraction(2) ** (k * k)
    return BlockRule("pow2sq", "inc", f,
                     lambda k: BoundPair.exact(f(k)), "pow2sq")


def _rule_pow2() -> BlockRule:
    f = lambda k: Fraction(2) ** k
    return BlockRule("pow2", "inc", f,
                     lambda k: BoundPair.exact(f(k)), "pow2")


def _rule_slowlog() -> BlockRule:
    nominal = lambda k: _rat(BoundPair.exact(k + 4).ln())
    return BlockRule("slowlog", "inc", None, nominal, "slowlog")


def _rule_linear() -> BlockRule:
    f = lambda k: Fraction(k + 1)
    return BlockRule("linear", "inc", f,
                     lambda k: BoundPair.exact(f(k)), "linear")


def _rule_geometric(ratio: Fraction, b0: Fraction) -> BlockRule:
    if not ratio > 0 or ratio == 1:
        raise FamilyError("geometric block rule needs ratio > 0, != 1")
    if not b0 > 0:
        raise FamilyError("geometric block rule needs b0 > 0")
    f = lambda k: b0 * ratio ** k
    direction = "inc" if ratio > 1 else "dec"
    return BlockRule("geometric", direction, f,
                     lambda k: BoundPair.exact(f(k)),
                     f"geometric({ratio})", (ratio, b0))


def _rule_sqgrid() -> BlockRule:
    f = lambda k: Fraction((k + 1) * (k + 1))
    return BlockRule("sqgrid", "inc", f,
                     lambda k: BoundPair.exact(f(k)), "sqgrid")


def _rule_invlin() -> BlockRule:
    f = lambda k: Fraction(1, k + 1)
    return BlockRule("invlin", "dec", f,
                     lambda k: BoundPair.exact(f(k)), "invlin")


def _rule_epow2() -> BlockRule:
    # levels e * 2^k: irrational, so only an enclosure is exposed; the
    # materialized blocks store dyadic roundings of it
    nominal = lambda k: (BoundPair(E_LO, E_HI)
                         * BoundPair.exact(Fraction(1 << k)))
    return BlockRule("epow2", "inc", None, nominal, "epow2")


def _rule_halving() -> BlockRule:
    f = lambda n: Fraction(1, 2 ** n)
    return BlockRule("halving", "dec", f,
                     lambda n: BoundPair.exact(f(n)), "halving")


def _rule_doubling() -> BlockRule:
    f = lambda n: Fraction(2) ** n
    return BlockRule("doubling", "inc", f,
                     lambda n: BoundPair.exact(f(n)), "doubling")


_RULE_BUILDERS: Dict[str, Callable[..., BlockRule]] = {
    "pow2sq": _rule_pow2sq,
    "pow2": _rule_pow2,
    "slowlog": _rule_slowlog,
    "linear": _rule_linear,
    "geometric": _rule_geometric,
    "sqgrid": _rule_sqgrid,
    "invlin": _rule_invlin,
    "epow2": _rule_epow2,
    "halving": _rule_halving,
    "doubling": _rule_doubling,
}


def block_rule(kind: str, **params) -> BlockRule:
    """Build a block rule by kind name; numeric params accept strings."""
    builder = _RULE_BUILDERS.get(kind)
    if builder is None:
        raise FamilyError(f"unknown block rule kind {kind!r}")
    if kind == "geometric":
        ratio = _frac(params.pop("ratio", Fraction(1, 2)))
        b0 = _frac(params.pop("b0", 1))
        if params:
            raise FamilyError(f"unexpected block rule params {sorted(params)}")
        return builder(ratio, b0)
    if params:
        raise FamilyError(f"block rule {kind!r} takes no params")
    return builder()


# ---------------------------------------------------------------------------
# couplings: sliver width a_k as a function of the block level b_k
# ---------------------------------------------------------------------------

def _couple_nominal(family: str, b: BoundPair) -> BoundPair:
    """Enclosure of the coupled sliver width for tail blocks."""
    if family in ("Ex6_1", "ExP4_1"):
        return b.reciprocal()
    if family in ("Ex6_2", "ExP4_3"):
        return BoundPair.exact(Fraction(1, 4))
    if family in ("Ex6_3", "ExP4_4"):
        return (BoundPair.exact(16) - b.ln()).sqrt().reciprocal()
    if family == "Ex6_4":
        return (BoundPair.exact(4) - b.ln()).reciprocal()
    if family == "Ex6_5":
        return (b * (BoundPair.exact(1) + b.ln())).reciprocal()
    if family == "ExP4_2":
        damp = _rat((BoundPair.exact(1) + b.ln().ln()).reciprocal())
        return damp * b.reciprocal()
    raise FamilyError(f"no width coupling for family {family!r}")


def _couple_exact(family: str, b: Fraction, k: int) -> Fraction:
    """Exact materialized sliver width; dyadic rounding when needed."""
    if family in ("Ex6_1", "ExP4_1"):
        return 1 / b
    if family in ("Ex6_2", "ExP4_3"):
        return Fraction(1, 4)
    if family == "Ex6_6":
        if b.denominator != 1:
            raise FamilyError("Ex6_6 needs integer block levels")
        return Fraction(1, 2 ** int(b))
    if family == "Ex6_7":
        inv = 1 / b
        if inv.denominator != 1:
            raise FamilyError("Ex6_7 needs block levels with integer "
                              "reciprocals")
        return Fraction(1, 2 ** int(inv))
    # transcendental couplings: store the lower dyadic rounding
    return _dyadic_floor(_couple_nominal(family, BoundPair.exact(b)).lo)


def _tail_width(family: str, rule: BlockRule, k: int) -> BoundPair:
    if family == "Ex6_6":
        return BoundPair.exact(_couple_exact(family, rule.exact(k), k))
    if family == "Ex6_7":
        return BoundPair.exact(_couple_exact(family, rule.exact(k), k))
    return _couple_nominal(family, rule.nominal(k))


# ---------------------------------------------------------------------------
# per-family power-moment remainder rules
# ---------------------------------------------------------------------------

def _require_grid_exponent(gamma: Fraction) -> None:
    if not -64 <= gamma <= 10:
        raise TailError(
            f"no certified tail rule for power exponent {gamma}")


def _pow_rule(family: str, rule: BlockRule, gamma: Fraction,
              depth: int) -> Tuple:
    """Remainder rule for ``sum 2^(-k-1) a_k b_k^gamma`` from the tail."""
    _require_grid_exponent(gamma)
    kind = rule.kind
    if family in ("Ex6_1", "ExP4_1", "Ex6_5"):
        if kind == "pow2sq":
            return ("grow",) if gamma > 1 else ("geom", Fraction(1, 2))
        if kind == "pow2":
            if gamma > 2:
                return ("grow",)
            if gamma == 2:
                return ("grow",) if family in ("Ex6_1", "ExP4_1") \
                    else ("harm",)
            if gamma > 1:
                return ("geom", _computed_rho(gamma - 2))
            return ("geom", Fraction(1, 2))
        if kind == "slowlog":
            return ("geom", _RHO_LOG)
    if family == "Ex6_2" and kind == "linear":
        if gamma > 1:
            return ("geom", _transient_rho(Fraction(1, 2), gamma, depth))
        return ("geom", Fraction(5, 9))
    if family in ("Ex6_3", "Ex6_4", "ExP4_3", "ExP4_4") \
            and kind == "geometric":
        if gamma > -1:
            return ("geom", _computed_rho(-1 - gamma))
        if gamma == -1:
            return ("grow",) if family == "ExP4_3" else ("harm",)
        return ("grow",)
    if family == "Ex6_6" and kind in ("sqgrid", "linear"):
        return ("geom", Fraction(1, 2))
    if family == "Ex6_7" and kind == "invlin":
        if gamma < 0:
            return ("geom", _transient_rho(Fraction(1, 4), -gamma, depth))
        return ("geom", Fraction(12, 25))
    if family == "ExP4_2" and kind == "epow2":
        # term = 2^(-k-1) b^(gamma-1) / (1 + loglog b) with b doubling, so
        # the ratio is 2^(gamma-2) shaded down by the loglog factor
        if gamma > 2:
            return ("grow",)
        if gamma == 2:
            return ("harm",)
        return ("geom", _computed_rho(gamma - 2))
    raise TailError(
        f"no certified tail rule for {family} with block rule {kind!r}")


# ---------------------------------------------------------------------------
# tail engine for block-with-sliver profiles (native coordinate s)
# ---------------------------------------------------------------------------

class _SliverTailEngine:
    """Moment enclosures for the deep tail of a sliver-coupled profile.

    Block ``k`` occupies ``(2^(-k-1), 2^(-k)]``: a sliver of length
    ``2^(-k-1) a_k`` at level ``b_k`` next to a stretch at level one.
    """

    def __init__(self, family: str, rule: BlockRule, depth: int):
        self.family = family
        self.rule = rule
        self.K = depth
        self.boundary = Fraction(1, 2 ** depth)
        self._memo: Dict[str, BoundPair] = {}

    # -- strand ingredients -------------------------------------------------
    def _b(self, k: int) -> BoundPair:
        return self.rule.nominal(k)

    def _width(self, k: int) -> BoundPair:
        return _tail_width(self.family, self.rule, k) \
            * BoundPair.exact(Fraction(1, 2 ** (k + 1)))

    def _sliver_term(self, gamma: Fraction):
        if gamma == 1:
            return lambda k: self._width(k) * self._b(k)
        return lambda k: self._width(k) * self._b(k).pow(gamma)

    def _widths_from(self, start: int) -> BoundPair:
        return _strand(self._width, start, ("geom", Fraction(1, 2)))

    def _slivers_from(self, gamma: Fraction, start: int) -> BoundPair:
        if gamma < 0 and self.rule.direction == "inc":
            # levels increase, so b_k**gamma peaks at the first block; the
            # sliver widths tile inside (0, 2**-start], giving a closed bound
            # without materializing the (potentially astronomical) powers
            _require_grid_exponent(gamma)
            peak = self._b(start).pow(gamma)
            cap = BoundPair.exact(Fraction(1, 2 ** start)) * peak
            return BoundPair(Fraction(0), cap.hi)
        return _strand(self._sliver_term(gamma), start,
                       _pow_rule(self.family, self.rule, gamma, self.K))

    def _ones_len(self) -> BoundPair:
        key = "#ones"
        if key not in self._memo:
            widths = self._widths_from(self.K)
            lo = max(Fraction(0), self.boundary - widths.hi)
            self._memo[key] = BoundPair(lo, self.boundary - widths.lo)
        return self._memo[key]

    def _abs_log_term(self, k: int) -> BoundPair:
        ln = self._b(k).ln()
        mag = -ln if self.rule.direction == "dec" else ln
        return self._width(k) * mag

    def _weighted_log_term(self, k: int) -> BoundPair:
        return self._sliver_term(Fraction(1))(k) * self._b(k).ln()

    # -- transforms ----------------------------------------------------------
    def moment(self, transform) -> BoundPair:
        kind = transform.kind
        if kind == "identity":
            return self._ones_len() + self._slivers_from(Fraction(1), self.K)
        if kind == "power":
            return self._ones_len() \
                + self._slivers_from(transform.exponent, self.K)
        if kind == "log":
            mag = _strand(self._abs_log_term, self.K, ("geom", _RHO_LOG))
            return -mag if self.rule.direction == "dec" else mag
        if kind == "logplus":
            return self._entropy(transform.c, smooth=False)
        if kind == "logep":
            return self._entropy(transform.c, smooth=True)
        if kind == "indicator":
            return self._cut_moment(transform.lam, weighted=False)
        if kind == "mass_above":
            return self._cut_moment(transform.lam, weighted=True)
        raise TailError(f"no tail rule for transform kind {kind!r}")

    def _cut_moment(self, lam: BoundPair, weighted: bool) -> BoundPair:
        ones = self._ones_len()
        ones_lo = ones.lo if (isinstance(lam.hi, Fraction) and lam.hi < 1) \
            else Fraction(0)
        ones_hi = ones.hi if lam.lo < 1 else Fraction(0)
        if weighted:
            term = self._sliver_term(Fraction(1))
            rule = _pow_rule(self.family, self.rule, Fraction(1), self.K)
        else:
            term = self._width
            rule = ("geom", Fraction(1, 2))
        lower, upper = _cut_bounds(self.rule.direction, self._b, term,
                                   rule, self.K, lam)
        return BoundPair(ones_lo + lower, _ep_add(ones_hi, upper))

    def _entropy(self, c: BoundPair, smooth: bool) -> BoundPair:
        ones = self._ones_len()
        if smooth:
            ones_part = ones * (BoundPair(E_LO, E_HI)
                                + BoundPair.exact(1) / c).ln()
        else:
            ones_part = ones * log_plus(BoundPair.exact(1) / c)
        b_first = self._b(self.K)
        if self.rule.direction == "dec":
            if not b_first.hi <= c.lo:
                raise TailError(
                    "entropy level straddles the tail block levels")
            if not smooth:
                return ones_part
            s1 = self._slivers_from(Fraction(1), self.K)
            top = (BoundPair(E_LO, E_HI) + b_first / c).ln()
            return ones_part + BoundPair(s1.lo, (s1 * top).hi)
        if not (isinstance(c.hi, Fraction) and b_first.lo > c.hi):
            raise TailError("entropy level straddles the tail block levels")
        if smooth and not (b_first / c).lo >= E_HI:
            raise TailError("entropy level too close to the tail blocks")
        s1 = self._slivers_from(Fraction(1), self.K)
        if s1.lo_is_infinite:
            return s1
        wlog = _strand(self._weighted_log_term, self.K, ("geom", _RHO_LOG))
        core = wlog - s1 * c.ln()
        if smooth:
            return ones_part + BoundPair(core.lo, (core + s1).hi)
        return ones_part + core

    # -- value range and maximal hook ----------------------------------------
    def value_inf(self) -> BoundPair:
        if self.rule.direction == "inc":
            return BoundPair.exact(1)
        return BoundPair.exact(0)

    def value_sup(self) -> BoundPair:
        if self.rule.direction == "inc":
            return BoundPair.pos_infinite(
                "tail block levels grow without bound")
        return BoundPair.exact(1)


def _ep_add(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    return (BoundPair(0, a) + BoundPair(0, b)).hi


# ---------------------------------------------------------------------------
# tail engine for block-constant profiles (native coordinate u)
# ---------------------------------------------------------------------------

def _block_len_s(n: int) -> Fraction:
    """Exact s-length of the u-block ``(2^(-n-1), 2^(-n)]``."""
    return Fraction(1, 2 ** n) - Fraction(3, 4 ** (n + 1))


def _uniform_value(family: str, rule: BlockRule) -> Callable[[int], Fraction]:
    if family in ("Ex6_9", "Ex6_10"):
        return rule.exact
    # Ex6_8: block n carries the reciprocal of prod_{k=1..n} b_k
    if rule.kind == "geometric":
        ratio = rule.params[0]
        return lambda n: Fraction(1) / (ratio ** (n * (n + 1) // 2))
    prods = [Fraction(1)]

    def running(n: int) -> Fraction:
        while len(prods) <= n:
            prods.append(prods[-1] * rule.exact(len(prods)))
        return 1 / prods[n]

    return running


class _UniformTailEngine:
    """Moment enclosures for the deep tail of a block-constant profile.

    The profile is constant on dyadic blocks of the u coordinate; moments
    integrate in s, where block ``n`` has exact length
    ``2^(-n) - 3*4^(-n-1)``.
    """

    def __init__(self, family: str, rule: BlockRule, depth: int):
        self.family = family
        self.rule = rule
        self.K = depth
        self.boundary = s_of_u(Fraction(1, 2 ** depth))
        self._val = _uniform_value(family, rule)
        self._vdir = "inc" if family == "Ex6_10" else "dec"

    def _len_enc(self, n: int) -> BoundPair:
        return BoundPair.exact(_block_len_s(n))

    def _val_enc(self, n: int) -> BoundPair:
        return BoundPair.exact(self._val(n))

    def _pow_term(self, gamma: Fraction):
        if gamma == 1:
            return lambda n: self._len_enc(n) * self._val_enc(n)
        return lambda n: self._len_enc(n) * self._val_enc(n).pow(gamma)

    def _power_rule(self, gamma: Fraction) -> Tuple:
        if self.family == "Ex6_9":
            if gamma > -1:
                return ("geom", _computed_rho(-1 - gamma))
            return ("grow",)
        if self.family == "Ex6_10":
            if gamma >= 1:
                return ("grow",)
            return ("geom", _computed_rho(gamma - 1))
        # Ex6_8: values shrink by the factor b_{n+1} per block
        if gamma > 0:
            return ("geom", _RHO_HALF)
        if self.rule.kind == "geometric":
            return ("grow",)
        # linear levels: the term ratio (n+2)^|gamma| / 2 keeps rising and
        # eventually exceeds one, so the negative-power series diverges
        # even when its terms still shrink on the materialized window
        return ("ratio_grow",)

    def _power_moment(self, gamma: Fraction) -> BoundPair:
        _require_grid_exponent(gamma)
        if gamma == 0:
            return BoundPair.exact(self.boundary)
        return _strand(self._pow_term(gamma), self.K,
                       self._power_rule(gamma))

    def _abs_log_term(self, n: int) -> BoundPair:
        ln = self._val_enc(n).ln()
        return self._len_enc(n) * (ln if self._vdir == "inc" else -ln)

    def moment(self, transform) -> BoundPair:
        kind = transform.kind
        if kind == "identity":
            return self._power_moment(Fraction(1))
        if kind == "power":
            return self._power_moment(transform.exponent)
        if kind == "log":
            mag = _strand(self._abs_log_term, self.K, ("geom", _RHO_LOG))
            return mag if self._vdir == "inc" else -mag
        if kind == "logplus":
            return self._entropy(transform.c, smooth=False)
        if kind == "logep":
            return self._entropy(transform.c, smooth=True)
        if kind == "indicator":
            return self._cut_moment(transform.lam, weighted=False)
        if kind == "mass_above":
            return self._cut_moment(transform.lam, weighted=True)
        raise TailError(f"no tail rule for transform kind {kind!r}")

    def _cut_moment(self, lam: BoundPair, weighted: bool) -> BoundPair:
        if weighted:
            term = self._pow_term(Fraction(1))
            rule = self._power_rule(Fraction(1))
        else:
            term = self._len_enc
            rule = ("geom", _RHO_HALF)
        lower, upper = _cut_bounds(self._vdir, self._val_enc, term, rule,
                                   self.K, lam)
        if lower == INF:
            return BoundPair.pos_infinite(
                "superlevel tail mass diverges: growing block values on "
                "blocks of comparable length")
        return BoundPair(lower, upper)

    def _entropy(self, c: BoundPair, smooth: bool) -> BoundPair:
        if self._vdir == "dec":
            v_first = self._val_enc(self.K)
            if not v_first.hi <= c.lo:
                raise TailError(
                    "entropy level straddles the tail block values")
            if not smooth:
                return BoundPair.exact(0)
            s1 = self._power_moment(Fraction(1))
            top = (BoundPair(E_LO, E_HI) + v_first / c).ln()
            return BoundPair(s1.lo, (s1 * top).hi)
        if smooth:
            term = lambda n: (self._pow_term(Fraction(1))(n)
                              * (BoundPair(E_LO, E_HI)
                                 + self._val_enc(n) / c).ln())
            return _strand(term, self.K, ("grow",))
        if not isinstance(c.hi, Fraction):
            raise TailError("entropy level is unbounded")
        j = None
        for n in range(self.K, self.K + _SEARCH_CAP):
            if self._val_enc(n).lo > c.hi:
                j = n
                break
        if j is None:
            raise TailError("entropy level exceeds the searchable tail range")
        term = lambda n: (self._pow_term(Fraction(1))(n)
                          * log_plus(self._val_enc(n) / c))
        return _strand(term, j, ("grow",))

    def value_inf(self) -> BoundPair:
        if self._vdir == "inc":
            return BoundPair.exact(self._val(self.K))
        return BoundPair.exact(0)

    def value_sup(self) -> BoundPair:
        if self._vdir == "inc":
            return BoundPair.pos_infinite(
                "tail block values grow without bound")
        return BoundPair.exact(self._val(self.K))


# ---------------------------------------------------------------------------
# catalog construction
# ---------------------------------------------------------------------------

FAMILY_IDS: Tuple[str, ...] = (
    "Ex6_1", "Ex6_2", "Ex6_3", "Ex6_4", "Ex6_5", "Ex6_6", "Ex6_7",
    "Ex6_8", "Ex6_9", "Ex6_10", "ExP4_1", "ExP4_2", "ExP4_3", "ExP4_4",
    "ExCentre",
)

_U_NATIVE = ("Ex6_8", "Ex6_9", "Ex6_10")

# Families with free increasing levels default to b_k = 2^k and also carry
# a fast variant (2^(k^2)) and an arbitrarily-slow one (log-scale).  Free
# decreasing levels default to b_k = 2^-k.  Two couplings of the form
# 2^(-b_k) or 2^(-1/b_k) would need astronomically thin slivers under those
# defaults, so they run on polynomial-scale levels instead: Ex6_6 on
# b_k = k+1 (with the square-growth variant) and Ex6_7 on b_k = 1/(k+1).
_ALLOWED_KINDS: Dict[str, Tuple[str, ...]] = {
    "Ex6_1": ("pow2", "pow2sq", "slowlog"),
    "Ex6_2": ("linear",),
    "Ex6_3": ("geometric",),
    "Ex6_4": ("geometric",),
    "Ex6_5": ("pow2", "pow2sq", "slowlog"),
    "Ex6_6": ("linear", "sqgrid"),
    "Ex6_7": ("invlin",),
    "Ex6_8": ("linear", "geometric"),
    "Ex6_9": ("halving",),
    "Ex6_10": ("doubling",),
    "ExP4_1": ("pow2", "pow2sq", "slowlog"),
    "ExP4_2": ("epow2",),
    "ExP4_3": ("geometric",),
    "ExP4_4": ("geometric",),
}

_DEFAULT_KINDS: Dict[str, str] = {
    "Ex6_1": "pow2",
    "Ex6_2": "linear",
    "Ex6_3": "geometric",
    "Ex6_4": "geometric",
    "Ex6_5": "pow2",
    "Ex6_6": "linear",
    "Ex6_7": "invlin",
    "Ex6_8": "linear",
    "Ex6_9": "halving",
    "Ex6_10": "doubling",
    "ExP4_1": "pow2",
    "ExP4_2": "epow2",
    "ExP4_3": "geometric",
    "ExP4_4": "geometric",
}


def _check_rule(family: str, rule: BlockRule) -> None:
    allowed = _ALLOWED_KINDS[family]
    if rule.kind not in allowed:
        raise FamilyError(
            f"family {family} has certified tails only for block rules "
            f"{sorted(allowed)}, not {rule.kind!r}")
    if family in ("Ex6_3", "Ex6_4", "ExP4_3", "ExP4_4"):
        if rule.params != (Fraction(1, 2), Fraction(1)):
            raise FamilyError(
                f"family {family} is pinned to the geometric block rule "
                "with ratio 1/2 and b0 = 1")
    if family == "Ex6_8" and rule.kind == "geometric":
        # levels must start at one and increase to infinity (a constant
        # sequence is not admissible), with integer steps so that the
        # running products stay exact
        ratio, b0 = rule.params
        if b0 != 1 or ratio.denominator != 1 or ratio < 2:
            raise FamilyError(
                "Ex6_8 needs block levels increasing from b0 = 1 to "
                "infinity: a geometric rule with an integer ratio >= 2")


def _maximal_hook(family: str, depth: int):
    boundary = Fraction(1, 2 ** depth)
    if family in ("Ex6_1", "ExP4_1", "Ex6_5", "Ex6_6", "ExP4_2"):
        # sliver mass times level never exceeds the stretch at level one,
        # so running averages over tail scales stay below 4
        def bounded_avg(cap: BoundPair) -> BoundPair:
            top = bp_max([cap, BoundPair.exact(4)])
            return BoundPair(Fraction(0),
                             (top * BoundPair.exact(boundary)).hi)
        return bounded_avg
    if family == "Ex6_2":
        # running averages at block n stay below (n+5)/2, which sums to
        # (depth+5) * 2^(-depth-1) over the tail
        def linear_avg(cap: BoundPair) -> BoundPair:
            lin = cap * BoundPair.exact(boundary)
            extra = BoundPair.exact(Fraction(depth + 5, 2 ** (depth + 1)))
            return BoundPair(Fraction(0), (lin + extra).hi)
        return linear_avg
    return None


def _build_sliver(family: str, rule: BlockRule, depth: int) -> StepProfile:
    pieces: List[Piece] = []
    for k in range(depth - 1, -1, -1):
        lo = Fraction(1, 2 ** (k + 1))
        hi = Fraction(1, 2 ** k)
        if rule.exact is not None:
            b_mat = rule.exact(k)
        else:
            b_mat = _dyadic_ceil(Fraction(rule.nominal(k).hi))
        a_mat = _couple_exact(family, b_mat, k)
        if not 0 < a_mat <= 1:
            raise FamilyError(
                f"family {family} needs sliver widths in (0, 1]; block "
                f"{k} produced {a_mat}")
        split = lo + lo * a_mat
        pieces.append(Piece(lo, split, b_mat))
        if split != hi:
            pieces.append(Piece(split, hi, Fraction(1)))
    engine = _SliverTailEngine(family, rule, depth)
    tail = AnalyticTail(engine.boundary, engine.moment, engine.value_inf(),
                        engine.value_sup(),
                        maximal_fn=_maximal_hook(family, depth))
    if family == "Ex6_2":
        # tail-only superlevel sets keep the weak-type ratio below 4
        tail.weak_ratio_fn = lambda beta: Fraction(4)
    return StepProfile(S_COORD, pieces, tail,
                       name=f"{family}[{rule.label}]",
                       meta={"family": family, "rule": rule.label,
                             "depth": depth})


def _build_uniform(family: str, rule: BlockRule, depth: int) -> StepProfile:
    value = _uniform_value(family, rule)
    pieces = [Piece(Fraction(1, 2 ** (n + 1)), Fraction(1, 2 ** n), value(n))
              for n in range(depth - 1, -1, -1)]
    engine = _UniformTailEngine(family, rule, depth)
    tail = AnalyticTail(engine.boundary, engine.moment, engine.value_inf(),
                        engine.value_sup(),
                        integrable=(family != "Ex6_10"))
    return StepProfile(U_COORD, pieces, tail,
                       name=f"{family}[{rule.label}]",
                       meta={"family": family, "rule": rule.label,
                             "depth": depth})


def instantiate(family_id: str, b_rule: Optional[BlockRule] = None,
                depth: Optional[int] = None, r=None):
    """Build a catalog profile.

    Step families accept a block rule (from their certified set) and a
    materialization depth; ``ExCentre`` accepts only the power exponent
    ``r`` (default -1/2).
    """
    if family_id not in FAMILY_IDS:
        raise FamilyError(f"unknown family id {family_id!r}")
    if family_id == "ExCentre":
        if b_rule is not None or depth is not None:
            raise FamilyError("ExCentre takes no block rule or depth")
        return PowerProfile(Fraction(-1, 2) if r is None else _frac(r))
    if r is not None:
        raise FamilyError("only ExCentre takes the exponent r")
    rule = b_rule if b_rule is not None else block_rule(
        _DEFAULT_KINDS[family_id])
    if depth is None:
        depth = DEFAULT_DEPTH
    if not isinstance(depth, int) or isinstance(depth, bool):
        raise FamilyError("depth must be an integer")
    if not MIN_DEPTH <= depth <= MAX_DEPTH:
        raise FamilyError(
            f"depth must lie in [{MIN_DEPTH}, {MAX_DEPTH}], got {depth}")
    _check_rule(family_id, rule)
    if family_id in _U_NATIVE:
        return _build_uniform(family_id, rule, depth)
    return _build_sliver(family_id, rule, depth)


def parse_family(doc) -> StepProfile:
    """Build a profile from a JSON-style family document.

    Accepted keys: ``id`` (required), ``b_rule`` (object with ``kind``
    and optional ``ratio``/``b0``), ``depth``, ``r``.
    """
    if not isinstance(doc, Mapping):
        raise FamilyError("family document must be an object")
    unknown = set(doc) - {"id", "b_rule", "depth", "r"}
    if unknown:
        raise FamilyError(f"unknown family keys {sorted(unknown)}")
    if "id" not in doc:
        raise FamilyError("family document needs an 'id'")
    rule = None
    spec = doc.get("b_rule")
    if spec is not None:
        if not isinstance(spec, Mapping) or "kind" not in spec:
            raise FamilyError("b_rule must be an object with a 'kind'")
        extra = set(spec) - {"kind", "ratio", "b0"}
        if extra:
            raise FamilyError(f"unknown b_rule keys {sorted(extra)}")
        params = {key: spec[key] for key in ("ratio", "b0")
                  if key in spec}
        rule = block_rule(spec["kind"], **params)
    depth = doc.get("depth")
    if depth is not None and (not isinstance(depth, int)
                              or isinstance(depth, bool)):
        raise FamilyError("depth must be an integer")
    return instantiate(doc["id"], b_rule=rule, depth=depth, r=doc.get("r"))


# ---------------------------------------------------------------------------
# expected behavior tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpectedBehavior:
    """Catalog-pinned verdict for one condition, with its basis label.

    ``basis`` is ``catalog`` for directly pinned cells, ``chain:X->Y`` /
    ``contra:X->Y`` for cells forced through an implication edge,
    ``equivalent:P6`` for the smooth-entropy twin, ``ac-equivalence``
    for cells forced by a two-sided comparison condition, and
    ``non-integrable`` for cells that fail for lack of integrability.
    """

    verdict: str
    basis: str


_H = "Holds"
_F = "Fails"


def _exp(**cells) -> Dict[str, ExpectedBehavior]:
    return {cid: ExpectedBehavior(verdict, basis)
            for cid, (verdict, basis) in cells.items()}


_E_6_1 = _exp(
    P1=(_H, "catalog"), B1=(_H, "catalog"), P6=(_F, "catalog"),
    AC=(_F, "catalog"), P4a=(_F, "catalog"),
    P2=(_H, "chain:P1->P2"), P5=(_H, "chain:P2->P5"),
    P4=(_H, "chain:P5->P4"), P7=(_H, "chain:P4->P7"),
    P4b=(_H, "chain:P2->P4b"), P6e=(_F, "equivalent:P6"),
    P3=(_F, "contra:P3->P6"), P8=(_F, "contra:P8->P3"),
)

_E_6_3 = _exp(
    P5=(_H, "catalog"), P8=(_H, "catalog"), P4b=(_H, "catalog"),
    P2=(_F, "catalog"), B1=(_F, "catalog"), AC=(_F, "catalog"),
    P3=(_H, "chain:P8->P3"), P6=(_H, "chain:P3->P6"),
    P6e=(_H, "equivalent:P6"), P4a=(_H, "chain:P6->P4a"),
    P4=(_H, "chain:P4a->P4"), P7=(_H, "chain:P4->P7"),
    P1=(_F, "contra:P1->P2"),
)

_EXPECTED: Dict[str, Dict[str, ExpectedBehavior]] = {
    "Ex6_1": _E_6_1,
    "ExP4_1": _E_6_1,
    "Ex6_2": _exp(
        P8=(_H, "catalog"), P5=(_F, "catalog"), AC=(_F, "catalog"),
        P3=(_H, "chain:P8->P3"), P6=(_H, "chain:P3->P6"),
        P6e=(_H, "equivalent:P6"), P4a=(_H, "chain:P6->P4a"),
        P4=(_H, "chain:P4a->P4"), P7=(_H, "chain:P4->P7"),
        P2=(_F, "contra:P2->P5"), P1=(_F, "contra:P1->P2"),
        B1=(_F, "contra:B1->P1"),
    ),
    "Ex6_3": _E_6_3,
    "ExP4_4": _E_6_3,
    "Ex6_4": _exp(
        P2=(_H, "catalog"), P1=(_F, "catalog"), AC=(_F, "catalog"),
        P5=(_H, "chain:P2->P5"), P4b=(_H, "chain:P2->P4b"),
        P4=(_H, "chain:P5->P4"), P7=(_H, "chain:P4->P7"),
        B1=(_F, "contra:B1->P1"),
    ),
    "Ex6_5": _exp(
        P6=(_H, "catalog"), P3=(_F, "catalog"), AC=(_F, "catalog"),
        P6e=(_H, "equivalent:P6"), P4a=(_H, "chain:P6->P4a"),
        P4=(_H, "chain:P4a->P4"), P7=(_H, "chain:P4->P7"),
        P8=(_F, "contra:P8->P3"),
    ),
    "Ex6_6": _exp(
        P1=(_H, "catalog"), P3=(_H, "catalog"), B1=(_H, "catalog"),
        P8=(_F, "catalog"), AC=(_F, "catalog"),
        P2=(_H, "chain:P1->P2"), P5=(_H, "chain:P2->P5"),
        P4b=(_H, "chain:P2->P4b"), P6=(_H, "chain:P3->P6"),
        P6e=(_H, "equivalent:P6"), P4a=(_H, "chain:P6->P4a"),
        P4=(_H, "chain:P4a->P4"), P7=(_H, "chain:P4->P7"),
    ),
    "Ex6_7": _exp(
        P1=(_H, "catalog"), B1=(_F, "catalog"), AC=(_F, "catalog"),
        P2=(_H, "chain:P1->P2"), P5=(_H, "chain:P2->P5"),
        P4b=(_H, "chain:P2->P4b"), P4=(_H, "chain:P5->P4"),
        P7=(_H, "chain:P4->P7"),
    ),
    "Ex6_8": _exp(
        P7=(_H, "catalog"), P4=(_F, "catalog"), AC=(_F, "catalog"),
        B1=(_F, "catalog"),
        P5=(_F, "contra:P5->P4"), P2=(_F, "contra:P2->P5"),
        P1=(_F, "contra:P1->P2"), P4b=(_F, "contra:P4b->P5"),
        P4a=(_F, "contra:P4a->P4"), P6=(_F, "contra:P6->P4a"),
        P6e=(_F, "equivalent:P6"), P3=(_F, "contra:P3->P6"),
        P8=(_F, "contra:P8->P3"),
    ),
    "Ex6_9": _exp(
        AC=(_H, "catalog"), B1=(_F, "catalog"), P1=(_H, "catalog"),
        P2=(_H, "ac-equivalence"), P3=(_H, "ac-equivalence"),
        P4=(_H, "ac-equivalence"), P4a=(_H, "ac-equivalence"),
        P4b=(_H, "ac-equivalence"), P5=(_H, "ac-equivalence"),
        P6=(_H, "ac-equivalence"), P6e=(_H, "ac-equivalence"),
        P7=(_H, "ac-equivalence"), P8=(_H, "ac-equivalence"),
    ),
    "Ex6_10": _exp(
        AC=(_H, "catalog"),
        P1=(_F, "non-integrable"), P2=(_F, "non-integrable"),
        P3=(_F, "non-integrable"), P4=(_F, "non-integrable"),
        P4a=(_F, "non-integrable"), P4b=(_F, "non-integrable"),
        P5=(_F, "non-integrable"), P6=(_F, "non-integrable"),
        P6e=(_F, "non-integrable"), P7=(_F, "non-integrable"),
        P8=(_F, "non-integrable"), B1=(_F, "non-integrable"),
    ),
    "ExP4_2": _exp(
        P1=(_H, "catalog"), P4a=(_H, "catalog"), P6=(_F, "catalog"),
        AC=(_F, "catalog"),
        P2=(_H, "chain:P1->P2"), P5=(_H, "chain:P2->P5"),
        P4=(_H, "chain:P4a->P4"), P7=(_H, "chain:P4->P7"),
        P4b=(_H, "chain:P2->P4b"), P6e=(_F, "equivalent:P6"),
        P3=(_F, "contra:P3->P6"), P8=(_F, "contra:P8->P3"),
    ),
    "ExP4_3": _exp(
        P5=(_H, "catalog"), P8=(_H, "catalog"), P4b=(_F, "catalog"),
        B1=(_F, "catalog"), AC=(_F, "catalog"),
        P3=(_H, "chain:P8->P3"), P6=(_H, "chain:P3->P6"),
        P6e=(_H, "equivalent:P6"), P4a=(_H, "chain:P6->P4a"),
        P4=(_H, "chain:P4a->P4"), P7=(_H, "chain:P4->P7"),
        P2=(_F, "contra:P2->P4b"), P1=(_F, "contra:P1->P2"),
    ),
    "ExCentre": {},
}


def expected_behavior(family_id: str) -> Dict[str, ExpectedBehavior]:
    """Catalog-pinned verdicts for a family (empty when nothing is pinned)."""
    if family_id not in FAMILY_IDS:
        raise FamilyError(f"unknown family id {family_id!r}")
    return dict(_EXPECTED[family_id])


# ---------------------------------------------------------------------------
# dyadic index series
# ---------------------------------------------------------------------------

def series_tail(n: int) -> Fraction:
    """Exact value of ``sum_{k >= n} 2^(-k) (k+1)`` = ``2^(1-n) (n+2)``."""
    if n < 0:
        raise FamilyError("series tail index must be >= 0")
    return Fraction(2 * (n + 2), 2 ** n)


def series_tail_bound() -> BoundPair:
    """Enclosure of ``2 + 2/ln 2``: a constant ``C`` with
    ``series_tail(n) <= C * (n + 1) * 2^(-n)`` for every ``n >= 0``."""
    two = BoundPair.exact(2)
    return two + two / two.ln()
