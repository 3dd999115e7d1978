"""Radial weight profiles over the unit interval and their moments.

A radial weight on the disc is reduced to a function ``f`` of one variable
over ``(0, 1]``.  Two coordinates are supported for the variable:

* ``"u"``:  ``u = 1 - |z|``  (distance to the boundary), and
* ``"s"``:  ``s = 1 - |z|**2``  (the dictionary scale variable).

The two are linked by the exact rational map ``s = u * (2 - u)``; its
inverse ``u = 1 - sqrt(1 - s)`` is a quadratic surd.  Step profiles are
stored in their native coordinate and converted exactly to the
``s``-coordinate for integration: the normalized integral of the weight
over a Carleson box of arc length ``l`` equals ``l`` times
``integral_(0,x] f ds`` with the dictionary scale ``x = l * (2 - l)``.

Every step profile is materialized on ``(boundary, 1]`` only; behavior on
``(0, boundary]`` is delegated to a tail policy, which supplies two-sided
enclosures (or certified divergence) for each moment transform.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Optional, Sequence

from .bounds import (
    E_HI,
    E_LO,
    BoundPair,
    EnclosureError,
    Surd,
    bp_max,
    bp_min,
)


class ProfileFormatError(ValueError):
    """Malformed profile description (CLI exit code 1)."""


class NonIntegrableError(ValueError):
    """The weight has infinite mass near the boundary (CLI exit code 2)."""


class TailError(ValueError):
    """The tail policy cannot support the requested operation (exit 3)."""


class DivergentMomentError(ArithmeticError):
    """A requested moment diverges at the requested scale."""

    def __init__(self, message, certificate="divergent-moment"):
        super().__init__(message)
        self.certificate = certificate


def parse_decimal(text) -> Fraction:
    """Exact rational from a decimal string (scientific notation allowed)."""
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    try:
        if isinstance(text, str) and "/" in text:
            return Fraction(text)
        return Fraction(Decimal(text))
    except (InvalidOperation, ValueError, TypeError) as exc:
        raise ProfileFormatError(f"bad decimal literal {text!r}") from exc


# ---------------------------------------------------------------------------
# coordinates
# ---------------------------------------------------------------------------

U_COORD = "u"
S_COORD = "s"


def s_of_u(u) -> Fraction:
    """Exact dictionary scale of a boundary distance."""
    u = Fraction(u)
    return u * (2 - u)


def u_of_s(s) -> Surd:
    """Boundary distance of a dictionary scale; exact quadratic surd."""
    s = Fraction(s)
    if not 0 <= s <= 1:
        raise ProfileFormatError("scale outside [0, 1]")
    return Surd(1) - Surd.sqrt(1 - s)


def arc_of_scale(x) -> Surd:
    """Arc length ``l`` with ``l * (2 - l) = x`` (same map as ``u_of_s``)."""
    return u_of_s(x)


def top_window(ell, coordinate: str):
    """Top-of-box window for an arc of length ``ell``, in ``coordinate``.

    Returns exact endpoints ``(lo, hi)`` of the half-open window
    ``(lo, hi]``: in the ``u`` coordinate it is ``(ell/2, ell]``; pushed
    through the scale map it becomes ``(ell*(1 - ell/4), ell*(2 - ell)]``.
    Endpoints are Fractions when ``ell`` is rational, Surds otherwise.
    """
    if isinstance(ell, Surd) and ell.is_rational:
        ell = ell.as_fraction()
    if coordinate == U_COORD:
        if isinstance(ell, Surd):
            return ell * Fraction(1, 2), ell
        ell = Fraction(ell)
        return ell / 2, ell
    if coordinate == S_COORD:
        if isinstance(ell, Surd):
            sq = ell * ell
            return ell - sq * Fraction(1, 4), ell * 2 - sq
        ell = Fraction(ell)
        return ell * (1 - ell / 4), ell * (2 - ell)
    raise ProfileFormatError(f"unknown coordinate {coordinate!r}")


# ---------------------------------------------------------------------------
# moment transforms
# ---------------------------------------------------------------------------

def _fmt_param(c: BoundPair) -> str:
    return f"[{c.lo!r},{c.hi!r}]"


class Transform:
    """phi in the generalized moment  integral_(0,x] phi(f(t)) dt."""

    key: str
    kind: str

    def apply(self, value) -> BoundPair:  # pragma: no cover - interface
        raise NotImplementedError


class Identity(Transform):
    kind = "identity"
    key = "id"

    def apply(self, value):
        return value if isinstance(value, BoundPair) else BoundPair.exact(value)


class Power(Transform):
    kind = "power"

    def __init__(self, exponent):
        self.exponent = Fraction(exponent)
        self.key = f"pow:{self.exponent}"

    def apply(self, value):
        v = value if isinstance(value, BoundPair) else BoundPair.exact(value)
        return v.pow(self.exponent)


class Log(Transform):
    kind = "log"
    key = "log"

    def apply(self, value):
        v = value if isinstance(value, BoundPair) else BoundPair.exact(value)
        return v.ln()


def log_plus(ratio: BoundPair) -> BoundPair:
    """Enclosure of max(log r, 0) over the enclosure of r."""
    if ratio.definitely_le(1):
        return BoundPair.exact(0)
    ln = ratio.ln()
    if ratio.definitely_ge(1):
        return ln
    return BoundPair(Fraction(0), ln.hi, note=ln.note)


class LogPlusRelative(Transform):
    """t -> t * log+(t / c): the entropy integrand relative to level c."""

    kind = "logplus"

    def __init__(self, c):
        self.c = c if isinstance(c, BoundPair) else BoundPair.exact(c)
        self.key = f"logplus:{_fmt_param(self.c)}"

    def apply(self, value):
        v = value if isinstance(value, BoundPair) else BoundPair.exact(value)
        return v * log_plus(v / self.c)


class LogEPlusRelative(Transform):
    """t -> t * log(e + t / c): the smooth variant of the entropy integrand."""

    kind = "logep"

    def __init__(self, c):
        self.c = c if isinstance(c, BoundPair) else BoundPair.exact(c)
        self.key = f"logep:{_fmt_param(self.c)}"

    def apply(self, value):
        v = value if isinstance(value, BoundPair) else BoundPair.exact(value)
        return v * (BoundPair(E_LO, E_HI) + v / self.c).ln()


class IndicatorAbove(Transform):
    """t -> 1{t > lam}: superlevel measure integrand (strictly above)."""

    kind = "indicator"

    def __init__(self, lam):
        self.lam = lam if isinstance(lam, BoundPair) else BoundPair.exact(lam)
        self.key = f"ind:{_fmt_param(self.lam)}"

    def apply(self, value):
        v = value if isinstance(value, BoundPair) else BoundPair.exact(value)
        if v.definitely_gt(self.lam.hi):
            return BoundPair.exact(1)
        if v.definitely_le(self.lam.lo):
            return BoundPair.exact(0)
        return BoundPair(Fraction(0), Fraction(1))


class MassAbove(Transform):
    """t -> t * 1{t > lam}: superlevel mass integrand."""

    kind = "mass_above"

    def __init__(self, lam):
        self.lam = lam if isinstance(lam, BoundPair) else BoundPair.exact(lam)
        self.key = f"mass:{_fmt_param(self.lam)}"
        self._ind = IndicatorAbove(self.lam)

    def apply(self, value):
        v = value if isinstance(value, BoundPair) else BoundPair.exact(value)
        return v * self._ind.apply(value)


IDENTITY = Identity()
LOG = Log()


# ---------------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------------

class Tail:
    """Behavior of the profile on the unmaterialized deep region.

    ``boundary`` is the depth in the *s* coordinate: the materialized
    pieces cover ``(boundary, 1]`` and the tail answers for
    ``(0, boundary]``.
    """

    boundary: Fraction

    def moment(self, transform: Transform) -> BoundPair:
        """Enclosure of ``integral_(0,boundary] phi(f)``; a certified
        infinite result carries its certificate in the note field."""
        raise NotImplementedError  # pragma: no cover

    def value_inf(self) -> BoundPair:
        raise NotImplementedError  # pragma: no cover

    def value_sup(self) -> BoundPair:
        raise NotImplementedError  # pragma: no cover

    def maximal_upper(self, cap_hi) -> BoundPair:
        """Upper enclosure of the integral of the running maximal average
        over the tail region, given an enclosure of the maximal value at
        the tail boundary."""
        raise NotImplementedError  # pragma: no cover

    @property
    def integrable(self) -> bool:
        return True


class ForbidTail(Tail):
    """No tail information: any operation that needs it is an error."""

    def __init__(self, boundary):
        self.boundary = Fraction(boundary)

    def moment(self, transform):
        raise TailError("profile tail is declared 'forbid'; moments need it")

    def value_inf(self):
        raise TailError("profile tail is declared 'forbid'; ess bounds need it")

    value_sup = value_inf

    def maximal_upper(self, cap_hi):
        raise TailError("profile tail is declared 'forbid'; maximal needs it")


class ConstantTail(Tail):
    """The profile continues with a single constant value."""

    def __init__(self, boundary, value):
        self.boundary = Fraction(boundary)
        self.value = Fraction(value)
        if self.value <= 0:
            raise ProfileFormatError("tail value must be positive")

    def moment(self, transform):
        return transform.apply(self.value) * BoundPair.exact(self.boundary)

    def value_inf(self):
        return BoundPair.exact(self.value)

    value_sup = value_inf

    def maximal_upper(self, cap_hi):
        cap = cap_hi if isinstance(cap_hi, BoundPair) else BoundPair(cap_hi)
        top = bp_max([cap, BoundPair.exact(self.value)])
        return BoundPair(Fraction(0), (top * BoundPair.exact(self.boundary)).hi)


class RangeTail(Tail):
    """Values confined to ``[value_inf, value_sup]``.

    Optionally carries a geometric bound for the identity moment only:
    the tail mass lies within ``[mass_first, mass_first / (1 - ratio)]``
    (the first unmaterialized block dominates; later blocks decay at
    least geometrically).  Other transforms fall back to the range bound.
    """

    def __init__(self, boundary, value_inf, value_sup,
                 mass_first=None, ratio=None):
        self.boundary = Fraction(boundary)
        self._inf = Fraction(value_inf)
        self._sup = Fraction(value_sup)
        if not 0 <= self._inf <= self._sup:
            raise ProfileFormatError("tail range must satisfy 0 <= inf <= sup")
        if (mass_first is None) != (ratio is None):
            raise ProfileFormatError("geometric tail needs mass_first and ratio")
        self.mass_first = None if mass_first is None else Fraction(mass_first)
        self.ratio = None if ratio is None else Fraction(ratio)
        if self.ratio is not None and not 0 <= self.ratio < 1:
            raise ProfileFormatError("geometric tail ratio must be in [0, 1)")
        if self.mass_first is not None and self.mass_first < 0:
            raise ProfileFormatError("geometric tail mass must be nonnegative")

    def moment(self, transform):
        if transform.kind == "identity" and self.mass_first is not None:
            return BoundPair(self.mass_first, self.mass_first / (1 - self.ratio))
        phi = transform.apply(BoundPair(self._inf, self._sup))
        return phi * BoundPair.exact(self.boundary)

    def value_inf(self):
        return BoundPair.exact(self._inf)

    def value_sup(self):
        return BoundPair.exact(self._sup)

    def maximal_upper(self, cap_hi):
        cap = cap_hi if isinstance(cap_hi, BoundPair) else BoundPair(cap_hi)
        top = bp_max([cap, BoundPair.exact(self._sup)])
        return BoundPair(Fraction(0), (top * BoundPair.exact(self.boundary)).hi)


class AnalyticTail(Tail):
    """Family-supplied tail: enclosed series sums for each transform.

    ``moment_fn(transform) -> BoundPair`` may return a certified infinite
    enclosure (note set) for divergent series.  ``maximal_fn(cap) ->
    BoundPair`` bounds the maximal-function integral over the tail.
    """

    def __init__(self, boundary, moment_fn, value_inf, value_sup,
                 maximal_fn=None, integrable=True):
        self.boundary = Fraction(boundary)
        self._moment_fn = moment_fn
        self._vinf = value_inf if isinstance(value_inf, BoundPair) else BoundPair.exact(value_inf)
        self._vsup = value_sup if isinstance(value_sup, BoundPair) else BoundPair.exact(value_sup)
        self._maximal_fn = maximal_fn
        self._integrable = integrable
        self._memo: dict = {}

    @property
    def integrable(self):
        return self._integrable

    def moment(self, transform):
        key = transform.key
        if key not in self._memo:
            self._memo[key] = self._moment_fn(transform)
        return self._memo[key]

    def value_inf(self):
        return self._vinf

    def value_sup(self):
        return self._vsup

    def maximal_upper(self, cap_hi):
        cap = cap_hi if isinstance(cap_hi, BoundPair) else BoundPair(cap_hi)
        if self._maximal_fn is not None:
            return self._maximal_fn(cap)
        sup = self._vsup
        if not sup.is_finite:
            raise TailError("tail value range unbounded; no maximal hook given")
        top = bp_max([cap, sup])
        return BoundPair(Fraction(0), (top * BoundPair.exact(self.boundary)).hi)


# ---------------------------------------------------------------------------
# step profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Piece:
    """One constant block ``value`` on the half-open interval ``(lo, hi]``."""

    lo: Fraction
    hi: Fraction
    value: Fraction


class StepProfile:
    """Piecewise-constant profile with exact rational pieces.

    ``pieces`` ascend in the native coordinate and tile ``(boundary, 1]``.
    Integration always happens in the ``s``-coordinate, to which the
    pieces are converted exactly (the u -> s map sends rationals to
    rationals).
    """

    def __init__(self, coordinate: str, pieces: Sequence[Piece], tail: Tail,
                 name: str = "profile", meta: Optional[dict] = None):
        if coordinate not in (U_COORD, S_COORD):
            raise ProfileFormatError(f"unknown coordinate {coordinate!r}")
        pieces = list(pieces)
        if not pieces:
            raise ProfileFormatError("profile needs at least one piece")
        for p in pieces:
            if not (0 <= p.lo < p.hi <= 1):
                raise ProfileFormatError(f"bad piece bounds ({p.lo}, {p.hi}]")
            if p.value <= 0:
                raise ProfileFormatError("piece values must be positive")
        for a, b in zip(pieces, pieces[1:]):
            if a.hi != b.lo:
                raise ProfileFormatError("pieces must tile an interval")
        if pieces[-1].hi != 1:
            raise ProfileFormatError("pieces must reach the scale 1")
        self.coordinate = coordinate
        self.native_pieces = pieces
        self.native_boundary = pieces[0].lo
        self.tail = tail
        self.name = name
        self.meta = dict(meta or {})
        if coordinate == U_COORD:
            self.s_pieces = [Piece(s_of_u(p.lo), s_of_u(p.hi), p.value)
                             for p in pieces]
        else:
            self.s_pieces = pieces
        self.s_boundary = self.s_pieces[0].lo
        if Fraction(tail.boundary) != self.s_boundary:
            raise ProfileFormatError(
                "tail boundary must equal the deepest piece edge (in s)")
        self._moment_memo: dict = {}
        self._piece_lows = [p.lo for p in self.s_pieces]
        self._prefix_memo: dict = {}

    # -- structure -----------------------------------------------------------
    @property
    def non_integrable(self) -> bool:
        return not self.tail.integrable

    @property
    def f_at_one(self) -> Fraction:
        """Value at full scale (the center of the disc)."""
        return self.native_pieces[-1].value

    def values_nondecreasing_in_t(self) -> bool:
        """True when f is nondecreasing on (0, 1] (tail included)."""
        vals = [p.value for p in self.native_pieces]
        if any(b < a for a, b in zip(vals, vals[1:])):
            return False
        if self.s_boundary == 0:
            return True
        try:
            sup = self.tail.value_sup()
        except TailError:
            return False
        return sup.definitely_le(vals[0])

    def disc_monotone(self) -> Optional[str]:
        """'DEC'/'INC' when the weight is monotone in the radius with a
        positive finite value at the center; None otherwise."""
        vals = [p.value for p in self.native_pieces]
        strictly_up = any(b > a for a, b in zip(vals, vals[1:]))
        strictly_down = any(b < a for a, b in zip(vals, vals[1:]))
        if self.values_nondecreasing_in_t() and strictly_up:
            return "DEC"
        if strictly_down and not strictly_up:
            if self.s_boundary == 0:
                return "INC"
            try:
                inf = self.tail.value_inf()
            except TailError:
                return None
            if inf.definitely_ge(vals[0]):
                return "INC"
        return None

    # -- integration ---------------------------------------------------------
    def check_scale(self, x, margin: int = 1) -> Fraction:
        """Validate an integration scale; ``margin`` scales the minimum
        clearance over the tail boundary (order statistics need slack)."""
        x = Fraction(x)
        if not (0 < x <= 1):
            raise ProfileFormatError(f"scale {x} outside (0, 1]")
        if x < margin * self.s_boundary or (self.s_boundary > 0 and x <= self.s_boundary):
            raise TailError(
                f"scale {x} too deep for the materialized pieces "
                f"(tail boundary {self.s_boundary})")
        return x

    def _piece_prefix(self, transform: Transform):
        """Per-transform cache of piece images and running full-piece sums."""
        pre = self._prefix_memo.get(transform.key)
        if pre is None:
            vals = []
            sums = [BoundPair.exact(0)]
            for p in self.s_pieces:
                vals.append(transform.apply(p.value))
                sums.append(sums[-1] + vals[-1] * BoundPair.exact(p.hi - p.lo))
            pre = (vals, sums)
            self._prefix_memo[transform.key] = pre
        return pre

    def moment(self, x, transform: Transform) -> BoundPair:
        """Enclosure of ``integral_(0,x] phi(f) dt`` in the s-coordinate."""
        x = self.check_scale(x)
        memo_key = (x, transform.key)
        cached = self._moment_memo.get(memo_key)
        if cached is not None:
            return cached
        if self.s_boundary == 0:
            total = BoundPair.exact(0)
        else:
            total = self.tail.moment(transform)
            if total.lo_is_infinite:
                self._moment_memo[memo_key] = total
                return total
        vals, sums = self._piece_prefix(transform)
        i = bisect.bisect_left(self._piece_lows, x)
        if i:
            last = self.s_pieces[i - 1]
            if x < last.hi:
                total = total + sums[i - 1] + vals[i - 1] * BoundPair.exact(x - last.lo)
            else:
                total = total + sums[i]
        self._moment_memo[memo_key] = total
        return total

    def average(self, x) -> BoundPair:
        x = Fraction(x)
        return self.moment(x, IDENTITY) / BoundPair.exact(x)

    def pieces_within(self, x):
        """(length, value) of materialized pieces clipped to ``(0, x]``."""
        x = Fraction(x)
        out = []
        for p in self.s_pieces:
            if p.lo >= x:
                break
            out.append((min(p.hi, x) - p.lo, p.value))
        return out

    def materialized_mass(self, s_from, s_to) -> Fraction:
        """Exact mass of the materialized pieces over ``(s_from, s_to]``."""
        s_from, s_to = Fraction(s_from), Fraction(s_to)
        total = Fraction(0)
        for p in self.s_pieces:
            lo = max(p.lo, s_from)
            hi = min(p.hi, s_to)
            if lo < hi:
                total += p.value * (hi - lo)
        return total

    # -- order statistics ----------------------------------------------------
    def median(self, x) -> BoundPair:
        """The median level of f on ``(0, x]`` (lower-endpoint convention).

        The unmaterialized tail has measure ``s_boundary``; counting it as
        entirely below or entirely above the candidate level brackets the
        median between two materialized values (usually the same one).
        """
        x = self.check_scale(x, margin=4)
        target = Fraction(x, 2)
        slack = self.s_boundary
        items = sorted(self.pieces_within(x), key=lambda lv: lv[1])
        med_lo = med_hi = None
        cum = Fraction(0)
        for length, v in items:
            cum += length
            if med_lo is None and cum + slack >= target:
                med_lo = v
            if cum >= target:
                med_hi = v
                break
        if med_lo is None or med_hi is None:  # pragma: no cover - check_scale
            raise TailError("median level fell into the unmaterialized tail")
        if med_lo == med_hi:
            return BoundPair.exact(med_lo)
        return BoundPair(med_lo, med_hi)

    def ess_range(self, lo_pt, hi_pt, coordinate: Optional[str] = None):
        """(ess inf, ess sup) enclosures over the native window
        ``(lo_pt, hi_pt]``; endpoints may be Surds.  Only positive-measure
        overlaps count."""
        coordinate = coordinate or self.coordinate
        if coordinate != self.coordinate:
            raise ProfileFormatError("window coordinate must match the profile")
        lo_pt = Surd.of(lo_pt)
        hi_pt = Surd.of(hi_pt)
        vals = [p.value for p in self.native_pieces
                if lo_pt.compare(p.hi) < 0 and hi_pt.compare(p.lo) > 0]
        infs = [BoundPair.exact(v) for v in vals]
        sups = list(infs)
        if self.s_boundary > 0 and lo_pt.compare(self.native_boundary) < 0:
            infs.append(self.tail.value_inf())
            sups.append(self.tail.value_sup())
        if not infs:
            raise EnclosureError("window misses the profile")
        return bp_min(infs), bp_max(sups)

    def __repr__(self):
        return (f"StepProfile({self.name!r}, coord={self.coordinate!r}, "
                f"pieces={len(self.native_pieces)})")


# ---------------------------------------------------------------------------
# power profiles
# ---------------------------------------------------------------------------

# enclosure of log(e + 1)
_LOG_E_PLUS_1 = BoundPair(Fraction(13132616875182228, 10 ** 16),
                          Fraction(13132616875182229, 10 ** 16))


class PowerProfile:
    """Profile ``f(s) = (1 - s)**r`` (native coordinate ``s``), r > -1.

    Up to the dictionary reduction this is the radial weight with a pure
    power behavior at the center of the disc.  All moments admit closed
    forms; a transformed moment at the full scale ``x = 1`` diverges
    exactly when the transformed exponent drops to -1 or below.
    """

    coordinate = S_COORD

    def __init__(self, r):
        self.r = Fraction(r)
        if self.r <= -1:
            raise NonIntegrableError("power profile needs r > -1 for integrability")
        if self.r == 0:
            raise ProfileFormatError("power profile needs r != 0")
        self.name = f"power[r={self.r}]"
        self.native_boundary = Fraction(0)
        self.s_boundary = Fraction(0)
        self.non_integrable = False
        self._moment_memo: dict = {}

    # -- structure -----------------------------------------------------------
    @property
    def f_at_one(self) -> Optional[Fraction]:
        return None  # the center value is 0 or infinite, never positive finite

    def values_nondecreasing_in_t(self) -> bool:
        return self.r < 0

    def disc_monotone(self) -> Optional[str]:
        return None  # center value degenerate: monotone-weight results lapse

    def value_at(self, s) -> BoundPair:
        s = Fraction(s)
        if s >= 1:
            if self.r > 0:
                return BoundPair.exact(0)
            return BoundPair.pos_infinite("power-profile singularity at full scale")
        return BoundPair.exact(1 - s).pow(self.r)

    def check_scale(self, x) -> Fraction:
        x = Fraction(x)
        if not (0 < x <= 1):
            raise ProfileFormatError(f"scale {x} outside (0, 1]")
        return x

    # -- closed-form primitives ----------------------------------------------
    def _power_primitive(self, c: Fraction, x: Fraction) -> BoundPair:
        """integral_(0,x] (1-s)**c ds; divergence detected at x = 1."""
        if x == 1 and c <= -1:
            raise DivergentMomentError(
                f"integral of (1-s)^({c}) diverges at scale 1")
        if c == -1:
            return -(BoundPair.exact(1 - x).ln())
        cp1 = c + 1
        part = BoundPair.exact(1 - x).pow(cp1) if x < 1 else BoundPair.exact(0)
        return (BoundPair.exact(1) - part) / BoundPair.exact(cp1)

    def _log_primitive(self, x: Fraction) -> BoundPair:
        """integral_(0,x] log(1-s) ds = (1-x)(1 - log(1-x)) - 1."""
        if x == 1:
            return BoundPair.exact(-1)
        one_minus = BoundPair.exact(1 - x)
        return one_minus * (BoundPair.exact(1) - one_minus.ln()) - BoundPair.exact(1)

    def _H_point(self, c: Fraction, u_ep) -> BoundPair:
        """H(u) = u^(c+1) ((c+1) log u - 1) / (c+1)^2, the antiderivative
        of u^c log u; H(0+) = 0 for c > -1.  H is decreasing on (0, 1]."""
        if u_ep == 0:
            return BoundPair.exact(0)
        u = BoundPair(u_ep)
        cp1 = BoundPair.exact(c + 1)
        return u.pow(c + 1) * (cp1 * u.ln() - BoundPair.exact(1)) / (cp1 * cp1)

    def _powlog_between(self, c: Fraction, a: BoundPair, b: BoundPair) -> BoundPair:
        """integral_a^b u^c log u du for enclosed cut points in [0, 1].

        The integrand is <= 0 there and H is decreasing, so endpoint
        evaluations of H bracket the value; the result is clamped to <= 0.
        """
        lo = (self._H_point(c, b.hi) - self._H_point(c, a.lo)).lo
        hi = (self._H_point(c, b.lo) - self._H_point(c, a.hi)).hi
        if isinstance(hi, Fraction):
            hi = min(hi, Fraction(0))
        elif not math.isinf(hi):
            hi = min(hi, 0.0)
        return BoundPair(lo, hi)

    def _mass_between(self, a: BoundPair, b: BoundPair) -> BoundPair:
        """integral_a^b u^r du for enclosed cut points in [0, 1], clamped
        to be nonnegative."""
        rp1 = self.r + 1
        raw = (b.pow(rp1) - a.pow(rp1)) / BoundPair.exact(rp1)
        lo = raw.lo
        if isinstance(lo, Fraction):
            lo = max(lo, Fraction(0))
        elif lo < 0:
            lo = Fraction(0)
        return BoundPair(lo, raw.hi, note=raw.note)

    def _u_star(self, level) -> BoundPair:
        """Enclosure of the cut u* with (u*)^r = level, i.e. level^(1/r)."""
        return BoundPair(level).pow(Fraction(1) / self.r)

    @staticmethod
    def _clamp(v: BoundPair, lo, hi) -> BoundPair:
        return bp_min([bp_max([v, BoundPair.exact(lo)]), BoundPair.exact(hi)])

    # -- moments ---------------------------------------------------------------
    def moment(self, x, transform: Transform) -> BoundPair:
        x = self.check_scale(x)
        key = (x, transform.key)
        cached = self._moment_memo.get(key)
        if cached is not None:
            return cached
        kind = transform.kind
        if kind == "identity":
            out = self._power_primitive(self.r, x)
        elif kind == "power":
            out = self._power_primitive(self.r * transform.exponent, x)
        elif kind == "log":
            out = self._log_primitive(x) * BoundPair.exact(self.r)
        elif kind in ("indicator", "mass_above"):
            out = self._super_level(x, transform)
        elif kind == "logplus":
            out = self._entropy_moment(x, transform.c)
        elif kind == "logep":
            # log(e + y) is squeezed between max(1, log+ y) and
            # log(e + 1) + log+ y for y >= 0.
            base = self._entropy_moment(x, transform.c)
            mass = self._power_primitive(self.r, x)
            lo = bp_max([base, mass]).lo
            out = BoundPair(lo, (base + mass * _LOG_E_PLUS_1).hi)
        else:  # pragma: no cover - defensive
            raise ProfileFormatError(f"unsupported transform {kind!r}")
        self._moment_memo[key] = out
        return out

    @staticmethod
    def _clamp_nonneg(out: BoundPair) -> BoundPair:
        lo = out.lo
        if isinstance(lo, Fraction):
            lo = max(lo, Fraction(0))
        elif lo < 0:
            lo = Fraction(0)
        return BoundPair(lo, out.hi, note=out.note)

    def _super_level(self, x: Fraction, transform) -> BoundPair:
        """Measure or mass of {f > lam} within (0, x]; f is monotone in s,
        so the region is one-sided with cut point s* = 1 - lam^(1/r)."""
        lam = transform.lam
        want_mass = transform.kind == "mass_above"
        endpoints = [lam.lo] if lam.is_exact else [lam.lo, lam.hi]
        results = []
        for gamma in endpoints:
            if isinstance(gamma, float) and math.isinf(gamma):
                results.append(BoundPair.exact(0))
                continue
            if gamma <= 0:
                results.append(self._power_primitive(self.r, x) if want_mass
                               else BoundPair.exact(x))
                continue
            u_star = self._u_star(gamma)
            if self.r > 0:
                # f decreasing in s: region is s in (0, min(x, 1 - u*)]
                if want_mass:
                    cut_u = self._clamp(bp_max([u_star, BoundPair.exact(1 - x)]),
                                        Fraction(0), Fraction(1))
                    results.append(self._mass_between(cut_u, BoundPair.exact(1)))
                else:
                    results.append(self._clamp(BoundPair.exact(1) - u_star,
                                               Fraction(0), x))
            else:
                # f increasing in s: region is s in (max(0, 1 - u*), x]
                if want_mass:
                    cut_u = self._clamp(u_star, 1 - x, Fraction(1))
                    results.append(self._mass_between(BoundPair.exact(1 - x),
                                                      cut_u))
                else:
                    s_cut = self._clamp(BoundPair.exact(1) - u_star,
                                        Fraction(0), x)
                    results.append(BoundPair.exact(x) - s_cut)
        out = results[0]
        for other in results[1:]:
            out = out.hull(other)
        return self._clamp_nonneg(out)

    def _entropy_moment(self, x: Fraction, c: BoundPair) -> BoundPair:
        """integral_(0,x] f log+(f / c) via the identity
        integral u^r (r log u - log c) du over the region {f > c}."""
        if not c.definitely_gt(0):
            raise EnclosureError("entropy moment needs a positive level")
        endpoints = [c.lo] if c.is_exact else [c.lo, c.hi]
        results = []
        for gamma in endpoints:
            if isinstance(gamma, float) and math.isinf(gamma):
                results.append(BoundPair.exact(0))
                continue
            u_star = self._u_star(gamma)
            if self.r > 0:
                a = self._clamp(bp_max([u_star, BoundPair.exact(1 - x)]),
                                Fraction(0), Fraction(1))
                b = BoundPair.exact(1)
            else:
                a = BoundPair.exact(1 - x)
                b = self._clamp(u_star, 1 - x, Fraction(1))
            powlog = self._powlog_between(self.r, a, b)
            mass = self._mass_between(a, b)
            val = BoundPair.exact(self.r) * powlog - BoundPair(gamma).ln() * mass
            results.append(val)
        out = results[0]
        for other in results[1:]:
            out = out.hull(other)
        return self._clamp_nonneg(out)

    # -- aggregates ------------------------------------------------------------
    def average(self, x) -> BoundPair:
        x = Fraction(x)
        return self.moment(x, IDENTITY) / BoundPair.exact(x)

    def median(self, x) -> BoundPair:
        """f is monotone in s, so the median level sits exactly at x/2."""
        x = self.check_scale(x)
        return self.value_at(Fraction(x, 2))

    def _value_enc(self, pt) -> BoundPair:
        enc = pt.enclosure() if isinstance(pt, Surd) else BoundPair.exact(Fraction(pt))
        base = self._clamp(BoundPair.exact(1) - enc, Fraction(0), Fraction(1))
        if base.is_exact and base.lo == 0:
            if self.r > 0:
                return BoundPair.exact(0)
            return BoundPair.pos_infinite("power-profile singularity at full scale")
        return base.pow(self.r)

    def ess_range(self, lo_pt, hi_pt, coordinate: Optional[str] = None):
        coordinate = coordinate or S_COORD
        if coordinate != S_COORD:
            raise ProfileFormatError("power profiles live in the s coordinate")
        v_left = self._value_enc(lo_pt)
        v_right = self._value_enc(hi_pt)
        if self.r > 0:
            return v_right, v_left
        return v_left, v_right

    def __repr__(self):
        return f"PowerProfile(r={self.r})"


# ---------------------------------------------------------------------------
# JSON I/O
# ---------------------------------------------------------------------------

def profile_from_dict(doc: dict, name: str = "profile") -> StepProfile:
    """Build a step profile from a plain dict (see README for the schema).

    ``breakpoints`` are decimal strings (first entry = tail boundary, last
    entry must be 1); ``values`` has one entry per gap; ``tail`` selects a
    policy for ``(0, breakpoints[0]]``.
    """
    if not isinstance(doc, dict):
        raise ProfileFormatError("profile document must be an object")
    try:
        coordinate = doc["coordinate"]
        breakpoints = [parse_decimal(b) for b in doc["breakpoints"]]
        values = [parse_decimal(v) for v in doc["values"]]
    except KeyError as exc:
        raise ProfileFormatError(f"missing profile field: {exc}") from exc
    except TypeError as exc:
        raise ProfileFormatError(f"malformed profile fields: {exc}") from exc
    tail_doc = doc.get("tail", {"kind": "forbid"})
    if not isinstance(tail_doc, dict) or "kind" not in tail_doc:
        raise ProfileFormatError("tail must be an object with a 'kind'")
    if len(breakpoints) != len(values) + 1:
        raise ProfileFormatError("need len(breakpoints) == len(values) + 1")
    if any(b >= c for b, c in zip(breakpoints, breakpoints[1:])):
        raise ProfileFormatError("breakpoints must be strictly increasing")
    pieces = [Piece(a, b, v) for a, b, v in zip(breakpoints, breakpoints[1:], values)]
    boundary_native = breakpoints[0]
    boundary_s = s_of_u(boundary_native) if coordinate == U_COORD else boundary_native
    kind = tail_doc["kind"]
    try:
        if kind == "forbid":
            tail: Tail = ForbidTail(boundary_s)
        elif kind == "constant":
            tail = ConstantTail(boundary_s, parse_decimal(tail_doc["value"]))
        elif kind in ("range", "geometric"):
            tail = RangeTail(
                boundary_s,
                parse_decimal(tail_doc["value_inf"]),
                parse_decimal(tail_doc["value_sup"]),
                mass_first=(parse_decimal(tail_doc["mass_first"])
                            if "mass_first" in tail_doc else None),
                ratio=(parse_decimal(tail_doc["ratio"])
                       if "ratio" in tail_doc else None),
            )
        else:
            raise ProfileFormatError(f"unknown tail kind {kind!r}")
    except KeyError as exc:
        raise ProfileFormatError(f"missing tail field: {exc}") from exc
    return StepProfile(coordinate, pieces, tail, name=name)


def profile_from_json(text: str, name: str = "profile") -> StepProfile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProfileFormatError(f"invalid JSON: {exc}") from exc
    return profile_from_dict(doc, name=name)
