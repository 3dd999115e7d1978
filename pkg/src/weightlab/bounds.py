"""Two-sided enclosure arithmetic used by every quantitative routine.

The package computes ratios of integrals whose exact values are rational
numbers, logarithms of rationals, or quadratic surds.  All derived
quantities are carried as :class:`BoundPair` enclosures ``[lo, hi]`` whose
endpoints live in one of two lanes:

* exact :class:`fractions.Fraction` endpoints (kept exact as long as the
  operation is rational), or
* ``float`` endpoints produced with directed rounding: every libm result
  is widened outward by a relative slack of ``2**-45`` plus one ulp, so a
  lane switch never loses soundness.

Exact endpoints whose numerator+denominator exceed ``SQUEEZE_BITS`` bits
are replaced by a 512-bit dyadic enclosure (outward), which caps the cost
of long exact computations without giving up two-sidedness.

:class:`Surd` provides exact arithmetic and comparisons for numbers of the
form ``p + q*sqrt(d)`` with rational ``p, q, d`` — these appear as window
endpoints when dictionary scales are pulled back through the quadratic
boundary maps.
"""

from __future__ import annotations

import math
import sys
from fractions import Fraction
from numbers import Rational

INF = math.inf
FLOAT_MAX = sys.float_info.max
TINY = 5e-324  # smallest positive subnormal

REL_SLACK = 2.0 ** -45
SQUEEZE_BITS = 65536
SQUEEZE_TARGET = 512

# Rational enclosures of the transcendental constants the package needs.
# 37 correct digits; the true values lie strictly between LO and HI.
LOG2_LO = Fraction(6931471805599453094172321214581765680, 10 ** 37)
LOG2_HI = Fraction(6931471805599453094172321214581765681, 10 ** 37)
E_LO = Fraction(27182818284590452353602874713526624977, 10 ** 37)
E_HI = Fraction(27182818284590452353602874713526624978, 10 ** 37)


class EnclosureError(ValueError):
    """Raised when an operation cannot produce a sound enclosure."""


# ---------------------------------------------------------------------------
# directed float helpers
# ---------------------------------------------------------------------------

def next_down(v: float) -> float:
    return math.nextafter(v, -INF)


def next_up(v: float) -> float:
    return math.nextafter(v, INF)


def _widen_down(v: float) -> float:
    """One-ulp outward step; sound lower bound for a half-ulp rounding."""
    if math.isinf(v):
        return FLOAT_MAX if v > 0 else v
    return next_down(v)


def _widen_up(v: float) -> float:
    if math.isinf(v):
        return v if v > 0 else -FLOAT_MAX
    return next_up(v)


def _libm_down(v: float) -> float:
    """Outward correction for a libm result (accuracy assumed < 2**-45 rel)."""
    if math.isinf(v):
        return FLOAT_MAX if v > 0 else v
    return next_down(v - abs(v) * REL_SLACK)


def _libm_up(v: float) -> float:
    if math.isinf(v):
        return v if v > 0 else -FLOAT_MAX
    return next_up(v + abs(v) * REL_SLACK)


def frac_to_float(x: Rational, up: bool) -> float:
    """Directed conversion of an arbitrary rational to a float.

    Rounds toward -inf (``up=False``) or +inf (``up=True``).  Values beyond
    float range map to ``FLOAT_MAX``/``inf`` (resp. ``-inf``/``-FLOAT_MAX``)
    keeping the directed-bound contract.
    """
    x = Fraction(x)
    if x == 0:
        return 0.0
    if x < 0:
        return -frac_to_float(-x, not up)
    num, den = x.numerator, x.denominator
    t = num.bit_length() - den.bit_length()
    if t > 1026:
        return INF if up else FLOAT_MAX
    if t < -1080:
        return TINY if up else 0.0
    shift = 64 - t
    if not den & (den - 1):
        sh = den.bit_length() - 1 - shift
        q = (num >> sh) if sh >= 0 else (num << -sh)
    elif shift >= 0:
        q = (num << shift) // den
    else:
        q = num // (den << -shift)
    try:
        f = math.ldexp(float(q), -shift)
    except OverflowError:
        return INF if up else FLOAT_MAX
    if math.isinf(f):
        return INF if up else FLOAT_MAX
    # fix the rounding direction exactly (f is within a couple of ulp)
    for _ in range(64):
        fr = Fraction(f)
        if up:
            if fr >= x:
                return f
            f = next_up(f)
        else:
            if fr <= x:
                return f
            f = next_down(f)
    raise EnclosureError("directed float conversion failed to settle")


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


# -- dyadic fast lane --------------------------------------------------------
#
# Endpoints routinely carry power-of-two denominators (coordinates, squeezed
# mantissas, materialized block levels), and those integers can run to
# millions of bits.  Routing their arithmetic through Fraction's generic
# gcd-based normalization is quadratic in that size, so the helpers below do
# the same exact arithmetic with shifts whenever both denominators are powers
# of two, falling back to plain Fraction operators otherwise.

try:  # CPython >= 3.12
    _lowest_terms = Fraction._from_coprime_ints  # type: ignore[attr-defined]
except AttributeError:
    def _lowest_terms(num: int, den: int, _new=Fraction.__new__) -> Fraction:
        f = _new(Fraction)
        f._numerator = num
        f._denominator = den
        return f

_ZERO = Fraction(0)


def _dyadic(num: int, e: int) -> Fraction:
    """Exact ``num * 2**-e`` in lowest terms without bigint gcd."""
    if num == 0:
        return _ZERO
    if e > 0:
        tz = (num & -num).bit_length() - 1
        if tz:
            k = tz if tz < e else e
            num >>= k
            e -= k
    if e <= 0:
        return _lowest_terms(num << -e if e else num, 1)
    return _lowest_terms(num, 1 << e)


def _dy_parts(x: Fraction):
    """``(mantissa, e)`` with ``x = mantissa * 2**-e`` and mantissa odd or
    zero, or ``None`` when the denominator is not a power of two."""
    den = x.denominator
    if den & (den - 1):
        return None
    e = den.bit_length() - 1
    num = x.numerator
    if num:
        tz = (num & -num).bit_length() - 1
        if tz:
            num >>= tz
            e -= tz
    return num, e


def _frac_mul(a: Fraction, b: Fraction) -> Fraction:
    pa = _dy_parts(a)
    if pa is not None:
        pb = _dy_parts(b)
        if pb is not None:
            return _dyadic(pa[0] * pb[0], pa[1] + pb[1])
    return a * b


def _frac_add(a: Fraction, b: Fraction) -> Fraction:
    pa = _dy_parts(a)
    if pa is not None:
        pb = _dy_parts(b)
        if pb is not None:
            na, ea = pa
            nb, eb = pb
            if ea >= eb:
                return _dyadic(na + (nb << (ea - eb)), ea)
            return _dyadic(nb + (na << (eb - ea)), eb)
    return a + b


def _frac_le(a: Fraction, b: Fraction) -> bool:
    da = a.denominator
    db = b.denominator
    if (da & (da - 1)) or (db & (db - 1)):
        return a <= b
    na = a.numerator
    nb = b.numerator
    if na <= 0 and nb >= 0:
        return True
    if na > 0 >= nb or nb < 0 <= na:
        return False
    # both strictly positive or both strictly negative: compare magnitudes by
    # bit length first, shifting only on a tie
    ea = da.bit_length() - 1
    eb = db.bit_length() - 1
    la = (na if na > 0 else -na).bit_length() - ea
    lb = (nb if nb > 0 else -nb).bit_length() - eb
    if la != lb:
        return (la < lb) if na > 0 else (lb < la)
    if ea >= eb:
        return na <= nb << (ea - eb)
    return na << (eb - ea) <= nb


def _squeeze_endpoint(x: Fraction, up: bool) -> Fraction:
    """Replace an oversized rational with a 512-bit dyadic directed bound.

    Dyadic rationals with a small mantissa are kept exact regardless of the
    exponent: they are cheap to compute with and exactness of measures
    depends on them.
    """
    num, den = x.numerator, x.denominator
    if num.bit_length() + den.bit_length() <= SQUEEZE_BITS:
        return x
    if num == 0:
        return x
    if _is_pow2(den) and abs(num).bit_length() <= 2 * SQUEEZE_TARGET:
        return x
    if _is_pow2(abs(num)) and den.bit_length() <= 2 * SQUEEZE_TARGET:
        return x
    if num < 0:
        return -_squeeze_endpoint(-x, not up)
    t = num.bit_length() - den.bit_length()
    scale = SQUEEZE_TARGET - t
    if not den & (den - 1):
        sh = den.bit_length() - 1 - scale
        m = (num >> sh) if sh >= 0 else (num << -sh)
    elif scale >= 0:
        m = (num << scale) // den
    else:
        m = num // (den << -scale)
    if up:
        m += 1
    if scale >= 0:
        return Fraction(m, 1 << scale)
    return Fraction(m << -scale)


def _as_endpoint(v):
    if isinstance(v, float):
        if math.isnan(v):
            raise EnclosureError("NaN endpoint")
        return v
    if isinstance(v, Rational):
        return Fraction(v)
    raise EnclosureError(f"unsupported endpoint type {type(v)!r}")


def _ep_le(a, b) -> bool:
    """Exact endpoint comparison across lanes."""
    af, bf = isinstance(a, float), isinstance(b, float)
    if af and math.isinf(a):
        return a < 0 or (bf and b == a)
    if bf and math.isinf(b):
        return b > 0 or (af and a == b)
    a = Fraction(a) if af else a
    b = Fraction(b) if bf else b
    return _frac_le(a, b)


# ---------------------------------------------------------------------------
# BoundPair
# ---------------------------------------------------------------------------

class BoundPair:
    """A closed enclosure ``[lo, hi]`` of one real (or +inf) quantity.

    ``note`` optionally records the divergence certificate that forced an
    infinite endpoint; arithmetic propagates it so verdicts can report a
    witness.
    """

    __slots__ = ("lo", "hi", "note")

    def __init__(self, lo, hi=None, note=None):
        if hi is None:
            hi = lo
        lo = _as_endpoint(lo)
        hi = _as_endpoint(hi)
        if isinstance(lo, Fraction):
            lo = _squeeze_endpoint(lo, up=False)
        if isinstance(hi, Fraction):
            hi = _squeeze_endpoint(hi, up=True)
        if not _ep_le(lo, hi):
            raise EnclosureError(f"inverted enclosure [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "note", note)

    def __setattr__(self, *a):  # pragma: no cover - immutability guard
        raise AttributeError("BoundPair is immutable")

    # -- constructors ------------------------------------------------------
    @staticmethod
    def exact(v) -> "BoundPair":
        return BoundPair(Fraction(v))

    @staticmethod
    def pos_infinite(note=None) -> "BoundPair":
        return BoundPair(INF, INF, note=note)

    # -- predicates --------------------------------------------------------
    @property
    def is_exact(self) -> bool:
        return isinstance(self.lo, Fraction) and self.lo == self.hi

    @property
    def is_finite(self) -> bool:
        return not (isinstance(self.hi, float) and math.isinf(self.hi))

    @property
    def lo_is_infinite(self) -> bool:
        return isinstance(self.lo, float) and math.isinf(self.lo) and self.lo > 0

    def width(self):
        if not self.is_finite or self.lo_is_infinite:
            return INF
        lo = self.lo if isinstance(self.lo, Fraction) else Fraction(self.lo)
        hi = self.hi if isinstance(self.hi, Fraction) else Fraction(self.hi)
        return _frac_add(hi, -lo)

    def contains(self, v) -> bool:
        v = Fraction(v) if not isinstance(v, float) else v
        return _ep_le(self.lo, v) and _ep_le(v, self.hi)

    def definitely_ge(self, c) -> bool:
        return _ep_le(c, self.lo)

    def definitely_le(self, c) -> bool:
        return _ep_le(self.hi, c)

    def definitely_gt(self, c) -> bool:
        return _ep_le(c, self.lo) and not _ep_le(self.lo, c)

    def definitely_lt(self, c) -> bool:
        return _ep_le(self.hi, c) and not _ep_le(c, self.hi)

    def lo_float(self) -> float:
        return self.lo if isinstance(self.lo, float) else frac_to_float(self.lo, up=False)

    def hi_float(self) -> float:
        return self.hi if isinstance(self.hi, float) else frac_to_float(self.hi, up=True)

    def mid_float(self) -> float:
        lo, hi = self.lo_float(), self.hi_float()
        if math.isinf(hi):
            return hi
        return 0.5 * (lo + hi)

    def _pick_note(self, other=None):
        if self.note is not None:
            return self.note
        if other is not None and isinstance(other, BoundPair):
            return other.note
        return None

    # -- arithmetic --------------------------------------------------------
    @staticmethod
    def _coerce(v) -> "BoundPair":
        if isinstance(v, BoundPair):
            return v
        return BoundPair(_as_endpoint(v))

    @staticmethod
    def _add_ep(a, b, up: bool):
        if isinstance(a, Fraction) and isinstance(b, Fraction):
            return _frac_add(a, b)
        fa = a if isinstance(a, float) else frac_to_float(a, up)
        fb = b if isinstance(b, float) else frac_to_float(b, up)
        if math.isinf(fa) or math.isinf(fb):
            return fa + fb  # inf of matching sign; mixed signs never occur here
        return _widen_up(fa + fb) if up else _widen_down(fa + fb)

    def __add__(self, other):
        o = self._coerce(other)
        r = BoundPair(self._add_ep(self.lo, o.lo, False),
                      self._add_ep(self.hi, o.hi, True))
        return self._with_note(r, o)

    __radd__ = __add__

    def __neg__(self):
        return BoundPair(-self.hi, -self.lo, note=self.note)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    @staticmethod
    def _mul_ep(a, b, up: bool):
        # Convention: 0 * inf = 0 (mass-times-value products; documented).
        if (isinstance(a, Fraction) and a == 0) or (isinstance(b, Fraction) and b == 0):
            return Fraction(0)
        if a == 0 or b == 0:
            return 0.0
        if isinstance(a, Fraction) and isinstance(b, Fraction):
            return _frac_mul(a, b)
        fa = a if isinstance(a, float) else frac_to_float(a, up if b > 0 else not up)
        fb = b if isinstance(b, float) else frac_to_float(b, up if a > 0 else not up)
        if math.isinf(fa) or math.isinf(fb):
            sgn = (1 if fa > 0 else -1) * (1 if fb > 0 else -1)
            return INF * sgn
        return _widen_up(fa * fb) if up else _widen_down(fa * fb)

    def __mul__(self, other):
        o = self._coerce(other)
        cands_lo = []
        cands_hi = []
        for a in (self.lo, self.hi):
            for b in (o.lo, o.hi):
                cands_lo.append(self._mul_ep(a, b, False))
                cands_hi.append(self._mul_ep(a, b, True))
        lo = cands_lo[0]
        for c in cands_lo[1:]:
            if _ep_le(c, lo):
                lo = c
        hi = cands_hi[0]
        for c in cands_hi[1:]:
            if _ep_le(hi, c):
                hi = c
        return self._with_note(BoundPair(lo, hi), o)

    __rmul__ = __mul__

    @staticmethod
    def _inv_ep(a, up: bool):
        if a == 0:
            return INF if up else FLOAT_MAX  # 1/0+ -> +inf side
        if isinstance(a, Fraction):
            return Fraction(1) / a
        if math.isinf(a):
            return 0.0
        return _widen_up(1.0 / a) if up else _widen_down(1.0 / a)

    def reciprocal(self) -> "BoundPair":
        if _ep_le(self.lo, 0) and _ep_le(0, self.hi) and not (self.lo == 0 or self.hi == 0):
            raise EnclosureError("reciprocal of an interval straddling zero")
        if self.lo == 0 and self.hi == 0:
            raise EnclosureError("reciprocal of zero")
        if _ep_le(0, self.lo):
            if self.lo == 0:
                return BoundPair(self._inv_ep(self.hi, False), INF, note=self.note)
            return BoundPair(self._inv_ep(self.hi, False), self._inv_ep(self.lo, True),
                             note=self.note)
        # strictly negative interval
        return -((-self).reciprocal())

    def __truediv__(self, other):
        o = self._coerce(other)
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def _with_note(self, r: "BoundPair", other=None) -> "BoundPair":
        note = self._pick_note(other)
        if note is not None and r.note is None and not r.is_finite:
            return BoundPair(r.lo, r.hi, note=note)
        return r

    # -- elementary functions ---------------------------------------------
    @staticmethod
    def _split_pow2(x: Fraction):
        """Write x = m * 2**e with m an odd/odd rational.  Returns (m, e)."""
        num, den = x.numerator, x.denominator
        e = 0
        if num != 0:
            tz = (num & -num).bit_length() - 1
            num >>= tz
            e += tz
        tz = (den & -den).bit_length() - 1
        den >>= tz
        e -= tz
        return Fraction(num, den), e

    @staticmethod
    def _ln_positive_int(n: int, up: bool):
        """Directed float bound for ln(n), n >= 1, arbitrary size."""
        if n == 1:
            return 0.0
        t = n.bit_length() - 50
        if t <= 0:
            v = math.log(n)
            return _libm_up(v) if up else _libm_down(v)
        m = n >> t
        # m*2**t <= n < (m+1)*2**t
        if up:
            base = _libm_up(math.log(m + 1))
            scale = frac_to_float(t * LOG2_HI, True)
            return _widen_up(base + scale)
        base = _libm_down(math.log(m))
        scale = frac_to_float(t * LOG2_LO, False)
        return _widen_down(base + scale)

    @classmethod
    def _ln_ep(cls, a, up: bool):
        if a == 0:
            return -INF
        if isinstance(a, float):
            if math.isinf(a):
                return INF
            v = math.log(a)
            return _libm_up(v) if up else _libm_down(v)
        m, e = cls._split_pow2(a)
        if m == 1:
            # exact multiple of log 2: keep a rational endpoint
            if e == 0:
                return Fraction(0)
            if up:
                return e * (LOG2_HI if e > 0 else LOG2_LO)
            return e * (LOG2_LO if e > 0 else LOG2_HI)
        num, den = a.numerator, a.denominator
        if up:
            return _widen_up(cls._ln_positive_int(num, True) - cls._ln_positive_int(den, False))
        return _widen_down(cls._ln_positive_int(num, False) - cls._ln_positive_int(den, True))

    def ln(self) -> "BoundPair":
        if not _ep_le(0, self.lo):
            raise EnclosureError("ln of an interval reaching below zero")
        return BoundPair(self._ln_ep(self.lo, False), self._ln_ep(self.hi, True),
                         note=self.note)

    @staticmethod
    def _exp_ep(a, up: bool):
        if isinstance(a, float) and math.isinf(a):
            return (INF if a > 0 else 0.0) if up else (FLOAT_MAX if a > 0 else 0.0)
        f = a if isinstance(a, float) else frac_to_float(a, up)
        if f > 709.0:
            return INF if up else FLOAT_MAX
        if f < -745.0:
            return TINY if up else 0.0
        v = math.exp(f)
        return _libm_up(v) if up else _libm_down(v)

    def exp(self) -> "BoundPair":
        return BoundPair(self._exp_ep(self.lo, False), self._exp_ep(self.hi, True),
                         note=self.note)

    def sqrt(self) -> "BoundPair":
        if not _ep_le(0, self.lo):
            raise EnclosureError("sqrt of an interval reaching below zero")
        return BoundPair(_sqrt_ep(self.lo, False), _sqrt_ep(self.hi, True),
                         note=self.note)

    def pow(self, expo) -> "BoundPair":
        """``self ** expo`` for nonnegative enclosures, rational exponent."""
        expo = Fraction(expo)
        if expo == 0:
            return BoundPair.exact(1)
        if not _ep_le(0, self.lo):
            raise EnclosureError("pow restricted to nonnegative enclosures")
        if expo < 0:
            # reciprocal first: huge levels then hit the tiny-result pad in
            # the positive-power lane instead of materializing x**|expo|
            return self.reciprocal().pow(-expo)
        if expo.denominator == 1:
            n = expo.numerator
            lo = _frac_pow_int_ep(self.lo, n, False) if isinstance(self.lo, Fraction) else _float_pow_int(self.lo, n, False)
            hi = _frac_pow_int_ep(self.hi, n, True) if isinstance(self.hi, Fraction) else _float_pow_int(self.hi, n, True)
            return BoundPair(lo, hi, note=self.note)
        return BoundPair(_pow_frac_ep(self.lo, expo, False),
                         _pow_frac_ep(self.hi, expo, True), note=self.note)

    # -- misc ---------------------------------------------------------------
    def hull(self, other: "BoundPair") -> "BoundPair":
        lo = self.lo if _ep_le(self.lo, other.lo) else other.lo
        hi = self.hi if _ep_le(other.hi, self.hi) else other.hi
        return BoundPair(lo, hi, note=self._pick_note(other))

    def __repr__(self):
        def fmt(v):
            if isinstance(v, Fraction):
                return f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)
            return repr(v)
        tag = f", note={self.note!r}" if self.note else ""
        return f"BoundPair({fmt(self.lo)}, {fmt(self.hi)}{tag})"


def bp_max(items) -> BoundPair:
    """Enclosure of ``max_i t_i`` for true values ``t_i`` in enclosures."""
    items = list(items)
    if not items:
        raise EnclosureError("bp_max of empty sequence")
    lo = items[0].lo
    hi = items[0].hi
    note = items[0].note
    for it in items[1:]:
        if not _ep_le(it.lo, lo):
            lo = it.lo
        if not _ep_le(it.hi, hi):
            hi = it.hi
        note = note or it.note
    return BoundPair(lo, hi, note=note)


def bp_min(items) -> BoundPair:
    items = list(items)
    if not items:
        raise EnclosureError("bp_min of empty sequence")
    lo = items[0].lo
    hi = items[0].hi
    note = items[0].note
    for it in items[1:]:
        if _ep_le(it.lo, lo):
            lo = it.lo
        if _ep_le(it.hi, hi):
            hi = it.hi
        note = note or it.note
    return BoundPair(lo, hi, note=note)


def bp_sum(items) -> BoundPair:
    total = BoundPair.exact(0)
    for it in items:
        total = total + it
    return total


# ---------------------------------------------------------------------------
# directed sqrt / pow helpers
# ---------------------------------------------------------------------------

def sqrt_frac_bounds(x: Rational, prec_bits: int = 80):
    """Exact dyadic enclosure of sqrt(x) for rational x >= 0.

    Returns ``(lo, hi)`` Fractions with ``hi - lo <= lo * 2**(1-prec_bits)``
    (and exact equality when x is a perfect square of a rational).
    """
    x = Fraction(x)
    if x < 0:
        raise EnclosureError("sqrt of negative rational")
    if x == 0:
        return Fraction(0), Fraction(0)
    num, den = x.numerator, x.denominator
    rn = math.isqrt(num)
    rd = math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        v = Fraction(rn, rd)
        return v, v
    scaled = (num << (2 * prec_bits)) // den
    r = math.isqrt(scaled)
    lo = Fraction(r, 1 << prec_bits)
    hi = Fraction(r + 1, 1 << prec_bits)
    return lo, hi


def _sqrt_ep(a, up: bool):
    if isinstance(a, float):
        if math.isinf(a):
            return a
        v = math.sqrt(a)
        return _widen_up(v) if up else max(0.0, _widen_down(v))
    lo, hi = sqrt_frac_bounds(a)
    return hi if up else lo


def frac_pow_int(x: Fraction, n: int) -> Fraction:
    """Exact x**n splitting off the dyadic part (shift, not bigint pow)."""
    if n == 0:
        return Fraction(1)
    m, e = BoundPair._split_pow2(x)
    r = m ** n
    en = e * n
    # m**n has odd numerator and denominator, so composing the power-of-two
    # part needs no gcd
    if en >= 0:
        return _lowest_terms(r.numerator << en, r.denominator)
    return _lowest_terms(r.numerator, r.denominator << -en)


def _float_pow_int(a: float, n: int, up: bool) -> float:
    if math.isinf(a):
        return a
    # exact rational power of the (dyadic) float, then directed conversion
    return frac_to_float(Fraction(a) ** n, up)


# Results below 2**-_POW_CAP_BITS are replaced by a directed pad: exact powers
# of the megabit block levels would otherwise materialize integers of
# hundreds of megabits.  The pad is far below every materialized mass, so
# enclosures that add it stay sharp after the squeeze.
_POW_CAP_BITS = 1 << 20
_POW_TINY = Fraction(1, 1 << _POW_CAP_BITS)


def _frac_pow_int_ep(x: Fraction, n: int, up: bool) -> Fraction:
    """Directed x**n for x >= 0, padding instead of materializing results
    smaller than 2**-_POW_CAP_BITS."""
    if x != 0:
        t = x.numerator.bit_length() - x.denominator.bit_length()
        # x in [2**(t-1), 2**(t+1)) so x**n < 2**(t*n + |n|)
        if t * n + abs(n) < -_POW_CAP_BITS:
            return _POW_TINY if up else Fraction(0)
    return frac_pow_int(x, n)


def pow2_bounds(e: Rational) -> BoundPair:
    """Enclosure of 2**e for rational e, exact when e is an integer.

    Handles exponents far beyond float range by returning exact dyadic
    endpoints (capped at |e| ~ 2**25 after which it degrades to [0, tiny]
    or [huge, inf]).
    """
    e = Fraction(e)
    n = math.floor(e)
    frac = e - n
    if abs(n) > (1 << 25):
        if n > 0:
            return BoundPair(Fraction(1 << (1 << 25)), INF)
        return BoundPair(Fraction(0), Fraction(1, 1 << (1 << 25)))
    if frac == 0:
        v = Fraction(1 << n) if n >= 0 else Fraction(1, 1 << -n)
        return BoundPair(v)
    # 2**frac in [1, 2)
    f = frac_to_float(frac, True)
    m_hi = _libm_up(math.pow(2.0, f))
    f = frac_to_float(frac, False)
    m_lo = _libm_down(math.pow(2.0, f))
    scale = Fraction(1 << n) if n >= 0 else Fraction(1, 1 << -n)
    return BoundPair(Fraction(m_lo) * scale, Fraction(m_hi) * scale)


def _pow_frac_ep(a, expo: Fraction, up: bool):
    """Directed bound for a**expo, a >= 0 endpoint, expo > 0 non-integer."""
    if a == 0:
        return Fraction(0) if isinstance(a, Fraction) else 0.0
    if isinstance(a, float):
        if math.isinf(a):
            return a
        a = Fraction(a)
    nb = a.numerator.bit_length()
    db = a.denominator.bit_length()
    if nb > 512 or db > 512:
        t = nb - db
        if abs(t) > 512:
            # extreme magnitude: 2**(t-1) <= a < 2**(t+1), expo > 0 monotone
            p2 = pow2_bounds(Fraction(t + (1 if up else -1)) * expo)
            return p2.hi if up else p2.lo
        # moderate value with a huge representation: a directed float
        # squeeze keeps the enclosure valid and the mantissa small
        a = Fraction(frac_to_float(a, up))
    m, e2 = BoundPair._split_pow2(a)
    # a**expo = 2**(e2*expo) * m**expo
    p2 = pow2_bounds(e2 * expo)
    if m == 1:
        return p2.hi if up else p2.lo
    # m is an odd/odd rational of moderate size in all package uses
    lnm_lo = BoundPair._ln_ep(m, False)
    lnm_hi = BoundPair._ln_ep(m, True)
    t = BoundPair(lnm_lo, lnm_hi) * BoundPair.exact(expo)
    mexp = t.exp()
    out = p2 * mexp
    return out.hi if up else out.lo


# ---------------------------------------------------------------------------
# exact quadratic surds
# ---------------------------------------------------------------------------

class Surd:
    """Exact number ``p + q*sqrt(d)`` with rational p, q and rational d >= 0."""

    __slots__ = ("p", "q", "d")

    def __init__(self, p, q=0, d=0):
        p = Fraction(p)
        q = Fraction(q)
        d = Fraction(d)
        if d < 0:
            raise EnclosureError("negative radicand")
        if q == 0 or d == 0:
            q, d = Fraction(0), Fraction(0)
        else:
            rn = math.isqrt(d.numerator)
            rd = math.isqrt(d.denominator)
            if rn * rn == d.numerator and rd * rd == d.denominator:
                p, q, d = p + q * Fraction(rn, rd), Fraction(0), Fraction(0)
        self.p, self.q, self.d = p, q, d

    @staticmethod
    def of(v) -> "Surd":
        if isinstance(v, Surd):
            return v
        return Surd(Fraction(v))

    @staticmethod
    def sqrt(d) -> "Surd":
        return Surd(0, 1, d)

    @property
    def is_rational(self) -> bool:
        return self.q == 0

    def as_fraction(self) -> Fraction:
        if not self.is_rational:
            raise EnclosureError("irrational surd")
        return self.p

    # arithmetic restricted to what the window algebra needs
    def __add__(self, other):
        if isinstance(other, Surd):
            if other.q == 0:
                return Surd(self.p + other.p, self.q, self.d)
            if self.q == 0:
                return Surd(other.p + self.p, other.q, other.d)
            if self.d == other.d:
                return Surd(self.p + other.p, self.q + other.q, self.d)
            raise EnclosureError("sum of surds over distinct radicands")
        return Surd(self.p + Fraction(other), self.q, self.d)

    __radd__ = __add__

    def __neg__(self):
        return Surd(-self.p, -self.q, self.d)

    def __sub__(self, other):
        return self + (-(other if isinstance(other, Surd) else Surd.of(other)))

    def __rsub__(self, other):
        return Surd.of(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, Surd) and not other.is_rational:
            if self.is_rational:
                return Surd(self.p * other.p, self.p * other.q, other.d)
            if other.d == self.d:
                return Surd(self.p * other.p + self.q * other.q * self.d,
                            self.p * other.q + self.q * other.p, self.d)
            raise EnclosureError("product of surds over distinct radicands")
        c = other.p if isinstance(other, Surd) else Fraction(other)
        return Surd(self.p * c, self.q * c, self.d)

    __rmul__ = __mul__

    def enclosure(self, prec_bits: int = 80) -> "BoundPair":
        if self.q == 0:
            return BoundPair.exact(self.p)
        lo, hi = sqrt_frac_bounds(self.d, prec_bits)
        if self.q > 0:
            return BoundPair(self.p + self.q * lo, self.p + self.q * hi)
        return BoundPair(self.p + self.q * hi, self.p + self.q * lo)

    # -- exact comparisons ---------------------------------------------------
    def _sign_single(self) -> int:
        """Exact sign of p + q*sqrt(d)."""
        if self.q == 0:
            return (self.p > 0) - (self.p < 0)
        if self.q > 0:
            if self.p >= 0:
                return 1
            # q*sqrt(d) vs -p, both positive
            lhs = self.q * self.q * self.d
            rhs = self.p * self.p
            return (lhs > rhs) - (lhs < rhs)
        if self.p <= 0:
            return -1
        lhs = self.p * self.p
        rhs = self.q * self.q * self.d
        return (lhs > rhs) - (lhs < rhs)

    def compare(self, other) -> int:
        """Exact three-way comparison with a rational or another Surd."""
        other = other if isinstance(other, Surd) else Surd.of(other)
        if self.d == other.d or other.q == 0 or self.q == 0:
            d = self.d if self.q != 0 else other.d
            diff = Surd(self.p - other.p, self.q - other.q, d)
            return diff._sign_single()
        # a + b*sqrt(A) vs c*sqrt(B): compare via one squaring
        a = self.p - other.p
        b = self.q
        c = other.q
        lhs = Surd(a, b, self.d)          # lhs ? c*sqrt(B)
        s_l = lhs._sign_single()
        s_r = (c > 0) - (c < 0)
        if s_l != s_r:
            return 1 if s_l > s_r else -1
        if s_l == 0:
            return 0
        # both sides share the sign s_l; square both (order preserved for
        # positives, reversed for negatives)
        lhs_sq = Surd(a * a + b * b * self.d, 2 * a * b, self.d)
        rhs_sq = Fraction(c * c * other.d)
        diff = lhs_sq - Surd.of(rhs_sq)
        s = diff._sign_single()
        return s if s_l > 0 else -s

    def __lt__(self, other):
        return self.compare(other) < 0

    def __le__(self, other):
        return self.compare(other) <= 0

    def __gt__(self, other):
        return self.compare(other) > 0

    def __ge__(self, other):
        return self.compare(other) >= 0

    def __eq__(self, other):
        if isinstance(other, (Surd, Rational)):
            return self.compare(other) == 0
        return NotImplemented

    def __hash__(self):
        if self.is_rational:
            return hash(self.p)
        return hash((self.p, self.q, self.d))

    def __repr__(self):
        if self.q == 0:
            return f"Surd({self.p})"
        return f"Surd({self.p} + {self.q}*sqrt({self.d}))"


def rational_between(a: "Surd | Rational", b: "Surd | Rational") -> Fraction:
    """An exact rational strictly between a < b (verified exactly)."""
    sa = a if isinstance(a, Surd) else Surd.of(a)
    sb = b if isinstance(b, Surd) else Surd.of(b)
    if not sa.compare(sb) < 0:
        raise EnclosureError("rational_between requires a < b")
    prec = 80
    while True:
        ea = sa.enclosure(prec)
        eb = sb.enclosure(prec)
        ea_hi = Fraction(ea.hi)
        eb_lo = Fraction(eb.lo)
        if ea_hi < eb_lo:
            mid = (ea_hi + eb_lo) / 2
        else:
            mid = (Fraction(ea.lo) + Fraction(eb.hi)) / 2
        if sa.compare(mid) < 0 and sb.compare(mid) > 0:
            return mid
        prec *= 2
        if prec > 100000:  # pragma: no cover - defensive
            raise EnclosureError("rational_between failed to separate")
