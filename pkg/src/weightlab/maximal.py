"""Running maximal averages of a profile and their integrals.

For a profile ``f`` and a cap scale ``x``, the running maximal average is

    M(t) = sup over y in [t, x] of  (1/y) * integral_(0,y] f,

and the quantity of interest is ``integral_(0,x] M(t) dt`` (compared with
the plain mass in the weak-type condition functional).

For step profiles the average ``A(y) = m(y)/y`` is a Moebius function of
``y`` on each piece (``m`` is the cumulative mass), hence monotone there,
so the upper envelope is computed exactly by a right-to-left sweep with
rational crossing points; only the logarithmic integral terms widen the
enclosure.  The unknown tail mass enters monotonically, so running the
sweep once with the lower and once with the upper tail mass brackets the
true value.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .bounds import INF, BoundPair, bp_max
from .profiles import IDENTITY, PowerProfile, StepProfile


def _exact(endpoint) -> Fraction:
    return endpoint if isinstance(endpoint, Fraction) else Fraction(endpoint)


def _clipped_pieces(profile: StepProfile, x: Fraction):
    out = []
    for p in profile.s_pieces:
        if p.lo >= x:
            break
        out.append((p.lo, min(p.hi, x), p.value))
    return out


def _lane_sweep(profile: StepProfile, x: Fraction, tail_mass: Fraction):
    """Exact envelope integral over (boundary, x] for one tail-mass lane.

    Returns ``(integral enclosure, M(boundary) as an exact Fraction)``.
    Within a piece (c, d] of value v the average is A(y) = v + k/y with
    k = m(c) - v*c; the running sup against the best-so-far level crosses
    it at the rational point t* = k / (best - v).
    """
    pieces = _clipped_pieces(profile, x)
    cums = []
    run = tail_mass
    for c, d, v in pieces:
        cums.append(run)
        run += v * (d - c)
    best = run / x  # A(x), the sup over the degenerate window [x, x]
    acc = BoundPair.exact(0)
    for (c, d, v), m_c in zip(reversed(pieces), reversed(cums)):
        k = m_c - v * c
        if k <= 0:
            # A increasing in y on this piece: M is flat at `best`
            acc = acc + BoundPair.exact(best * (d - c))
            continue
        # A decreasing in y: A(t) rises as t drops, crossing `best` at t*
        t_star = k / (best - v)
        if t_star <= c:
            acc = acc + BoundPair.exact(best * (d - c))
            continue
        flat = best * (d - t_star)
        linear = v * (t_star - c)
        log_term = (BoundPair.exact(k)
                    * (BoundPair.exact(t_star) / BoundPair.exact(c)).ln())
        acc = acc + BoundPair.exact(flat + linear) + log_term
        best = v + k / c
    return acc, best


def maximal_integral(profile, x) -> BoundPair:
    """Enclosure of ``integral_(0,x] M(t) dt``.

    A profile that is nondecreasing in the scale variable has a
    nondecreasing running average, so M(t) = A(x) for every t and the
    integral collapses to the plain mass; the identical enclosure object
    is returned in that case.
    """
    if isinstance(profile, PowerProfile):
        return _power_maximal(profile, x)
    x = profile.check_scale(x)
    mass = profile.moment(x, IDENTITY)
    if mass.lo_is_infinite:
        return mass
    if profile.values_nondecreasing_in_t():
        return mass
    if profile.s_boundary == 0:
        sweep, _ = _lane_sweep(profile, x, Fraction(0))
        return sweep
    tail_mass = profile.tail.moment(IDENTITY)
    if isinstance(tail_mass.hi, float) and math.isinf(tail_mass.hi):
        lo_int, best_lo = _lane_sweep(profile, x, _exact(tail_mass.lo))
        lower = (lo_int + BoundPair.exact(profile.s_boundary * best_lo)).lo
        return BoundPair(lower, INF, note=tail_mass.note)
    lo_int, best_lo = _lane_sweep(profile, x, _exact(tail_mass.lo))
    hi_int, best_hi = _lane_sweep(profile, x, _exact(tail_mass.hi))
    # Tail region: M only grows as t decreases, so M(boundary) * boundary
    # is a lower bound; the tail policy supplies the upper bound.
    lower = (lo_int + BoundPair.exact(profile.s_boundary * best_lo)).lo
    cap = BoundPair(best_lo, best_hi)
    upper = (hi_int + BoundPair(profile.tail.maximal_upper(cap).hi)).hi
    return BoundPair(lower, upper)


def _power_maximal(profile: PowerProfile, x) -> BoundPair:
    x = profile.check_scale(x)
    mass = profile.moment(x, IDENTITY)
    if profile.r < 0:
        return mass  # f nondecreasing in s: M(t) = A(x) throughout
    # r > 0: f decreasing in s, so A is decreasing and M(t) = A(t);
    # bracket the integral of the monotone A by Riemann sums.
    n_cells = 512
    grid = [x * Fraction(i, n_cells) for i in range(n_cells + 1)]
    values = [BoundPair.exact(1)]  # A(0+) = f(0) = 1 exactly
    for t in grid[1:]:
        values.append(profile.average(t))
    lo = Fraction(0)
    hi = Fraction(0)
    for i in range(n_cells):
        length = grid[i + 1] - grid[i]
        lo += _exact(values[i + 1].lo) * length
        hi += _exact(values[i].hi) * length
    return BoundPair(lo, hi)


def maximal_at(profile, x, t) -> BoundPair:
    """Enclosure of M(t) itself (used for cross-checking the integral).

    The average is monotone within each piece, so its sup over [t, x] is
    attained at ``t``, at ``x``, or at a piece edge in between.
    """
    if isinstance(profile, PowerProfile):
        x = profile.check_scale(x)
        t = Fraction(t)
        if profile.r < 0:
            return profile.average(x)
        if t == 0:
            return BoundPair.exact(1)
        return profile.average(t)
    x = profile.check_scale(x)
    t = profile.check_scale(t)
    if t > x:
        raise ValueError("maximal_at needs t <= x")
    candidates = [t, x]
    for p in profile.s_pieces:
        if t < p.hi < x:
            candidates.append(p.hi)
        if t < p.lo < x:
            candidates.append(p.lo)
    return bp_max([profile.average(y) for y in candidates])
