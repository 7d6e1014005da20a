"""Small numerical routines with explicit budgets.

These are deliberately hand-rolled: the package treats the quadrature
tolerance, the subdivision cap, and the search tolerances as part of its
public contract (see defaults), and hitting a cap must raise instead of
silently degrading.
"""

from typing import Callable, Tuple

from . import defaults
from .errors import BudgetExceededError


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    abs_tol: float = defaults.QUAD_ABS_TOL,
    max_intervals: int = defaults.QUAD_MAX_INTERVALS,
) -> float:
    """Adaptive Simpson quadrature of ``f`` over ``[a, b]``.

    Raises BudgetExceededError if more than ``max_intervals`` subdivisions
    are needed to reach ``abs_tol``.
    """
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    budget = [max_intervals]

    def recurse(lo: float, hi: float, flo: float, fmid: float, fhi: float, whole: float, tol: float) -> float:
        budget[0] -= 1
        if budget[0] < 0:
            raise BudgetExceededError(
                f"quadrature needed more than {max_intervals} subdivisions on [{a}, {b}]"
            )
        mid = 0.5 * (lo + hi)
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        flm = f(lmid)
        frm = f(rmid)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return recurse(lo, mid, flo, flm, fmid, left, 0.5 * tol) + recurse(
            mid, hi, fmid, frm, fhi, right, 0.5 * tol
        )

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return sign * recurse(a, b, fa, fm, fb, whole, abs_tol)


def bisect_threshold(
    predicate: Callable[[float], bool],
    lo: float,
    hi: float,
    tol: float = defaults.BISECT_TOL,
) -> float:
    """Smallest x in [lo, hi] with predicate(x) true, assuming monotone predicate.

    predicate must be false-then-true on the interval; if it already holds at
    ``lo`` the answer is ``lo``, if it never holds the answer is ``hi``.
    """
    if predicate(lo):
        return lo
    if not predicate(hi):
        return hi
    # invariant: predicate(lo) false, predicate(hi) true
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return hi


def golden_section_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = defaults.GOLDEN_TOL,
    scan_points: int = defaults.GOLDEN_SCAN_POINTS,
) -> Tuple[float, float]:
    """Maximize ``f`` on ``[lo, hi]``; returns (argmax, max).

    A coarse scan brackets the best region first, so mild non-unimodality away
    from the optimum is tolerated. Ties at the scan stage resolve toward the
    lower argument.
    """
    if hi <= lo:
        return lo, f(lo)
    xs = [lo + (hi - lo) * i / scan_points for i in range(scan_points + 1)]
    vals = [f(x) for x in xs]
    best = 0
    for i in range(1, len(xs)):
        if vals[i] > vals[best]:
            best = i
    a = xs[max(best - 1, 0)]
    b = xs[min(best + 1, scan_points)]

    invphi = (5.0 ** 0.5 - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:  # keep the lower side on ties
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)
