"""Monotone inversion by bracketing bisection."""
from __future__ import annotations

import math


class InversionError(RuntimeError):
    pass


def invert_monotone(fn, y, lo=0.0, hi=None, increasing=True, xtol=1e-13, max_iter=2000):
    """Smallest ``x >= lo`` with ``fn(x) >= y`` (or ``fn(x) <= y`` if decreasing).

    ``fn`` must be monotone on ``[lo, inf)``.  If the condition already holds
    at ``lo`` then ``lo`` is returned, which is the infimum-of-domain
    convention for arguments below the range of an increasing function.

    The upper bracket is found by doubling from ``hi`` (default ``lo + 1``).
    Bisection stops once the bracket is narrower than
    ``xtol * max(1, |x|)``.
    """

    def ok(x):
        v = fn(x)
        if math.isnan(v):
            raise InversionError(f"function returned NaN at x={x!r}")
        return v >= y if increasing else v <= y

    if ok(lo):
        return float(lo)
    step = 1.0 if hi is None else max(float(hi) - lo, 1e-300)
    a, b = float(lo), float(lo) + step
    n = 0
    while not ok(b):
        a = b
        step *= 2.0
        b = float(lo) + step
        n += 1
        if n > 2000 or not math.isfinite(b):
            raise InversionError(f"target {y!r} not reached; last bracket end {a!r}")
    for _ in range(max_iter):
        if b - a <= xtol * max(1.0, abs(b)):
            break
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        if ok(mid):
            b = mid
        else:
            a = mid
    return b
