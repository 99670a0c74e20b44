"""Bracketed bisection for increasing scalar functions."""

from __future__ import annotations

import math

from .errors import NoPositiveRootError

__all__ = ["bisect_increasing"]


def bisect_increasing(func, lo: float = 0.0, hi: float = 1.0, xtol: float = 1e-12,
                      maxiter: int = 200, max_doublings: int = 200):
    """Root of a continuous increasing ``func`` with ``func(lo) < 0``.

    The right end of the bracket is doubled until ``func(hi) > 0``.  Returns
    ``(root, iterations)`` where ``root`` is whichever final bracket end has
    the smaller residual.
    """
    f_lo = func(lo)
    if not f_lo < 0:
        raise NoPositiveRootError(f"no positive root: f({lo}) = {f_lo} is not negative")
    f_hi = func(hi)
    doublings = 0
    while not f_hi > 0:
        if f_hi == 0:
            return hi, 0
        if doublings >= max_doublings or not math.isfinite(f_hi):
            raise NoPositiveRootError(f"could not bracket a root below {hi}")
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = func(hi)
        doublings += 1
    it = 0
    while hi - lo > xtol and it < maxiter:
        mid = 0.5 * (lo + hi)
        f_mid = func(mid)
        if f_mid == 0:
            return mid, it + 1
        if f_mid < 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        it += 1
    return (lo if abs(f_lo) <= abs(f_hi) else hi), it
