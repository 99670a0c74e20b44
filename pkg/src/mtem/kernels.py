"""Hot loops of the scheme for scalar polynomial coefficients.

Two implementations with one signature: a numba ``@njit`` kernel that walks
each path step by step, and a pure-numpy kernel that advances all paths in
lock-step.  Set ``MTEM_DISABLE_NUMBA=1`` (or run without numba installed) to
force the numpy path.  Both fill ``states`` in place and return, per path,
the first step whose output overflowed (``-1`` if none).
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = ["NUMBA_AVAILABLE", "numba_enabled", "mtem_poly_numba", "mtem_poly_numpy",
           "run_polynomial", "OVERFLOW_LIMIT"]

OVERFLOW_LIMIT = 1e150

try:
    import numba
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    numba = None
    NUMBA_AVAILABLE = False


def numba_enabled() -> bool:
    flag = os.environ.get("MTEM_DISABLE_NUMBA", "").strip().lower()
    return NUMBA_AVAILABLE and flag not in ("1", "true", "yes", "on")


def _njit(fn):
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


@_njit
def _ipow_scalar(x, p):
    out = 1.0
    for _ in range(p):
        out = out * x
    return out


@_njit
def _poly_scalar(c, a, b, x, y):
    acc = 0.0
    for i in range(c.shape[0]):
        acc = acc + (c[i] * _ipow_scalar(x, a[i])) * _ipow_scalar(y, b[i])
    return acc


@_njit
def mtem_poly_numba(states, m, delayed, dW, dt, level, dc, da, db, gc, ga, gb, limit):
    n_paths = states.shape[0]
    n_steps = delayed.shape[0]
    fail = np.full(n_paths, -1, dtype=np.int64)
    for p in range(n_paths):
        for k in range(n_steps):
            x = states[p, m + k]
            y = states[p, delayed[k]]
            ax = math.sqrt(x * x)
            ay = math.sqrt(y * y)
            r = ax if ax > ay else ay
            if r > level:
                a = level / r
                s = r / level
                sx = x * a
                sy = y * a
            else:
                s = 1.0
                sx = x
                sy = y
            t = k * dt
            f = _poly_scalar(dc, da, db, sx, sy) / (1.0 + t)
            g = math.sqrt(_poly_scalar(gc, ga, gb, sx, sy) / (1.0 + t))
            new = x + (s * f) * dt + (s * g) * dW[p, k]
            if not (abs(new) <= limit):
                fail[p] = k
                break
            states[p, m + k + 1] = new
    return fail


def _poly_numpy(c, a, b, x, y):
    acc = 0.0
    for ci, ai, bi in zip(c, a, b):
        xa = np.ones_like(x)
        for _ in range(int(ai)):
            xa = xa * x
        yb = np.ones_like(y)
        for _ in range(int(bi)):
            yb = yb * y
        acc = acc + (ci * xa) * yb
    return acc


def mtem_poly_numpy(states, m, delayed, dW, dt, level, dc, da, db, gc, ga, gb, limit):
    n_paths = states.shape[0]
    fail = np.full(n_paths, -1, dtype=np.int64)
    alive = np.ones(n_paths, dtype=bool)
    with np.errstate(all="ignore"):
        for k in range(delayed.shape[0]):
            x = states[:, m + k]
            y = states[:, delayed[k]]
            r = np.maximum(np.sqrt(x * x), np.sqrt(y * y))
            outside = r > level
            a = np.where(outside, level / r, 1.0)
            s = np.where(outside, r / level, 1.0)
            sx, sy = x * a, y * a
            t = k * dt
            f = _poly_numpy(dc, da, db, sx, sy) / (1.0 + t)
            g = np.sqrt(_poly_numpy(gc, ga, gb, sx, sy) / (1.0 + t))
            new = x + (s * f) * dt + (s * g) * dW[:, k]
            bad = alive & ~(np.abs(new) <= limit)
            if bad.any():
                fail[bad] = k
                alive &= ~bad
            # dead paths are frozen at their last finite state
            states[:, m + k + 1] = np.where(alive, new, x)
    return fail


def run_polynomial(states, m, delayed, dW, dt, level, family, use_numba=None):
    """Dispatch to the compiled or numpy kernel.  ``dW`` has shape (paths, steps)."""
    if use_numba is None:
        use_numba = numba_enabled()
    kernel = mtem_poly_numba if (use_numba and NUMBA_AVAILABLE) else mtem_poly_numpy
    dc, da, db, gc, ga, gb = family.arrays()
    return kernel(states, int(m), np.ascontiguousarray(delayed, dtype=np.int64),
                  np.ascontiguousarray(dW), float(dt), float(level), dc, da, db, gc, ga, gb,
                  OVERFLOW_LIMIT)
