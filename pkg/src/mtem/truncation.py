"""Radial truncation of the coefficients onto the ball of radius h(dt).

Outside the ball both arguments are shrunk by the same factor
``a = level / (|x| v |y|)`` and the coefficient value is scaled back up by
``1/a``, so the truncated coefficients grow at most linearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import CoefficientOverflowError, CoincidentInputsError, NonFiniteStateError
from .model import CoefficientSet, Finding

__all__ = [
    "TruncationPolicy",
    "power_policy",
    "validate_policy",
    "TruncatedCoefficients",
    "truncation_factor",
    "truncated_drift",
    "truncated_diffusion",
    "lipschitz_witness",
    "dissipativity_witness",
]


@dataclass(frozen=True)
class TruncationPolicy:
    """Strictly decreasing ``h: (0, delta_star] -> (0, inf)`` with ``h -> inf`` as dt -> 0."""

    h: Callable[[float], float]
    h_inverse: Optional[Callable[[float], float]] = None
    delta_star: float = 1.0
    kind: str = "custom"
    exponent: Optional[float] = None

    def level(self, dt: float) -> float:
        if not 0.0 < dt <= self.delta_star:
            raise ValueError(f"step size {dt} outside the policy domain (0, {self.delta_star}]")
        return float(self.h(dt))

    def to_dict(self):
        if self.kind == "power":
            return {"kind": "power", "exponent": self.exponent, "delta_star": self.delta_star}
        return {"kind": "custom", "delta_star": self.delta_star}


def power_policy(exponent: float, delta_star: float = 1.0) -> TruncationPolicy:
    """``h(dt) = dt**(-exponent)``, inverse ``R**(-1/exponent)``."""
    p = float(exponent)
    if p <= 0:
        raise ValueError("power policy exponent must be positive")
    return TruncationPolicy(h=lambda dt: dt ** (-p), h_inverse=lambda r: r ** (-1.0 / p),
                            delta_star=float(delta_star), kind="power", exponent=p)


def validate_policy(policy: TruncationPolicy, samples: int = 50) -> list:
    grid = np.linspace(policy.delta_star / samples, policy.delta_star, samples)
    h = np.array([policy.h(dt) for dt in grid])
    diffs = h[1:] - h[:-1]
    j = int(np.argmax(diffs))
    out = [Finding("h strictly decreasing", bool(np.all(diffs < 0)), float(diffs[j]),
                   float(grid[j + 1]))]
    halving = np.array([policy.h(policy.delta_star / 2.0 ** k) for k in range(21)])
    steps = halving[1:] - halving[:-1]
    j = int(np.argmin(steps))
    out.append(Finding("h unbounded as dt -> 0", bool(np.all(steps > 0)), float(steps[j]),
                       policy.delta_star / 2.0 ** (j + 1)))
    return out


@dataclass(frozen=True)
class TruncatedCoefficients:
    base: CoefficientSet
    level: float

    def __post_init__(self):
        if not (self.level > 0 and math.isfinite(self.level)):
            raise ValueError(f"truncation level must be positive and finite, got {self.level}")

    @classmethod
    def for_step(cls, base: CoefficientSet, policy: TruncationPolicy, dt: float):
        return cls(base, policy.level(dt))


def _norm(v):
    return np.sqrt(np.sum(v * v, axis=-1))


def _scaling(x, y, level):
    """Return (a, s, ax, ay) with ``s = 1/a`` written as ``r/level``.

    Inside the ball (boundary included) ``a = s = 1`` and the scaled
    arguments are the inputs themselves.
    """
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NonFiniteStateError("non-finite state")
    r = np.maximum(_norm(x), _norm(y))
    outside = r > level
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(outside, level / r, 1.0)
        s = np.where(outside, r / level, 1.0)
    return a, s, x * a[..., None], y * a[..., None]


def truncation_factor(x, y, level: float):
    """Scale factor and scaled arguments for a single pair or a batch.

    Scalars are treated as 1-vectors; the returned arrays keep the input shape.
    """
    if not level > 0:
        raise ValueError("level must be positive")
    xa, ya = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    scalar = xa.ndim == 0
    a, _, sx, sy = _scaling(np.atleast_1d(xa), np.atleast_1d(ya), float(level))
    if scalar:
        return float(a), float(sx[0]), float(sy[0])
    if a.ndim == 0:
        return float(a), sx, sy
    return a, sx, sy


def _vec(v):
    return np.atleast_1d(np.asarray(v, dtype=float))


def truncated_drift(tc: TruncatedCoefficients, x, y, t: float):
    x, y = _vec(x), _vec(y)
    _, s, sx, sy = _scaling(x, y, tc.level)
    f = np.asarray(tc.base.drift(sx, sy, t), dtype=float)
    if not np.all(np.isfinite(f)):
        raise CoefficientOverflowError("coefficient overflow in drift")
    return s[..., None] * f


def truncated_diffusion(tc: TruncatedCoefficients, x, y, t: float):
    x, y = _vec(x), _vec(y)
    _, s, sx, sy = _scaling(x, y, tc.level)
    g = np.asarray(tc.base.diffusion(sx, sy, t), dtype=float)
    if not np.all(np.isfinite(g)):
        raise CoefficientOverflowError("coefficient overflow in diffusion")
    return s[..., None, None] * g


def lipschitz_witness(tc: TruncatedCoefficients, x, y, xbar, ybar, t: float,
                      coefficient: str = "drift"):
    """Ratio of the truncated-coefficient increment to ``L_{level,t}(|x-xbar| + |y-ybar|)``.

    The truncated coefficients are globally Lipschitz with constant
    ``5 L_{level,t}``, so the ratio never exceeds 5.  Works on batches.
    """
    x, y, xbar, ybar = _vec(x), _vec(y), _vec(xbar), _vec(ybar)
    dist = _norm(x - xbar) + _norm(y - ybar)
    if np.any(dist == 0):
        raise CoincidentInputsError("coincident inputs")
    if coefficient == "drift":
        diff = _norm(truncated_drift(tc, x, y, t) - truncated_drift(tc, xbar, ybar, t))
    elif coefficient == "diffusion":
        dg = truncated_diffusion(tc, x, y, t) - truncated_diffusion(tc, xbar, ybar, t)
        diff = np.sqrt(np.sum(dg * dg, axis=(-2, -1)))
    else:
        raise ValueError(f"unknown coefficient {coefficient!r}")
    ratio = diff / (float(tc.base.lipschitz(tc.level, t)) * dist)
    return float(ratio) if np.ndim(ratio) == 0 else ratio


def dissipativity_witness(tc: TruncatedCoefficients, x, y, t: float, K=None, lambda0=None,
                          lambda1=None, lambda2=None):
    """Residual of the growth bound satisfied by the truncated coefficients.

    The truncation costs at most ``K/level^2`` in each of lambda_1 and lambda_2;
    the result is <= 0 whenever the base coefficients satisfy the untruncated
    bound.  Constants default to those declared on ``tc.base``.
    """
    b = tc.base
    K = b.K if K is None else K
    lambda0 = b.lambda0 if lambda0 is None else lambda0
    lambda1 = b.lambda1 if lambda1 is None else lambda1
    lambda2 = b.lambda2 if lambda2 is None else lambda2
    x, y = _vec(x), _vec(y)
    f = truncated_drift(tc, x, y, t)
    g = truncated_diffusion(tc, x, y, t)
    lhs = 2.0 * np.sum(x * f, axis=-1) + np.sum(g * g, axis=(-2, -1))
    k_shift = K / tc.level ** 2
    rhs = (K * (1.0 + t) ** (-lambda0) - (lambda1 - k_shift) * np.sum(x * x, axis=-1)
           + (lambda2 + k_shift) * np.sum(y * y, axis=-1)) / (1.0 + t)
    res = lhs - rhs
    return float(res) if np.ndim(res) == 0 else res
