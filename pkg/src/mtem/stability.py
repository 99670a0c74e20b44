"""Polynomial decay rates: theoretical constants and empirical statistics.

Notation: ``M0 = [(1 - eta)^-1]`` and ``M1 = M0 + 1``.  For the scheme the
rate constant ``C0`` solves

    C0 - (lambda1 - eps) + (lambda2 + eps) M1 (1 + tau)^C0 = 0

when the delay is bounded by ``tau``, and equals
``lambda1 - eps - (lambda2 + eps) M1`` when it is unbounded.  For the exact
solution the bounded-delay constant solves

    gamma0 - lambda1 + lambda2 max(1, (1 + tau)^(gamma0 - 1)) / (1 - eta) = 0.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import EpsilonWindowError, InconsistentEnsembleError, NoPositiveRootError, StabilityMarginError
from .integrator import SimulationGrid, delay_lag
from .model import DelayFunction, delay_multiplicity_bound
from .rootfind import bisect_increasing

__all__ = [
    "RateCertificate",
    "ExactRateCertificate",
    "DecayStatistics",
    "CountingResult",
    "epsilon_window",
    "window_midpoint",
    "solve_c_tilde_bounded",
    "c_tilde_unbounded",
    "solve_gamma0_exact",
    "decay_statistics",
    "tail_limsup",
    "mean_square_statistic",
    "counting_check",
    "BELOW_FLOOR",
    "STATE_FLOOR",
]

BOUNDED, UNBOUNDED = "bounded", "unbounded"
STATE_FLOOR = 1e-300
BELOW_FLOOR = -math.inf


@dataclass
class RateCertificate:
    regime: str
    epsilon: float
    c_tilde0: float
    c_tilde: float
    residual: float
    window: tuple

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return d


@dataclass
class ExactRateCertificate:
    regime: str
    gamma0: Optional[float]
    gamma_star: float
    residual: float = 0.0

    def to_dict(self):
        return asdict(self)


def _margin(lambda1, lambda2, eta):
    return lambda1 - lambda2 * delay_multiplicity_bound(eta)


def epsilon_window(lambda1: float, lambda2: float, eta: float, regime: str = BOUNDED):
    """Open interval of admissible ``eps`` as ``(lo, hi)``."""
    margin = _margin(lambda1, lambda2, eta)
    if not margin > 0:
        raise StabilityMarginError(f"stability margin non-positive: {margin}")
    denom = delay_multiplicity_bound(eta) + 1
    hi = margin / denom
    if regime == BOUNDED:
        return 0.0, hi
    if regime == UNBOUNDED:
        return max(0.0, (margin - 1.0) / denom), hi
    raise ValueError(f"unknown regime {regime!r}")


def window_midpoint(lambda1, lambda2, eta, regime=BOUNDED) -> float:
    lo, hi = epsilon_window(lambda1, lambda2, eta, regime)
    return 0.5 * (lo + hi)


def _check_eps(eps, window):
    lo, hi = window
    if not lo < eps < hi:
        raise EpsilonWindowError(
            f"epsilon outside admissible window: {eps} not in open interval ({lo}, {hi})")


def solve_c_tilde_bounded(lambda1, lambda2, eta, tau, eps, lambda0) -> RateCertificate:
    if lambda0 <= 0 or tau < 0:
        raise ValueError("need lambda0 > 0 and tau >= 0")
    window = epsilon_window(lambda1, lambda2, eta, BOUNDED)
    _check_eps(eps, window)
    m1 = delay_multiplicity_bound(eta)
    a, b = lambda1 - eps, (lambda2 + eps) * m1

    def F(c):
        return c - a + b * (1.0 + tau) ** c

    root, _ = bisect_increasing(F)
    return RateCertificate(BOUNDED, eps, root, min(root, lambda0), F(root), window)


def c_tilde_unbounded(lambda1, lambda2, eta, eps, lambda0) -> RateCertificate:
    if lambda0 <= 0:
        raise ValueError("need lambda0 > 0")
    window = epsilon_window(lambda1, lambda2, eta, UNBOUNDED)
    _check_eps(eps, window)
    m1 = delay_multiplicity_bound(eta)
    # margin - (M1 + 1) eps, algebraically equal to lambda1 - eps - (lambda2 + eps) M1
    c0 = _margin(lambda1, lambda2, eta) - (m1 + 1) * eps
    if not 0.0 < c0 < 1.0:
        raise NoPositiveRootError(f"closed-form rate {c0} outside (0, 1)")
    return RateCertificate(UNBOUNDED, eps, c0, min(c0, lambda0), 0.0, window)


def solve_gamma0_exact(lambda1, lambda2, eta, tau, lambda0, regime: str = BOUNDED
                       ) -> ExactRateCertificate:
    """Rate constant for the exact solution."""
    base = lambda1 - lambda2 / (1.0 - eta)
    if not base > 0:
        raise StabilityMarginError(f"stability margin non-positive: {base}")
    if regime == UNBOUNDED:
        return ExactRateCertificate(UNBOUNDED, None, min(lambda0, base, 1.0))
    if regime != BOUNDED:
        raise ValueError(f"unknown regime {regime!r}")

    def G(g):
        return g - lambda1 + lambda2 * max(1.0, (1.0 + tau) ** (g - 1.0)) / (1.0 - eta)

    root, _ = bisect_increasing(G)
    return ExactRateCertificate(BOUNDED, root, min(lambda0, root), G(root))


# ---------------------------------------------------------------------------
# empirical statistics


@dataclass
class DecayStatistics:
    """Per-step decay statistics of one path, indexed by ``k = 0 .. n``.

    Entry 0 is NaN (``log(1 + 0) = 0``); states below ``STATE_FLOOR`` give
    ``-inf``.
    """

    as_statistic: np.ndarray
    exp_statistic: np.ndarray
    valid_from: int = 1
    dt: float = 1.0

    @property
    def final_as(self) -> float:
        return float(self.as_statistic[-1])

    @property
    def final_exp(self) -> float:
        return float(self.exp_statistic[-1])


def _log_norms(forward):
    norms = np.sqrt(np.sum(forward * forward, axis=-1))
    with np.errstate(divide="ignore"):
        return np.where(norms < STATE_FLOOR, BELOW_FLOOR, np.log(np.maximum(norms, STATE_FLOOR)))


def decay_statistics(path) -> DecayStatistics:
    """``log|X_k| / log(1 + k dt)`` and ``log|X_k| / (k dt)`` for ``k >= 1``."""
    forward = np.asarray(path.forward, dtype=float)
    if forward.ndim == 1:
        forward = forward[:, None]
    dt = path.grid.dt
    if forward.shape[0] < 3:
        raise ValueError("need at least 2 forward steps")
    logs = _log_norms(forward)
    k = np.arange(forward.shape[0])
    as_stat = np.full(k.shape, np.nan)
    exp_stat = np.full(k.shape, np.nan)
    as_stat[1:] = logs[1:] / np.log1p(k[1:] * dt)
    exp_stat[1:] = logs[1:] / (k[1:] * dt)
    return DecayStatistics(as_stat, exp_stat, 1, dt)


def tail_limsup(statistic: np.ndarray, fraction: float = 0.1) -> float:
    """Finite-horizon limsup proxy: max over the last ``fraction`` of entries."""
    n = len(statistic)
    start = max(1, n - max(1, int(round(fraction * n))))
    return float(np.max(statistic[start:]))


def mean_square_statistic(ensemble, C: float) -> np.ndarray:
    """``(1 + k dt)^C * mean_paths |X_k|^2`` for ``k = 0 .. n``.

    Paths are summed in list order so the result is independent of how the
    ensemble was produced.
    """
    if C < 0:
        raise ValueError("C must be >= 0")
    records = list(ensemble)
    if not records:
        raise InconsistentEnsembleError("inconsistent ensemble: empty")
    grid = records[0].grid
    if any(r.grid != grid for r in records):
        raise InconsistentEnsembleError("inconsistent ensemble: paths use different grids")
    acc = np.zeros(grid.n_steps + 1)
    for r in records:
        f = r.forward
        acc += np.sum(f * f, axis=-1)
    k = np.arange(grid.n_steps + 1)
    return (1.0 + k * grid.dt) ** C * (acc / len(records))


@dataclass
class CountingResult:
    max_count: int
    bound: int
    witness: int
    counts: Counter

    @property
    def holds(self) -> bool:
        return self.max_count <= self.bound


def counting_check(delay: DelayFunction, grid: SimulationGrid, k_max: int) -> CountingResult:
    """Multiplicity of each delayed index ``j - lag(j)`` over ``j = 0 .. k_max``."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    counts = Counter(j - delay_lag(j, grid, delay) for j in range(k_max + 1))
    witness, max_count = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return CountingResult(max_count, delay_multiplicity_bound(delay.eta), witness, counts)
