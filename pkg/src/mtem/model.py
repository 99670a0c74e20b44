"""Problem definition for stochastic delay equations and the analytic pre-checks.

Coefficients are black-box callables that must broadcast over leading axes:
``drift(x, y, t)`` maps state arrays of shape ``(..., n)`` and a scalar time to
``(..., n)``; ``diffusion(x, y, t)`` returns ``(..., n, d)``.  Structural
constants (K, lambda_0..2, the Lipschitz envelope) are declared by the user
and checked here by sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CoefficientOverflowError, PolicyInverseUnavailableError

__all__ = [
    "DelayFunction",
    "CoefficientSet",
    "InitialHistory",
    "SddeProblem",
    "Finding",
    "ValidationReport",
    "TruncationCompatibilityReport",
    "constant_delay",
    "relaxing_delay",
    "pantograph_delay",
    "constant_history",
    "integer_part",
    "delay_multiplicity_bound",
    "validate_problem",
    "check_khasminskii",
    "stability_margin",
    "check_truncation_compatibility",
    "DEFAULT_T_GRID",
]

DEFAULT_T_GRID = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0)
DEFAULT_STATE_POINTS = 41
DEFAULT_STATE_BOX = 5.0
SLOPE_STEP = 1e-5
SLOPE_TOL = 1e-8


def integer_part(v: float, tol: float = 1e-12) -> int:
    """Floor of ``v``, snapped to the nearest integer when within ``tol`` of it.

    ``1 / (1 - 0.5)`` must give 2 whatever the rounding of the division.
    """
    nearest = round(v)
    if abs(v - nearest) <= tol * max(1.0, abs(v)):
        return int(nearest)
    return int(math.floor(v))


def delay_multiplicity_bound(eta: float) -> int:
    """``[(1 - eta)^-1] + 1``, the most times one grid index can be a delayed state."""
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    return integer_part(1.0 / (1.0 - eta)) + 1


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class DelayFunction:
    """Time-dependent delay ``delta(t)`` with ``delta' <= eta < 1``.

    ``eval`` is called with a float time and must return a float.
    ``bound`` is the uniform bound used when ``is_bounded`` is true.
    """

    eval: Callable[[float], float]
    eta: float
    tau: float
    is_bounded: bool = True
    bound: Optional[float] = None
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.is_bounded and self.bound is None:
            object.__setattr__(self, "bound", self.tau)

    def __call__(self, t: float) -> float:
        return self.eval(t)


def constant_delay(tau: float) -> DelayFunction:
    tau = float(tau)
    return DelayFunction(lambda t: tau, eta=0.0, tau=tau, is_bounded=True, bound=tau,
                         name="constant", params={"tau": tau})


def relaxing_delay(tau: float, c: float = 0.5) -> DelayFunction:
    """``delta(t) = tau + c (1 - exp(-t))``; slope ``c e^{-t} <= c`` so ``eta = c``.

    With ``c = 1/2`` this is the delay of the bounded-delay worked example.
    """
    tau, c = float(tau), float(c)

    def delta(t):
        return tau + c - c * math.exp(-t)

    return DelayFunction(delta, eta=c, tau=tau, is_bounded=True, bound=tau + c,
                         name="relaxing", params={"tau": tau, "c": c})


def pantograph_delay(q: float) -> DelayFunction:
    """``delta(t) = t - q t``: the delayed time is ``q t`` and the delay is unbounded."""
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValueError(f"pantograph ratio q must lie in (0, 1), got {q}")
    return DelayFunction(lambda t: t - q * t, eta=1.0 - q, tau=0.0, is_bounded=False,
                         name="pantograph", params={"q": q})


@dataclass(frozen=True)
class CoefficientSet:
    n: int
    d: int
    drift: Callable
    diffusion: Callable
    K: float
    lambda0: float
    lambda1: float
    lambda2: float
    lipschitz: Callable[[float, float], float]
    # set by the polynomial family so the integrator can use a compiled kernel
    polynomial: object = None

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("state and noise dimensions must be positive")
        if self.K < 0:
            raise ValueError("K must be >= 0")
        for name in ("lambda0", "lambda1", "lambda2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class InitialHistory:
    xi: Callable[[float], np.ndarray]
    tau: float
    value: Optional[tuple] = None  # set for constant histories, used by serialization

    def __call__(self, theta: float) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.xi(theta), dtype=float))

    def sup_norm(self, samples: int = 201) -> float:
        thetas = np.linspace(-self.tau, 0.0, max(samples, 1)) if self.tau > 0 else [0.0]
        return max(float(np.linalg.norm(self(th))) for th in thetas)


def constant_history(value, tau: float) -> InitialHistory:
    vec = np.atleast_1d(np.asarray(value, dtype=float)).copy()
    vec.setflags(write=False)
    return InitialHistory(lambda theta: vec, tau=float(tau), value=tuple(vec.tolist()))


@dataclass(frozen=True)
class SddeProblem:
    coefficients: CoefficientSet
    delay: DelayFunction
    history: InitialHistory

    def __post_init__(self):
        if abs(self.history.tau - self.delay.tau) > 1e-12 * max(1.0, self.delay.tau):
            raise ValueError(
                f"history tau {self.history.tau} does not match delay tau {self.delay.tau}")


# ---------------------------------------------------------------------------
# validation


@dataclass
class Finding:
    """One sampled check.  ``witness`` is the point of worst violation (or of
    the worst value seen when the check passes)."""

    name: str
    passed: bool
    value: float = float("nan")
    witness: object = None
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "value": _jsonable(self.value),
                "witness": _jsonable(self.witness), "detail": self.detail}


@dataclass
class ValidationReport:
    findings: list

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.findings)

    def __getitem__(self, name: str) -> Finding:
        for f in self.findings:
            if f.name == name:
                return f
        raise KeyError(name)

    def failed(self):
        return [f for f in self.findings if not f.passed]

    def to_dict(self):
        return {"passed": self.passed, "findings": [f.to_dict() for f in self.findings]}


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, tuple):
        return [_jsonable(u) for u in v]
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _state_grid(n: int, points: int = DEFAULT_STATE_POINTS, box: float = DEFAULT_STATE_BOX):
    """(x, y) sample pairs covering [-box, box]^n for both arguments.

    The full tensor grid is used for scalar problems.  For n > 1 it would have
    ``points**(2n)`` entries, so a seeded uniform sample of ``points**2`` pairs
    is used instead.
    """
    if n == 1:
        axis = np.linspace(-box, box, points)
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        return xx.reshape(-1, 1), yy.reshape(-1, 1)
    rng = np.random.default_rng(0x5EED)
    count = points * points
    return rng.uniform(-box, box, (count, n)), rng.uniform(-box, box, (count, n))


def _khasminskii_residuals(coef: CoefficientSet, x, y, t: float):
    f = np.asarray(coef.drift(x, y, t), dtype=float)
    g = np.asarray(coef.diffusion(x, y, t), dtype=float)
    lhs = 2.0 * np.sum(x * f, axis=-1) + np.sum(g * g, axis=(-2, -1))
    rhs = (coef.K * (1.0 + t) ** (-coef.lambda0) - coef.lambda1 * np.sum(x * x, axis=-1)
           + coef.lambda2 * np.sum(y * y, axis=-1)) / (1.0 + t)
    return lhs - rhs, np.all(np.isfinite(f), axis=-1) & np.all(np.isfinite(g), axis=(-2, -1))


def check_khasminskii(problem: SddeProblem, points: Sequence) -> float:
    """Worst residual of the one-sided growth bound over ``points``.

    Each point is ``(x, y, t)``; the bound holds at every point iff the
    returned value is <= 1e-9 (absolute).
    """
    coef = problem.coefficients
    pts = list(points)
    if not pts:
        raise ValueError("points must be nonempty")
    worst = -math.inf
    for x, y, t in pts:
        if t < 0:
            raise ValueError(f"time must be >= 0, got {t}")
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        yv = np.atleast_1d(np.asarray(y, dtype=float))
        res, finite = _khasminskii_residuals(coef, xv, yv, float(t))
        if not bool(finite) or not math.isfinite(float(res)):
            raise CoefficientOverflowError(
                f"coefficient overflow at point x={xv.tolist()}, y={yv.tolist()}, t={t}")
        worst = max(worst, float(res))
    return worst


def stability_margin(problem_or_lambda1, lambda2: float = None, eta: float = None) -> float:
    """``lambda_1 - lambda_2 ([(1 - eta)^-1] + 1)``.

    Accepts either an :class:`SddeProblem` or the three constants.
    """
    if isinstance(problem_or_lambda1, SddeProblem):
        c = problem_or_lambda1.coefficients
        lam1, lam2, eta = c.lambda1, c.lambda2, problem_or_lambda1.delay.eta
    else:
        lam1 = problem_or_lambda1
        lam2 = lambda2
    return lam1 - lam2 * delay_multiplicity_bound(eta)


def validate_problem(problem: SddeProblem, t_max: float = 100.0, samples: int = 201,
                     t_grid: Sequence[float] = DEFAULT_T_GRID) -> ValidationReport:
    """Run every sampled invariant of the problem and collect the findings.

    Violations are reported as findings, never raised.
    """
    if samples < 1 or t_max <= 0:
        raise ValueError("need samples >= 1 and t_max > 0")
    findings = []
    delay, coef, hist = problem.delay, problem.coefficients, problem.history

    # delay
    ts = np.linspace(0.0, t_max, samples)
    d0 = float(delay(0.0))
    findings.append(Finding("delay(0) = tau", abs(d0 - delay.tau) <= 1e-12, d0 - delay.tau, 0.0))
    vals = np.array([float(delay(t)) for t in ts])
    slopes = np.array([(float(delay(t + SLOPE_STEP)) - v) / SLOPE_STEP for t, v in zip(ts, vals)])
    i = int(np.argmax(slopes))
    findings.append(Finding("delay slope exceeds eta", bool(slopes[i] <= delay.eta + SLOPE_TOL),
                            float(slopes[i]), float(ts[i]), f"eta={delay.eta}"))
    i = int(np.argmin(vals))
    findings.append(Finding("negative delay", bool(vals[i] >= 0), float(vals[i]), float(ts[i])))
    if delay.is_bounded:
        i = int(np.argmax(vals))
        findings.append(Finding("delay exceeds bound", bool(vals[i] <= delay.bound + 1e-12),
                                float(vals[i]), float(ts[i]), f"bound={delay.bound}"))

    # coefficients
    zero = np.zeros(coef.n)
    worst, witness = 0.0, None
    for t in t_grid:
        fz = np.abs(np.asarray(coef.drift(zero, zero, t), dtype=float))
        gz = np.abs(np.asarray(coef.diffusion(zero, zero, t), dtype=float))
        v = max(float(np.max(fz)), float(np.max(gz)))
        if not math.isfinite(v) or v > worst:
            worst, witness = v, t
    findings.append(Finding("trivial solution", worst == 0.0, worst, witness,
                            "drift(0,0,t) and diffusion(0,0,t) must vanish"))

    radii = np.geomspace(1e-2, 1e3, 60)
    worst_drop, witness = 0.0, None
    for t in t_grid:
        L = np.array([float(coef.lipschitz(r, t)) for r in radii])
        drops = L[:-1] - L[1:]
        j = int(np.argmax(drops))
        if drops[j] > worst_drop:
            worst_drop, witness = float(drops[j]), (float(radii[j + 1]), t)
    findings.append(Finding("lipschitz monotone in R", worst_drop <= 0.0, worst_drop, witness))

    x, y = _state_grid(coef.n)
    worst_res, res_witness = -math.inf, None
    nonfinite_witness = None
    with np.errstate(all="ignore"):
        for t in t_grid:
            res, finite = _khasminskii_residuals(coef, x, y, float(t))
            if nonfinite_witness is None and not np.all(finite):
                j = int(np.argmin(finite))
                nonfinite_witness = (x[j].tolist(), y[j].tolist(), t)
            res = np.where(finite, res, -math.inf)
            j = int(np.argmax(res))
            if res[j] > worst_res:
                worst_res, res_witness = float(res[j]), (x[j].tolist(), y[j].tolist(), t)
    findings.append(Finding("non-finite coefficient", nonfinite_witness is None, float("nan"),
                            nonfinite_witness))
    findings.append(Finding("khasminskii bound", worst_res <= 1e-9, worst_res, res_witness,
                            f"K={coef.K}, lambda=({coef.lambda0}, {coef.lambda1}, {coef.lambda2})"))

    # history
    thetas = np.linspace(-hist.tau, 0.0, samples) if hist.tau > 0 else np.array([0.0])
    norms = np.array([float(np.linalg.norm(hist(th))) for th in thetas])
    ok = np.isfinite(norms)
    j = int(np.argmax(np.where(ok, norms, math.inf)))
    findings.append(Finding("history finite", bool(np.all(ok)), float(norms[j]), float(thetas[j]),
                            "sup norm of the initial segment"))
    findings.append(Finding("history tau matches delay", abs(hist.tau - delay.tau) <= 1e-12,
                            hist.tau - delay.tau))
    return ValidationReport(findings)


@dataclass
class TruncationCompatibilityReport:
    r_values: list
    s_values: list
    decreasing: bool
    strictly_decreasing: bool
    tolerance: float = 1e-2

    @property
    def verdict(self) -> str:
        return "decreasing" if self.decreasing else "not decreasing"

    def to_dict(self):
        return {"r_values": list(self.r_values), "s_values": list(self.s_values),
                "decreasing": self.decreasing, "strictly_decreasing": self.strictly_decreasing,
                "tolerance": self.tolerance, "verdict": self.verdict}


def check_truncation_compatibility(problem: SddeProblem, policy, r_values: Sequence[float],
                                   t_grid: Sequence[float], tolerance: float = 1e-2
                                   ) -> TruncationCompatibilityReport:
    """Tabulate ``s(R) = max_t (1+t) L_{R,t}^2 h^{-1}(R)`` and judge whether it tends to 0."""
    r_values = [float(r) for r in r_values]
    if any(b <= a for a, b in zip(r_values, r_values[1:])):
        raise ValueError("r_values must be strictly increasing")
    if not len(t_grid):
        raise ValueError("t_grid must be nonempty")
    if getattr(policy, "h_inverse", None) is None:
        raise PolicyInverseUnavailableError("policy inverse unavailable")
    L = problem.coefficients.lipschitz
    s = [max((1.0 + t) * float(L(r, t)) ** 2 * float(policy.h_inverse(r)) for t in t_grid)
         for r in r_values]
    decreasing = s[-1] < s[0] and s[-1] < tolerance
    strictly = all(b < a for a, b in zip(s, s[1:]))
    return TruncationCompatibilityReport(r_values, s, decreasing, strictly, tolerance)
