"""The two worked examples as locked configurations, plus a reproduction runner."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .integrator import SimulationGrid, simulate_ensemble
from .model import SddeProblem, constant_history, pantograph_delay, relaxing_delay, stability_margin
from .polynomial import PolynomialFamily
from .stability import (BOUNDED, UNBOUNDED, c_tilde_unbounded, decay_statistics, solve_c_tilde_bounded,
                        solve_gamma0_exact, tail_limsup, window_midpoint)
from .truncation import TruncationPolicy, power_policy

__all__ = ["EXAMPLE_NAMES", "ExpectedCheck", "NamedExperiment", "ReproductionReport",
           "example_family", "build_example", "rate_certificates", "run_reproduction",
           "decay_table_csv"]

EXAMPLE_NAMES = ("example1", "example2")
DEFAULT_SEED = 20190101
DEFAULT_SEEDS = 10


def example_family(lambda0: float = 1.0) -> PolynomialFamily:
    """f = (-2x + y/2 - x^3 - x y^4)/(1+t), g = sqrt((2x^2y^4 + y^2/2 + 2x^4)/(1+t)).

    ``2 x f + g^2 = (-4x^2 + xy + y^2/2)/(1+t) <= (-7/2 x^2 + y^2)/(1+t)``,
    so K = 0 and any lambda0 works.  L_{R,t} = 5 (R^4 + 2)/(1+t).
    """
    return PolynomialFamily(
        drift_terms=[(-2.0, 1, 0), (0.5, 0, 1), (-1.0, 3, 0), (-1.0, 1, 4)],
        diffusion_terms=[(2.0, 2, 4), (0.5, 0, 2), (2.0, 4, 0)],
        lipschitz_terms=[(5.0, 4), (10.0, 0)],
        K=0.0, lambda0=lambda0, lambda1=3.5, lambda2=1.0)


@dataclass(frozen=True)
class ExpectedCheck:
    """``aggregate(statistic over seeds) op threshold``.

    ``aggregate`` is ``median``, ``max_abs``, or ``fraction_le:<v>`` (the
    share of seeds whose statistic is <= v).
    """

    name: str
    statistic: str
    aggregate: str
    op: str
    threshold: float

    def evaluate(self, values):
        values = np.asarray(values, dtype=float)
        if self.aggregate == "median":
            measured = float(np.median(values))
        elif self.aggregate == "max_abs":
            measured = float(np.max(np.abs(values)))
        elif self.aggregate.startswith("fraction_le:"):
            cut = float(self.aggregate.split(":", 1)[1])
            measured = float(np.mean(values <= cut))
        else:
            raise ValueError(f"unknown aggregate {self.aggregate!r}")
        passed = measured <= self.threshold if self.op == "<=" else measured >= self.threshold
        return measured, bool(passed)


@dataclass(frozen=True)
class NamedExperiment:
    name: str
    problem: SddeProblem
    policy: TruncationPolicy
    grid: SimulationGrid
    expected: tuple
    regime: str
    family: PolynomialFamily = field(repr=False, default=None)


def build_example(name: str) -> NamedExperiment:
    if name == "example1":
        fam = example_family()
        delay = relaxing_delay(1.0, 0.5)
        problem = SddeProblem(fam.coefficients(), delay, constant_history(2.0, delay.tau))
        grid = SimulationGrid.for_delay(delay.tau, 0.1, 5000)
        expected = (
            ExpectedCheck("median final log|X|/log(1+t) <= -1", "final_as", "median", "<=", -1.0),
            ExpectedCheck("share of seeds with final log|X|/log(1+t) <= -0.5 is >= 0.8",
                          "final_as", "fraction_le:-0.5", ">=", 0.8),
            ExpectedCheck("all |log|X|/t| <= 0.05 at the final step", "final_exp", "max_abs",
                          "<=", 0.05),
        )
        regime = BOUNDED
    elif name == "example2":
        fam = example_family()
        delay = pantograph_delay(0.5)
        problem = SddeProblem(fam.coefficients(), delay, constant_history(3.0, delay.tau))
        grid = SimulationGrid.for_delay(delay.tau, 0.05, 1000)
        expected = (
            ExpectedCheck("median final log|X|/log(1+t) <= -1", "final_as", "median", "<=", -1.0),
        )
        regime = UNBOUNDED
    else:
        raise KeyError(f"unknown example {name!r}; choose from {EXAMPLE_NAMES}")
    return NamedExperiment(name, problem, power_policy(1.0 / 9.0), grid, expected, regime, fam)


def rate_certificates(problem: SddeProblem, regime: str, epsilon: Optional[float] = None):
    """Scheme and exact-solution certificates; ``epsilon=None`` means the window midpoint."""
    c, d = problem.coefficients, problem.delay
    if epsilon is None:
        epsilon = window_midpoint(c.lambda1, c.lambda2, d.eta, regime)
    if regime == BOUNDED:
        scheme = solve_c_tilde_bounded(c.lambda1, c.lambda2, d.eta, d.tau, epsilon, c.lambda0)
    else:
        scheme = c_tilde_unbounded(c.lambda1, c.lambda2, d.eta, epsilon, c.lambda0)
    exact = solve_gamma0_exact(c.lambda1, c.lambda2, d.eta, d.tau, c.lambda0, regime)
    return scheme, exact


@dataclass
class ReproductionReport:
    name: str
    master_seed: int
    n_seeds: int
    per_seed: list
    verdicts: list
    certificates: dict
    runtime: float
    margin: float

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts)

    def to_dict(self):
        return {"experiment": self.name, "master_seed": self.master_seed, "n_seeds": self.n_seeds,
                "stability_margin": self.margin, "per_seed": self.per_seed,
                "verdicts": self.verdicts, "certificates": self.certificates,
                "runtime_seconds": self.runtime, "passed": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"experiment {self.name}  seeds={self.n_seeds}  master_seed={self.master_seed}",
                 f"stability margin {self.margin:g}"]
        sc = self.certificates.get("scheme", {})
        if sc:
            lines.append(f"scheme rate: eps={sc['epsilon']:.6g} C0={sc['c_tilde0']:.10g} "
                         f"C={sc['c_tilde']:.10g} ({sc['regime']})")
        for s in self.per_seed:
            lines.append(f"  seed {s['path_index']:>3}: final as={s['final_as']:+.4f} "
                         f"exp={s['final_exp']:+.5f} tail-limsup={s['tail_limsup_as']:+.4f}")
        for v in self.verdicts:
            tag = "PASS" if v["passed"] else "FAIL"
            lines.append(f"[{tag}] {v['name']}: measured {v['measured']:.6g} "
                         f"{v['op']} {v['threshold']:g}")
        lines.append(f"runtime {self.runtime:.2f}s")
        return "\n".join(lines)


def run_reproduction(experiment: NamedExperiment, master_seed: int = DEFAULT_SEED,
                     n_seeds: int = DEFAULT_SEEDS, workers: Optional[int] = None,
                     epsilon: Optional[float] = None, records: Optional[list] = None
                     ) -> ReproductionReport:
    """Simulate ``n_seeds`` paths and evaluate the experiment's expected checks."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    start = time.perf_counter()
    if records is None:
        records = simulate_ensemble(experiment.problem, experiment.policy, experiment.grid,
                                    master_seed, n_seeds, workers=workers)
    per_seed = []
    for rec in records:
        st = decay_statistics(rec)
        per_seed.append({"path_index": rec.path_index, "final_as": st.final_as,
                         "final_exp": st.final_exp, "tail_limsup_as": tail_limsup(st.as_statistic)})
    verdicts = []
    for chk in experiment.expected:
        measured, passed = chk.evaluate([s[chk.statistic] for s in per_seed])
        verdicts.append({"name": chk.name, "measured": measured, "op": chk.op,
                         "threshold": chk.threshold, "passed": passed})
    scheme, exact = rate_certificates(experiment.problem, experiment.regime, epsilon)
    return ReproductionReport(
        experiment.name, int(master_seed), int(n_seeds), per_seed, verdicts,
        {"scheme": scheme.to_dict(), "exact": exact.to_dict()},
        time.perf_counter() - start, stability_margin(experiment.problem))


def decay_table_csv(records) -> str:
    """Plot data: one line per (path, k) with both decay statistics."""
    lines = ["path_index,k,t,as_statistic,exp_statistic"]
    for rec in records:
        st = decay_statistics(rec)
        dt = rec.grid.dt
        for k, (a, e) in enumerate(zip(st.as_statistic, st.exp_statistic)):
            lines.append(f"{rec.path_index},{k},{k * dt!r},{float(a)!r},{float(e)!r}")
    return "\n".join(lines) + "\n"
