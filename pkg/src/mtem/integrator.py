"""Simulation grid and the truncated Euler-Maruyama recursion.

States live in one array indexed ``k = -m .. n_steps`` (stored at row
``k + m``).  The delayed state at step k is ``X[k - lag(k)]`` with
``lag(k) = [delta(k dt) / dt]``, which is always a grid index, so the history
is only ever sampled at grid points.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import (EnsembleOverflowError, GridError, IndexBeforeHistoryError,
                     NegativeDelayError, NonFiniteStateError, StateOverflowError)
from .model import DelayFunction, SddeProblem
from .rng import BrownianSource
from .truncation import TruncatedCoefficients, TruncationPolicy, truncated_diffusion, truncated_drift

__all__ = [
    "SimulationGrid",
    "PathRecord",
    "admissible_steps",
    "delay_lag",
    "delayed_indices",
    "lookup_state",
    "mtem_step",
    "simulate_path",
    "simulate_ensemble",
    "worker_count",
    "ensemble_to_csv",
    "ensemble_to_json",
]

FLOOR_GUARD = 1e-9
GRID_TOL = 1e-9


def admissible_steps(tau: float, dt: float, count: int = 4) -> list:
    """Step sizes ``tau/m <= dt`` with a short decimal expansion, largest first."""
    out = []
    m = max(1, math.ceil(tau / dt - GRID_TOL))
    while len(out) < count and m < 10 ** 6:
        cand = tau / m
        if abs(cand - round(cand, 6)) < 1e-12:
            out.append(round(cand, 6))
        m += 1
    return out


@dataclass(frozen=True)
class SimulationGrid:
    dt: float
    m: int
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise GridError(f"step size must be positive, got {self.dt}")
        if self.m < 0 or self.n_steps < 1:
            raise GridError("need m >= 0 and n_steps >= 1")

    @classmethod
    def for_delay(cls, tau: float, dt: float, n_steps: int) -> "SimulationGrid":
        """Grid with ``tau = m dt``; fails unless ``tau/dt`` is within 1e-9 of an integer."""
        if not dt > 0:
            raise GridError(f"step size must be positive, got {dt}")
        ratio = tau / dt
        m = round(ratio)
        if abs(ratio - m) > GRID_TOL:
            raise GridError(
                f"tau/dt = {tau}/{dt} = {ratio:.12g} is not within {GRID_TOL:g} of an integer; "
                f"admissible step sizes include {admissible_steps(tau, dt)}")
        return cls(float(dt), int(m), int(n_steps))

    @property
    def tau(self) -> float:
        return self.m * self.dt

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.m, self.n_steps + 1)

    @property
    def times(self) -> np.ndarray:
        return self.indices * self.dt

    def to_dict(self):
        return {"dt": self.dt, "m": self.m, "n_steps": self.n_steps}


@dataclass(frozen=True)
class PathRecord:
    """One trajectory; ``states[k + m]`` holds ``X_k`` for ``k = -m .. n_steps``."""

    grid: SimulationGrid
    states: np.ndarray
    seed_info: tuple
    truncation_level: float

    @property
    def forward(self) -> np.ndarray:
        """States ``X_0 .. X_n``."""
        return self.states[self.grid.m:]

    @property
    def path_index(self) -> int:
        return self.seed_info[1]

    def to_csv(self) -> str:
        return ensemble_to_csv([self], with_path_index=False)

    def to_json(self) -> dict:
        return {"grid": self.grid.to_dict(), "master_seed": int(self.seed_info[0]),
                "path_index": int(self.seed_info[1]), "truncation_level": self.truncation_level,
                "k_start": -self.grid.m, "states": self.states.tolist()}


def lookup_state(path: PathRecord, index: int) -> np.ndarray:
    m = path.grid.m
    if index < -m:
        raise IndexBeforeHistoryError(f"index before history: {index} < {-m}")
    if index > path.grid.n_steps:
        raise IndexError(f"index {index} beyond recorded steps {path.grid.n_steps}")
    return path.states[index + m]


def delay_lag(k: int, grid: SimulationGrid, delay: DelayFunction) -> int:
    """``[delta(k dt)/dt]`` with a floor guard, clamped so ``k - lag >= -m``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    d = float(delay(k * grid.dt))
    if d < 0:
        raise NegativeDelayError(f"negative delay {d} at t={k * grid.dt}")
    lag = math.floor(d / grid.dt + FLOOR_GUARD)
    return min(lag, k + grid.m)


def delayed_indices(grid: SimulationGrid, delay: DelayFunction) -> np.ndarray:
    """Row of ``X_{k - lag(k)}`` in the states array, for ``k = 0 .. n_steps-1``."""
    return np.array([grid.m + k - delay_lag(k, grid, delay) for k in range(grid.n_steps)],
                    dtype=np.int64)


def mtem_step(x_k, x_delayed, t_k: float, dt: float, tc: TruncatedCoefficients, dW,
              step: Optional[int] = None):
    """``x_k + f_trunc dt + g_trunc dW``.  Works on a single state or a batch."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.atleast_1d(np.asarray(x_k, dtype=float))
    y = np.atleast_1d(np.asarray(x_delayed, dtype=float))
    dw = np.atleast_1d(np.asarray(dW, dtype=float))
    if not np.all(np.isfinite(dw)):
        raise NonFiniteStateError("non-finite noise increment")
    f = truncated_drift(tc, x, y, t_k)
    g = truncated_diffusion(tc, x, y, t_k)
    new = x + f * dt + np.sum(g * dw[..., None, :], axis=-1)
    if not np.all(np.abs(new) <= kernels.OVERFLOW_LIMIT):
        where = "" if step is None else f" {step}"
        raise StateOverflowError(f"state overflow at step{where}", step=step)
    return new


def _history_block(problem: SddeProblem, grid: SimulationGrid) -> np.ndarray:
    n = problem.coefficients.n
    hist = np.empty((grid.m + 1, n))
    for j, k in enumerate(range(-grid.m, 1)):
        v = problem.history(k * grid.dt)
        if v.shape != (n,):
            raise ValueError(f"history value has shape {v.shape}, expected ({n},)")
        hist[j] = v
    if not np.all(np.isfinite(hist)):
        raise NonFiniteStateError("non-finite initial history")
    return hist


def _check_inputs(problem, policy, grid):
    if abs(grid.tau - problem.delay.tau) > 1e-12 * max(1.0, problem.delay.tau):
        raise GridError(f"grid tau {grid.tau} does not match delay tau {problem.delay.tau}")
    if grid.dt > policy.delta_star:
        raise GridError(f"dt={grid.dt} exceeds the truncation policy's delta_star={policy.delta_star}")


def _simulate_block(problem, level, grid, source, path_indices, delayed, use_numba):
    """Advance a group of paths.  Returns (states, fail_steps)."""
    coef = problem.coefficients
    P, L, n = len(path_indices), grid.m + grid.n_steps + 1, coef.n
    hist = _history_block(problem, grid)
    dW = source.block(path_indices, grid.n_steps, grid.dt)
    if coef.polynomial is not None:
        states = np.zeros((P, L))
        states[:, :grid.m + 1] = hist[:, 0]
        fail = kernels.run_polynomial(states, grid.m, delayed, dW[:, :, 0], grid.dt, level,
                                      coef.polynomial, use_numba=use_numba)
        return states[:, :, None], fail

    tc = TruncatedCoefficients(coef, level)
    states = np.zeros((P, L, n))
    states[:, :grid.m + 1] = hist
    fail = np.full(P, -1, dtype=np.int64)
    alive = np.ones(P, dtype=bool)
    m = grid.m
    with np.errstate(all="ignore"):
        for k in range(grid.n_steps):
            x = states[:, m + k]
            y = states[:, delayed[k]]
            t = k * grid.dt
            # dead paths are frozen at a finite state, so no masking is needed here
            f = truncated_drift(tc, x, y, t)
            g = truncated_diffusion(tc, x, y, t)
            new = x + f * grid.dt + np.sum(g * dW[:, k, None, :], axis=-1)
            bad = alive & ~np.all(np.abs(new) <= kernels.OVERFLOW_LIMIT, axis=-1)
            if bad.any():
                fail[bad] = k
                alive &= ~bad
            new[~alive] = x[~alive]
            states[:, m + k + 1] = new
    return states, fail


def worker_count(workers: Optional[int] = None) -> int:
    """Resolve the worker count, capped by ``MTEM_THREADS`` when set."""
    if workers is None:
        workers = os.cpu_count() or 1
    cap = os.environ.get("MTEM_THREADS")
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, int(workers))


def simulate_path(problem: SddeProblem, policy: TruncationPolicy, grid: SimulationGrid,
                  source: BrownianSource, path_index: int = 0,
                  use_numba: Optional[bool] = None) -> PathRecord:
    _check_inputs(problem, policy, grid)
    level = policy.level(grid.dt)
    delayed = delayed_indices(grid, problem.delay)
    states, fail = _simulate_block(problem, level, grid, source, [path_index], delayed, use_numba)
    if fail[0] >= 0:
        raise StateOverflowError(f"state overflow at step {int(fail[0])}", step=int(fail[0]),
                                 path_index=path_index)
    states = states[0]
    states.setflags(write=False)
    return PathRecord(grid, states, (int(source.master_seed), int(path_index)), level)


def simulate_ensemble(problem: SddeProblem, policy: TruncationPolicy, grid: SimulationGrid,
                      master_seed: int, n_paths: int, workers: Optional[int] = None,
                      chunk_size: Optional[int] = None,
                      use_numba: Optional[bool] = None) -> list:
    """Simulate paths ``0 .. n_paths-1``; path i is keyed on ``(master_seed, i)``.

    Paths are split into contiguous chunks run on a thread pool.  Every path
    is computed independently of the others, so the output does not depend
    on ``workers`` or ``chunk_size``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    _check_inputs(problem, policy, grid)
    source = BrownianSource(master_seed, problem.coefficients.d)
    level = policy.level(grid.dt)
    delayed = delayed_indices(grid, problem.delay)
    workers = worker_count(workers)
    if chunk_size is None:
        chunk_size = max(1, min(256, math.ceil(n_paths / workers)))
    chunks = [list(range(i, min(i + chunk_size, n_paths))) for i in range(0, n_paths, chunk_size)]

    def run(idx):
        return _simulate_block(problem, level, grid, source, idx, delayed, use_numba)

    if workers == 1 or len(chunks) == 1:
        results = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))

    failures = []
    records = []
    for idx, (states, fail) in zip(chunks, results):
        states.setflags(write=False)
        for row, p in enumerate(idx):
            if fail[row] >= 0:
                failures.append((p, int(fail[row])))
            records.append(PathRecord(grid, states[row], (int(master_seed), p), level))
    if failures:
        raise EnsembleOverflowError(failures)
    return records


def _fmt(v: float) -> str:
    return repr(float(v))


def ensemble_to_csv(records, with_path_index: bool = True) -> str:
    """CSV with columns ``[path_index,] k, t, x_1 .. x_n``; floats use ``repr``."""
    if not records:
        return ""
    n = records[0].states.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["k", "t"] + [f"x_{i + 1}" for i in range(n)]
    w.writerow((["path_index"] if with_path_index else []) + head)
    for rec in records:
        g = rec.grid
        for k, row in zip(range(-g.m, g.n_steps + 1), rec.states):
            vals = [k, _fmt(k * g.dt)] + [_fmt(v) for v in row]
            w.writerow(([rec.path_index] if with_path_index else []) + vals)
    return buf.getvalue()


def ensemble_to_json(records, metadata: Optional[dict] = None) -> str:
    doc = {"metadata": metadata or {}, "paths": [r.to_json() for r in records]}
    return json.dumps(doc)
