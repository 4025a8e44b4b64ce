"""Three-layer parallel decomposition time stepper.

Each step solves ``m`` independent shifted problems

    eta_j (y_j - 2 v_k + v_{k-1}) / tau^2 + A_j y_j = [j == 0] (f(t_k) - M(v_k))

and averages ``v_{k+1} = sum_j eta_j y_j``. The source is evaluated once per
step at ``t_k`` and goes to the first part only. The sum is accumulated in
ascending ``j`` so the result does not depend on how the sub-solves were
scheduled.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SolveError
from .splitting import ProblemSpec, Splitting, validate_splitting


@dataclass(frozen=True)
class SchemeConfig:
    tau: float
    n_steps: int
    corrected_start: bool = False

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigurationError(f"time step must be positive, got {self.tau!r}")
        if self.n_steps < 2:
            raise ConfigurationError(f"need at least 2 steps, got {self.n_steps}")

    @classmethod
    def from_final_time(cls, t_final: float, n_steps: int, **kw) -> "SchemeConfig":
        return cls(t_final / n_steps, n_steps, **kw)

    @property
    def t_final(self) -> float:
        return self.tau * self.n_steps


@dataclass
class SchemeState:
    v_prev: np.ndarray
    v_curr: np.ndarray
    k: int
    tau: float

    @property
    def t(self) -> float:
        return self.k * self.tau


def initialize(p: ProblemSpec, c: SchemeConfig, splitting: Splitting | None = None) -> SchemeState:
    """``v_0 = phi0`` and ``v_1 = phi0 + tau * phi1``.

    With ``c.corrected_start`` the second layer gains the Taylor term
    ``tau^2/2 (f(0) - A phi0 - M(phi0))``; this needs the splitting.
    """
    v0 = np.array(p.phi0, dtype=float, copy=True)
    v1 = v0 + c.tau * p.phi1
    if c.corrected_start:
        if splitting is None:
            raise ConfigurationError("corrected start needs the splitting to evaluate A phi0")
        acc = p.forcing(0.0) - splitting.apply_total(v0) - p.nonlinearity(v0)
        v1 = v1 + 0.5 * c.tau**2 * acc
    return SchemeState(v0, v1, 1, c.tau)


def step_source(p: ProblemSpec, state: SchemeState) -> np.ndarray:
    """``f(t_k) - M(v_k)``, shared by every sub-problem of the step."""
    return p.forcing(state.t) - p.nonlinearity(state.v_curr)


def sub_solve(j: int, s: Splitting, state: SchemeState, source: np.ndarray) -> np.ndarray:
    """Solve sub-problem ``j`` (0-based); only ``j == 0`` sees the source."""
    eta = s.etas[j]
    sigma = state.tau**2 / eta
    rhs = 2.0 * state.v_curr - state.v_prev
    if j == 0:
        rhs = rhs + sigma * source
    y = s.parts[j].solve_shifted(sigma, rhs)
    if not np.all(np.isfinite(y)):
        raise SolveError(
            f"sub-problem {j} produced non-finite values at step {state.k}",
            part=j,
            step=state.k,
        )
    return y


def combine(etas, ys) -> np.ndarray:
    """Weighted sum in ascending part order, single pass."""
    out = etas[0] * ys[0]
    for eta, y in zip(etas[1:], ys[1:]):
        out = out + eta * y
    return out


def step(
    s: Splitting,
    p: ProblemSpec,
    state: SchemeState,
    executor: ThreadPoolExecutor | None = None,
) -> SchemeState:
    """Advance one layer. Sub-solves run on ``executor`` when given."""
    if state.k < 1:
        raise ConfigurationError("state must be initialised (k >= 1) before stepping")
    source = step_source(p, state)
    if executor is None or s.m == 1:
        ys = [sub_solve(j, s, state, source) for j in range(s.m)]
    else:
        futures = [executor.submit(sub_solve, j, s, state, source) for j in range(s.m)]
        ys = [f.result() for f in futures]
    v_next = combine(s.etas, ys)
    return SchemeState(state.v_curr, v_next, state.k + 1, state.tau)


def baseline_step(whole, p: ProblemSpec, state: SchemeState) -> SchemeState:
    """Unsplit implicit layer ``(I + tau^2 A) v_{k+1} = 2 v_k - v_{k-1} + tau^2 (f - M(v_k))``."""
    source = step_source(p, state)
    sigma = state.tau**2
    rhs = 2.0 * state.v_curr - state.v_prev + sigma * source
    v_next = whole.solve_shifted(sigma, rhs)
    if not np.all(np.isfinite(v_next)):
        raise SolveError(f"baseline solve produced non-finite values at step {state.k}", step=state.k)
    return SchemeState(state.v_curr, v_next, state.k + 1, state.tau)


@dataclass
class Trajectory:
    """Layers ``v_0 .. v_n``; in rolling mode only the last two are kept."""

    tau: float
    layers: list[np.ndarray] = field(default_factory=list)
    final: np.ndarray | None = None
    previous: np.ndarray | None = None

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(len(self.layers))

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, k):
        return self.layers[k]


def resolve_threads(threads: int | None) -> int:
    if threads is None or threads == 1:
        return 1
    if threads == 0:
        return os.cpu_count() or 1
    if threads < 0:
        raise ConfigurationError(f"thread count must be >= 0, got {threads}")
    return threads


def run(
    s: Splitting,
    p: ProblemSpec,
    c: SchemeConfig,
    *,
    store: bool = True,
    threads: int | None = 1,
    baseline: bool = False,
    callback=None,
) -> Trajectory:
    """Integrate from ``t = 0`` to ``c.t_final``.

    ``store=False`` keeps only the last two layers. ``callback(k, v_k)`` is
    called for every layer including ``v_0`` and ``v_1``. With
    ``baseline=True`` the unsplit scheme is used instead of the split one.
    """
    validate_splitting(s)
    state = initialize(p, c, s)
    traj = Trajectory(c.tau)
    for k, v in enumerate((state.v_prev, state.v_curr)):
        if store:
            traj.layers.append(v)
        if callback is not None:
            callback(k, v)
    whole = s.total() if baseline else None
    nthreads = resolve_threads(threads)
    executor = ThreadPoolExecutor(nthreads) if nthreads > 1 and s.m > 1 and not baseline else None
    try:
        for _ in range(1, c.n_steps):
            if baseline:
                state = baseline_step(whole, p, state)
            else:
                state = step(s, p, state, executor)
            if store:
                traj.layers.append(state.v_curr)
            if callback is not None:
                callback(state.k, state.v_curr)
    finally:
        if executor is not None:
            executor.shutdown()
    traj.final = state.v_curr
    traj.previous = state.v_prev
    return traj
