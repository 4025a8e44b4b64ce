"""Manufactured solutions for ``u_tt - Delta u = sin(u) + f`` on the unit square.

In operator form this is ``u'' + A u + M(u) = f`` with ``A = -Delta``
(homogeneous Dirichlet) and ``M(u) = -sin(u)``, Lipschitz constant 1.
Every case here is ``u(x, y, t) = T(t) sin(a pi x) sin(b pi y)``, so
``-Delta u = (a^2 + b^2) pi^2 u`` in closed form.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .laplacian import laplacian_splitting
from .scheme import SchemeConfig, run
from .splitting import Grid, ProblemSpec

CSV_HEADER = "n,tau,h,max_error,l2_error,rel_error,runtime_s"


def minus_sin(u):
    return -np.sin(u)


@dataclass(frozen=True)
class ManufacturedCase:
    label: str
    a: int
    b: int
    time_factor: Callable[[float], float]
    time_factor_dt: Callable[[float], float]
    time_factor_dtt: Callable[[float], float]
    t_final: float = 1.0

    def spatial(self, x, y):
        return np.sin(self.a * np.pi * x) * np.sin(self.b * np.pi * y)

    def exact(self, x, y, t):
        return self.time_factor(t) * self.spatial(x, y)

    def exact_dt(self, x, y, t):
        return self.time_factor_dt(t) * self.spatial(x, y)

    def exact_tt(self, x, y, t):
        return self.time_factor_dtt(t) * self.spatial(x, y)

    def forcing(self, x, y, t):
        """``u_tt - Delta u - sin(u)``."""
        u = self.exact(x, y, t)
        k2 = (self.a**2 + self.b**2) * math.pi**2
        return self.exact_tt(x, y, t) + k2 * u - np.sin(u)

    def problem(self, grid: Grid) -> ProblemSpec:
        x, y = grid.nodes()
        return ProblemSpec(
            phi0=self.exact(x, y, 0.0),
            phi1=self.exact_dt(x, y, 0.0),
            forcing=lambda t: self.forcing(x, y, t),
            nonlinearity=minus_sin,
            lipschitz_a=1.0,
        )


def _power_case(label, freq):
    # t^{7/2}: third time derivative blows up at t = 0, fourth does not exist there
    return ManufacturedCase(
        label,
        freq,
        freq,
        lambda t: t**3.5,
        lambda t: 3.5 * t**2.5,
        lambda t: 8.75 * t**1.5,
    )


def make_test1() -> ManufacturedCase:
    """``t^{7/2} sin(2 pi x) sin(2 pi y)``; run at ``tau = h = 0.05``."""
    return _power_case("test1", 2)


def make_test2() -> ManufacturedCase:
    """``t^{7/2} sin(10 pi x) sin(10 pi y)``; run at ``tau = h = 0.01``."""
    return _power_case("test2", 10)


def make_smooth() -> ManufacturedCase:
    """``sin(pi x) sin(pi y) sin(t)``."""
    return ManufacturedCase("smooth", 1, 1, np.sin, np.cos, lambda t: -np.sin(t))


CASES = {"test1": make_test1, "test2": make_test2, "smooth": make_smooth}

REFERENCE_RESOLUTION = {"test1": 20, "test2": 100}


def get_case(label: str) -> ManufacturedCase:
    try:
        return CASES[label]()
    except KeyError:
        raise KeyError(f"unknown case {label!r}; choose from {sorted(CASES)}") from None


@dataclass
class ErrorSummary:
    max_error: float
    l2_error: float
    rel_error: float
    deriv_error: float
    max_exact: float


class ErrorMonitor:
    """Accumulates errors layer by layer, so runs need not store trajectories.

    ``max_error`` is over every interior node and every time level.
    ``l2_error`` is the mesh-weighted L2 error at the last layer seen.
    ``deriv_error`` is ``max_k |u'(t_k) - (v_{k+1} - v_k)/tau|_L2``.
    """

    def __init__(self, case: ManufacturedCase, grid: Grid, tau: float):
        self.case = case
        self.grid = grid
        self.tau = tau
        self.x, self.y = grid.nodes()
        self.max_error = 0.0
        self.max_exact = 0.0
        self.l2_error = 0.0
        self.deriv_error = 0.0
        self.deriv_series: list[float] = []
        self._prev = None

    def __call__(self, k, v):
        t = k * self.tau
        u = self.case.exact(self.x, self.y, t)
        err = v - u
        self.max_error = max(self.max_error, float(np.abs(err).max()))
        self.max_exact = max(self.max_exact, float(np.abs(u).max()))
        self.l2_error = math.sqrt(self.grid.cell_volume * float(np.vdot(err, err)))
        if self._prev is not None:
            t_prev = (k - 1) * self.tau
            d = self.case.exact_dt(self.x, self.y, t_prev) - (v - self._prev) / self.tau
            dn = math.sqrt(self.grid.cell_volume * float(np.vdot(d, d)))
            self.deriv_series.append(dn)
            self.deriv_error = max(self.deriv_error, dn)
        self._prev = v

    def summary(self) -> ErrorSummary:
        rel = self.max_error / self.max_exact if self.max_exact > 0 else math.nan
        return ErrorSummary(self.max_error, self.l2_error, rel, self.deriv_error, self.max_exact)


def measure_error(trajectory, case: ManufacturedCase, grid: Grid, tau: float) -> ErrorSummary:
    """Errors of a stored trajectory against the exact solution."""
    mon = ErrorMonitor(case, grid, tau)
    for k, v in enumerate(trajectory):
        mon(k, v)
    return mon.summary()


@dataclass
class RunResult:
    n: int
    tau: float
    h: float
    errors: ErrorSummary
    runtime: float
    etas: list[float]
    final: np.ndarray | None = None
    trajectory: list | None = None


def solve_case(
    case: ManufacturedCase,
    n: int,
    *,
    etas=None,
    threads: int = 1,
    store: bool = False,
    corrected_start: bool = False,
    tau: float | None = None,
    callback=None,
) -> RunResult:
    """Run the split scheme for ``case`` with ``n`` divisions per side.

    The grid has ``n - 1`` interior nodes per direction, ``h = 1/n``; by
    default ``tau = h`` (with ``t_final = 1``) as in the reference runs.
    """
    if n < 2:
        raise ValueError("need at least 2 divisions")
    grid = Grid.unit_square(n - 1)
    tau = case.t_final / n if tau is None else tau
    n_steps = max(2, round(case.t_final / tau))
    cfg = SchemeConfig(tau, n_steps, corrected_start=corrected_start)
    split = laplacian_splitting(grid, etas)
    mon = ErrorMonitor(case, grid, tau)

    def observe(k, v):
        mon(k, v)
        if callback is not None:
            callback(k, v)

    t0 = time.perf_counter()
    traj = run(split, case.problem(grid), cfg, store=store, threads=threads, callback=observe)
    runtime = time.perf_counter() - t0
    return RunResult(
        n, tau, 1.0 / n, mon.summary(), runtime, list(split.etas), traj.final,
        traj.layers if store else None,
    )


def fit_order(ns, errors) -> float:
    """Least-squares ``-d log(error) / d log(n)``; ``nan`` below 3 points."""
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if ns.size < 3 or np.any(errors <= 0):
        return math.nan
    slope = np.polyfit(np.log(ns), np.log(errors), 1)[0]
    return float(-slope)


@dataclass
class ConvergenceReport:
    case: str
    rows: list[RunResult] = field(default_factory=list)
    complete: bool = True
    failure: str | None = None

    @property
    def ns(self):
        return [r.n for r in self.rows]

    @property
    def insufficient(self) -> bool:
        return len(self.rows) < 3

    @property
    def order(self) -> float:
        return fit_order(self.ns, [r.errors.max_error for r in self.rows])

    @property
    def derivative_order(self) -> float:
        return fit_order(self.ns, [r.errors.deriv_error for r in self.rows])

    @property
    def monotone(self) -> bool:
        e = [r.errors.max_error for r in self.rows]
        return all(b < a for a, b in zip(e, e[1:]))


def convergence_study(case: ManufacturedCase, n_list, *, etas=None, threads: int = 1) -> ConvergenceReport:
    """Refinement sweep with ``tau = h = 1/n``.

    Resolutions run concurrently when ``threads > 1``; rows are sorted by
    ``n``. A failing resolution stops the sweep and the report keeps the
    rows completed so far.
    """
    n_list = sorted(int(n) for n in n_list)
    report = ConvergenceReport(case.label)

    def one(n):
        return solve_case(case, n, etas=etas)

    try:
        if threads and threads > 1 and len(n_list) > 1:
            with ThreadPoolExecutor(min(threads, len(n_list))) as ex:
                futures = [ex.submit(one, n) for n in n_list]
                for fut in futures:
                    report.rows.append(fut.result())
        else:
            for n in n_list:
                report.rows.append(one(n))
    except Exception as exc:  # keep the partial report
        report.complete = False
        report.failure = f"{type(exc).__name__}: {exc}"
    return report


def fmt(x) -> str:
    return f"{x:.17g}"


def csv_row(r: RunResult) -> str:
    e = r.errors
    return ",".join(
        [str(r.n)] + [fmt(v) for v in (r.tau, r.h, e.max_error, e.l2_error, e.rel_error, r.runtime)]
    )


def write_report(report: ConvergenceReport, outdir) -> dict[str, str]:
    """Write ``convergence.csv``, ``slope.txt``, ``convergence.dat`` and ``derivative.csv``."""
    os.makedirs(outdir, exist_ok=True)
    paths = {
        "csv": os.path.join(outdir, "convergence.csv"),
        "slope": os.path.join(outdir, "slope.txt"),
        "dat": os.path.join(outdir, "convergence.dat"),
        "derivative": os.path.join(outdir, "derivative.csv"),
    }
    with open(paths["csv"], "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in report.rows:
            fh.write(csv_row(r) + "\n")
    with open(paths["dat"], "w") as fh:
        fh.write("# log(n) log(rel_error)\n")
        for r in report.rows:
            fh.write(f"{fmt(math.log(r.n))} {fmt(math.log(r.errors.rel_error))}\n")
    with open(paths["derivative"], "w") as fh:
        fh.write("n,tau,deriv_error\n")
        for r in report.rows:
            fh.write(f"{r.n},{fmt(r.tau)},{fmt(r.errors.deriv_error)}\n")
    status = "ok"
    if not report.complete:
        status = "partial"
    elif report.insufficient:
        status = "insufficient"
    with open(paths["slope"], "w") as fh:
        fh.write(f"order = {fmt(report.order)}\n")
        fh.write(f"derivative_order = {fmt(report.derivative_order)}\n")
        fh.write(f"rows = {len(report.rows)}\n")
        fh.write(f"monotone = {str(report.monotone).lower()}\n")
        fh.write(f"status = {status}\n")
        if report.failure:
            fh.write(f"failure = {report.failure}\n")
    return paths
