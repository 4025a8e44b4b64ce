"""Additive splittings ``A = A_1 + ... + A_m`` and their contracts.

A grid function is a plain ``numpy`` array of interior-node values. It is
always paired with the :class:`Grid` it lives on, which supplies the
mesh-weighted inner product. Operators only need three things: ``apply``,
``solve_shifted`` and a lower spectral bound ``alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import ConfigurationError, GridMismatchError

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid of interior nodes.

    ``spacing`` enters the inner product as the cell volume, so discrete
    norms approximate the continuous L2 norm. Dense (non-grid) problems use
    unit spacing, which gives the Euclidean inner product.
    """

    shape: tuple[int, ...]
    spacing: tuple[float, ...]

    def __post_init__(self):
        if len(self.shape) != len(self.spacing):
            raise GridMismatchError("shape and spacing have different ranks")
        if any(n < 1 for n in self.shape):
            raise GridMismatchError(f"grid extents must be >= 1, got {self.shape}")

    @classmethod
    def unit_interval(cls, n: int) -> "Grid":
        return cls((n,), (1.0 / (n + 1),))

    @classmethod
    def unit_square(cls, nx: int, ny: int | None = None) -> "Grid":
        ny = nx if ny is None else ny
        return cls((nx, ny), (1.0 / (nx + 1), 1.0 / (ny + 1)))

    @classmethod
    def euclidean(cls, dim: int) -> "Grid":
        return cls((dim,), (1.0,))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def nodes(self) -> list[np.ndarray]:
        """Coordinates of interior nodes, one ``indexing='ij'`` array per axis."""
        axes = [h * np.arange(1, n + 1) for n, h in zip(self.shape, self.spacing)]
        return np.meshgrid(*axes, indexing="ij")

    def check(self, u: np.ndarray) -> None:
        if np.shape(u) != self.shape:
            raise GridMismatchError(f"field of shape {np.shape(u)} on grid {self.shape}")


def inner_product(u: np.ndarray, v: np.ndarray, grid: Grid) -> float:
    """Mesh-weighted inner product ``h_1 ... h_d * sum(u * v)``."""
    grid.check(u)
    grid.check(v)
    return grid.cell_volume * float(np.vdot(u, v))


def norm(u: np.ndarray, grid: Grid) -> float:
    return math.sqrt(max(inner_product(u, u, grid), 0.0))


@runtime_checkable
class SubOperator(Protocol):
    """One self-adjoint positive-definite part ``A_j`` of a splitting.

    Implementations must be safe to call concurrently from several
    threads; ``apply`` and ``solve_shifted`` may not mutate shared state.
    """

    alpha: float

    def apply(self, u: np.ndarray) -> np.ndarray: ...

    def solve_shifted(self, sigma: float, rhs: np.ndarray) -> np.ndarray:
        """Solve ``(I + sigma * A_j) w = rhs``."""
        ...


class DenseOperator:
    """Symmetric positive-definite matrix acting on vectors.

    The shifted solve goes through the eigendecomposition computed once at
    construction, so it is exact up to eigensolver accuracy for any shift.
    """

    def __init__(self, matrix, alpha: float | None = None):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.matrix = matrix
        self._evals, self._evecs = np.linalg.eigh(0.5 * (matrix + matrix.T))
        self.alpha = float(self._evals[0]) if alpha is None else float(alpha)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, u):
        return self.matrix @ u

    def solve_shifted(self, sigma, rhs):
        q = self._evecs
        return q @ ((q.T @ rhs) / (1.0 + sigma * self._evals))


class SumOperator:
    """The whole operator ``A = sum_j A_j``, used by the unsplit baseline.

    ``solver`` may provide a dedicated shifted solve for the sum; without
    one the parts must all be :class:`DenseOperator`.
    """

    def __init__(self, parts: Sequence[SubOperator], solver=None):
        self.parts = list(parts)
        self.alpha = float(sum(p.alpha for p in self.parts))
        self._solver = solver
        if solver is None:
            if not all(isinstance(p, DenseOperator) for p in self.parts):
                raise TypeError("SumOperator needs an explicit solver for non-dense parts")
            self._dense = DenseOperator(sum(p.matrix for p in self.parts))

    def apply(self, u):
        out = self.parts[0].apply(u)
        for p in self.parts[1:]:
            out = out + p.apply(u)
        return out

    def solve_shifted(self, sigma, rhs):
        if self._solver is not None:
            return self._solver(sigma, rhs)
        return self._dense.solve_shifted(sigma, rhs)


@dataclass
class Splitting:
    """Parts ``A_j`` with averaging weights ``eta_j``.

    Weights are stored as given; :func:`validate_splitting` decides whether
    they are admissible. ``whole`` optionally supplies the summed operator
    with its own shifted solver (needed by the unsplit baseline).
    """

    parts: list
    etas: list[float]
    whole: object | None = None

    def __post_init__(self):
        self.parts = list(self.parts)
        self.etas = [float(e) for e in self.etas]
        if not self.parts:
            raise ConfigurationError("a splitting needs at least one part")
        if len(self.parts) != len(self.etas):
            raise ConfigurationError(
                f"{len(self.parts)} parts but {len(self.etas)} weights"
            )

    @classmethod
    def uniform(cls, parts, whole=None) -> "Splitting":
        m = len(parts)
        return cls(list(parts), [1.0 / m] * m, whole)

    @property
    def m(self) -> int:
        return len(self.parts)

    @property
    def nu(self) -> float:
        return min(p.alpha for p in self.parts)

    def total(self):
        if self.whole is not None:
            return self.whole
        return SumOperator(self.parts)

    def apply_total(self, u):
        out = self.parts[0].apply(u)
        for p in self.parts[1:]:
            out = out + p.apply(u)
        return out


@dataclass
class SplittingDiagnostics:
    weight_residual: float
    symmetry_residuals: list[float] = field(default_factory=list)
    positivity_margins: list[float] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            self.weight_residual <= WEIGHT_TOL
            and all(r <= 1e-10 for r in self.symmetry_residuals)
            and all(mg >= -1e-10 for mg in self.positivity_margins)
        )


def validate_splitting(
    s: Splitting, grid: Grid | None = None, samples: int = 0, rng=None
) -> SplittingDiagnostics:
    """Check weights hard, and operator symmetry/positivity by sampling.

    Raises :class:`ConfigurationError` on a weight-sum defect above 1e-12
    or on any weight outside ``(0, 1)`` (``eta_1 == 1`` when ``m == 1``).
    With ``samples > 0`` and a grid, random pairs probe
    ``<A_j u, v> = <u, A_j v>`` and ``<A_j u, u> >= alpha_j |u|^2``; the
    worst relative residual and margin per part are reported.
    """
    residual = abs(math.fsum(s.etas) - 1.0)
    if s.m == 1:
        if abs(s.etas[0] - 1.0) > WEIGHT_TOL:
            raise ConfigurationError(
                f"single-part splitting needs eta_1 = 1, got {s.etas[0]!r}",
                index=0,
                residual=residual,
            )
    else:
        for j, eta in enumerate(s.etas):
            if not 0.0 < eta < 1.0:
                raise ConfigurationError(
                    f"weight eta[{j}] = {eta!r} outside (0, 1)", index=j, residual=residual
                )
    if residual > WEIGHT_TOL:
        raise ConfigurationError(
            f"weights sum to {math.fsum(s.etas)!r}, residual {residual:.3g}",
            residual=residual,
        )

    diag = SplittingDiagnostics(weight_residual=residual)
    if samples and grid is not None:
        rng = np.random.default_rng(rng)
        for part in s.parts:
            sym, margin = 0.0, math.inf
            for _ in range(samples):
                u = rng.standard_normal(grid.shape)
                v = rng.standard_normal(grid.shape)
                au, av = part.apply(u), part.apply(v)
                lhs, rhs = inner_product(au, v, grid), inner_product(u, av, grid)
                scale = norm(au, grid) * norm(v, grid) + norm(u, grid) * norm(av, grid)
                sym = max(sym, abs(lhs - rhs) / scale)
                uu = inner_product(u, u, grid)
                margin = min(margin, inner_product(au, u, grid) / uu - part.alpha)
            diag.symmetry_residuals.append(sym)
            diag.positivity_margins.append(margin / max(1.0, abs(part.alpha)))
    return diag


@dataclass
class ProblemSpec:
    """``u'' + A u + M(u) = f``, ``u(0) = phi0``, ``u'(0) = phi1``."""

    phi0: np.ndarray
    phi1: np.ndarray
    forcing: Callable[[float], np.ndarray]
    nonlinearity: Callable[[np.ndarray], np.ndarray]
    lipschitz_a: float = 0.0

    def __post_init__(self):
        self.phi0 = np.asarray(self.phi0, dtype=float)
        self.phi1 = np.asarray(self.phi1, dtype=float)
        if self.phi0.shape != self.phi1.shape:
            raise GridMismatchError("phi0 and phi1 shapes differ")
        if self.lipschitz_a < 0:
            raise ConfigurationError("Lipschitz constant must be nonnegative")
        if not (np.all(np.isfinite(self.phi0)) and np.all(np.isfinite(self.phi1))):
            raise ConfigurationError("initial data must be finite")


def zero_nonlinearity(u):
    return np.zeros_like(u)


def lipschitz_ratio(p: ProblemSpec, grid: Grid, samples: int = 20, rng=None) -> float:
    """Largest sampled ``|M(u) - M(v)| / |u - v|``; advisory only."""
    rng = np.random.default_rng(rng)
    m0 = p.nonlinearity(grid.zeros())
    if not np.all(np.isfinite(m0)):
        raise ConfigurationError("nonlinearity is not finite at the zero field")
    worst = 0.0
    for _ in range(samples):
        u = rng.standard_normal(grid.shape)
        v = rng.standard_normal(grid.shape)
        d = norm(u - v, grid)
        worst = max(worst, norm(p.nonlinearity(u) - p.nonlinearity(v), grid) / d)
    return worst
