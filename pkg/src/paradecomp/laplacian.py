"""Directional second-difference operators on the unit square.

``A_1 = -d^2/dx^2`` and ``A_2 = -d^2/dy^2`` with homogeneous Dirichlet
data, discretised by the (-1, 2, -1)/h^2 stencil. Arrays hold interior
nodes only, indexed ``u[i, j] ~ u(x_i, y_j)``; boundary values are
implicitly zero. Axis 0 is x, axis 1 is y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .splitting import Grid, Splitting


@dataclass(frozen=True)
class TridiagonalSystem:
    """Constant-coefficient tridiagonal matrix ``(I + sigma * T)``.

    ``T`` is the 1D second-difference matrix with stencil (-1, 2, -1)/h^2.
    The Thomas elimination factors (modified super-diagonal and pivots) are
    computed once here and reused for every right-hand side.
    """

    n: int
    h: float
    sigma: float

    @property
    def sub(self) -> float:
        return -self.sigma / self.h**2

    @property
    def diag(self) -> float:
        return 1.0 + 2.0 * self.sigma / self.h**2

    @property
    def sup(self) -> float:
        return -self.sigma / self.h**2

    def dense(self) -> np.ndarray:
        return (
            np.diag(np.full(self.n, self.diag))
            + np.diag(np.full(self.n - 1, self.sub), -1)
            + np.diag(np.full(self.n - 1, self.sup), 1)
        )

    def factors(self) -> tuple[np.ndarray, np.ndarray]:
        return _thomas_factors(self.n, self.h, self.sigma)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve along axis 0; every other axis is an independent batch."""
        return thomas_solve(self.sub, self.factors(), rhs)


@lru_cache(maxsize=64)
def _thomas_factors(n: int, h: float, sigma: float):
    a = c = -sigma / h**2
    b = 1.0 + 2.0 * sigma / h**2
    cp = np.empty(n)
    piv = np.empty(n)
    piv[0] = b
    cp[0] = c / b
    for i in range(1, n):
        piv[i] = b - a * cp[i - 1]
        cp[i] = c / piv[i]
    cp.setflags(write=False)
    piv.setflags(write=False)
    return cp, piv


def thomas_solve(sub: float, factors, rhs: np.ndarray) -> np.ndarray:
    """Forward/back substitution with precomputed Thomas factors.

    ``rhs`` has the system index on axis 0; trailing axes are solved as
    independent lines in one vectorised sweep.
    """
    cp, piv = factors
    n = rhs.shape[0]
    x = np.array(rhs, dtype=float, copy=True)
    x[0] /= piv[0]
    for i in range(1, n):
        x[i] -= sub * x[i - 1]
        x[i] /= piv[i]
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x


def second_difference(u: np.ndarray, h: float, axis: int) -> np.ndarray:
    """``(-u[i-1] + 2 u[i] - u[i+1]) / h^2`` along ``axis`` with zero ghosts."""
    u = np.moveaxis(np.asarray(u, dtype=float), axis, 0)
    out = 2.0 * u
    out[1:] -= u[:-1]
    out[:-1] -= u[1:]
    out /= h * h
    return np.moveaxis(out, 0, axis)


def spectral_lower_bound(h: float) -> float:
    """Smallest eigenvalue ``(4/h^2) sin^2(pi h / 2)`` of the 1D second difference."""
    return 4.0 / h**2 * math.sin(math.pi * h / 2.0) ** 2


class DirectionalLaplacian:
    """``-d^2/dx_axis^2`` on a uniform grid; a :class:`SubOperator`."""

    def __init__(self, grid: Grid, axis: int):
        if not 0 <= axis < len(grid.shape):
            raise ValueError(f"axis {axis} out of range for grid {grid.shape}")
        self.grid = grid
        self.axis = axis
        self.n = grid.shape[axis]
        self.h = grid.spacing[axis]
        self.alpha = spectral_lower_bound(self.h)

    def __repr__(self):
        return f"DirectionalLaplacian(shape={self.grid.shape}, axis={self.axis})"

    def apply(self, u):
        self.grid.check(u)
        return second_difference(u, self.h, self.axis)

    def system(self, sigma: float) -> TridiagonalSystem:
        return TridiagonalSystem(self.n, self.h, float(sigma))

    def solve_shifted(self, sigma, rhs):
        self.grid.check(rhs)
        if sigma == 0.0:
            return np.array(rhs, dtype=float, copy=True)
        # Contiguous lines: the solve axis goes first, a transposed copy for axis != 0.
        lines = np.ascontiguousarray(np.moveaxis(rhs, self.axis, 0))
        shape = lines.shape
        sol = self.system(sigma).solve(lines.reshape(shape[0], -1))
        return np.moveaxis(sol.reshape(shape), 0, self.axis)

    def matrix(self) -> sparse.csr_matrix:
        """Sparse matrix of this operator on the flattened (C-order) grid."""
        t = _second_difference_matrix(self.n, self.h)
        mats = [sparse.identity(n, format="csr") for n in self.grid.shape]
        mats[self.axis] = t
        out = mats[0]
        for m in mats[1:]:
            out = sparse.kron(out, m, format="csr")
        return out


def _second_difference_matrix(n: int, h: float) -> sparse.csr_matrix:
    e = np.ones(n)
    return sparse.diags([-e[:-1], 2 * e, -e[:-1]], [-1, 0, 1], format="csr") / h**2


class Laplacian:
    """The full ``-Delta`` as the sum of all directional parts.

    The shifted solve of the unsplit operator is not separable, so it uses
    a sparse LU factorisation cached per shift.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self.parts = [DirectionalLaplacian(grid, ax) for ax in range(len(grid.shape))]
        self.alpha = sum(p.alpha for p in self.parts)
        self._mat = sum(p.matrix() for p in self.parts).tocsc()
        self._lu = lru_cache(maxsize=8)(self._factor)

    def _factor(self, sigma):
        n = self._mat.shape[0]
        return splu((sparse.identity(n, format="csc") + sigma * self._mat).tocsc())

    def apply(self, u):
        self.grid.check(u)
        out = self.parts[0].apply(u)
        for p in self.parts[1:]:
            out = out + p.apply(u)
        return out

    def solve_shifted(self, sigma, rhs):
        self.grid.check(rhs)
        if sigma == 0.0:
            return np.array(rhs, dtype=float, copy=True)
        sol = self._lu(float(sigma)).solve(np.ascontiguousarray(rhs).ravel())
        return sol.reshape(self.grid.shape)


def five_point_laplacian(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Negative 5-point Laplacian assembled directly from neighbour sums."""
    hx, hy = grid.spacing
    p = np.pad(np.asarray(u, dtype=float), 1)
    c = p[1:-1, 1:-1]
    return (2 * c - p[:-2, 1:-1] - p[2:, 1:-1]) / hx**2 + (
        2 * c - p[1:-1, :-2] - p[1:-1, 2:]
    ) / hy**2


def apply_dxx(u, grid: Grid):
    return second_difference(u, grid.spacing[0], 0)


def apply_dyy(u, grid: Grid):
    return second_difference(u, grid.spacing[1], 1)


def solve_shifted_dxx(sigma, rhs, grid: Grid):
    return DirectionalLaplacian(grid, 0).solve_shifted(sigma, rhs)


def solve_shifted_dyy(sigma, rhs, grid: Grid):
    return DirectionalLaplacian(grid, 1).solve_shifted(sigma, rhs)


def laplacian_splitting(grid: Grid, etas=None) -> Splitting:
    """Directional splitting of ``-Delta``; uniform weights by default."""
    whole = Laplacian(grid)
    parts = whole.parts
    if etas is None:
        return Splitting.uniform(parts, whole=whole)
    return Splitting(parts, list(etas), whole=whole)
