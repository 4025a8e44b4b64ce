"""Two-variable Chebyshev polynomials and second-kind Chebyshev bounds.

``Ut_k(x, y)`` obeys ``Ut_{k+1} = x Ut_k - y Ut_{k-1}``, ``Ut_0 = 1``,
``Ut_1 = x``. The classical second-kind polynomial is ``U_k(x) = Ut_k(2x, 1)``;
every cross-check in this module uses that convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Closed form switches to the recurrence when 1 - x^2 drops below this.
CLOSED_FORM_CUTOFF = 1e-8


def u2_eval(k: int, x, y):
    """Two-variable Chebyshev polynomial by forward recurrence."""
    if k < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    prev, cur = np.ones(np.broadcast(x, y).shape), x * np.ones_like(y)
    if k == 0:
        return _scalar(prev)
    for _ in range(k - 1):
        prev, cur = cur, x * cur - y * prev
    return _scalar(cur)


def u_recurrence(k: int, x):
    """Classical ``U_k(x)`` through ``Ut_k(2x, 1)``."""
    return u2_eval(k, 2.0 * np.asarray(x, dtype=float), 1.0)


def u_classical(k: int, x):
    """``sin((k+1) arccos x) / sqrt(1 - x^2)``, recurrence near ``|x| = 1``."""
    if k < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    one_minus = 1.0 - x * x
    near = one_minus < CLOSED_FORM_CUTOFF
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.arccos(np.clip(x, -1.0, 1.0))
        out = np.sin((k + 1) * theta) / np.sqrt(one_minus)
    if np.any(near):
        out = np.where(near, u_recurrence(k, x), out)
    return _scalar(out)


def u_table(k_max: int, x) -> np.ndarray:
    """Rows ``U_0(x) .. U_{k_max}(x)`` by recurrence, shape ``(k_max+1, *x.shape)``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((k_max + 1,) + x.shape)
    out[0] = 1.0
    if k_max >= 1:
        out[1] = 2.0 * x
    for k in range(1, k_max):
        out[k + 1] = 2.0 * x * out[k] - out[k - 1]
    return out


def _scalar(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


@dataclass
class Violation:
    bound: str
    k: int
    x: float
    margin: float


@dataclass
class BoundsReport:
    checked: int
    violations: list[Violation] = field(default_factory=list)
    worst_margin: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


BOUND_NAMES = ("abs", "difference", "shifted", "scaled")


def scalar_bounds(k_max: int, x) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Left- and right-hand sides of the four scalar bounds for ``0 <= k <= k_max``.

    ``abs``:        |U_k(x)|              <= 1/sqrt(1 - x^2)
    ``difference``: |U_k(x) - U_{k-1}(x)| <= sqrt(2/(1 + x))
    ``shifted``:    |U_k(x) - x U_{k-1}|  <= 1
    ``scaled``:     |x U_k(x) - U_{k-1}|  <= 1

    ``U_{-1} = 0``. Arrays have shape ``(k_max+1, len(x))``.
    """
    x = np.asarray(x, dtype=float).ravel()
    u = u_table(k_max, x)
    u_prev = np.vstack([np.zeros((1, x.size)), u[:-1]])
    ones = np.ones_like(u)
    return {
        "abs": (np.abs(u), ones / np.sqrt(1.0 - x * x)),
        "difference": (np.abs(u - u_prev), ones * np.sqrt(2.0 / (1.0 + x))),
        "shifted": (np.abs(u - x * u_prev), ones),
        "scaled": (np.abs(x * u - u_prev), ones),
    }


def scalar_bounds_check(k_max: int, x_samples, slack: float = 1e-12) -> BoundsReport:
    """Certify the four bounds on samples in ``(-1, 1)``.

    A sample violates a bound when ``lhs > rhs + slack * max(1, rhs)``.
    Margins are ``rhs - lhs`` (negative means violated).
    """
    x = np.asarray(x_samples, dtype=float).ravel()
    if np.any(np.abs(x) >= 1.0):
        raise ValueError("samples must lie strictly inside (-1, 1)")
    report = BoundsReport(checked=(k_max + 1) * x.size)
    for name, (lhs, rhs) in scalar_bounds(k_max, x).items():
        margin = rhs - lhs
        report.worst_margin[name] = float(margin.min())
        bad = lhs > rhs + slack * np.maximum(1.0, rhs)
        for k, i in zip(*np.nonzero(bad)):
            report.violations.append(Violation(name, int(k), float(x[i]), float(margin[k, i])))
    return report


def two_variable_bound(k: int, x, y):
    """Bound on ``|Ut_k(x, y)|`` from homogeneity: ``y^{k/2} / sqrt(1 - xi^2)``, ``xi = x/(2 sqrt y)``.

    ``inf`` where ``y <= 0`` or ``|xi| >= 1`` (no bound of that form).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        xi = x / (2.0 * np.sqrt(y))
        b = np.where((y > 0) & (np.abs(xi) < 1), y ** (k / 2) / np.sqrt(1.0 - xi * xi), np.inf)
    return _scalar(b)
