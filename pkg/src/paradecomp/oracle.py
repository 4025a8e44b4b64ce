"""Dense small-matrix certification of the splitting analysis.

Everything here works on explicit symmetric matrices (dimension <= 64).
Operator functions (inverses, square roots, resolvents) go through
``numpy.linalg.eigh``; Chebyshev operator polynomials are built by the
matrix recurrence so they are not just the eigen-spectrum evaluated twice.

Transition operators for a splitting ``A = sum_j A_j`` with weights
``eta_j`` and step ``tau``::

    S_j = (I + tau^2/eta_j A_j)^{-1},  S = sum_j eta_j S_j,
    L   = (I + tau^2 A)^{-1},          B = S^{1/2}.

Slack policy: an inequality ``lhs <= rhs`` passes when
``lhs <= rhs + 1e-10 |rhs| + 1e-13 scale``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .chebyshev import u_table
from .errors import ConfigurationError, OracleValidationError
from .splitting import DenseOperator, Grid, ProblemSpec, Splitting, validate_splitting

REL_SLACK = 1e-10
ABS_SLACK = 1e-13
TAUS = (1e-2, 1e-1, 1.0, 10.0)


def sym_fn(evals, evecs, fn) -> np.ndarray:
    """``Q diag(fn(lambda)) Q^T``."""
    return (evecs * fn(evals)) @ evecs.T


def _sym(m):
    return 0.5 * (m + m.T)


@dataclass
class OracleWorkspace:
    A_parts: list[np.ndarray]
    etas: list[float]
    tau: float
    alphas: list[float]
    A: np.ndarray = field(repr=False)
    S_parts: list[np.ndarray] = field(repr=False)
    S: np.ndarray = field(repr=False)
    I_minus_S: np.ndarray = field(repr=False)
    L: np.ndarray = field(repr=False)
    I_minus_L: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    # eigendecompositions reused by the checks
    eig_A: tuple = field(repr=False)
    eig_parts: list = field(repr=False)
    eig_S: tuple = field(repr=False)
    eig_IS: tuple = field(repr=False)
    seed: int | None = None

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return len(self.A_parts)

    @property
    def nu(self) -> float:
        return min(self.alphas)

    def a_fn(self, fn) -> np.ndarray:
        return sym_fn(*self.eig_A, fn)

    def is_fn(self, fn) -> np.ndarray:
        """Function of ``I - S``."""
        return sym_fn(*self.eig_IS, fn)

    def splitting(self) -> Splitting:
        parts = [DenseOperator(a, alpha) for a, alpha in zip(self.A_parts, self.alphas)]
        return Splitting(parts, list(self.etas))


def build_workspace(A_parts, etas, tau: float, alphas=None, seed=None) -> OracleWorkspace:
    """Derive ``S_j, S, L, B`` from symmetric positive-definite parts.

    ``alphas`` default to the smallest eigenvalue of each part.
    """
    A_parts = [np.atleast_2d(np.asarray(a, dtype=float)) for a in A_parts]
    etas = [float(e) for e in etas]
    if len(A_parts) != len(etas):
        raise ConfigurationError(f"{len(A_parts)} parts but {len(etas)} weights")
    validate_splitting(Splitting([None] * len(etas), etas))
    if tau < 0:
        raise ConfigurationError("tau must be nonnegative")
    dim = A_parts[0].shape[0]
    eig_parts = []
    for j, a in enumerate(A_parts):
        if a.shape != (dim, dim):
            raise OracleValidationError(f"part {j} has shape {a.shape}, expected {(dim, dim)}")
        scale = max(1.0, np.abs(a).max())
        if np.abs(a - a.T).max() > 1e-12 * scale:
            raise OracleValidationError(f"part {j} is not symmetric")
        ev = np.linalg.eigh(_sym(a))
        if ev[0][0] <= 0:
            raise OracleValidationError(f"part {j} is not positive definite (min eig {ev[0][0]:.3g})")
        eig_parts.append(ev)
    A_parts = [_sym(a) for a in A_parts]
    if alphas is None:
        alphas = [float(ev[0][0]) for ev in eig_parts]

    A = _sym(sum(A_parts))
    # a single part is the whole operator: share its decomposition so that I - S == I - L bitwise
    same = len(A_parts) == 1 and np.array_equal(A, _sym(A_parts[0]))
    eig_A = eig_parts[0] if same else np.linalg.eigh(A)
    t2 = tau * tau
    S_parts = []
    I_minus_S = np.zeros((dim, dim))
    for eta, (lam, q) in zip(etas, eig_parts):
        sig = t2 / eta
        S_parts.append(sym_fn(lam, q, lambda x, s=sig: 1.0 / (1.0 + s * x)))
        # I - S_j = sigma A_j S_j, formed without cancellation
        I_minus_S += eta * sym_fn(lam, q, lambda x, s=sig: s * x / (1.0 + s * x))
    S = _sym(sum(eta * s for eta, s in zip(etas, S_parts)))
    I_minus_S = _sym(I_minus_S)
    L = sym_fn(*eig_A, lambda x: 1.0 / (1.0 + t2 * x))
    I_minus_L = _sym(np.zeros((dim, dim)) + sym_fn(*eig_A, lambda x: t2 * x / (1.0 + t2 * x)))
    eig_S = np.linalg.eigh(S)
    B = sym_fn(*eig_S, lambda x: np.sqrt(np.clip(x, 0.0, None)))
    return OracleWorkspace(
        A_parts=A_parts,
        etas=etas,
        tau=float(tau),
        alphas=[float(a) for a in alphas],
        A=A,
        S_parts=S_parts,
        S=S,
        I_minus_S=I_minus_S,
        L=L,
        I_minus_L=I_minus_L,
        B=B,
        eig_A=eig_A,
        eig_parts=eig_parts,
        eig_S=eig_S,
        eig_IS=np.linalg.eigh(I_minus_S),
        seed=seed,
    )


def random_orthogonal(dim: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def random_parts(dim: int, m: int, rng, spectrum=(0.1, 100.0)) -> tuple[list[np.ndarray], list[float]]:
    """``m`` non-commuting SPD parts: random orthogonal basis, log-uniform spectrum."""
    lo, hi = np.log(spectrum[0]), np.log(spectrum[1])
    parts, alphas = [], []
    for _ in range(m):
        q = random_orthogonal(dim, rng)
        lam = np.exp(rng.uniform(lo, hi, dim))
        parts.append(_sym((q * lam) @ q.T))
        alphas.append(float(lam.min()))
    return parts, alphas


def random_weights(m: int, rng) -> list[float]:
    if m == 1:
        return [1.0]
    w = rng.uniform(0.2, 1.0, m)
    w /= w.sum()
    w[-1] = 1.0 - math.fsum(w[:-1])
    return [float(x) for x in w]


def random_workspace(seed: int, tau: float | None = None, dim: int | None = None, m: int | None = None):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 17)) if dim is None else dim
    m = int(rng.integers(1, 5)) if m is None else m
    tau = TAUS[seed % len(TAUS)] if tau is None else tau
    parts, alphas = random_parts(dim, m, rng)
    return build_workspace(parts, random_weights(m, rng), tau, alphas, seed=seed)


@dataclass
class BoundConstants:
    a_parts: list[float]
    c0: float
    c1: float
    c2: float
    c3: float
    nu: float
    lipschitz_a: float
    tau: float

    @property
    def c(self) -> float:
        return self.lipschitz_a / math.sqrt(self.nu)

    @property
    def gamma0(self) -> float:
        return 1.0 / math.sqrt(self.nu) + self.c * self.tau**2

    @property
    def gamma1(self) -> float:
        return 1.0 + self.c * self.tau


def bound_constants(w: OracleWorkspace, lipschitz_a: float = 0.0) -> BoundConstants:
    a_inv = w.a_fn(lambda x: 1.0 / x)
    a_parts = [float(np.linalg.norm(aj @ a_inv, 2)) for aj in w.A_parts]
    etas = np.asarray(w.etas)
    a = np.asarray(a_parts)
    c0 = float(np.sum(etas**-0.5 * a))
    c1 = float(np.sum(etas**-1.5 * (a / etas + 1.0)))
    return BoundConstants(
        a_parts=a_parts,
        c0=c0,
        c1=c1,
        c2=w.m + c0,
        c3=etas[0] ** -0.5 + w.m + c0,
        nu=w.nu,
        lipschitz_a=float(lipschitz_a),
        tau=w.tau,
    )


# ---------------------------------------------------------------------------
# check records


@dataclass
class CheckRecord:
    name: str
    seed: int | None
    margin: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def as_json(self) -> dict:
        out = {"name": self.name, "seed": self.seed, "margin": self.margin, "pass": self.passed}
        out.update(self.detail)
        return out


class _Tally:
    """Worst relative margin over many ``lhs <= rhs`` instances."""

    def __init__(self):
        self.margin = math.inf
        self.passed = True
        self.count = 0

    def add(self, lhs, rhs, scale=None):
        lhs, rhs = float(lhs), float(rhs)
        scale = max(abs(lhs), abs(rhs)) if scale is None else scale
        allowed = rhs + REL_SLACK * abs(rhs) + ABS_SLACK * scale
        denom = max(abs(allowed), 1e-300)
        self.margin = min(self.margin, (allowed - lhs) / denom)
        self.passed &= lhs <= allowed
        self.count += 1

    def record(self, name, seed, **detail) -> CheckRecord:
        detail.setdefault("count", self.count)
        return CheckRecord(name, seed, self.margin, bool(self.passed), detail)


def check_workspace(w: OracleWorkspace) -> CheckRecord:
    """``B^2 = S`` and symmetry of the derived operators."""
    s_norm = max(np.linalg.norm(w.S), 1e-300)
    resid = np.linalg.norm(w.B @ w.B - w.S) / s_norm
    asym = max(np.abs(m - m.T).max() for m in (w.S, w.L, w.B))
    t = _Tally()
    t.add(resid, 1e-11, scale=0.0)
    t.add(asym, 1e-12, scale=0.0)
    return t.record("workspace", w.seed, sqrt_residual=float(resid))


def identity_sides(w: OracleWorkspace, printed: bool = False) -> tuple[np.ndarray, np.ndarray, float]:
    """Both sides of ``S - L = tau^2 sum_j eta_j (I - S_j)(eta_j^-1 A_j A^-1 - I) A L``.

    The left side is formed as ``(I - L) - (I - S)`` from the cancellation-free
    pieces ``tau^2 A L`` and ``sum_j eta_j sigma_j A_j S_j``, so it keeps full
    relative accuracy when ``S - L`` is tiny. The third value is the size of
    the largest single term of the sum. ``printed=True`` swaps the leading ``eta_j``
    for ``eta_j^-1``; that variant only holds for a single part and is kept
    to demonstrate the difference.
    """
    dim = w.dim
    t2 = w.tau**2
    rhs = np.zeros((dim, dim))
    biggest = 0.0
    for eta, aj, (lam, q) in zip(w.etas, w.A_parts, w.eig_parts):
        sig = t2 / eta
        i_minus_sj = sym_fn(lam, q, lambda x: sig * x / (1.0 + sig * x))
        # (eta^-1 A_j A^-1 - I) A L == (eta^-1 A_j - A) L
        term = (1.0 / eta if printed else eta) * i_minus_sj @ ((aj / eta - w.A) @ w.L)
        biggest = max(biggest, float(np.linalg.norm(term)))
        rhs += term
    return w.I_minus_L - w.I_minus_S, t2 * rhs, t2 * biggest


def check_difference_identity(w: OracleWorkspace, printed: bool = False) -> CheckRecord:
    """Relative residual ``|lhs - rhs|_F / max(|lhs|_F, largest term)`` must not exceed 1e-10.

    No absolute slack: with a single part both sides are exactly zero.
    """
    lhs, rhs, biggest = identity_sides(w, printed)
    resid = float(np.linalg.norm(lhs - rhs))
    scale = max(float(np.linalg.norm(lhs)), biggest)
    allowed = REL_SLACK * scale
    margin = (allowed - resid) / allowed if allowed > 0 else (1.0 if resid == 0 else -math.inf)
    return CheckRecord(
        "difference_identity_printed" if printed else "difference_identity",
        w.seed,
        margin,
        resid <= allowed,
        {
            "residual": resid,
            "relative_residual": resid / scale if scale > 0 else 0.0,
            "norm_S_minus_L": float(np.linalg.norm(lhs)),
        },
    )


def resolvent_sides(w: OracleWorkspace, f: np.ndarray, u: np.ndarray) -> dict[str, tuple[float, float]]:
    """Left/right sides of the four ``(I - S)^{-1/2}`` inequalities for probes ``f`` and ``u``.

    ``range``:      |(I-S)^{-1/2} A L f|   <= (m |A^{1/2} L f| + c0 |A^{1/2} L^{1/2} f|) / tau
    ``difference``: |(I-S)^{-1/2} (S-L) f| <= tau^2 c1 |A L f|
    ``smoothing``:  |(I-S)^{-1/2} L A u|   <= c2 |A^{1/2} u| / tau
    ``inverse``:    |(I-S)^{-1/2} L f|     <= c2 |A^{-1/2} f| / tau
    """
    k = bound_constants(w)
    tau = w.tau
    n = np.linalg.norm
    is_m = w.is_fn(lambda x: 1.0 / np.sqrt(x))
    a_half = w.a_fn(np.sqrt)
    a_mhalf = w.a_fn(lambda x: 1.0 / np.sqrt(x))
    l_half = w.a_fn(lambda x: 1.0 / np.sqrt(1.0 + tau * tau * x))
    lf = w.L @ f
    alf = w.A @ lf
    return {
        "range": (n(is_m @ alf), (w.m * n(a_half @ lf) + k.c0 * n(a_half @ (l_half @ f))) / tau),
        "difference": (n(is_m @ ((w.S - w.L) @ f)), tau**2 * k.c1 * n(alf)),
        "smoothing": (n(is_m @ (w.L @ (w.A @ u))), k.c2 * n(a_half @ u) / tau),
        "inverse": (n(is_m @ lf), k.c2 * n(a_mhalf @ f) / tau),
    }


def check_resolvent_bounds(w: OracleWorkspace, probes: int = 20, rng=None) -> list[CheckRecord]:
    if w.tau <= 0:
        raise ConfigurationError("resolvent bounds need tau > 0")
    rng = np.random.default_rng(w.seed if rng is None else rng)
    tallies = {}
    for _ in range(probes):
        f = rng.standard_normal(w.dim)
        u = rng.standard_normal(w.dim)
        for name, (lhs, rhs) in resolvent_sides(w, f, u).items():
            tallies.setdefault(name, _Tally()).add(lhs, rhs)
    return [t.record(f"resolvent_{name}", w.seed) for name, t in tallies.items()]


def operator_u_table(B: np.ndarray, k_max: int) -> np.ndarray:
    """``U_0(B) .. U_{k_max}(B)`` by the matrix recurrence ``U_{k+1} = 2 B U_k - U_{k-1}``."""
    dim = B.shape[0]
    out = np.empty((k_max + 1, dim, dim))
    out[0] = np.eye(dim)
    if k_max >= 1:
        out[1] = 2.0 * B
    for k in range(1, k_max):
        out[k + 1] = 2.0 * B @ out[k] - out[k - 1]
    return out


def polynomial_sides(w: OracleWorkspace, k_max: int) -> dict[str, tuple[np.ndarray, float]]:
    """Norms of the four Chebyshev operator polynomials for ``k = 0..k_max`` and their bounds."""
    B = w.B
    U = operator_u_table(B, k_max)
    U_prev = np.concatenate([np.zeros((1,) + B.shape), U[:-1]])
    root = w.is_fn(np.sqrt)  # (I - B^2)^{1/2}
    norm2 = lambda stack: np.linalg.norm(stack, ord=2, axis=(1, 2))
    return {
        "BU": (norm2(B @ U), 1.0 / (w.tau * math.sqrt(w.nu))),
        "U_root": (norm2(U @ root), 1.0),
        "U_minus_BU": (norm2(U - B @ U_prev), 1.0),
        "BU_minus_U": (norm2(B @ U - U_prev), 1.0),
    }


def check_polynomial_bounds(w: OracleWorkspace, k_max: int = 64) -> list[CheckRecord]:
    """Operator Chebyshev bounds for ``k <= k_max`` plus the spectral inclusion of ``B``."""
    records = []
    for name, (lhs, rhs) in polynomial_sides(w, k_max).items():
        t = _Tally()
        for value in lhs:
            t.add(value, rhs)
        records.append(t.record(f"polynomial_{name}", w.seed, k_max=k_max))
    evals_b = np.sqrt(np.clip(w.eig_S[0], 0.0, None))
    upper = (1.0 + w.tau**2 * w.nu) ** -0.5
    t = _Tally()
    t.add(evals_b.max(), upper)
    t.add(0.0, evals_b.min(), scale=1.0)
    records.append(t.record("spectrum_B", w.seed, upper=upper))
    return records


def check_order_inequalities(w: OracleWorkspace, probes: int = 20, rng=None) -> list[CheckRecord]:
    """Operator-order facts for the parts and the transition operators.

    * ``|A_j^{1/2} u| <= |A^{1/2} u|``
    * ``(A^{-1} f, f) <= (A_j^{-1} f, f)`` (inverse monotonicity of ``A_j <= A``)
    * ``((I-S)^{-1} f, f) <= eta_j^{-1} ((I-S_j)^{-1} f, f)``
    * ``Sp(S_j) in (0, (1 + tau^2 alpha_j / eta_j)^{-1}]`` and ``Sp(S) in (0, (1 + tau^2 nu)^{-1}]``
    """
    rng = np.random.default_rng(w.seed if rng is None else rng)
    a_half = w.a_fn(np.sqrt)
    a_inv = w.a_fn(lambda x: 1.0 / x)
    parts_half = [sym_fn(*ev, np.sqrt) for ev in w.eig_parts]
    parts_inv = [sym_fn(*ev, lambda x: 1.0 / x) for ev in w.eig_parts]
    is_inv = w.is_fn(lambda x: 1.0 / x) if w.tau > 0 else None
    t2 = w.tau**2
    roots, inverse, resolvent = _Tally(), _Tally(), _Tally()
    for _ in range(probes):
        u = rng.standard_normal(w.dim)
        for j in range(w.m):
            roots.add(np.linalg.norm(parts_half[j] @ u), np.linalg.norm(a_half @ u))
            inverse.add(u @ a_inv @ u, u @ parts_inv[j] @ u)
            if is_inv is not None:
                eta = w.etas[j]
                sig = t2 / eta
                isj_inv = sym_fn(*w.eig_parts[j], lambda x: (1.0 + sig * x) / (sig * x))
                resolvent.add(u @ is_inv @ u, (u @ isj_inv @ u) / eta)
    spec = _Tally()
    for eta, alpha, sj in zip(w.etas, w.alphas, w.S_parts):
        ev = np.linalg.eigvalsh(sj)
        spec.add(ev.max(), 1.0 / (1.0 + t2 * alpha / eta), scale=1.0)
        spec.add(0.0, ev.min(), scale=1.0)
    ev = w.eig_S[0]
    spec.add(ev.max(), 1.0 / (1.0 + t2 * w.nu), scale=1.0)
    spec.add(0.0, ev.min(), scale=1.0)
    out = [
        roots.record("order_root", w.seed),
        inverse.record("order_inverse", w.seed),
        spec.record("spectrum_S", w.seed),
    ]
    if is_inv is not None:
        out.append(resolvent.record("order_resolvent", w.seed))
    return out


# ---------------------------------------------------------------------------
# error recursion and its Chebyshev representation


def forward_recursion(S: np.ndarray, z0, z1, residuals: Sequence[np.ndarray]) -> list[np.ndarray]:
    """``z_{k+1} = 2 S z_k - S z_{k-1} + r_k`` for ``k = 1..len(residuals)``.

    ``residuals[i]`` is ``r_{i+1}``. Returns ``[z_0, z_1, ..., z_{n}]``.
    """
    z = [np.asarray(z0, dtype=float), np.asarray(z1, dtype=float)]
    for r in residuals:
        z.append(2.0 * S @ z[-1] - S @ z[-2] + r)
    return z


def propagators(w: OracleWorkspace, k_max: int) -> np.ndarray:
    """``R_k = B^k U_k(B)`` for ``k = -1..k_max`` (index shifted by one) via eigen-spectra."""
    lam, q = w.eig_S
    b = np.sqrt(np.clip(lam, 0.0, None))
    u = u_table(k_max, b)
    powers = b[None, :] ** np.arange(k_max + 1)[:, None]
    vals = np.vstack([np.zeros((1, b.size)), powers * u])
    return np.einsum("ij,kj,lj->kil", q, vals, q)


def chebyshev_representation(w: OracleWorkspace, z0, z1, residuals) -> list[np.ndarray]:
    """``z_{k+1} = R_k z_1 - B^2 R_{k-1} z_0 + sum_{i=1}^k R_{k-i} r_i``, ``R_k = B^k U_k(B)``."""
    n = len(residuals)
    R = propagators(w, n)  # R[k + 1] = R_k
    S = w.S
    out = [np.asarray(z0, dtype=float), np.asarray(z1, dtype=float)]
    for k in range(1, n + 1):
        z = R[k + 1] @ z1 - S @ (R[k] @ z0)
        for i in range(1, k + 1):
            z = z + R[k - i + 1] @ residuals[i - 1]
        out.append(z)
    return out


def two_variable_representation(w: OracleWorkspace, z0, z1, residuals) -> list[np.ndarray]:
    """Same trajectory through ``Ut_k(2S, S)`` built by its matrix recurrence."""
    n = len(residuals)
    S = w.S
    dim = w.dim
    ut = [np.eye(dim), 2.0 * S]
    for _ in range(1, n):
        ut.append(2.0 * S @ ut[-1] - S @ ut[-2])
    out = [np.asarray(z0, dtype=float), np.asarray(z1, dtype=float)]
    for k in range(1, n + 1):
        z = ut[k] @ z1 - S @ (ut[k - 1] @ z0)
        for i in range(1, k + 1):
            z = z + ut[k - i] @ residuals[i - 1]
        out.append(z)
    return out


def representation_residual(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> tuple[float, int]:
    """Relative max deviation between two trajectories and the first step where it peaks."""
    scale = max(max(np.linalg.norm(x) for x in a), 1e-300)
    diffs = [np.linalg.norm(x - y) / scale for x, y in zip(a, b)]
    worst = int(np.argmax(diffs))
    return float(diffs[worst]), worst


@dataclass
class MatrixProblem:
    """Manufactured dense problem ``u'' + A u + M(u) = f`` with known ``u``."""

    w: OracleWorkspace
    u: Callable[[float], np.ndarray]
    u_tt: Callable[[float], np.ndarray]
    nonlinearity: Callable[[np.ndarray], np.ndarray]
    lipschitz_a: float
    u_t: Callable[[float], np.ndarray] | None = None

    def forcing(self, t):
        u = self.u(t)
        return self.u_tt(t) + self.w.A @ u + self.nonlinearity(u)

    def f_tilde(self, t):
        return self.forcing(t) - self.nonlinearity(self.u(t))

    def spec(self) -> ProblemSpec:
        phi1 = self.u_t(0.0) if self.u_t is not None else np.zeros(self.w.dim)
        return ProblemSpec(self.u(0.0), phi1, self.forcing, self.nonlinearity, self.lipschitz_a)


def manufactured_matrix_problem(w: OracleWorkspace, rng=None, lipschitz_a: float = 0.5) -> MatrixProblem:
    """``u(t) = p cos t + q sin 2t + r t^2`` with random ``p, q, r``; ``M(u) = a sin(u)``."""
    rng = np.random.default_rng(rng)
    p, q, r = (rng.standard_normal(w.dim) for _ in range(3))
    a = float(lipschitz_a)
    return MatrixProblem(
        w=w,
        u=lambda t: p * math.cos(t) + q * math.sin(2 * t) + r * t * t,
        u_t=lambda t: -p * math.sin(t) + 2 * q * math.cos(2 * t) + 2 * r * t,
        u_tt=lambda t: -p * math.cos(t) - 4 * q * math.sin(2 * t) + 2 * r,
        nonlinearity=lambda v: a * np.sin(v),
        lipschitz_a=a,
    )


def run_matrix_problem(prob: MatrixProblem, n_steps: int):
    """Scheme trajectory ``v_0..v_n`` on the dense splitting of ``prob.w``."""
    from .scheme import SchemeConfig, run

    cfg = SchemeConfig(prob.w.tau, n_steps)
    return run(prob.w.splitting(), prob.spec(), cfg).layers


def _remainder_integral(u_tt, t_lo, t_mid, t_hi, nodes=20):
    """``int_{t_mid}^{t_hi} (t_hi - t)[u''(t) - u''(t_mid)] dt + int_{t_lo}^{t_mid} (t - t_lo)[...] dt``."""
    x, wts = np.polynomial.legendre.leggauss(nodes)
    ref = u_tt(t_mid)
    total = 0.0
    for a, b, weight in ((t_mid, t_hi, lambda t: t_hi - t), (t_lo, t_mid, lambda t: t - t_lo)):
        half = 0.5 * (b - a)
        for xi, wi in zip(x, wts):
            t = a + half * (xi + 1.0)
            total = total + wi * half * weight(t) * (u_tt(t) - ref)
    return total


@dataclass
class ErrorLedger:
    """Residual pieces of the error recursion, indexed by step ``k = 1..n-1``."""

    z: list[np.ndarray]
    r0: list[np.ndarray]
    r1: list[np.ndarray]
    r2: list[np.ndarray]
    r3: list[np.ndarray]
    r4: list[np.ndarray]
    psi: list[np.ndarray]
    g: list[np.ndarray]
    r: list[np.ndarray]

    def reassembled(self, w: OracleWorkspace) -> list[np.ndarray]:
        t2 = w.tau**2
        return [
            a + b - w.L @ (t2 * c + d) + e
            for a, b, c, d, e in zip(self.r0, self.r1, self.r2, self.r3, self.r4)
        ]


def error_ledger(prob: MatrixProblem, v: Sequence[np.ndarray]) -> ErrorLedger:
    """Split the one-step error residual of trajectory ``v`` into its named pieces.

    ``r_k = (S-L)u_k + (S-L)(u_k - u_{k-1}) - L(tau^2 A(u_{k+1}-u_k) + r3_k)
    + tau^2 (S_1 (f_k - M(v_k)) - L (f_k - M(u_k)))``.
    """
    w = prob.w
    tau = w.tau
    n = len(v) - 1
    ts = tau * np.arange(n + 1)
    u = [prob.u(t) for t in ts]
    z = [vk - uk for vk, uk in zip(v, u)]
    led = ErrorLedger(z, [], [], [], [], [], [], [], [])
    d = w.S - w.L
    for k in range(1, n):
        f_k = prob.forcing(ts[k])
        psi = w.S_parts[0] @ (f_k - prob.nonlinearity(v[k]))
        ft = f_k - prob.nonlinearity(u[k])
        r3 = _remainder_integral(prob.u_tt, ts[k - 1], ts[k], ts[k + 1])
        r2 = w.A @ (u[k + 1] - u[k])
        led.r0.append(d @ u[k])
        led.r1.append(d @ (u[k] - u[k - 1]))
        led.r2.append(r2)
        led.r3.append(r3)
        led.r4.append(tau**2 * (psi - w.L @ ft))
        led.psi.append(psi)
        led.g.append(ft + r2 + r3 / tau**2)
    led.r = led.reassembled(w)
    return led


def check_error_representation(prob: MatrixProblem, n_steps: int = 50, v=None) -> list[CheckRecord]:
    """Scheme errors obey the recursion, and the Chebyshev closed form reproduces it.

    Tolerances: recursion residual and representation mismatch both
    ``<= 1e-10`` relative to the largest error norm.
    """
    w = prob.w
    v = run_matrix_problem(prob, n_steps) if v is None else v
    led = error_ledger(prob, v)
    direct = forward_recursion(w.S, led.z[0], led.z[1], led.r)
    rec_res, rec_at = representation_residual(led.z, direct)
    cheb = chebyshev_representation(w, led.z[0], led.z[1], led.r)
    rep_res, rep_at = representation_residual(direct, cheb)
    two = two_variable_representation(w, led.z[0], led.z[1], led.r)
    two_res, two_at = representation_residual(direct, two)
    out = []
    for name, res, at in (
        ("error_recursion", rec_res, rec_at),
        ("error_representation", rep_res, rep_at),
        ("error_representation_two_variable", two_res, two_at),
    ):
        allowed = REL_SLACK
        out.append(
            CheckRecord(
                name, w.seed, (allowed - res) / allowed, res <= allowed,
                {"residual": res, "worst_step": at, "n_steps": n_steps},
            )
        )
    return out


# ---------------------------------------------------------------------------
# a priori bound


def _trapezoid(values, dt):
    values = np.asarray(values, dtype=float)
    return float(dt * (values.sum() - 0.5 * (values[0] + values[-1])))


def theta_k(
    prob: MatrixProblem, k: int, consts: BoundConstants | None = None, sub: int = 16
) -> float:
    """Regularity functional bounding the accumulated error up to step ``k + 1``.

    ``tau^2 sum_i [c1 |A u_i| + c3 |f~_i|]
    + tau sum_i [c1 J_i(t_{i-1}, A^{1/2}u) + c2 J_i(t_{i+1}, A^{1/2}u)]
    + c2 sum_i int_{t_{i-1}}^{t_{i+1}} [J_i(t, A^{1/2}u) + J_i(t, A^{-1/2} f~)] dt``

    with ``J_i(t, g) = |g(t_i) - g(t)|``, ``f~ = f - M(u)``, ``i = 1..k``.
    The integrals use the trapezoidal rule with ``sub`` panels per step.
    """
    w = prob.w
    consts = bound_constants(w, prob.lipschitz_a) if consts is None else consts
    tau = w.tau
    a_half = w.a_fn(np.sqrt)
    a_mhalf = w.a_fn(lambda x: 1.0 / np.sqrt(x))
    n = np.linalg.norm
    c1, c2, c3 = consts.c1, consts.c2, consts.c3
    total = 0.0
    fine_dt = tau / sub
    for i in range(1, k + 1):
        ti = i * tau
        ui = prob.u(ti)
        fti = prob.f_tilde(ti)
        total += tau**2 * (c1 * n(w.A @ ui) + c3 * n(fti))
        hu = a_half @ ui
        total += tau * (
            c1 * n(hu - a_half @ prob.u(ti - tau)) + c2 * n(hu - a_half @ prob.u(ti + tau))
        )
        hf = a_mhalf @ fti
        ts = ti - tau + fine_dt * np.arange(2 * sub + 1)
        vals = [n(hu - a_half @ prob.u(t)) + n(hf - a_mhalf @ prob.f_tilde(t)) for t in ts]
        total += c2 * _trapezoid(vals, fine_dt)
    return total


def error_bound(prob: MatrixProblem, z: Sequence[np.ndarray], k: int, consts=None, theta=None) -> float:
    """Right-hand side ``exp(c t_{k-1}) (gamma0 |dz0/tau| + gamma1 |z0| + Theta_k)`` for ``|z_{k+1}|``."""
    consts = bound_constants(prob.w, prob.lipschitz_a) if consts is None else consts
    tau = prob.w.tau
    theta = theta_k(prob, k, consts) if theta is None else theta
    dz0 = np.linalg.norm(z[1] - z[0]) / tau
    return math.exp(consts.c * (k - 1) * tau) * (
        consts.gamma0 * dz0 + consts.gamma1 * np.linalg.norm(z[0]) + theta
    )


def check_error_bound(prob: MatrixProblem, n_steps: int = 21) -> CheckRecord:
    """Measured ``|z_{k+1}|`` never exceeds the a priori bound for ``k = 1..n_steps-1``."""
    v = run_matrix_problem(prob, n_steps)
    z = [vk - prob.u(k * prob.w.tau) for k, vk in enumerate(v)]
    consts = bound_constants(prob.w, prob.lipschitz_a)
    t = _Tally()
    ratio = 0.0
    for k in range(1, n_steps):
        lhs = float(np.linalg.norm(z[k + 1]))
        rhs = error_bound(prob, z, k, consts)
        t.add(lhs, rhs)
        ratio = max(ratio, lhs / rhs)
    return t.record("error_bound", prob.w.seed, worst_ratio=ratio, n_steps=n_steps)


# ---------------------------------------------------------------------------
# suite


def workspace_checks(w: OracleWorkspace, k_max: int = 64, probes: int = 20) -> list[CheckRecord]:
    out = [check_workspace(w), check_difference_identity(w)]
    out += check_resolvent_bounds(w, probes)
    out += check_polynomial_bounds(w, k_max)
    out += check_order_inequalities(w, probes)
    return out


def problem_checks(seed: int, dim: int = 4, n_steps: int = 50, tau: float = 0.1) -> list[CheckRecord]:
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 4))
    parts, alphas = random_parts(dim, m, rng, spectrum=(0.5, 20.0))
    w = build_workspace(parts, random_weights(m, rng), tau, alphas, seed=seed)
    prob = manufactured_matrix_problem(w, rng)
    out = check_error_representation(prob, n_steps)
    out.append(check_error_bound(prob, 21))
    return out


def suite_failure(name: str, seed, exc: Exception) -> CheckRecord:
    detail = {"error": str(exc)}
    idx = getattr(exc, "index", None)
    if idx is not None:
        detail["index"] = idx
    return CheckRecord(name, seed, -math.inf, False, detail)


def run_suite(
    count: int = 200,
    seed: int = 0,
    threads: int = 1,
    etas=None,
    k_max: int = 64,
    problems: int = 10,
) -> list[CheckRecord]:
    """Randomised certification over ``count`` workspaces plus ``problems`` dense runs.

    Workspace ``i`` uses seed ``seed + i``, a dimension in 2..16 and a step
    from ``TAUS`` chosen by seed. ``etas`` forces the weights (and hence the
    number of parts) of every workspace; inadmissible weights surface as a
    failed ``splitting`` record rather than an exception.
    """
    from concurrent.futures import ThreadPoolExecutor

    def one(i):
        s = seed + i
        try:
            if etas is None:
                w = random_workspace(s)
            else:
                validate_splitting(Splitting([None] * len(etas), list(etas)))
                rng = np.random.default_rng(s)
                parts, alphas = random_parts(int(rng.integers(2, 17)), len(etas), rng)
                w = build_workspace(parts, etas, TAUS[s % len(TAUS)], alphas, seed=s)
        except (ConfigurationError, OracleValidationError) as exc:
            return [suite_failure("splitting", s, exc)]
        return workspace_checks(w, k_max)

    def prob(i):
        return problem_checks(seed + 100_000 + i)

    jobs = [(one, i) for i in range(count)]
    if etas is None:
        jobs += [(prob, i) for i in range(problems)]
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(lambda job: job[0](job[1]), jobs))
    else:
        results = [fn(i) for fn, i in jobs]
    return [rec for batch in results for rec in batch]
