"""Sparse recovery: orthogonal matching pursuit, smoothed-l0, and an
exhaustive-search oracle for small problems."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

BRUTE_FORCE_MAX_ATOMS = 24
BRUTE_FORCE_MAX_SPARSITY = 4


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SL0Params:
    sigma_min_ratio: float = 1e-4
    sigma_decrease: float = 0.5
    mu: float = 2.0
    inner_iters: int = 3

    def __post_init__(self):
        if not 0 < self.sigma_decrease < 1:
            raise ValueError("sigma_decrease must lie in (0, 1)")
        if self.sigma_min_ratio <= 0 or self.mu <= 0 or self.inner_iters < 1:
            raise ValueError("SL0 parameters must be positive")


@dataclass(frozen=True)
class SolverParams:
    """Shared solver settings.

    ``max_sparsity`` caps OMP's active set (``None`` means M // 2).
    ``residual_tol`` is relative: OMP stops once ``||r|| <= tol * ||y||``.
    """

    max_sparsity: int | None = None
    residual_tol: float = 1e-10
    sl0: SL0Params = field(default_factory=SL0Params)

    def __post_init__(self):
        if self.residual_tol <= 0:
            raise ValueError("residual_tol must be positive")
        if self.max_sparsity is not None and self.max_sparsity < 0:
            raise ValueError("max_sparsity must be non-negative")


@dataclass(frozen=True, eq=False)
class SolveResult:
    coeffs: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    residual_history: tuple = ()

    @property
    def support(self) -> tuple:
        return tuple(int(i) for i in np.flatnonzero(self.coeffs))


def _check(a, y):
    a = np.asarray(a, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if a.ndim != 2 or a.shape[0] != y.size:
        raise ValueError(f"shape mismatch: matrix {a.shape}, measurements {y.shape}")
    return a, y


def omp(a, y, params: SolverParams | None = None) -> SolveResult:
    """Orthogonal matching pursuit.

    Each step adds the column with the largest correlation ``|a_j^T r|``
    (lowest index on ties) and re-fits the active
    set by least squares.  Stops when the relative residual drops below
    ``params.residual_tol`` or the active set reaches ``max_sparsity``;
    ``converged`` reports whether the tolerance was met.
    """
    params = params or SolverParams()
    a, y = _check(a, y)
    m, l = a.shape
    col_norms = np.linalg.norm(a, axis=0)
    if np.any(col_norms == 0):
        raise ValueError("matrix has a zero column")
    k_max = m // 2 if params.max_sparsity is None else params.max_sparsity
    k_max = min(k_max, m, l)

    coeffs = np.zeros(l)
    y_norm = np.linalg.norm(y)
    history = [float(y_norm)]
    if y_norm == 0:
        return SolveResult(coeffs, 0.0, 0, True, tuple(history))
    target = params.residual_tol * y_norm

    support: list[int] = []
    basis = np.zeros((m, k_max))  # orthonormal basis of the active columns
    r_fac = np.zeros((k_max, k_max))
    residual = y.copy()
    converged = False
    while True:
        if history[-1] <= target:
            converged = True
            break
        k = len(support)
        if k >= k_max:
            break
        corr = np.abs(a.T @ residual)
        corr[support] = -1.0
        j = int(np.argmax(corr))
        q_k = basis[:, :k]
        proj = q_k.T @ a[:, j]
        v = a[:, j] - q_k @ proj
        fix = q_k.T @ v  # second Gram-Schmidt pass
        v -= q_k @ fix
        proj += fix
        norm_v = np.linalg.norm(v)
        if norm_v <= 1e-12 * col_norms[j]:
            break  # new column is linearly dependent on the active set
        basis[:, k] = v / norm_v
        r_fac[:k, k] = proj
        r_fac[k, k] = norm_v
        support.append(j)
        residual = residual - basis[:, k] * (basis[:, k] @ residual)
        history.append(float(np.linalg.norm(residual)))
    k = len(support)
    if k:
        coeffs[support] = np.linalg.solve(r_fac[:k, :k], basis[:, :k].T @ y)
    res_norm = float(np.linalg.norm(a @ coeffs - y))
    return SolveResult(coeffs, res_norm, k, converged, tuple(history))


def _projector(a: np.ndarray):
    u, sv, vt = np.linalg.svd(a, full_matrices=False)
    if sv.size == 0 or sv[-1] <= max(a.shape) * np.finfo(float).eps * sv[0]:
        raise SolverError("matrix is row-rank deficient; SL0 projection is undefined")
    return (vt.T / sv) @ u.T


def sl0(a, y, params: SolverParams | None = None) -> SolveResult:
    """Smoothed-l0 recovery (graduated non-convexity with projection).

    Starts from the minimum-norm solution and, for a geometrically
    decreasing sigma, takes ``inner_iters`` steps
    ``z <- z - mu * z * exp(-z^2 / (2 sigma^2))`` each followed by a
    projection back onto ``{z : a z = y}``.
    """
    params = params or SolverParams()
    p = params.sl0
    a, y = _check(a, y)
    if a.shape[0] > a.shape[1]:
        raise ValueError("SL0 needs an underdetermined system (M <= L)")
    pinv = _projector(a)
    z = pinv @ y
    if not np.any(z):
        return SolveResult(z, float(np.linalg.norm(a @ z - y)), 0, True)
    sigma = 2.0 * np.max(np.abs(z))
    sigma_min = p.sigma_min_ratio * sigma
    iterations = 0
    while sigma > sigma_min:
        for _ in range(p.inner_iters):
            z = z - p.mu * z * np.exp(-(z * z) / (2.0 * sigma * sigma))
            z = z - pinv @ (a @ z - y)
            iterations += 1
        sigma *= p.sigma_decrease
    res = float(np.linalg.norm(a @ z - y))
    scale = max(float(np.linalg.norm(y)), 1.0)
    return SolveResult(z, res, iterations, res <= 1e-8 * scale)


def brute_force_trials(l: int, k: int) -> int:
    """Sign-and-support search count 2^k * C(l, k) faced by an exhaustive attacker."""
    return 2 ** k * math.comb(l, k)


def _sci(count: int) -> str:
    if count == 0:
        return "0"
    exp = len(str(count)) - 1
    mant = count / 10 ** exp
    if round(mant, 1) >= 10:
        mant, exp = mant / 10, exp + 1
    return f"{mant:.1f}e{exp}"


def brute_force(a, y, k: int, tol: float = 1e-12) -> SolveResult:
    """Exhaustive least-squares search over every support of size <= k.

    Residuals within ``tol * ||y||`` of the best count as ties; the smaller,
    then lexicographically first, support wins.
    """
    a, y = _check(a, y)
    l = a.shape[1]
    if l > BRUTE_FORCE_MAX_ATOMS or k > BRUTE_FORCE_MAX_SPARSITY:
        raise SolverError(
            f"exhaustive search over L={l}, k={k} needs 2^k*C(L,k) = "
            f"{_sci(brute_force_trials(l, k))} trials (C(L,k) = {_sci(math.comb(l, k))} supports); "
            f"limits are L <= {BRUTE_FORCE_MAX_ATOMS}, k <= {BRUTE_FORCE_MAX_SPARSITY}"
        )
    slack = tol * max(np.linalg.norm(y), 1e-300)
    best_support: tuple = ()
    best_vals = np.zeros(0)
    best_res = float(np.linalg.norm(y))
    trials = 0
    for size in range(1, k + 1):
        for supp in itertools.combinations(range(l), size):
            sub = a[:, supp]
            vals, *_ = np.linalg.lstsq(sub, y, rcond=None)
            res = float(np.linalg.norm(y - sub @ vals))
            trials += 1
            if res < best_res - slack:
                best_support, best_vals, best_res = supp, vals, res
    coeffs = np.zeros(l)
    coeffs[list(best_support)] = best_vals
    return SolveResult(coeffs, float(np.linalg.norm(a @ coeffs - y)), trials, best_res <= slack)
