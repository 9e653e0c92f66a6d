"""Sensor / cloud / user roles of the outsourced recovery.

The sensor publishes ``A* = Q Phi Psi P`` once per key epoch and one
``y_hat = Q Phi x`` per window.  The cloud solves ``A* z = y_hat`` for a
sparse ``z``, which estimates ``P^-1 s`` (the intermediate cipher).  The user
applies ``P`` and the dictionary to get ``x``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dictionaries import Dictionary
from .keys import BipolarKey, MatrixKey, apply_key, permute_columns
from .sensing import as_matrix, sense
from .signal_io import SignalWindow
from .solvers import SolverParams, omp, sl0

SOLVERS = {"omp": omp, "sl0": sl0}


class RecoveryWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PublicRecoveryPackage:
    a_star: np.ndarray
    y_hat: np.ndarray
    n: int
    solver_hint: str = ""

    def __post_init__(self):
        a = np.array(self.a_star, dtype=np.float64)
        y = np.array(self.y_hat, dtype=np.float64).reshape(-1)
        if a.ndim != 2 or a.shape[0] != y.size:
            raise ValueError(f"a_star {a.shape} does not match y_hat of length {y.size}")
        a.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "a_star", a)
        object.__setattr__(self, "y_hat", y)

    @property
    def m(self) -> int:
        return self.a_star.shape[0]

    @property
    def l(self) -> int:
        return self.a_star.shape[1]

    def __eq__(self, other):
        if not isinstance(other, PublicRecoveryPackage):
            return NotImplemented
        return (
            self.n == other.n
            and self.solver_hint == other.solver_hint
            and self.a_star.shape == other.a_star.shape
            and self.a_star.tobytes() == other.a_star.tobytes()
            and self.y_hat.tobytes() == other.y_hat.tobytes()
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class IntermediateCipher:
    coeffs: np.ndarray
    residual_norm: float
    solver: str
    iterations: int
    converged: bool = True

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64).reshape(-1)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def __eq__(self, other):
        if not isinstance(other, IntermediateCipher):
            return NotImplemented
        return (
            self.coeffs.tobytes() == other.coeffs.tobytes()
            and np.float64(self.residual_norm).tobytes() == np.float64(other.residual_norm).tobytes()
            and self.solver == other.solver
            and self.iterations == other.iterations
            and self.converged == other.converged
        )

    __hash__ = None


def encrypt_operator(phi, psi, q: MatrixKey, p: BipolarKey) -> np.ndarray:
    """``A* = Q Phi Psi P``; computed once per key epoch."""
    phi_m = as_matrix(phi)
    psi_m = as_matrix(psi)
    q_m = as_matrix(q)
    if phi_m.shape[1] != psi_m.shape[0]:
        raise ValueError(f"phi {phi_m.shape} and psi {psi_m.shape} do not compose")
    if q_m.shape != (phi_m.shape[0], phi_m.shape[0]):
        raise ValueError(f"Q must be {phi_m.shape[0]}x{phi_m.shape[0]}, got {q_m.shape}")
    if p.n != psi_m.shape[1]:
        raise ValueError(f"P must be {psi_m.shape[1]}x{psi_m.shape[1]}, got size {p.n}")
    return permute_columns(q_m @ (phi_m @ psi_m), p)


def sensor_encode(x, phi, psi, q: MatrixKey, p: BipolarKey, a_star=None, solver_hint: str = "") -> PublicRecoveryPackage:
    """Compress and encrypt one window.

    Returns the public package holding ``A*`` and ``y_hat = Q Phi x``.  Pass a
    precomputed ``a_star`` to reuse it across windows of one key epoch.
    """
    if a_star is None:
        a_star = encrypt_operator(phi, psi, q, p)
    if getattr(q, "condition_estimate", 1.0) >= 1e8:
        warnings.warn("matrix key is poorly conditioned", RecoveryWarning, stacklevel=2)
    y = sense(phi, x)
    y_hat = as_matrix(q) @ y
    return PublicRecoveryPackage(a_star, y_hat, as_matrix(phi).shape[1], solver_hint)


def _orthonormalize_rows(a: np.ndarray, y: np.ndarray):
    # a = R^T Q^T with Q^T having orthonormal rows; solve in those coordinates.
    # Returns None when a is numerically row-rank deficient.
    qm, r = np.linalg.qr(a.T)
    diag = np.abs(np.diag(r))
    if diag.min() <= max(a.shape) * np.finfo(float).eps * diag.max():
        return None
    return qm.T, np.linalg.solve(r.T, y)


def cloud_recover(pkg: PublicRecoveryPackage, solver: str = "omp", params: SolverParams | None = None,
                  precondition: bool = True) -> IntermediateCipher:
    """Recover the intermediate cipher ``z ~ P^-1 s`` from public data only.

    With ``precondition`` the system is first replaced by an equivalent one
    whose matrix has orthonormal rows (same solution set).  This undoes any
    invertible mixing of the measurements, so a greedy solver makes the same
    choices with or without the matrix key.  A row-rank deficient matrix is
    passed to the solver unchanged.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; choose from {sorted(SOLVERS)}")
    if pkg.m > pkg.l:
        raise ValueError(f"more measurements ({pkg.m}) than atoms ({pkg.l})")
    a, y = pkg.a_star, pkg.y_hat
    if precondition and np.any(y):
        a, y = _orthonormalize_rows(a, y) or (a, y)
    result = SOLVERS[solver](a, y, params)
    residual = float(np.linalg.norm(pkg.a_star @ result.coeffs - pkg.y_hat))
    converged = result.converged
    if not converged:
        warnings.warn(
            f"{solver} stopped before meeting its residual tolerance (residual {residual:.3g})",
            RecoveryWarning,
            stacklevel=2,
        )
    return IntermediateCipher(result.coeffs, residual, solver, result.iterations, converged)


def user_decrypt(ic: IntermediateCipher, p, psi) -> SignalWindow:
    """``x = Psi P z``.  ``p`` may be an estimated key (the attack path)."""
    psi_m = as_matrix(psi)
    if ic.coeffs.size != psi_m.shape[1]:
        raise ValueError(f"cipher has {ic.coeffs.size} coefficients, dictionary has {psi_m.shape[1]} atoms")
    s = apply_key(p, ic.coeffs)
    return SignalWindow(psi_m @ s)


@dataclass(frozen=True)
class AuditReport:
    mean: float
    variance: float
    predicted_std: float
    mean_z: float
    variance_rel_error: float
    offdiag_cov_mean_abs: float
    offdiag_cov_std: float

    def consistent(self) -> bool:
        return (
            abs(self.mean_z) < 3.0
            and self.variance_rel_error < 0.05
            and self.offdiag_cov_mean_abs < 5.0 * self.offdiag_cov_std
        )


def cloud_view_audit(pkg: PublicRecoveryPackage, alpha: float = 1.0, predicted_std: float | None = None) -> AuditReport:
    """Moments of the public matrix against i.i.d. zero-mean entries of std alpha/M.

    Off-diagonal entries of the row covariance ``A* A*^T / L`` should be
    sampling noise with std ``var / sqrt(L)``.
    """
    from .metrics import gaussianity_report

    a = pkg.a_star
    m, l = a.shape
    std = predicted_std if predicted_std is not None else alpha / m
    g = gaussianity_report(a, std)
    cov = a @ a.T / l
    off = cov[~np.eye(m, dtype=bool)]
    return AuditReport(
        mean=g.mean,
        variance=g.variance,
        predicted_std=std,
        mean_z=g.mean_z,
        variance_rel_error=g.variance_rel_error,
        offdiag_cov_mean_abs=float(np.mean(np.abs(off))) if off.size else 0.0,
        offdiag_cov_std=std ** 2 / math.sqrt(l),
    )


def run_pipeline(x, phi, psi, q, p, solver="omp", params=None, decrypt_key=None, precondition=True):
    """Encode, recover and decrypt one window; returns (reconstruction, cipher)."""
    pkg = sensor_encode(x, phi, psi, q, p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RecoveryWarning)
        ic = cloud_recover(pkg, solver, params, precondition)
    return user_decrypt(ic, decrypt_key if decrypt_key is not None else p, psi), ic
