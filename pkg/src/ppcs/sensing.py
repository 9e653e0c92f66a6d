"""Measurement matrices, compression, and coherence / isometry diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    matrix: np.ndarray
    kind: str
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "dbbd"):
            raise ValueError(f"unknown measurement matrix kind {self.kind!r}")
        m = np.array(self.matrix, dtype=np.float64)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self) -> tuple:
        return self.matrix.shape

    def __eq__(self, other):
        if not isinstance(other, MeasurementMatrix):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.seed == other.seed
            and self.matrix.shape == other.matrix.shape
            and self.matrix.tobytes() == other.matrix.tobytes()
        )

    __hash__ = None


def as_matrix(value) -> np.ndarray:
    return np.asarray(getattr(value, "matrix", value), dtype=np.float64)


def make_gaussian_phi(m: int, n: int, seed: int, allow_square: bool = False) -> MeasurementMatrix:
    """i.i.d. N(0, (1/m)^2) entries: the standard deviation is 1/m."""
    if m <= 0 or n <= 0:
        raise ValueError("dimensions must be positive")
    if m >= n and not allow_square:
        raise ValueError(f"m={m} >= n={n} gives no compression (pass allow_square to override)")
    rng = np.random.default_rng(seed)
    return MeasurementMatrix(rng.normal(0.0, 1.0 / m, size=(m, n)), "gaussian", seed)


def make_dbbd_phi(m: int, n: int) -> MeasurementMatrix:
    """Deterministic binary block-diagonal matrix: row i sums samples
    ``i*n/m .. (i+1)*n/m - 1``."""
    if m <= 0 or n <= 0:
        raise ValueError("dimensions must be positive")
    if n % m:
        raise ValueError(f"DBBD needs m to divide n (n={n}, m={m})")
    return MeasurementMatrix(np.kron(np.eye(m), np.ones((1, n // m))), "dbbd")


def sense(phi, x) -> np.ndarray:
    """Compress a window: ``y = phi @ x``."""
    a = as_matrix(phi)
    x = np.asarray(getattr(x, "samples", x), dtype=np.float64)
    if x.shape != (a.shape[1],):
        raise ValueError(f"signal length {x.shape} does not match matrix {a.shape}")
    return a @ x


def mutual_coherence(phi, psi) -> float:
    """sqrt(N) times the largest normalized |<phi_i, psi_j>| over rows of
    phi and columns of psi.  Lies in [1, sqrt(N)] when psi is a basis."""
    a = as_matrix(phi)
    b = as_matrix(psi)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions disagree: {a.shape} vs {b.shape}")
    rn = np.linalg.norm(a, axis=1)
    cn = np.linalg.norm(b, axis=0)
    if np.any(rn == 0) or np.any(cn == 0):
        raise ValueError("coherence undefined for a zero row of phi or zero column of psi")
    g = np.abs(a @ b) / np.outer(rn, cn)
    return float(np.sqrt(a.shape[1]) * g.max())


def norm_spread(a, samples) -> tuple[float, float]:
    """Sampled min and max of ``||A s||^2`` over unit-norm sparse vectors.

    An empirical look at the restricted isometry behaviour; the RIP
    constant itself is not computed.
    """
    a = as_matrix(a)
    samples = [np.asarray(s, dtype=np.float64) for s in samples]
    if not samples:
        raise ValueError("need at least one sample vector")
    vals = []
    for s in samples:
        if abs(np.linalg.norm(s) - 1.0) > 1e-9:
            raise ValueError("sample vectors must have unit norm")
        vals.append(float(np.sum((a @ s) ** 2)))
    return min(vals), max(vals)


def random_sparse_unit_vectors(l: int, k: int, count: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        s = np.zeros(l)
        s[rng.choice(l, size=k, replace=False)] = rng.standard_normal(k)
        out.append(s / np.linalg.norm(s))
    return out
