"""Secret keys: the M x M Gaussian matrix key Q and the L x L bipolar
permutation key P, plus partially-correct estimated keys for attack runs.

Bipolar key layout: column ``j`` of the dense matrix holds ``signs[j] * alpha``
at row ``perm[j]`` and zeros elsewhere, so ``(P s)[perm[j]] = signs[j] * alpha * s[j]``.

Keys should be rotated after some number of recovery queries to limit
known-plaintext exposure; no rotation policy is built in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_CONDITION = 1e8
KEYGEN_ATTEMPTS = 16


class KeyGenerationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BipolarKey:
    alpha: float
    perm: np.ndarray
    signs: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        perm = np.array(self.perm, dtype=np.int64).reshape(-1)
        signs = np.array(self.signs, dtype=np.int8).reshape(-1)
        if not self.alpha > 0 or not math.isfinite(self.alpha):
            raise ValueError("alpha must be a positive finite number")
        if perm.size != signs.size:
            raise ValueError("perm and signs must have the same length")
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValueError("perm is not a bijection on 0..n-1")
        if not np.all(np.abs(signs) == 1):
            raise ValueError("signs must be +1 or -1")
        perm.flags.writeable = False
        signs.flags.writeable = False
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def n(self) -> int:
        return self.perm.size

    def dense(self) -> np.ndarray:
        p = np.zeros((self.n, self.n))
        p[self.perm, np.arange(self.n)] = self.signs * self.alpha
        return p

    def __eq__(self, other):
        if not isinstance(other, BipolarKey):
            return NotImplemented
        return (
            np.float64(self.alpha).tobytes() == np.float64(other.alpha).tobytes()
            and np.array_equal(self.perm, other.perm)
            and np.array_equal(self.signs, other.signs)
            and self.seed == other.seed
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MatrixKey:
    matrix: np.ndarray
    seed: int | None = None
    condition_estimate: float = float("nan")

    def __post_init__(self):
        q = np.array(self.matrix, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("matrix key must be square")
        q.flags.writeable = False
        object.__setattr__(self, "matrix", q)
        if math.isnan(self.condition_estimate):
            object.__setattr__(self, "condition_estimate", float(np.linalg.cond(q)))

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    def __eq__(self, other):
        if not isinstance(other, MatrixKey):
            return NotImplemented
        return self.seed == other.seed and self.matrix.tobytes() == other.matrix.tobytes() \
            and self.matrix.shape == other.matrix.shape

    __hash__ = None


@dataclass(frozen=True, eq=False)
class EstimatedKey:
    """An attacker's guess sharing ``floor(r * L / 100)`` columns with ``base``."""

    base: BipolarKey
    r: float
    matrix: np.ndarray
    seed: int | None = None

    def dense(self) -> np.ndarray:
        return self.matrix


def gen_bipolar(n: int, alpha: float, seed: int) -> BipolarKey:
    if n < 1:
        raise ValueError("key size must be at least 1")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    signs = np.where(rng.integers(0, 2, size=n) == 1, 1, -1)
    return BipolarKey(alpha, perm, signs, seed)


def identity_bipolar(n: int, alpha: float = 1.0) -> BipolarKey:
    """alpha * I; the no-encryption baseline."""
    return BipolarKey(alpha, np.arange(n), np.ones(n, dtype=np.int8))


def gen_matrix_key(m: int, seed: int) -> MatrixKey:
    """Gaussian key with std 1/m.  A draw whose condition number reaches 1e8
    is discarded and the next seed tried (at most 16 attempts)."""
    if m < 1:
        raise ValueError("key size must be at least 1")
    for attempt in range(KEYGEN_ATTEMPTS):
        rng = np.random.default_rng(seed + attempt)
        q = rng.normal(0.0, 1.0 / m, size=(m, m))
        cond = float(np.linalg.cond(q))
        if cond < MAX_CONDITION:
            return MatrixKey(q, seed, cond)
    raise KeyGenerationError(f"no well-conditioned {m}x{m} key after {KEYGEN_ATTEMPTS} attempts")


def identity_matrix_key(m: int) -> MatrixKey:
    return MatrixKey(np.eye(m), None, 1.0)


def apply_bipolar(p: BipolarKey, s, direction: str = "forward") -> np.ndarray:
    """``P s`` (forward) or ``P^-1 s = P^T s / alpha^2`` (inverse), in O(L)."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape[0] != p.n:
        raise ValueError(f"key size {p.n} does not match vector length {s.shape[0]}")
    if direction == "forward":
        out = np.empty_like(s)
        out[p.perm] = (p.signs * p.alpha).reshape((-1,) + (1,) * (s.ndim - 1)) * s
        return out
    if direction == "inverse":
        return (p.signs / p.alpha).reshape((-1,) + (1,) * (s.ndim - 1)) * s[p.perm]
    raise ValueError("direction must be 'forward' or 'inverse'")


def apply_key(key, s) -> np.ndarray:
    """Forward application of a true key or an attacker's estimate."""
    if isinstance(key, BipolarKey):
        return apply_bipolar(key, s)
    return np.asarray(getattr(key, "matrix", key), dtype=np.float64) @ np.asarray(s, dtype=np.float64)


def permute_columns(b, p: BipolarKey) -> np.ndarray:
    """``B @ P`` without materializing P: column j is ``signs[j]*alpha*B[:, perm[j]]``."""
    b = np.asarray(getattr(b, "matrix", b), dtype=np.float64)
    if b.shape[1] != p.n:
        raise ValueError(f"matrix with {b.shape[1]} columns cannot take a size-{p.n} key")
    return b[:, p.perm] * (p.signs * p.alpha)


def make_estimated_key(p: BipolarKey, r: float, seed: int) -> EstimatedKey:
    """Copy ``floor(r*L/100)`` randomly chosen columns of P; every other
    column gets a single +-alpha at a random row."""
    if not 0 <= r <= 100:
        raise ValueError("r must lie in [0, 100]")
    n = p.n
    keep = int(math.floor(r * n / 100 + 1e-9))
    rng = np.random.default_rng(seed)
    cols = rng.permutation(n)
    kept, guessed = cols[:keep], np.sort(cols[keep:])
    e = np.zeros((n, n))
    e[p.perm[kept], kept] = p.signs[kept] * p.alpha
    rows = rng.integers(0, n, size=guessed.size)
    signs = np.where(rng.integers(0, 2, size=guessed.size) == 1, 1.0, -1.0)
    e[rows, guessed] = signs * p.alpha
    return EstimatedKey(p, float(r), e, seed)


def frobenius_distance(a, b) -> float:
    a = np.asarray(getattr(a, "matrix", a) if not isinstance(a, BipolarKey) else a.dense(), dtype=np.float64)
    b = np.asarray(getattr(b, "matrix", b) if not isinstance(b, BipolarKey) else b.dense(), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def keyspace_log2(n: int) -> float:
    """log2 of the number of n x n bipolar permutation matrices, 2^n * n!."""
    return n + math.lgamma(n + 1) / math.log(2)
