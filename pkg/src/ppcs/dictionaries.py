"""Sparsifying dictionaries: DCT, periodic Daubechies-10, and MOD-learned."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .signal_io import SignalWindow

KINDS = ("dct", "db10", "learned")


@dataclass(frozen=True, eq=False)
class Dictionary:
    """An N x L synthesis matrix whose columns are the atoms."""

    matrix: np.ndarray
    kind: str
    levels: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dictionary kind {self.kind!r}")
        m = np.array(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError("dictionary matrix must be 2-D")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def atoms(self) -> int:
        return self.matrix.shape[1]

    @property
    def beta(self) -> float:
        """Largest Euclidean row norm (1 for orthonormal bases)."""
        return float(np.max(np.linalg.norm(self.matrix, axis=1)))

    def analyze(self, x) -> np.ndarray:
        """Coefficients ``Psi^T x``; the exact inverse of synthesis for orthonormal kinds."""
        x = np.asarray(getattr(x, "samples", x), dtype=np.float64)
        if x.shape != (self.n,):
            raise ValueError(f"expected a length-{self.n} signal, got shape {x.shape}")
        return self.matrix.T @ x

    def __eq__(self, other):
        if not isinstance(other, Dictionary):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.levels == other.levels
            and self.matrix.shape == other.matrix.shape
            and self.matrix.tobytes() == other.matrix.tobytes()
        )

    __hash__ = None


def make_dct(n: int) -> Dictionary:
    """Orthonormal DCT-II synthesis matrix (column k is the k-th cosine atom)."""
    if n < 1:
        raise ValueError("DCT size must be at least 1")
    i = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[:, 0] = 1.0 / np.sqrt(n)
    return Dictionary(m, "dct")


@lru_cache(maxsize=None)
def daubechies_filter(order: int) -> np.ndarray:
    """Orthonormal Daubechies low-pass filter with ``order`` vanishing moments.

    Built by spectral factorization: the minimum-phase roots of the
    half-band polynomial are combined with ``order`` zeros at z = -1.
    """
    if order < 1:
        raise ValueError("order must be positive")
    if order == 1:
        return np.array([1.0, 1.0]) / np.sqrt(2.0)
    q = [comb(order - 1 + k, k) for k in range(order)]
    zeros = []
    for y in np.roots(q[::-1]):
        # z + 1/z = 2 - 4y; keep the root inside the unit circle
        r = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        zeros.append(r[np.argmin(np.abs(r))])
    h = np.real(np.poly(np.concatenate([-np.ones(order), zeros])))
    h = h * np.sqrt(2.0) / h.sum()
    h.flags.writeable = False
    return h


def _dwt_periodic(x: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    # x: (n, batch); returns (approx, detail), each (n/2, batch)
    n = x.shape[0]
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(lo.size)[None, :]) % n
    gathered = x[idx]  # (n/2, taps, batch)
    return (
        np.einsum("t,itb->ib", lo, gathered),
        np.einsum("t,itb->ib", hi, gathered),
    )


def wavelet_analysis_matrix(n: int, levels: int, order: int = 10) -> np.ndarray:
    """Matrix W with W @ x = [a_J, d_J, ..., d_1] for the periodic DWT."""
    lo = daubechies_filter(order)
    hi = lo[::-1] * (-1.0) ** np.arange(lo.size)
    approx = np.eye(n)
    details = []
    for _ in range(levels):
        approx, d = _dwt_periodic(approx, lo, hi)
        details.append(d)
    return np.vstack([approx] + details[::-1])


def make_db10(n: int, levels: int = 4) -> Dictionary:
    """Orthogonal Daubechies-10 wavelet synthesis matrix with periodic boundaries."""
    taps = daubechies_filter(10).size
    if levels < 1:
        raise ValueError("levels must be at least 1")
    if n % (2 ** levels):
        raise ValueError(f"n={n} is not divisible by 2**levels={2 ** levels}")
    if n < 2 * taps:
        raise ValueError(f"n={n} too small for the {taps}-tap db10 filter (need n >= {2 * taps})")
    return Dictionary(wavelet_analysis_matrix(n, levels).T, "db10", levels)


def synthesize(d: Dictionary, s) -> SignalWindow:
    """The signal ``Psi s``."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (d.atoms,):
        raise ValueError(f"expected {d.atoms} coefficients, got shape {s.shape}")
    return SignalWindow(d.matrix @ s)


def _normalize_columns(d: np.ndarray) -> np.ndarray:
    return d / np.linalg.norm(d, axis=0, keepdims=True)


def _code_all(d: np.ndarray, x: np.ndarray, sparsity: int) -> np.ndarray:
    from .solvers import SolverParams, omp

    params = SolverParams(max_sparsity=sparsity, residual_tol=1e-12)
    return np.column_stack([omp(d, col, params).coeffs for col in x.T])


def _error(x, d, s) -> float:
    return float(np.sum((x - d @ s) ** 2))


def _recode(d, s, x, sparsity):
    """Fresh OMP codes, keeping the old code wherever it fits better."""
    fresh = _code_all(d, x, sparsity)
    old_err = np.sum((x - d @ s) ** 2, axis=0)
    new_err = np.sum((x - d @ fresh) ** 2, axis=0)
    s = s.copy()
    better = new_err < old_err
    s[:, better] = fresh[:, better]
    return s, _error(x, d, s)


def _duplicate_atoms(d, threshold: float) -> np.ndarray:
    g = np.abs(np.triu(d.T @ d, k=1))
    return np.flatnonzero(np.any(g > threshold, axis=0))


def _reseed_atoms(d, atoms, x, approx, norms):
    resid = np.sum((x - approx) ** 2, axis=0)
    worst = np.argsort(-resid, kind="stable")[: len(atoms)]
    d = d.copy()
    for atom, w in zip(atoms, worst):
        if norms[w] > 0:
            d[:, atom] = x[:, w] / norms[w]
    return d


def learn_mod(
    training,
    l: int,
    sparsity: int,
    iters: int,
    seed: int,
    ridge: float = 1e-8,
    duplicate_threshold: float = 0.7,
    return_errors: bool = False,
):
    """Learn an N x l dictionary with the Method of Optimal Directions.

    Each round sparse-codes every training window with OMP and then solves
    the least-squares dictionary update ``X S^T (S S^T + ridge I)^-1``
    followed by column normalization.  A window keeps its previous code when
    the fresh OMP code fits worse, and atoms no code uses are replaced by the
    worst-represented training window.  Atoms whose |correlation| with an
    earlier atom exceeds ``duplicate_threshold`` are reseeded the same way
    when that lowers the error (this frees MOD from the common local minimum
    where two atoms share a mixture of true atoms).  Together these
    make the total representation error non-increasing.

    With ``return_errors`` the per-round errors (index 0 is the error of the
    initial coding) are returned alongside the dictionary.
    """
    x = np.column_stack([np.asarray(getattr(w, "samples", w), dtype=np.float64) for w in training])
    n, count = x.shape
    if l > count:
        raise ValueError(
            f"{l} atoms requested but only {count} training windows; "
            "supply more windows or lower the atom count"
        )
    if sparsity < 1 or sparsity >= l:
        raise ValueError("sparsity must satisfy 1 <= sparsity < atoms")
    norms = np.linalg.norm(x, axis=0)
    if not np.any(norms > 0):
        raise ValueError("training windows are all zero")
    if l > n:
        import warnings

        warnings.warn("overcomplete dictionaries (atoms > N) are experimental", stacklevel=2)

    rng = np.random.default_rng(seed)
    candidates = np.flatnonzero(norms > 0)
    if candidates.size < l:
        raise ValueError(f"only {candidates.size} non-zero training windows for {l} atoms")
    d = _normalize_columns(x[:, rng.choice(candidates, size=l, replace=False)])
    if iters == 0:
        return (Dictionary(d, "learned"), []) if return_errors else Dictionary(d, "learned")

    s = _code_all(d, x, sparsity)
    errors = [_error(x, d, s)]
    for _ in range(iters):
        # dictionary update
        gram = s @ s.T
        gram[np.diag_indices_from(gram)] += ridge
        d_new = np.linalg.solve(gram, s @ x.T).T
        col_norms = np.linalg.norm(d_new, axis=0)
        used = col_norms > 1e-12
        d_new[:, ~used] = d[:, ~used]
        s_new = s.copy()
        s_new[used] *= col_norms[used, None]
        d_new[:, used] /= col_norms[used]
        if _error(x, d_new, s_new) <= errors[-1]:
            d, s = d_new, s_new
        # replace atoms no window uses with the worst-fit windows
        unused = np.flatnonzero(~np.any(s != 0, axis=1))
        if unused.size:
            d = _reseed_atoms(d, unused, x, d @ s, norms)
        s, err = _recode(d, s, x, sparsity)
        # near-duplicate atoms waste capacity; try reseeding them and keep
        # whichever dictionary fits better
        dup = _duplicate_atoms(d, duplicate_threshold)
        if dup.size:
            s_try = s.copy()
            s_try[dup] = 0.0
            d_try = _reseed_atoms(d, dup, x, d @ s, norms)
            s_try, err_try = _recode(d_try, s_try, x, sparsity)
            if err_try < err:
                d, s, err = d_try, s_try, err_try
        errors.append(err)
    result = Dictionary(d, "learned")
    return (result, errors) if return_errors else result
