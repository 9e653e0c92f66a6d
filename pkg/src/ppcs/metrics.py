"""Reconstruction quality (PRD, PRDN, SNR, quality bands) and moment checks
on matrices that should look like i.i.d. Gaussian noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VERY_GOOD = "very_good"
GOOD = "good"
UNDETERMINED = "undetermined"

# Upper PRD bounds of each band; a boundary value falls into the worse band.
_BANDS = ((2.0, VERY_GOOD), (9.0, GOOD))

MIN_GAUSSIAN_SAMPLES = 10_000


def _pair(x, x_tilde):
    x = np.asarray(getattr(x, "samples", x), dtype=np.float64)
    x_tilde = np.asarray(getattr(x_tilde, "samples", x_tilde), dtype=np.float64)
    if x.shape != x_tilde.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {x_tilde.shape}")
    return x, x_tilde


def prd(x, x_tilde) -> float:
    """Percentage root-mean-square difference."""
    x, x_tilde = _pair(x, x_tilde)
    energy = np.sum(x * x)
    if energy == 0:
        raise ValueError("PRD is undefined for an all-zero original")
    return float(100.0 * np.sqrt(np.sum((x - x_tilde) ** 2) / energy))


def prdn(x, x_tilde) -> float:
    """PRD with the mean of the original removed from the denominator."""
    x, x_tilde = _pair(x, x_tilde)
    centred = np.sum((x - x.mean()) ** 2)
    if centred == 0:
        raise ValueError("PRDN is undefined for a constant original")
    return float(100.0 * np.sqrt(np.sum((x - x_tilde) ** 2) / centred))


def snr(prd_percent: float) -> float:
    """SNR in dB from a PRD in percent: -20 log10(PRD / 100)."""
    if not prd_percent > 0:
        raise ValueError("SNR needs a positive PRD (a perfect reconstruction has infinite SNR)")
    return -20.0 * math.log10(prd_percent / 100.0)


def classify(prd_percent: float) -> str:
    if prd_percent < 0:
        raise ValueError("PRD cannot be negative")
    for bound, band in _BANDS:
        if prd_percent < bound:
            return band
    return UNDETERMINED


@dataclass(frozen=True)
class QualityReport:
    prd: float
    prdn: float
    snr: float
    quality: str

    def csv_row(self, window_id) -> list:
        return [window_id, repr(self.prd), repr(self.prdn), repr(self.snr), self.quality]

    CSV_HEADER = ("window_id", "prd", "prdn", "snr", "band")


def quality(x, x_tilde) -> QualityReport:
    """All three metrics plus the band; SNR is +inf for an exact match."""
    p = prd(x, x_tilde)
    try:
        pn = prdn(x, x_tilde)
    except ValueError:
        pn = float("nan")
    return QualityReport(p, pn, snr(p) if p > 0 else math.inf, classify(p))


@dataclass(frozen=True)
class GaussianityReport:
    count: int
    mean: float
    variance: float
    predicted_std: float
    mean_z: float
    variance_rel_error: float
    degenerate: bool

    def consistent(self, z_max: float = 3.0, var_tol: float = 0.05) -> bool:
        return not self.degenerate and abs(self.mean_z) < z_max and self.variance_rel_error < var_tol


def gaussianity_report(samples, predicted_std: float) -> GaussianityReport:
    """Compare sample moments with a zero-mean Gaussian of ``predicted_std``.

    ``mean_z`` is the sample mean in units of ``predicted_std / sqrt(n)``;
    ``variance_rel_error`` is ``|var / predicted_std^2 - 1|``.
    """
    v = np.asarray(samples, dtype=np.float64).reshape(-1)
    if v.size < MIN_GAUSSIAN_SAMPLES:
        raise ValueError(f"need at least {MIN_GAUSSIAN_SAMPLES} samples, got {v.size}")
    if not predicted_std > 0:
        raise ValueError("predicted_std must be positive")
    mean = float(v.mean())
    var = float(v.var())
    return GaussianityReport(
        count=v.size,
        mean=mean,
        variance=var,
        predicted_std=predicted_std,
        mean_z=mean / (predicted_std / math.sqrt(v.size)),
        variance_rel_error=abs(var / predicted_std ** 2 - 1.0),
        degenerate=var == 0.0,
    )
