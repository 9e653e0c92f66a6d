"""ECG ingestion and windowing.

Text format: one decimal sample per line (or a CSV row with the sample in
``column``).  Lines starting with ``#`` are comments; ``# rate=<Hz>`` sets the
sample rate.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

DEFAULT_RATE = 360.0

_RATE_RE = re.compile(r"^#\s*rate\s*=\s*([0-9.eE+-]+)")


class SignalFormatError(ValueError):
    """Raised for malformed ECG text input."""


@dataclass(frozen=True, eq=False)
class SignalWindow:
    samples: np.ndarray
    sample_rate: float = DEFAULT_RATE
    origin: str = ""

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64).reshape(-1)
        if s.size == 0:
            raise ValueError("signal window must contain at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("signal window contains non-finite samples")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, SignalWindow):
            return NotImplemented
        return (
            self.samples.tobytes() == other.samples.tobytes()
            and self.samples.shape == other.samples.shape
            and np.float64(self.sample_rate).tobytes() == np.float64(other.sample_rate).tobytes()
            and self.origin == other.origin
        )

    __hash__ = None


@dataclass(frozen=True)
class LoadedSignal:
    """Full record as read from disk, before windowing."""

    samples: np.ndarray
    sample_rate: float
    origin: str


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_ecg(path, column: int | str = 0, rate: float | None = None) -> LoadedSignal:
    """Read an ECG text file.

    ``rate`` overrides any ``# rate=`` header; otherwise the header value is
    used, falling back to 360 Hz.  A first data row made only of non-numeric
    fields is taken as CSV column names, and ``column`` may then be a name.
    """
    path = Path(path)
    header_rate = None
    names = None
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _RATE_RE.match(line)
                if m:
                    header_rate = float(m.group(1))
                continue
            fields = [f.strip() for f in line.split(",")]
            if names is None and not values and not any(_is_number(f) for f in fields):
                names = fields
                continue
            idx = column
            if isinstance(column, str):
                if names is None or column not in names:
                    raise SignalFormatError(f"{path}: no column named {column!r}")
                idx = names.index(column)
            try:
                value = float(fields[idx])
            except (IndexError, ValueError):
                raise SignalFormatError(
                    f"{path}: line {lineno}: cannot parse sample from {line!r}"
                ) from None
            if not math.isfinite(value):
                raise SignalFormatError(f"{path}: line {lineno}: non-finite sample")
            values.append(value)
    if not values:
        raise SignalFormatError(f"{path}: no samples found")
    sample_rate = rate if rate is not None else (header_rate or DEFAULT_RATE)
    return LoadedSignal(np.asarray(values, dtype=np.float64), float(sample_rate), path.stem)


def window(
    signal: Iterable[float] | LoadedSignal,
    n: int,
    pad: str = "drop",
    sample_rate: float = DEFAULT_RATE,
    origin: str = "",
) -> list[SignalWindow]:
    """Split a sample stream into non-overlapping windows of length ``n``.

    The trailing remainder is dropped (``pad="drop"``) or zero-padded
    (``pad="zero"``).
    """
    if n <= 0:
        raise ValueError("window length must be positive")
    if pad not in ("drop", "zero"):
        raise ValueError(f"pad must be 'drop' or 'zero', got {pad!r}")
    if isinstance(signal, LoadedSignal):
        sample_rate, origin = signal.sample_rate, signal.origin
        signal = signal.samples
    x = np.asarray(list(signal) if not isinstance(signal, np.ndarray) else signal, dtype=np.float64)
    full, rem = divmod(x.size, n)
    out = [
        SignalWindow(x[i * n:(i + 1) * n], sample_rate, origin) for i in range(full)
    ]
    if rem and pad == "zero":
        tail = np.zeros(n)
        tail[:rem] = x[full * n:]
        out.append(SignalWindow(tail, sample_rate, origin))
    return out


def write_ecg(path, samples, rate: float = DEFAULT_RATE) -> None:
    """Write samples in the one-per-line text format (17 significant digits)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# rate={rate:g}\n")
        for v in np.asarray(samples, dtype=np.float64):
            fh.write(f"{float(v)!r}\n")


# Wave shapes (P, Q, R, S, T): relative timing to the R peak in seconds,
# amplitude in mV, gaussian width in seconds.
_WAVES = (
    (-0.20, 0.15, 0.025),
    (-0.035, -0.12, 0.010),
    (0.0, 1.00, 0.012),
    (0.035, -0.25, 0.011),
    (0.28, 0.32, 0.045),
)


def synthetic_ecg(
    n_samples: int,
    seed: int,
    rate: float = DEFAULT_RATE,
    heart_rate: float | None = None,
    gain: float = 200.0,
    baseline: float = 1024.0,
    noise: float = 0.0,
) -> np.ndarray:
    """Synthetic ECG in ADC units: ``gain`` units per mV around a zero level
    of ``baseline`` (the MIT-BIH 11-bit convention is 200 and 1024).

    Each beat is a sum of five gaussian waves; RR intervals, amplitudes and
    widths jitter per beat.  Used as a stand-in for MIT-BIH records.
    """
    rng = np.random.default_rng(seed)
    if heart_rate is None:
        heart_rate = rng.uniform(60.0, 95.0)
    shape = np.array(_WAVES) * rng.uniform(0.85, 1.15, size=(len(_WAVES), 3))
    t = np.arange(n_samples) / rate
    x = np.zeros(n_samples)
    rr = 60.0 / heart_rate
    beat = rng.uniform(0.0, rr)
    while beat < t[-1] + 1.0:
        for offset, amp, width in shape:
            a = amp * rng.uniform(0.95, 1.05)
            w = width * rng.uniform(0.95, 1.05)
            x += a * np.exp(-0.5 * ((t - beat - offset) / w) ** 2)
        beat += rr * rng.uniform(0.93, 1.07)
    x = baseline + gain * x
    if noise:
        x += rng.normal(0.0, noise, n_samples)
    return x
