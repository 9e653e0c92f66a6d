"""Binary container shared by every persisted artifact.

Layout (little-endian)::

    magic   4s   b"PACS"
    version u16
    kind    u8   1 signal, 2 dense_matrix, 3 bipolar_key, 4 cipher, 5 intermediate
    ndim    u8
    dims    ndim x u32
    payload kind-specific

``dense_matrix`` payloads come in three sizes, told apart by length: bare
row-major f64 data; a 9-byte prefix (tag u8, param i64) followed by the
data; or the prefix alone for matrices rebuilt from parameters (DBBD,
seeded matrix keys).  ``param`` is the wavelet depth or the seed.
"""

from __future__ import annotations

import struct

import numpy as np

from .dictionaries import Dictionary
from .keys import BipolarKey, MatrixKey, gen_matrix_key
from .protocol import IntermediateCipher, PublicRecoveryPackage
from .sensing import MeasurementMatrix, make_dbbd_phi
from .signal_io import SignalWindow

MAGIC = b"PACS"
VERSION = 1

SIGNAL, DENSE_MATRIX, BIPOLAR_KEY, CIPHER, INTERMEDIATE = 1, 2, 3, 4, 5
KIND_NAMES = {
    SIGNAL: "signal",
    DENSE_MATRIX: "dense_matrix",
    BIPOLAR_KEY: "bipolar_key",
    CIPHER: "cipher",
    INTERMEDIATE: "intermediate",
}

# dense_matrix tags
TAG_DCT, TAG_DB10, TAG_LEARNED, TAG_GAUSSIAN, TAG_DBBD, TAG_MATRIX_KEY = 1, 2, 3, 4, 5, 6
_DICT_TAGS = {"dct": TAG_DCT, "db10": TAG_DB10, "learned": TAG_LEARNED}
_TAG_DICTS = {v: k for k, v in _DICT_TAGS.items()}

_HEADER = struct.Struct("<4sHBB")
_PREFIX = struct.Struct("<Bq")
_NO_SEED = 2 ** 64 - 1
_U32_MAX = 2 ** 32 - 1


class ContainerError(ValueError):
    pass


def _header(kind: int, dims) -> bytes:
    dims = [int(d) for d in dims]
    if len(dims) > 255:
        raise ContainerError("too many dimensions")
    for d in dims:
        if d < 0 or d > _U32_MAX:
            raise ContainerError(f"dimension {d} overflows u32")
    return _HEADER.pack(MAGIC, VERSION, kind, len(dims)) + struct.pack(f"<{len(dims)}I", *dims)


def _f64(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _text(s: str, width: str = "H") -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<" + width, len(raw)) + raw


def _seed_param(seed) -> int:
    if seed is None:
        return -1
    if not 0 <= seed < 2 ** 63:
        raise ContainerError("seeds must be non-negative 63-bit integers")
    return int(seed)


def serialize(value) -> bytes:
    if isinstance(value, SignalWindow):
        return (
            _header(SIGNAL, [len(value)])
            + struct.pack("<d", value.sample_rate)
            + _text(value.origin, "I")
            + _f64(value.samples)
        )
    if isinstance(value, Dictionary):
        return _header(DENSE_MATRIX, value.matrix.shape) + _PREFIX.pack(_DICT_TAGS[value.kind], value.levels) \
            + _f64(value.matrix)
    if isinstance(value, MeasurementMatrix):
        head = _header(DENSE_MATRIX, value.shape)
        if value.kind == "dbbd":
            return head + _PREFIX.pack(TAG_DBBD, -1)
        return head + _PREFIX.pack(TAG_GAUSSIAN, _seed_param(value.seed)) + _f64(value.matrix)
    if isinstance(value, MatrixKey):
        head = _header(DENSE_MATRIX, value.matrix.shape)
        if value.seed is not None and gen_matrix_key(value.m, value.seed) == value:
            return head + _PREFIX.pack(TAG_MATRIX_KEY, _seed_param(value.seed))
        return head + _PREFIX.pack(TAG_MATRIX_KEY, _seed_param(value.seed)) + _f64(value.matrix)
    if isinstance(value, BipolarKey):
        seed = _NO_SEED if value.seed is None else _seed_param(value.seed)
        return (
            _header(BIPOLAR_KEY, [value.n])
            + struct.pack("<d", value.alpha)
            + np.ascontiguousarray(value.perm, dtype="<u4").tobytes()
            + np.packbits(value.signs > 0, bitorder="little").tobytes()
            + struct.pack("<Q", seed)
        )
    if isinstance(value, PublicRecoveryPackage):
        return (
            _header(CIPHER, [value.m, value.n, value.l])
            + _f64(value.a_star)
            + _f64(value.y_hat)
            + _text(value.solver_hint)
        )
    if isinstance(value, IntermediateCipher):
        return (
            _header(INTERMEDIATE, [value.coeffs.size])
            + _f64(value.coeffs)
            + struct.pack("<dIB", value.residual_norm, value.iterations, int(value.converged))
            + _text(value.solver)
        )
    if isinstance(value, np.ndarray) and value.ndim == 2:
        return _header(DENSE_MATRIX, value.shape) + _f64(value)
    raise ContainerError(f"cannot serialize {type(value).__name__}")


class _Reader:
    def __init__(self, buf: bytes, offset: int):
        self.buf = buf
        self.pos = offset

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise ContainerError("truncated payload")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct("<" + fmt)
        return s.unpack(self.take(s.size))

    def f64(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)

    def text(self, width: str = "H") -> str:
        (n,) = self.unpack(width)
        return self.take(n).decode("utf-8")

    def done(self):
        if self.pos != len(self.buf):
            raise ContainerError(f"{len(self.buf) - self.pos} trailing bytes after payload")


def read_header(buf: bytes):
    """Return (kind, dims, payload offset) after validating magic and version."""
    if len(buf) < _HEADER.size:
        raise ContainerError("truncated header")
    magic, version, kind, ndim = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ContainerError("bad magic")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    if kind not in KIND_NAMES:
        raise ContainerError(f"unknown kind tag {kind}")
    end = _HEADER.size + 4 * ndim
    if len(buf) < end:
        raise ContainerError("truncated header")
    dims = list(struct.unpack_from(f"<{ndim}I", buf, _HEADER.size))
    return kind, dims, end


def _expect_dims(dims, n: int, kind: int):
    if len(dims) != n:
        raise ContainerError(f"{KIND_NAMES[kind]} needs {n} dims, got {len(dims)}")


def deserialize(buf: bytes):
    buf = bytes(buf)
    kind, dims, offset = read_header(buf)
    r = _Reader(buf, offset)
    if kind == SIGNAL:
        _expect_dims(dims, 1, kind)
        (rate,) = r.unpack("d")
        origin = r.text("I")
        value = SignalWindow(r.f64(dims[0]), rate, origin)
    elif kind == DENSE_MATRIX:
        value = _read_matrix(r, dims, len(buf) - offset)
    elif kind == BIPOLAR_KEY:
        _expect_dims(dims, 1, kind)
        n = dims[0]
        (alpha,) = r.unpack("d")
        perm = np.frombuffer(r.take(4 * n), dtype="<u4").astype(np.int64)
        bits = np.unpackbits(np.frombuffer(r.take((n + 7) // 8), dtype=np.uint8), bitorder="little")[:n]
        (seed,) = r.unpack("Q")
        try:
            value = BipolarKey(alpha, perm, np.where(bits == 1, 1, -1), None if seed == _NO_SEED else seed)
        except ValueError as exc:
            raise ContainerError(f"invalid bipolar key: {exc}") from None
    elif kind == CIPHER:
        _expect_dims(dims, 3, kind)
        m, n, l = dims
        a = r.f64(m * l).reshape(m, l)
        value = PublicRecoveryPackage(a, r.f64(m), n, r.text())
    else:
        _expect_dims(dims, 1, kind)
        coeffs = r.f64(dims[0])
        res, iters, conv = r.unpack("dIB")
        value = IntermediateCipher(coeffs, res, r.text(), iters, bool(conv))
    r.done()
    return value


def _read_matrix(r: _Reader, dims, payload_len: int):
    _expect_dims(dims, 2, DENSE_MATRIX)
    rows, cols = dims
    data_len = 8 * rows * cols
    if payload_len == data_len:
        return r.f64(rows * cols).reshape(rows, cols)
    if payload_len not in (_PREFIX.size, _PREFIX.size + data_len):
        raise ContainerError("truncated payload")
    tag, param = r.unpack("Bq")
    data = r.f64(rows * cols).reshape(rows, cols) if payload_len > _PREFIX.size else None
    seed = None if param < 0 else param
    if tag in _TAG_DICTS:
        if data is None:
            raise ContainerError("dictionary payload missing matrix data")
        return Dictionary(data, _TAG_DICTS[tag], max(param, 0))
    if tag == TAG_GAUSSIAN:
        if data is None:
            raise ContainerError("gaussian measurement matrix missing data")
        return MeasurementMatrix(data, "gaussian", seed)
    if tag == TAG_DBBD:
        return make_dbbd_phi(rows, cols)
    if tag == TAG_MATRIX_KEY:
        if data is None:
            if seed is None:
                raise ContainerError("compact matrix key without a seed")
            return gen_matrix_key(rows, seed)
        return MatrixKey(data, seed)
    raise ContainerError(f"unknown dense_matrix tag {tag}")


def save(path, value) -> bytes:
    blob = serialize(value)
    with open(path, "wb") as fh:
        fh.write(blob)
    return blob


def load(path):
    with open(path, "rb") as fh:
        return deserialize(fh.read())
