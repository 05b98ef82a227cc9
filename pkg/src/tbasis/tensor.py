"""Dense tensor kernel and the DTF1 binary tensor format.

Dense tensors are plain ``numpy.ndarray`` objects of dtype float64 in C
(row-major, last index fastest) order. Mode indices are 0-based throughout
the public interface.
"""

from __future__ import annotations

import io
import math
import struct
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .exceptions import BadPermutation, FormatError, SizeMismatch

DTF_MAGIC = b"DTF1"


def as_tensor(data, shape: Sequence[int] | None = None) -> np.ndarray:
    """Return a C-contiguous float64 copy of ``data``, optionally reshaped."""
    arr = np.array(data, dtype=np.float64, order="C", copy=True)
    if shape is not None:
        arr = reshape(arr, shape)
    return arr


def reshape(t: np.ndarray, new_shape: Sequence[int]) -> np.ndarray:
    new_shape = tuple(int(s) for s in new_shape)
    if math.prod(new_shape) != t.size:
        raise SizeMismatch(f"cannot reshape {t.shape} ({t.size} entries) to {new_shape}")
    return np.ascontiguousarray(t).reshape(new_shape)


def permute(t: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """Return ``out`` with ``out.shape[k] == t.shape[perm[k]]``."""
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(t.ndim)):
        raise BadPermutation(f"{perm} is not a permutation of {t.ndim} modes")
    return np.ascontiguousarray(np.transpose(t, perm))


def inverse_permutation(perm: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for k, p in enumerate(perm):
        inv[p] = k
    return tuple(inv)


def contract(a: np.ndarray, b: np.ndarray, axes: Iterable[tuple[int, int]] = ()) -> np.ndarray:
    """Sum over paired modes of ``a`` and ``b``.

    Output modes are the free modes of ``a`` followed by the free modes of
    ``b``, each in their original order.
    """
    pairs = list(axes)
    ax_a = [p[0] for p in pairs]
    ax_b = [p[1] for p in pairs]
    if len(set(ax_a)) != len(ax_a) or len(set(ax_b)) != len(ax_b):
        raise SizeMismatch(f"contracted modes must be disjoint, got {pairs}")
    for i, j in pairs:
        if a.shape[i] != b.shape[j]:
            raise SizeMismatch(
                f"mode {i} of a (size {a.shape[i]}) != mode {j} of b (size {b.shape[j]})"
            )
    return np.tensordot(a, b, axes=(ax_a, ax_b))


def frobenius(t: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(t))))


def relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    """Relative Frobenius error; falls back to absolute when ``expected`` is zero."""
    denom = frobenius(expected)
    diff = frobenius(np.asarray(actual) - np.asarray(expected))
    return diff / denom if denom > 0 else diff


# --- DTF1 ---------------------------------------------------------------


def write_dtf(fh: BinaryIO, t: np.ndarray) -> None:
    """Write ``t`` as: magic, u32 mode count, u64 sizes, f64 data (all LE)."""
    t = np.asarray(t, dtype=np.float64)
    fh.write(DTF_MAGIC)
    fh.write(struct.pack("<I", t.ndim))
    fh.write(struct.pack(f"<{t.ndim}Q", *t.shape))
    fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"unexpected end of data: wanted {n} bytes, got {len(buf)}")
    return buf


def read_dtf(fh: BinaryIO) -> np.ndarray:
    magic = _read_exact(fh, 4)
    if magic != DTF_MAGIC:
        raise FormatError(f"bad DTF magic {magic!r}")
    (ndim,) = struct.unpack("<I", _read_exact(fh, 4))
    shape = struct.unpack(f"<{ndim}Q", _read_exact(fh, 8 * ndim))
    count = math.prod(shape)
    data = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8")
    return data.astype(np.float64).reshape(shape)


def dtf_bytes(t: np.ndarray) -> bytes:
    buf = io.BytesIO()
    write_dtf(buf, t)
    return buf.getvalue()


def dtf_from_bytes(raw: bytes) -> np.ndarray:
    fh = io.BytesIO(raw)
    t = read_dtf(fh)
    if fh.read(1):
        raise FormatError("trailing bytes after DTF1 tensor")
    return t
