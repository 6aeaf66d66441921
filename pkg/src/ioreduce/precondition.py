"""Reversible byte- and bit-shuffle of fixed-width elements.

For a buffer of ``n`` elements of ``k`` bytes each (plus a tail of fewer
than ``k`` bytes that is copied verbatim):

* ``shuffle`` transposes the ``n x k`` byte matrix: first byte 0 of every
  element, then byte 1 of every element, and so on.
* ``bitshuffle`` transposes the ``n x 8k`` bit matrix.  Bit ``b`` of an
  element is bit ``b % 8`` (LSB = 0) of its byte ``b // 8`` in memory order.
  The output is the bit stream ``plane 0 of all elements, plane 1 of all
  elements, ...`` packed LSB-first into bytes, i.e. output bit ``p*n + e``
  holds bit ``p`` of element ``e``.

Both transforms keep the buffer length.  Kernels are compiled with numba
and release the GIL so the engine can run them from worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigError, FormatError

KINDS = ("none", "shuffle", "bitshuffle")
KIND_IDS = {"none": 0, "shuffle": 1, "bitshuffle": 2}
ELEM_SIZES = (1, 2, 4, 8)


@dataclass(frozen=True)
class Preconditioner:
    kind: str = "none"
    elem_size: int = 4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown preconditioner {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.elem_size not in ELEM_SIZES:
            raise ConfigError(f"elem_size must be one of {ELEM_SIZES}, got {self.elem_size}")

    @property
    def id(self) -> int:
        return KIND_IDS[self.kind]


def kind_from_id(kind_id: int) -> str:
    for name, i in KIND_IDS.items():
        if i == kind_id:
            return name
    raise KeyError(kind_id)


# --------------------------------------------------------------------------
# kernels


@numba.njit(cache=True, nogil=True)
def _shuffle(src, dst, k):
    n = src.size // k
    for e in range(n):
        base = e * k
        for j in range(k):
            dst[j * n + e] = src[base + j]
    for i in range(n * k, src.size):
        dst[i] = src[i]


@numba.njit(cache=True, nogil=True)
def _unshuffle(src, dst, k):
    n = src.size // k
    for j in range(k):
        row = j * n
        for e in range(n):
            dst[e * k + j] = src[row + e]
    for i in range(n * k, src.size):
        dst[i] = src[i]


@numba.njit(cache=True, nogil=True, inline="always")
def _transpose8(x):
    # 8x8 bit matrix in a uint64, row r = byte r, column c = bit c
    t = (x ^ (x >> np.uint64(7))) & np.uint64(0x00AA00AA00AA00AA)
    x = x ^ t ^ (t << np.uint64(7))
    t = (x ^ (x >> np.uint64(14))) & np.uint64(0x0000CCCC0000CCCC)
    x = x ^ t ^ (t << np.uint64(14))
    t = (x ^ (x >> np.uint64(28))) & np.uint64(0x00000000F0F0F0F0)
    x = x ^ t ^ (t << np.uint64(28))
    return x


@numba.njit(cache=True, nogil=True)
def _bitshuffle(src, dst, k):
    n = src.size // k
    nbits = n * 8 * k
    if n % 8 == 0:
        n8 = n // 8
        for eb in range(n8):
            e0 = eb * 8 * k
            for j in range(k):
                w = np.uint64(0)
                for i in range(8):
                    w |= np.uint64(src[e0 + i * k + j]) << np.uint64(8 * i)
                w = _transpose8(w)
                for c in range(8):
                    dst[(8 * j + c) * n8 + eb] = np.uint8((w >> np.uint64(8 * c)) & np.uint64(0xFF))
    else:
        for i in range(nbits // 8):
            dst[i] = 0
        for e in range(n):
            for b in range(8 * k):
                bit = (src[e * k + (b >> 3)] >> (b & 7)) & 1
                if bit:
                    pos = b * n + e
                    dst[pos >> 3] |= np.uint8(1 << (pos & 7))
    for i in range(n * k, src.size):
        dst[i] = src[i]


@numba.njit(cache=True, nogil=True)
def _bitunshuffle(src, dst, k):
    n = src.size // k
    if n % 8 == 0:
        n8 = n // 8
        for eb in range(n8):
            e0 = eb * 8 * k
            for j in range(k):
                w = np.uint64(0)
                for c in range(8):
                    w |= np.uint64(src[(8 * j + c) * n8 + eb]) << np.uint64(8 * c)
                w = _transpose8(w)
                for i in range(8):
                    dst[e0 + i * k + j] = np.uint8((w >> np.uint64(8 * i)) & np.uint64(0xFF))
    else:
        for i in range(n * k):
            dst[i] = 0
        for e in range(n):
            for b in range(8 * k):
                pos = b * n + e
                bit = (src[pos >> 3] >> (pos & 7)) & 1
                if bit:
                    dst[e * k + (b >> 3)] |= np.uint8(1 << (b & 7))
    for i in range(n * k, src.size):
        dst[i] = src[i]


def as_u8(buf) -> np.ndarray:
    if isinstance(buf, np.ndarray):
        return buf.reshape(-1).view(np.uint8)
    return np.frombuffer(buf, dtype=np.uint8)


def forward_array(p: Preconditioner, src: np.ndarray) -> np.ndarray:
    """Array-level forward transform; ``src`` is a flat uint8 array."""
    if p.kind == "none" or (p.kind == "shuffle" and p.elem_size == 1):
        return src
    dst = np.empty_like(src)
    if src.size:
        if p.kind == "shuffle":
            _shuffle(src, dst, p.elem_size)
        else:
            _bitshuffle(src, dst, p.elem_size)
    return dst


def inverse_array(p: Preconditioner, src: np.ndarray) -> np.ndarray:
    if p.kind == "none" or (p.kind == "shuffle" and p.elem_size == 1):
        return src
    dst = np.empty_like(src)
    if src.size:
        if p.kind == "shuffle":
            _unshuffle(src, dst, p.elem_size)
        else:
            _bitunshuffle(src, dst, p.elem_size)
    return dst


def forward(p: Preconditioner, buf) -> bytes:
    return forward_array(p, as_u8(buf)).tobytes()


def inverse(p: Preconditioner, buf, original_size: int | None = None) -> bytes:
    """Undo ``forward``.  ``original_size``, when known, must match the buffer length."""
    arr = as_u8(buf)
    if original_size is not None and arr.size != original_size:
        raise FormatError(
            f"preconditioned buffer has {arr.size} bytes, expected {original_size}"
        )
    return inverse_array(p, arr).tobytes()


def tail_length(p: Preconditioner, length: int) -> int:
    """Number of trailing bytes passed through untransformed."""
    return 0 if p.kind == "none" else length % p.elem_size
