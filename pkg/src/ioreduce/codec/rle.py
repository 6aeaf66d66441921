"""Byte run-length codec.

The stream is a sequence of ``(count, value)`` byte pairs with
``1 <= count <= 255``.  Worst case (no repeated neighbours) doubles the input.
"""

import numba
import numpy as np

# kernel status codes
OK = 0
ERR_ODD = -1
ERR_ZERO_COUNT = -2
ERR_OVERFLOW = -3


@numba.njit(cache=True, nogil=True)
def rle_encode(src, dst):
    n = src.size
    i = 0
    op = 0
    while i < n:
        v = src[i]
        run = 1
        while i + run < n and run < 255 and src[i + run] == v:
            run += 1
        dst[op] = run
        dst[op + 1] = v
        op += 2
        i += run
    return op


@numba.njit(cache=True, nogil=True)
def rle_decode(src, dst):
    """Returns (status, position): bytes written on success, input offset on error."""
    n = src.size
    cap = dst.size
    ip = 0
    op = 0
    while ip < n:
        if ip + 1 >= n:
            return ERR_ODD, ip
        count = np.int64(src[ip])
        if count == 0:
            return ERR_ZERO_COUNT, ip
        if op + count > cap:
            return ERR_OVERFLOW, ip
        v = src[ip + 1]
        for j in range(count):
            dst[op + j] = v
        op += count
        ip += 2
    return OK, op


def max_compressed_size(n: int) -> int:
    return 2 * n


MESSAGES = {
    ERR_ODD: "truncated run-length pair",
    ERR_ZERO_COUNT: "zero run length",
    ERR_OVERFLOW: "run exceeds expected output size",
}


def compress(src: np.ndarray) -> np.ndarray:
    dst = np.empty(max_compressed_size(src.size), dtype=np.uint8)
    m = rle_encode(src, dst)
    return dst[:m]
