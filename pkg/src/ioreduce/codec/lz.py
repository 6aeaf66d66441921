"""Greedy LZ77 reference codec (``reference-lz``).

Stream layout, a sequence of *sequences*::

    token     1 byte   high nibble: literal count L (15 = more follows)
                       low nibble:  match length M - 4 (15 = more follows)
    [L ext]            if L >= 15: bytes of 255 then a final byte < 255,
                       all summed onto 15
    literals  L bytes
    offset    2 bytes  little-endian, 1..65535 (distance back into output)
    [M ext]            same scheme as L ext, summed onto 15

The last sequence carries literals only: it ends right after its literals,
with no offset and a low nibble of 0.  Minimum match length is 4 and the
window is 64 KiB (offsets fit in 16 bits).  Match finding is greedy
through a single-entry hash table of 4-byte prefixes, one fast mode only.
Runs of misses make the scan skip ahead progressively faster (one extra
byte of stride per 64 misses), which keeps incompressible input cheap.
"""

import numba
import numpy as np

MIN_MATCH = 4
WINDOW = 65535
HASH_BITS = 16
# after 2**SKIP_TRIGGER consecutive misses the scan step grows by one byte
SKIP_TRIGGER = 6

OK = 0
ERR_TRUNCATED = -1
ERR_OFFSET = -2
ERR_OVERFLOW = -3


def max_compressed_size(n: int) -> int:
    return n + n // 255 + 16


@numba.njit(cache=True, nogil=True, inline="always")
def _read32(a, i):
    return (
        np.uint32(a[i])
        | (np.uint32(a[i + 1]) << np.uint32(8))
        | (np.uint32(a[i + 2]) << np.uint32(16))
        | (np.uint32(a[i + 3]) << np.uint32(24))
    )


@numba.njit(cache=True, nogil=True, inline="always")
def _write_len(dst, op, extra):
    while extra >= 255:
        dst[op] = 255
        op += 1
        extra -= 255
    dst[op] = extra
    return op + 1


@numba.njit(cache=True, nogil=True)
def _emit(dst, op, src, anchor, lit_len, offset, match_len, last):
    ml = 0 if last else match_len - MIN_MATCH
    tok_l = 15 if lit_len >= 15 else lit_len
    tok_m = 15 if ml >= 15 else ml
    dst[op] = (tok_l << 4) | tok_m
    op += 1
    if lit_len >= 15:
        op = _write_len(dst, op, lit_len - 15)
    for j in range(lit_len):
        dst[op + j] = src[anchor + j]
    op += lit_len
    if not last:
        dst[op] = offset & 0xFF
        dst[op + 1] = (offset >> 8) & 0xFF
        op += 2
        if ml >= 15:
            op = _write_len(dst, op, ml - 15)
    return op


@numba.njit(cache=True, nogil=True, inline="always")
def _hash(v):
    # bits 16..31 of the 32-bit multiplicative hash
    return ((np.uint64(v) * np.uint64(2654435761)) >> np.uint64(32 - HASH_BITS)) & np.uint64((1 << HASH_BITS) - 1)


@numba.njit(cache=True, nogil=True)
def lz_encode(src, dst):
    n = src.size
    table = np.full(1 << HASH_BITS, -1, dtype=np.int32)
    i = 0
    anchor = 0
    op = 0
    misses = 1 << SKIP_TRIGGER
    while i + MIN_MATCH <= n:
        v = _read32(src, i)
        h = _hash(v)
        cand = table[h]
        table[h] = i
        if cand >= 0 and i - cand <= WINDOW and _read32(src, cand) == v:
            length = MIN_MATCH
            while i + length < n and src[cand + length] == src[i + length]:
                length += 1
            op = _emit(dst, op, src, anchor, i - anchor, i - cand, length, False)
            misses = 1 << SKIP_TRIGGER
            i += length
            anchor = i
            if i - 2 >= 0 and i - 2 + MIN_MATCH <= n:
                v2 = _read32(src, i - 2)
                table[_hash(v2)] = i - 2
        else:
            i += misses >> SKIP_TRIGGER
            misses += 1
    op = _emit(dst, op, src, anchor, n - anchor, 0, 0, True)
    return op


@numba.njit(cache=True, nogil=True, inline="always")
def _read_len(src, ip, n):
    total = np.int64(0)
    while True:
        if ip >= n:
            return -1, ip
        b = np.int64(src[ip])
        ip += 1
        total += b
        if b != 255:
            return total, ip


@numba.njit(cache=True, nogil=True)
def lz_decode(src, dst):
    """Returns (status, position): bytes written on success, input offset on error."""
    n = src.size
    cap = dst.size
    ip = 0
    op = 0
    while True:
        if ip >= n:
            return ERR_TRUNCATED, ip
        token_pos = ip
        token = np.int64(src[ip])
        ip += 1
        lit_len = token >> 4
        if lit_len == 15:
            extra, ip = _read_len(src, ip, n)
            if extra < 0:
                return ERR_TRUNCATED, ip
            lit_len += extra
        if ip + lit_len > n:
            return ERR_TRUNCATED, ip
        if op + lit_len > cap:
            return ERR_OVERFLOW, ip
        for j in range(lit_len):
            dst[op + j] = src[ip + j]
        ip += lit_len
        op += lit_len
        if ip == n:
            if token & 0x0F:
                return ERR_TRUNCATED, token_pos
            return OK, op
        if ip + 2 > n:
            return ERR_TRUNCATED, ip
        offset = np.int64(src[ip]) | (np.int64(src[ip + 1]) << 8)
        if offset == 0 or offset > op:
            return ERR_OFFSET, ip
        ip += 2
        match_len = token & 0x0F
        if match_len == 15:
            extra, ip = _read_len(src, ip, n)
            if extra < 0:
                return ERR_TRUNCATED, ip
            match_len += extra
        match_len += MIN_MATCH
        if op + match_len > cap:
            return ERR_OVERFLOW, ip
        m = op - offset
        for j in range(match_len):
            dst[op + j] = dst[m + j]
        op += match_len


MESSAGES = {
    ERR_TRUNCATED: "truncated stream",
    ERR_OFFSET: "match offset outside decoded data",
    ERR_OVERFLOW: "stream decodes past expected size",
}


def compress(src: np.ndarray) -> np.ndarray:
    dst = np.empty(max_compressed_size(src.size), dtype=np.uint8)
    m = lz_encode(src, dst)
    return dst[:m]
