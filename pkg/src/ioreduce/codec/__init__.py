"""Codec abstraction and registry.

Reference codecs (always present, lossless, no level knob):

============  ===  ==========================================
name          id   stream
============  ===  ==========================================
null          0    the input, unchanged
rle           1    (count, value) byte pairs
reference-lz  2    greedy LZ77, 64 KiB window (see ``lz``)
============  ===  ==========================================

Adapters for third-party libraries register under ids >= 16.  ``zlib``
(id 16, level 1) is always registered because it ships with Python; ``lz4``
(id 17, block format, fast mode) and ``zstd`` (id 18, level 1) register
when their packages are importable.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import CodecLookupError, ConfigError, DecodeError
from . import lz, rle

__all__ = [
    "Codec",
    "register",
    "get",
    "get_by_id",
    "names",
    "compress",
    "decompress",
]


def _as_u8(buf) -> np.ndarray:
    if isinstance(buf, np.ndarray):
        return buf.reshape(-1).view(np.uint8)
    return np.frombuffer(buf, dtype=np.uint8)


@dataclass(frozen=True)
class Codec:
    name: str
    id: int
    lossy: bool
    version: str
    _compress: Callable[[np.ndarray], bytes | np.ndarray]
    _decompress: Callable[[np.ndarray, int], bytes | np.ndarray]
    _bound: Callable[[int], int]

    def max_compressed_size(self, n: int) -> int:
        return self._bound(n)

    def compress_array(self, src: np.ndarray) -> np.ndarray:
        out = self._compress(src)
        return out if isinstance(out, np.ndarray) else np.frombuffer(out, dtype=np.uint8)

    def decompress_array(self, src: np.ndarray, expected_size: int) -> np.ndarray:
        out = self._decompress(src, expected_size)
        out = out if isinstance(out, np.ndarray) else np.frombuffer(out, dtype=np.uint8)
        if out.size != expected_size:
            raise DecodeError(
                f"{self.name}: stream decodes to {out.size} bytes, expected {expected_size}",
                offset=src.size,
            )
        return out

    def compress(self, data) -> bytes:
        return self.compress_array(_as_u8(data)).tobytes()

    def decompress(self, data, expected_size: int) -> bytes:
        return self.decompress_array(_as_u8(data), expected_size).tobytes()


_REGISTRY: dict[str, Codec] = {}
_BY_ID: dict[int, Codec] = {}


def register(codec: Codec) -> Codec:
    if codec.name in _REGISTRY:
        raise ConfigError(f"codec name {codec.name!r} already registered")
    if codec.id in _BY_ID:
        raise ConfigError(f"codec id {codec.id} already registered")
    if not 0 <= codec.id < 256:
        raise ConfigError("codec ids are single bytes")
    _REGISTRY[codec.name] = codec
    _BY_ID[codec.id] = codec
    return codec


def get(name: str) -> Codec:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise CodecLookupError(
            f"unregistered codec {name!r}; available: {', '.join(names())}"
        ) from None


def get_by_id(codec_id: int) -> Codec:
    try:
        return _BY_ID[codec_id]
    except KeyError:
        raise CodecLookupError(f"no codec with id {codec_id}") from None


def names() -> list[str]:
    return list(_REGISTRY)


def compress(name: str, data) -> bytes:
    return get(name).compress(data)


def decompress(name: str, data, expected_size: int) -> bytes:
    return get(name).decompress(data, expected_size)


# --------------------------------------------------------------------------
# reference codecs


def _null_compress(src):
    return src.copy()


def _null_decompress(src, expected_size):
    if src.size != expected_size:
        raise DecodeError(f"null: stream has {src.size} bytes, expected {expected_size}", offset=min(src.size, expected_size))
    return src.copy()


def _kernel_decompress(name, kernel, messages):
    def decompress(src, expected_size):
        dst = np.empty(expected_size, dtype=np.uint8)
        status, pos = kernel(src, dst)
        if status < 0:
            raise DecodeError(f"{name}: {messages[status]}", offset=int(pos))
        if pos != expected_size:
            raise DecodeError(f"{name}: stream decodes to {pos} bytes, expected {expected_size}", offset=src.size)
        return dst

    return decompress


def _zlib_compress(src):
    return zlib.compress(src, 1)


def _zlib_decompress(src, expected_size):
    d = zlib.decompressobj()
    try:
        out = d.decompress(src, expected_size)
    except zlib.error as exc:
        raise DecodeError(f"zlib: {exc}") from None
    if not d.eof:
        raise DecodeError("zlib: truncated stream or data beyond expected size", offset=src.size - len(d.unconsumed_tail))
    return out


_VERSION = "ioreduce-1"

register(Codec("null", 0, False, _VERSION, _null_compress, _null_decompress, lambda n: n))
register(
    Codec(
        "rle",
        1,
        False,
        _VERSION,
        rle.compress,
        _kernel_decompress("rle", rle.rle_decode, rle.MESSAGES),
        rle.max_compressed_size,
    )
)
register(
    Codec(
        "reference-lz",
        2,
        False,
        _VERSION,
        lz.compress,
        _kernel_decompress("reference-lz", lz.lz_decode, lz.MESSAGES),
        lz.max_compressed_size,
    )
)
register(
    Codec(
        "zlib",
        16,
        False,
        f"zlib-{zlib.ZLIB_RUNTIME_VERSION}",
        _zlib_compress,
        _zlib_decompress,
        # deflate stored-block bound plus zlib header and trailer
        lambda n: n + 5 * (n // 16383 + 1) + 6,
    )
)


def _register_lz4():
    import lz4
    import lz4.block

    def comp(src):
        return lz4.block.compress(src, mode="default", store_size=False)

    def decomp(src, expected_size):
        if expected_size == 0:
            # the library encodes empty input as a single zero token
            if src.size != 1 or src[0] != 0:
                raise DecodeError("lz4: not an empty-block stream", offset=0)
            return b""
        try:
            return lz4.block.decompress(src, uncompressed_size=expected_size)
        except lz4.block.LZ4BlockError as exc:
            raise DecodeError(f"lz4: {exc}") from None

    register(Codec("lz4", 17, False, f"lz4-{lz4.library_version_string()}", comp, decomp, lambda n: n + n // 255 + 16))


def _register_zstd():
    import zstandard

    def comp(src):
        return zstandard.ZstdCompressor(level=1).compress(src)

    def decomp(src, expected_size):
        try:
            return zstandard.ZstdDecompressor().decompress(src, max_output_size=expected_size)
        except zstandard.ZstdError as exc:
            raise DecodeError(f"zstd: {exc}") from None

    def bound(n):
        # ZSTD_COMPRESSBOUND plus the frame header
        return n + (n >> 8) + ((128 * 1024 - n) >> 11 if n < 128 * 1024 else 0) + 18

    register(Codec("zstd", 18, False, f"zstd-{zstandard.ZSTD_VERSION[0]}.{zstandard.ZSTD_VERSION[1]}.{zstandard.ZSTD_VERSION[2]}", comp, decomp, bound))


for _adapter in (_register_lz4, _register_zstd):
    try:
        _adapter()
    except ImportError:
        pass

REFERENCE_CODECS = ("null", "rle", "reference-lz")
