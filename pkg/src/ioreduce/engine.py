"""Blocked, multi-threaded compression container.

Container layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"IORC"
    4       2     format version (1)
    6       1     elem_size
    7       1     preconditioner id (0 none, 1 shuffle, 2 bitshuffle)
    8       1     codec id (0 null, 1 rle, 2 reference-lz, 16 zlib, 17 lz4, 18 zstd)
    9       3     reserved, zero
    12      8     original_size
    20      4     block_size
    24      4     n_blocks
    28      4     CRC-32 of bytes 0..27
    32      12*n  block records:
                    flags u8 (bit 0: stored raw), 3 reserved bytes,
                    compressed_size u32, CRC-32 of the original block u32
    ...           payloads, in block order

The input is cut into ``block_size`` pieces (the last may be short).  Each
block is preconditioned and compressed on its own; if that does not make it
smaller, the original bytes are stored instead.  Blocks are processed by a
thread pool but assembled in index order, so the container bytes do not
depend on the thread count.
"""

from __future__ import annotations

import os
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import codec as codecs
from .errors import CodecLookupError, ConfigError, DecodeError, FormatError, IntegrityError, UnsupportedFormatError
from .precondition import KIND_IDS, Preconditioner, as_u8, forward_array, inverse_array, kind_from_id

MAGIC = b"IORC"
VERSION = 1
HEADER_SIZE = 32
RECORD_SIZE = 12
DEFAULT_BLOCK_SIZE = 1 << 20
FLAG_STORED_RAW = 0x01

_HEADER = struct.Struct("<4sHBBB3sQII")
_RECORD = struct.Struct("<B3sII")

THREADS_ENV = "IOREDUCE_THREADS"


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV)
    if not value:
        return 1
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}={value!r} is not an integer") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


@dataclass(frozen=True)
class EngineParams:
    block_size: int = DEFAULT_BLOCK_SIZE
    elem_size: int = 4
    preconditioner: str = "bitshuffle"
    codec: str = "reference-lz"
    n_threads: int = field(default_factory=default_threads)

    def __post_init__(self):
        Preconditioner(self.preconditioner, self.elem_size)  # validates both
        if self.block_size < self.elem_size or self.block_size % self.elem_size:
            raise ConfigError("block_size must be a positive multiple of elem_size")
        if self.block_size >= 1 << 32:
            raise ConfigError("block_size must fit in 32 bits")
        if self.n_threads < 1:
            raise ConfigError("n_threads must be >= 1")

    @property
    def precond(self) -> Preconditioner:
        return Preconditioner(self.preconditioner, self.elem_size)


@dataclass(frozen=True)
class BlockRecord:
    stored_raw: bool
    compressed_size: int
    checksum: int


@dataclass(frozen=True)
class CompressedContainer:
    elem_size: int
    preconditioner_id: int
    codec_id: int
    original_size: int
    block_size: int
    blocks: tuple[BlockRecord, ...]
    payloads: tuple[bytes, ...]
    version: int = VERSION

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def header_overhead(self) -> int:
        return header_overhead(self.n_blocks)

    @property
    def nbytes(self) -> int:
        return self.header_overhead + sum(b.compressed_size for b in self.blocks)

    @property
    def ratio(self) -> float:
        return self.nbytes / self.original_size if self.original_size else float("nan")

    def block_lengths(self) -> list[int]:
        return _block_lengths(self.original_size, self.block_size)

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(
            MAGIC,
            self.version,
            self.elem_size,
            self.preconditioner_id,
            self.codec_id,
            b"\0\0\0",
            self.original_size,
            self.block_size,
            self.n_blocks,
        )
        parts = [head, struct.pack("<I", zlib.crc32(head))]
        for rec in self.blocks:
            parts.append(_RECORD.pack(FLAG_STORED_RAW if rec.stored_raw else 0, b"\0\0\0", rec.compressed_size, rec.checksum))
        parts.extend(self.payloads)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data) -> "CompressedContainer":
        data = memoryview(data)
        if len(data) < HEADER_SIZE:
            raise FormatError(f"container truncated: {len(data)} bytes is shorter than the header")
        magic, version, elem_size, pre_id, codec_id, _, original, block_size, n_blocks = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise FormatError(f"bad magic {bytes(magic)!r}")
        (head_crc,) = struct.unpack_from("<I", data, 28)
        if zlib.crc32(data[:28]) != head_crc:
            raise FormatError("header checksum mismatch")
        if version != VERSION:
            raise UnsupportedFormatError(f"container version {version} (this build reads {VERSION})")
        try:
            kind_from_id(pre_id)
        except KeyError:
            raise UnsupportedFormatError(f"unknown preconditioner id {pre_id}") from None
        try:
            codecs.get_by_id(codec_id)
        except CodecLookupError:
            raise UnsupportedFormatError(f"unknown codec id {codec_id}") from None
        if block_size == 0 or block_size % elem_size:
            raise FormatError(f"invalid block_size {block_size} for elem_size {elem_size}")
        lengths = _block_lengths(original, block_size)
        if len(lengths) != n_blocks:
            raise FormatError(f"header says {n_blocks} blocks, sizes imply {len(lengths)}")
        rec_end = HEADER_SIZE + RECORD_SIZE * n_blocks
        if len(data) < rec_end:
            raise FormatError("container truncated inside block records")
        blocks = []
        payloads = []
        pos = rec_end
        for i in range(n_blocks):
            flags, _, csize, crc = _RECORD.unpack_from(data, HEADER_SIZE + RECORD_SIZE * i)
            raw = bool(flags & FLAG_STORED_RAW)
            if raw and csize != lengths[i]:
                raise FormatError(f"block {i}: stored raw but size {csize} != {lengths[i]}")
            if pos + csize > len(data):
                raise FormatError(f"container truncated in payload of block {i}")
            blocks.append(BlockRecord(raw, csize, crc))
            payloads.append(bytes(data[pos : pos + csize]))
            pos += csize
        if pos != len(data):
            raise FormatError(f"{len(data) - pos} trailing bytes after the last block")
        return cls(elem_size, pre_id, codec_id, original, block_size, tuple(blocks), tuple(payloads), version)


def header_overhead(n_blocks: int) -> int:
    return HEADER_SIZE + RECORD_SIZE * n_blocks


def _block_lengths(original_size: int, block_size: int) -> list[int]:
    full, rest = divmod(original_size, block_size)
    return [block_size] * full + ([rest] if rest else [])


def _pack_block(block: np.ndarray, pre: Preconditioner, codec: codecs.Codec) -> tuple[BlockRecord, bytes]:
    crc = zlib.crc32(block)
    packed = codec.compress_array(forward_array(pre, block))
    if packed.size >= block.size:
        return BlockRecord(True, block.size, crc), block.tobytes()
    return BlockRecord(False, int(packed.size), crc), packed.tobytes()


def _run(fn, items, n_threads):
    if n_threads == 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def pack(data, params: EngineParams | None = None) -> CompressedContainer:
    params = params or EngineParams()
    codec = codecs.get(params.codec)
    pre = params.precond
    arr = as_u8(data)
    bs = params.block_size
    items = [(arr[off : off + bs], pre, codec) for off in range(0, arr.size, bs)]
    results = _run(_pack_block, items, params.n_threads)
    return CompressedContainer(
        elem_size=params.elem_size,
        preconditioner_id=KIND_IDS[params.preconditioner],
        codec_id=codec.id,
        original_size=int(arr.size),
        block_size=bs,
        blocks=tuple(r for r, _ in results),
        payloads=tuple(p for _, p in results),
    )


def _unpack_block(index, rec, payload, length, pre, codec, out):
    src = np.frombuffer(payload, dtype=np.uint8)
    if rec.stored_raw:
        block = src
    else:
        try:
            block = inverse_array(pre, codec.decompress_array(src, length))
        except DecodeError as exc:
            raise IntegrityError(f"block {index}: {exc}", block_index=index) from exc
    if zlib.crc32(block) != rec.checksum:
        raise IntegrityError(f"block {index}: checksum mismatch", block_index=index)
    out[:] = block


def unpack(container, n_threads: int | None = None) -> bytes:
    """Restore the original bytes.  ``container`` may be a container or its bytes."""
    if not isinstance(container, CompressedContainer):
        container = CompressedContainer.from_bytes(container)
    codec = codecs.get_by_id(container.codec_id)
    pre = Preconditioner(kind_from_id(container.preconditioner_id), container.elem_size)
    out = np.empty(container.original_size, dtype=np.uint8)
    items = []
    off = 0
    for i, (rec, payload, length) in enumerate(zip(container.blocks, container.payloads, container.block_lengths())):
        items.append((i, rec, payload, length, pre, codec, out[off : off + length]))
        off += length
    _run(_unpack_block, items, n_threads or default_threads())
    return out.tobytes()


def pack_bytes(data, params: EngineParams | None = None) -> bytes:
    return pack(data, params).to_bytes()
