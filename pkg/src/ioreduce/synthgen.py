"""Deterministic surrogate for particle-in-cell attribute data.

Random numbers come from a counter-based SplitMix64 stream: draw ``i`` of
stream ``s`` is ``mix64(seed + GAMMA * (s * 2**40 + i + 1))``.  Every
attribute owns its own stream id, so values do not depend on evaluation
order or chunking.  Uniform floats take the top 24 bits of a draw and are
exact in float32.  Momenta use the Irwin-Hall sum of 12 uniforms minus 6
(mean 0, variance 1, support [-6, 6]); the sum is exact in float64 so the
generator is bit-reproducible on any IEEE-754 platform.

Buffers are little-endian struct-of-arrays, in ``ATTRIBUTES`` order.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError

ATTRIBUTES = (
    "position_x",
    "position_y",
    "position_z",
    "momentum_x",
    "momentum_y",
    "momentum_z",
    "weighting",
    "cell_index",
)
FLOAT_ATTRIBUTES = ATTRIBUTES[:7]
BYTES_PER_PARTICLE = 4 * len(ATTRIBUTES)
MAX_PARTICLES = 1 << 40

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# stream ids
_S_POS = 0
_S_MOM = 8  # 3 components x 12 uniforms: 8..43
_S_WEIGHT = 64
_S_CELL = 65

_ENTROPY = re.compile(r"^(full|truncated\((\d+)\))$")


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def random_u64(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    ctr = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    ctr += np.uint64(stream << 40)
    with np.errstate(over="ignore"):
        return _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + ctr * _GAMMA)


def uniform24(seed: int, stream: int, count: int) -> np.ndarray:
    """Uniform float32 in [0, 1) with 24 random bits."""
    bits = random_u64(seed, stream, 0, count) >> np.uint64(40)
    return bits.astype(np.float32) * np.float32(2.0**-24)


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 0
    n_particles: int = 1 << 18
    momentum_sigma: float = 1.0
    cells_per_block: int = 4096
    entropy_class: str = "full"

    def __post_init__(self):
        if not 0 < self.n_particles <= MAX_PARTICLES:
            raise ConfigError(f"n_particles must lie in (0, 2**40], got {self.n_particles}")
        if self.cells_per_block <= 0:
            raise ConfigError("cells_per_block must be > 0")
        if not self.momentum_sigma > 0:
            raise ConfigError("momentum_sigma must be > 0")
        m = _ENTROPY.match(self.entropy_class)
        if m is None:
            raise ConfigError(f"entropy_class must be 'full' or 'truncated(k)', got {self.entropy_class!r}")
        if m.group(2) is not None and not 0 <= int(m.group(2)) <= 23:
            raise ConfigError("truncated(k) needs 0 <= k <= 23")

    @property
    def truncate_bits(self) -> int:
        m = _ENTROPY.match(self.entropy_class)
        return int(m.group(2)) if m.group(2) is not None else 0

    @property
    def nbytes(self) -> int:
        return self.n_particles * BYTES_PER_PARTICLE


@dataclass
class ParticleBlock:
    position_x: np.ndarray
    position_y: np.ndarray
    position_z: np.ndarray
    momentum_x: np.ndarray
    momentum_y: np.ndarray
    momentum_z: np.ndarray
    weighting: np.ndarray
    cell_index: np.ndarray

    @property
    def n_particles(self) -> int:
        return int(self.position_x.size)

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, a) for a in ATTRIBUTES]

    def validate(self) -> None:
        n = self.n_particles
        for name in ATTRIBUTES:
            arr = getattr(self, name)
            if arr.size != n:
                raise ConfigError(f"{name} has {arr.size} entries, expected {n}")
        for name in ("position_x", "position_y", "position_z"):
            arr = getattr(self, name)
            if arr.size and not (arr.min() >= 0 and arr.max() < 1):
                raise ConfigError(f"{name} outside [0, 1)")
        if self.weighting.size and not self.weighting.min() > 0:
            raise ConfigError("weighting must be positive")
        if np.any(np.diff(self.cell_index.astype(np.int64)) < 0):
            raise ConfigError("cell_index must be non-decreasing")

    def __eq__(self, other):
        if not isinstance(other, ParticleBlock):
            return NotImplemented
        return all(
            a.dtype == b.dtype and a.tobytes() == b.tobytes()
            for a, b in zip(self.arrays(), other.arrays())
        )


def _truncate(values: np.ndarray, k: int) -> np.ndarray:
    if k == 0:
        return values
    mask = np.uint32((0xFFFFFFFF << k) & 0xFFFFFFFF)
    return (values.view(np.uint32) & mask).view(np.float32)


def generate(spec: CorpusSpec) -> ParticleBlock:
    n = spec.n_particles
    seed = spec.seed
    pos = [uniform24(seed, _S_POS + i, n) for i in range(3)]

    mom = []
    sigma = np.float64(np.float32(spec.momentum_sigma))
    for c in range(3):
        acc = np.zeros(n, dtype=np.float64)
        for j in range(12):
            acc += uniform24(seed, _S_MOM + 12 * c + j, n)
        acc -= 6.0
        mom.append((acc * sigma).astype(np.float32))

    weighting = np.float32(0.5) + uniform24(seed, _S_WEIGHT, n)

    cells = (uniform24(seed, _S_CELL, n).astype(np.float64) * spec.cells_per_block).astype(np.uint32)
    cells.sort(kind="stable")

    k = spec.truncate_bits
    pos = [_truncate(a, k) for a in pos]
    mom = [_truncate(a, k) for a in mom]
    weighting = _truncate(weighting, k)
    return ParticleBlock(*pos, *mom, weighting, cells)


def concatenate(block: ParticleBlock) -> bytes:
    """Struct-of-arrays byte buffer, attributes in ``ATTRIBUTES`` order, little-endian."""
    parts = []
    for name in ATTRIBUTES:
        dtype = "<u4" if name == "cell_index" else "<f4"
        parts.append(np.ascontiguousarray(getattr(block, name), dtype=dtype))
    return b"".join(p.tobytes() for p in parts)


def split(buf) -> ParticleBlock:
    data = memoryview(buf)
    if len(data) % BYTES_PER_PARTICLE:
        raise FormatError(f"buffer length {len(data)} is not a multiple of {BYTES_PER_PARTICLE}")
    n = len(data) // BYTES_PER_PARTICLE
    arrays = []
    for i, name in enumerate(ATTRIBUTES):
        dtype = "<u4" if name == "cell_index" else "<f4"
        seg = np.frombuffer(data, dtype=dtype, count=n, offset=4 * n * i)
        arrays.append(seg.astype(np.uint32 if name == "cell_index" else np.float32))
    return ParticleBlock(*arrays)


def corpus_bytes(spec: CorpusSpec) -> bytes:
    return concatenate(generate(spec))


# --------------------------------------------------------------------------
# raw export / import

RAW_FORMAT = "ioreduce-raw"
RAW_VERSION = 1


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_raw(path: str | Path, buf, spec: CorpusSpec | None = None, label: str | None = None) -> Path:
    """Write ``buf`` as a plain binary file plus ``<path>.json`` metadata."""
    path = Path(path)
    data = bytes(buf)
    path.write_bytes(data)
    meta = {
        "format": RAW_FORMAT,
        "version": RAW_VERSION,
        "byte_order": "little",
        "nbytes": len(data),
        "elem_size": 4,
        "data_class": label or (spec.entropy_class if spec else "external"),
    }
    if spec is not None:
        meta["corpus"] = asdict(spec)
        meta["layout"] = [
            {"name": name, "dtype": "uint32" if name == "cell_index" else "float32", "offset": 4 * spec.n_particles * i}
            for i, name in enumerate(ATTRIBUTES)
        ]
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_raw(path: str | Path) -> tuple[bytes, dict]:
    path = Path(path)
    data = path.read_bytes()
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {"data_class": path.stem, "elem_size": 4}
    if meta.get("format", RAW_FORMAT) != RAW_FORMAT:
        raise FormatError(f"{side}: not an {RAW_FORMAT} sidecar")
    if "nbytes" in meta and meta["nbytes"] != len(data):
        raise FormatError(f"{path}: has {len(data)} bytes, sidecar says {meta['nbytes']}")
    return data, meta
