"""Closed-form scaling law for data reduction in synchronous parallel I/O.

Notation used throughout the package:

* ``S``          bytes written per node and output (``bytes_per_node``)
* ``t_prep``     time to gather data into I/O-ready chunks
* ``T_FS``       per-node filesystem write throughput
* ``T_memcpy``   in-node memory copy throughput
* ``T_C``        throughput of a reduction (compression) step, input bytes/s
* ``f_C``        reduction ratio, compressed size over original size

Throughputs normalized by ``T_memcpy`` are the "norm" variants
(``norm_codec_throughput`` = T_C/T_memcpy, ``norm_fs_throughput`` =
T_FS/T_memcpy).  The reduced write path costs

    t_io = t_prep + S/T_C + f_C * S/T_FS

and its ratio to a pass-through copy (T_C = T_memcpy, f_C = 1) is ``gamma``.
A reduction pays off (gamma < 1) exactly when

    norm_codec * (1 - f_C) / (1 - norm_codec) > norm_fs.

All functions are pure and thread-safe.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from importlib import resources

from .errors import ConfigError, DomainError
from .units import parse_size, parse_throughput, parse_time

#: Allowed relative mismatch between T_FS and B_parallel / N.
PARALLEL_BANDWIDTH_TOLERANCE = 0.05


@dataclass(frozen=True)
class SystemProfile:
    """A machine's I/O personality (one row set of a system table)."""

    name: str
    n_nodes: int
    bytes_per_node: float
    t_prep: float
    fs_throughput_per_node: float
    memcpy_throughput: float
    parallel_bandwidth: float | None = None

    def __post_init__(self):
        if self.n_nodes < 1:
            raise DomainError(f"{self.name}: n_nodes must be >= 1, got {self.n_nodes}")
        if not self.bytes_per_node > 0:
            raise DomainError(f"{self.name}: bytes_per_node must be > 0")
        if not self.t_prep >= 0:
            raise DomainError(f"{self.name}: t_prep must be >= 0")
        if not (self.fs_throughput_per_node > 0 and self.memcpy_throughput > 0):
            raise DomainError(f"{self.name}: throughputs must be > 0")
        if not self.fs_throughput_per_node < self.memcpy_throughput:
            raise DomainError(
                f"{self.name}: filesystem throughput must be below memcpy throughput "
                "(normalized T_FS < 1)"
            )
        if self.parallel_bandwidth is not None:
            if not self.parallel_bandwidth > 0:
                raise DomainError(f"{self.name}: parallel_bandwidth must be > 0")
            expected = self.parallel_bandwidth / self.n_nodes
            mismatch = abs(self.fs_throughput_per_node - expected) / self.fs_throughput_per_node
            if mismatch > PARALLEL_BANDWIDTH_TOLERANCE:
                raise DomainError(
                    f"{self.name}: fs_throughput_per_node deviates {mismatch:.1%} from "
                    f"parallel_bandwidth / n_nodes"
                )

    @property
    def norm_fs_throughput(self) -> float:
        return self.fs_throughput_per_node / self.memcpy_throughput

    @property
    def c_prep(self) -> float:
        """Dimensionless preparation cost t_prep / S * T_memcpy."""
        return self.t_prep / self.bytes_per_node * self.memcpy_throughput

    @classmethod
    def from_mapping(cls, data: Mapping) -> "SystemProfile":
        """Build from a key-value mapping whose values may carry unit suffixes."""
        required = (
            "name",
            "n_nodes",
            "bytes_per_node",
            "t_prep",
            "fs_throughput_per_node",
            "memcpy_throughput",
        )
        missing = [k for k in required if k not in data]
        if missing:
            raise ConfigError(f"profile is missing keys: {', '.join(missing)}")
        unknown = set(data) - set(required) - {"parallel_bandwidth", "description"}
        if unknown:
            raise ConfigError(f"profile has unknown keys: {', '.join(sorted(unknown))}")
        pb = data.get("parallel_bandwidth")
        return cls(
            name=str(data["name"]),
            n_nodes=int(data["n_nodes"]),
            bytes_per_node=parse_size(data["bytes_per_node"]),
            t_prep=parse_time(data["t_prep"]),
            fs_throughput_per_node=parse_throughput(data["fs_throughput_per_node"]),
            memcpy_throughput=parse_throughput(data["memcpy_throughput"]),
            parallel_bandwidth=None if pb is None else parse_throughput(pb),
        )


@dataclass(frozen=True)
class ReductionSpec:
    """A reduction algorithm's personality: throughput T_C and ratio f_C."""

    name: str
    throughput: float
    ratio: float

    def __post_init__(self):
        if not self.throughput > 0:
            raise DomainError(f"{self.name}: reduction throughput must be > 0")
        if not 0 < self.ratio <= 1:
            raise DomainError(f"{self.name}: ratio must lie in (0, 1], got {self.ratio}")

    def normalized(self, profile: SystemProfile) -> float:
        norm = self.throughput / profile.memcpy_throughput
        if norm > 1:
            raise DomainError(
                f"{self.name}: reduction throughput exceeds memcpy throughput of "
                f"{profile.name} (normalized {norm:.4g} > 1)"
            )
        return norm


@dataclass(frozen=True)
class ModelResult:
    t_io: float
    t_off_ram: float
    t_reduce: float
    effective_throughput: float
    gamma: float
    break_even: bool


def effective_throughput(n_nodes: int, bytes_per_node: float, t_with_io: float, t_without_io: float) -> float:
    """Application-perceived parallel throughput N*S / (t_with - t_without)."""
    if n_nodes < 1:
        raise DomainError("n_nodes must be >= 1")
    if not bytes_per_node > 0:
        raise DomainError("bytes_per_node must be > 0")
    if t_without_io < 0:
        raise DomainError("t_without_io must be >= 0")
    dt = t_with_io - t_without_io
    if not dt > 0:
        raise DomainError("I/O added no measurable time (t_with_io <= t_without_io)")
    return n_nodes * bytes_per_node / dt


def io_time_simple(profile: SystemProfile) -> float:
    return profile.t_prep + profile.bytes_per_node / profile.fs_throughput_per_node


def io_time_reduced(profile: SystemProfile, reduction: ReductionSpec) -> float:
    reduction.normalized(profile)  # rejects T_C > T_memcpy
    s = profile.bytes_per_node
    return profile.t_prep + s / reduction.throughput + reduction.ratio * s / profile.fs_throughput_per_node


def _check_open_unit(value: float, label: str) -> None:
    if not 0 < value < 1:
        raise DomainError(f"{label} must lie in (0, 1), got {value}")


def _check_ratio(ratio: float) -> None:
    if not 0 < ratio <= 1:
        raise DomainError(f"ratio must lie in (0, 1], got {ratio}")


def break_even_satisfied(norm_codec_throughput: float, ratio: float, norm_fs_throughput: float) -> bool:
    if norm_codec_throughput == 1:
        raise DomainError("break-even expression is singular at normalized codec throughput 1")
    _check_open_unit(norm_codec_throughput, "normalized codec throughput")
    _check_ratio(ratio)
    _check_open_unit(norm_fs_throughput, "normalized filesystem throughput")
    lhs = norm_codec_throughput * (1.0 - ratio) / (1.0 - norm_codec_throughput)
    return lhs > norm_fs_throughput


def min_codec_throughput(ratio: float, norm_fs_throughput: float) -> float:
    """Normalized codec throughput at which the break-even inequality is tight."""
    if ratio == 1:
        raise DomainError("no finite codec throughput breaks even without size reduction (ratio = 1)")
    if not 0 <= ratio < 1:
        raise DomainError(f"ratio must lie in [0, 1), got {ratio}")
    _check_open_unit(norm_fs_throughput, "normalized filesystem throughput")
    return norm_fs_throughput / (1.0 - ratio + norm_fs_throughput)


def perfect_reduction_threshold(norm_fs_throughput: float) -> float:
    """Break-even codec throughput in the limit of perfect reduction (ratio -> 0)."""
    if not 0 <= norm_fs_throughput < 1:
        raise DomainError(f"normalized filesystem throughput must lie in [0, 1), got {norm_fs_throughput}")
    return norm_fs_throughput / (1.0 + norm_fs_throughput)


def gamma(c_prep: float, ratio: float, norm_codec_throughput: float, norm_fs_throughput: float) -> float:
    """I/O time with reduction relative to I/O time with a pass-through copy."""
    if not c_prep >= 0:
        raise DomainError("c_prep must be >= 0")
    _check_ratio(ratio)
    if not 0 < norm_codec_throughput <= 1:
        raise DomainError(f"normalized codec throughput must lie in (0, 1], got {norm_codec_throughput}")
    _check_open_unit(norm_fs_throughput, "normalized filesystem throughput")
    numerator = c_prep + ratio / norm_fs_throughput + 1.0 / norm_codec_throughput
    denominator = c_prep + 1.0 / norm_fs_throughput + 1.0
    return numerator / denominator


def gamma_curve(profile: SystemProfile, ratio: float, codec_throughput_grid: Sequence[float]) -> list[tuple[float, float]]:
    """One iso-compression line: (normalized T_C, gamma) pairs for a fixed ratio."""
    grid = list(codec_throughput_grid)
    if not grid:
        raise DomainError("codec throughput grid is empty")
    for a, b in zip(grid, grid[1:]):
        if not b > a:
            raise DomainError("codec throughput grid must be strictly increasing")
    c_prep = profile.c_prep
    fs = profile.norm_fs_throughput
    return [(t, gamma(c_prep, ratio, t, fs)) for t in grid]


def node_average_throughput(parallel_bandwidth: float, n_nodes: int) -> float:
    if n_nodes < 1:
        raise DomainError("n_nodes must be >= 1")
    return parallel_bandwidth / n_nodes


def evaluate(profile: SystemProfile, reduction: ReductionSpec) -> ModelResult:
    """Evaluate the whole model for one (system, reduction) pair."""
    norm_c = reduction.normalized(profile)
    s = profile.bytes_per_node
    t_io = io_time_reduced(profile, reduction)
    g = gamma(profile.c_prep, reduction.ratio, norm_c, profile.norm_fs_throughput)
    if norm_c < 1:
        be = break_even_satisfied(norm_c, reduction.ratio, profile.norm_fs_throughput)
    else:
        # the pass-through baseline itself never beats itself
        be = False
    return ModelResult(
        t_io=t_io,
        t_off_ram=reduction.ratio * s / profile.fs_throughput_per_node,
        t_reduce=s / reduction.throughput,
        effective_throughput=profile.n_nodes * s / t_io,
        gamma=g,
        break_even=be,
    )


def crossing_throughput(c_prep: float, ratio: float, norm_fs_throughput: float, tol: float = 1e-15) -> float:
    """Locate gamma(T) = 1 in T by bisection, without using the closed form.

    Serves as an independent numerical check of ``min_codec_throughput``.
    """
    _check_ratio(ratio)
    if ratio == 1:
        raise DomainError("gamma never drops below 1 when ratio = 1")
    lo, hi = 1e-300, 1.0
    # gamma(lo) is huge, gamma(1) = (c + f/F + 1)/(c + 1/F + 1) < 1
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if gamma(c_prep, ratio, mid, norm_fs_throughput) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(hi, 1e-300):
            break
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# presets

PRESET_NAMES = ("titan", "hypnos_k20")


def available_presets() -> list[str]:
    files = resources.files("ioreduce").joinpath("presets")
    return sorted(p.name[: -len(".toml")] for p in files.iterdir() if p.name.endswith(".toml"))


def load_preset(name: str) -> SystemProfile:
    from .config import load_profile_text

    path = resources.files("ioreduce").joinpath("presets").joinpath(f"{name}.toml")
    if not path.is_file():
        raise ConfigError(
            f"unknown profile {name!r}; available: {', '.join(available_presets())}"
        )
    return load_profile_text(path.read_text(), source=f"preset {name}")
