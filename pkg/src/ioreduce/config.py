"""TOML-based configuration files: system profiles, scenarios, bench matrices.

Quantities are strings with explicit units (``"4 GiB"``, ``"0.055 GiB/s"``,
``"50 s"``), parsed with ``ioreduce.units``.  Errors carry the line number
of the offending key where it can be located.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, DomainError
from .model import SystemProfile
from .pipesim import StageSpec, WorkloadSpec, validate_stages
from .units import UnitError, parse_size, parse_throughput, parse_time


def _parse_toml(text: str, source: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _line_of(text: str, key: str, occurrence: int = 0) -> int | None:
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
    seen = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            if seen == occurrence:
                return lineno
            seen += 1
    return None


def _where(source: str, text: str, key: str, occurrence: int = 0) -> str:
    line = _line_of(text, key, occurrence)
    return f"{source}, line {line}" if line else source


def load_profile_text(text: str, source: str = "<profile>") -> SystemProfile:
    data = _parse_toml(text, source)
    try:
        return SystemProfile.from_mapping(data)
    except UnitError as exc:
        key = next((k for k, v in data.items() if isinstance(v, str) and repr(v) in str(exc)), "")
        raise ConfigError(f"{_where(source, text, key) if key else source}: {exc}") from None
    except (DomainError, ConfigError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_profile(ref: str) -> SystemProfile:
    """A preset name or a path to a profile file."""
    from .model import load_preset

    path = Path(ref)
    if path.suffix == ".toml" or path.exists():
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read profile {ref}: {exc}") from None
        return load_profile_text(text, source=str(path))
    return load_preset(ref)


# --------------------------------------------------------------------------
# scenarios


@dataclass
class Scenario:
    name: str
    stages: list[StageSpec]
    workload: WorkloadSpec
    description: str = ""
    source: str = ""


_STAGE_KEYS = {"name", "kind", "throughput", "ratio", "capacity"}
_WORKLOAD_KEYS = {"bytes_per_output", "output_period", "n_outputs", "mode", "t_prep"}


def load_scenario_text(text: str, source: str = "<scenario>") -> Scenario:
    data = _parse_toml(text, source)
    if "workload" not in data or "stage" not in data:
        raise ConfigError(f"{source}: a scenario needs a [workload] table and [[stage]] entries")
    wl = data["workload"]
    unknown = set(wl) - _WORKLOAD_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown workload keys {sorted(unknown)}")

    def convert(fn, value, key, occurrence=0):
        try:
            return fn(value)
        except (UnitError, ValueError, TypeError) as exc:
            raise ConfigError(f"{_where(source, text, key, occurrence)}: {key}: {exc}") from None

    try:
        workload = WorkloadSpec(
            bytes_per_output=convert(parse_size, wl["bytes_per_output"], "bytes_per_output"),
            output_period=convert(parse_time, wl["output_period"], "output_period"),
            n_outputs=convert(int, wl["n_outputs"], "n_outputs"),
            mode=str(wl.get("mode", "synchronous")),
            t_prep=convert(parse_time, wl.get("t_prep", 0), "t_prep"),
        )
    except KeyError as exc:
        raise ConfigError(f"{source}: workload is missing {exc}") from None

    counters: dict[str, int] = {}
    stages = []
    for i, st in enumerate(data["stage"]):
        unknown = set(st) - _STAGE_KEYS
        if unknown:
            raise ConfigError(f"{source}: stage {i} has unknown keys {sorted(unknown)}")
        if "kind" not in st:
            raise ConfigError(f"{source}: stage {i} needs a kind")
        kind = st["kind"]
        name = st.get("name", f"{kind}{i}")
        kwargs = {}
        for key, fn in (("throughput", parse_throughput), ("capacity", parse_size), ("ratio", float)):
            if key in st:
                occ = counters.get(key, 0)
                kwargs[key] = convert(fn, st[key], key, occ)
        for key in st:
            counters[key] = counters.get(key, 0) + 1
        stages.append(StageSpec(name=name, kind=kind, **kwargs))
    try:
        validate_stages(stages)
        workload.validate()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return Scenario(
        name=str(data.get("name", Path(source).stem)),
        stages=stages,
        workload=workload,
        description=str(data.get("description", "")),
        source=source,
    )


def load_scenario(ref: str) -> Scenario:
    """A shipped scenario name or a path to a scenario file."""
    from importlib import resources

    path = Path(ref)
    if path.exists() or path.suffix == ".toml":
        text = path.read_text()  # OSError propagates: an I/O failure, not a config one
        return load_scenario_text(text, source=str(path))
    shipped = resources.files("ioreduce").joinpath("scenarios").joinpath(f"{ref}.toml")
    if shipped.is_file():
        return load_scenario_text(shipped.read_text(), source=f"scenario {ref}")
    raise FileNotFoundError(f"no scenario file or shipped scenario named {ref!r}; shipped: {', '.join(shipped_scenarios())}")


def shipped_scenarios() -> list[str]:
    from importlib import resources

    root = resources.files("ioreduce").joinpath("scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


# --------------------------------------------------------------------------
# bench matrices


@dataclass
class BenchMatrix:
    codecs: list[str] = field(default_factory=lambda: ["null", "rle", "reference-lz", "zlib"])
    preconditioners: list[str] = field(default_factory=lambda: ["none", "shuffle", "bitshuffle"])
    threads: list[int] = field(default_factory=lambda: [1, 4])
    data_classes: list[str] = field(default_factory=lambda: ["full", "truncated(16)"])
    reps: int = 5
    n_particles: int = 1 << 18
    seed: int = 0
    block_size: int = 1 << 20


def load_matrix_text(text: str, source: str = "<matrix>") -> BenchMatrix:
    data = _parse_toml(text, source)
    matrix = BenchMatrix()
    for key, value in data.items():
        if not hasattr(matrix, key):
            raise ConfigError(f"{_where(source, text, key)}: unknown matrix key {key!r}")
        if key == "block_size":
            value = int(parse_size(value))
        setattr(matrix, key, value)
    return matrix
