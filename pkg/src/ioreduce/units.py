"""Unit conventions and quantity parsing.

Internally every size is in bytes, every time in seconds and every
throughput in bytes/second.  Binary prefixes (KiB, MiB, GiB, TiB) are
2**10-based; decimal prefixes (KB, MB, GB, TB) are 10**3-based.  The long
spellings ``GiByte`` / ``GByte`` are accepted as aliases.
"""

from __future__ import annotations

import re

KiB = 2**10
MiB = 2**20
GiB = 2**30
TiB = 2**40

KB = 10**3
MB = 10**6
GB = 10**9
TB = 10**12

_SIZE_FACTORS = {
    "B": 1,
    "KiB": KiB,
    "MiB": MiB,
    "GiB": GiB,
    "TiB": TiB,
    "KB": KB,
    "MB": MB,
    "GB": GB,
    "TB": TB,
}

_TIME_FACTORS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "min": 60.0, "h": 3600.0}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z/]*)\s*$")


class UnitError(ValueError):
    pass


def _normalize_size_unit(unit: str) -> str:
    # GiByte -> GiB, GByte -> GB, Byte/Bytes -> B
    unit = re.sub(r"Bytes?$", "B", unit)
    return unit


def _split(text: str) -> tuple[float, str]:
    m = _QUANTITY.match(str(text))
    if m is None:
        raise UnitError(f"cannot parse quantity {text!r}")
    return float(m.group(1)), m.group(2)


def parse_size(text: str | int | float) -> float:
    """Parse ``"4 GiB"`` style sizes into bytes.  Bare numbers are bytes."""
    if isinstance(text, (int, float)):
        return float(text)
    value, unit = _split(text)
    unit = _normalize_size_unit(unit or "B")
    if unit not in _SIZE_FACTORS:
        raise UnitError(f"unknown size unit {unit!r} in {text!r}")
    return value * _SIZE_FACTORS[unit]


def parse_time(text: str | int | float) -> float:
    """Parse ``"50 s"`` / ``"250 ms"`` into seconds.  Bare numbers are seconds."""
    if isinstance(text, (int, float)):
        return float(text)
    value, unit = _split(text)
    unit = unit or "s"
    if unit not in _TIME_FACTORS:
        raise UnitError(f"unknown time unit {unit!r} in {text!r}")
    return value * _TIME_FACTORS[unit]


def parse_throughput(text: str | int | float) -> float:
    """Parse ``"0.055 GiB/s"`` into bytes/second.  Bare numbers are B/s."""
    if isinstance(text, (int, float)):
        return float(text)
    value, unit = _split(text)
    if not unit:
        return value
    if not unit.endswith("/s"):
        raise UnitError(f"throughput {text!r} needs a '/s' unit")
    size_unit = _normalize_size_unit(unit[:-2])
    if size_unit not in _SIZE_FACTORS:
        raise UnitError(f"unknown size unit {size_unit!r} in {text!r}")
    return value * _SIZE_FACTORS[size_unit]


def format_size(nbytes: float) -> str:
    for unit in ("TiB", "GiB", "MiB", "KiB"):
        if abs(nbytes) >= _SIZE_FACTORS[unit]:
            return f"{nbytes / _SIZE_FACTORS[unit]:.4g} {unit}"
    return f"{nbytes:.4g} B"


def format_throughput(bps: float) -> str:
    return format_size(bps) + "/s"
