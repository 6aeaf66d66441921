"""Throughput and ratio measurements for codec / preconditioner / thread combos.

Timing covers ``engine.pack`` only (precondition + codec + container
assembly), never data generation or file writes.  Every measurement runs
one discarded warmup followed by ``reps`` timed runs; the median is
reported, with min and max alongside.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import engine, model, synthgen
from .codec import get as get_codec
from .errors import ConfigError, DomainError, IOReduceError
from .units import MiB, parse_throughput

MIN_REPS = 5
MIN_MEMCPY_SIZE = 64 * MiB
UNSTABLE_SPREAD = 0.5

VERDICTS = ("beneficial", "size_only", "harmful")


@dataclass
class BenchRecord:
    codec: str
    preconditioner: str
    n_threads: int
    data_class: str
    input_bytes: int
    container_bytes: int
    t_compress: float
    t_min: float
    t_max: float
    throughput: float
    ratio: float
    norm_throughput: float
    memcpy_throughput: float
    repetitions: int
    block_size: int = engine.DEFAULT_BLOCK_SIZE
    elem_size: int = 4
    unstable: bool = False
    status: str = "ok"
    error: str = ""
    timestamp: str = ""
    adapter_version: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("ok", "imported")


RECORD_FIELDS = [f.name for f in fields(BenchRecord)]


@dataclass(frozen=True)
class Verdict:
    verdict: str
    projected: bool
    norm_throughput: float
    gamma: float | None


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def measure_memcpy(size: int = MIN_MEMCPY_SIZE, reps: int = MIN_REPS) -> float:
    """Single-thread copy throughput in bytes/s (median of ``reps`` after a cold run)."""
    if size < MIN_MEMCPY_SIZE:
        raise ConfigError(f"memcpy size must be >= 64 MiB, got {size}")
    if reps < MIN_REPS:
        raise ConfigError(f"need at least {MIN_REPS} repetitions, got {reps}")
    try:
        src = np.ones(size, dtype=np.uint8)
        dst = np.empty_like(src)
    except MemoryError as exc:
        raise MemoryError(f"cannot allocate 2 x {size} bytes for memcpy baseline") from exc
    np.copyto(dst, src)  # cold start, discarded
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        np.copyto(dst, src)
        times.append(time.perf_counter() - t0)
    return size / statistics.median(times)


def measure_codec(
    params: engine.EngineParams,
    data,
    reps: int = MIN_REPS,
    memcpy_throughput: float | None = None,
    data_class: str = "custom",
) -> BenchRecord:
    if reps < MIN_REPS:
        raise ConfigError(f"need at least {MIN_REPS} repetitions, got {reps}")
    if memcpy_throughput is None:
        memcpy_throughput = measure_memcpy()
    arr = np.frombuffer(data, dtype=np.uint8) if not isinstance(data, np.ndarray) else data.reshape(-1).view(np.uint8)
    if arr.size == 0:
        raise ConfigError("cannot measure throughput on an empty buffer")
    codec = get_codec(params.codec)
    container = engine.pack(arr, params)  # warmup, discarded
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        container = engine.pack(arr, params)
        times.append(time.perf_counter() - t0)
    median = statistics.median(times)
    throughput = arr.size / median
    nbytes = container.nbytes
    return BenchRecord(
        codec=params.codec,
        preconditioner=params.preconditioner,
        n_threads=params.n_threads,
        data_class=data_class,
        input_bytes=int(arr.size),
        container_bytes=nbytes,
        t_compress=median,
        t_min=min(times),
        t_max=max(times),
        throughput=throughput,
        ratio=nbytes / arr.size,
        norm_throughput=throughput / memcpy_throughput,
        memcpy_throughput=memcpy_throughput,
        repetitions=reps,
        block_size=params.block_size,
        elem_size=params.elem_size,
        unstable=(max(times) - min(times)) / median > UNSTABLE_SPREAD,
        timestamp=_now(),
        adapter_version=codec.version,
    )


def _failed(codec, pre, threads, data_class, exc, params_block, elem_size, memcpy) -> BenchRecord:
    nan = float("nan")
    return BenchRecord(
        codec=codec,
        preconditioner=pre,
        n_threads=threads,
        data_class=data_class,
        input_bytes=0,
        container_bytes=0,
        t_compress=nan,
        t_min=nan,
        t_max=nan,
        throughput=nan,
        ratio=nan,
        norm_throughput=nan,
        memcpy_throughput=memcpy,
        repetitions=0,
        block_size=params_block,
        elem_size=elem_size,
        status="failed",
        error=f"{type(exc).__name__}: {exc}",
        timestamp=_now(),
    )


def sweep(
    codecs: Sequence[str],
    preconditioners: Sequence[str],
    thread_counts: Sequence[int],
    data_classes: Sequence[str],
    reps: int = MIN_REPS,
    n_particles: int = 1 << 18,
    seed: int = 0,
    block_size: int = engine.DEFAULT_BLOCK_SIZE,
    memcpy_throughput: float | None = None,
    datasets: dict[str, bytes] | None = None,
) -> list[BenchRecord]:
    """One record per (data class, codec, preconditioner, threads), in that nesting order.

    ``datasets`` maps extra data-class labels to imported buffers; other
    labels are entropy classes of the synthetic corpus.  A failing cell is
    recorded with ``status="failed"`` and the sweep carries on.
    """
    for label, values in (
        ("codecs", codecs),
        ("preconditioners", preconditioners),
        ("thread counts", thread_counts),
        ("data classes", data_classes),
    ):
        if not values:
            raise ConfigError(f"benchmark matrix has no {label}")
    if memcpy_throughput is None:
        memcpy_throughput = measure_memcpy()
    datasets = dict(datasets or {})
    records = []
    for data_class in data_classes:
        try:
            if data_class in datasets:
                data = datasets[data_class]
            else:
                spec = synthgen.CorpusSpec(seed=seed, n_particles=n_particles, entropy_class=data_class)
                data = synthgen.corpus_bytes(spec)
        except IOReduceError as exc:
            for c in codecs:
                for p in preconditioners:
                    for t in thread_counts:
                        records.append(_failed(c, p, t, data_class, exc, block_size, 4, memcpy_throughput))
            continue
        for c in codecs:
            for p in preconditioners:
                for t in thread_counts:
                    try:
                        params = engine.EngineParams(block_size=block_size, elem_size=4, preconditioner=p, codec=c, n_threads=t)
                        rec = measure_codec(params, data, reps, memcpy_throughput, data_class)
                    except (IOReduceError, ValueError) as exc:
                        rec = _failed(c, p, t, data_class, exc, block_size, 4, memcpy_throughput)
                    records.append(rec)
    return records


def classify(record: BenchRecord, profile: model.SystemProfile) -> Verdict:
    """Place a measurement against a system's break-even threshold.

    The codec throughput is normalized by the profile's memcpy throughput;
    when that differs from the record's own baseline the verdict is marked
    as projected.  Expanding or neutral reductions (ratio >= 1) never reach
    the model and are ``harmful``.
    """
    norm = record.throughput / profile.memcpy_throughput
    projected = record.memcpy_throughput != profile.memcpy_throughput
    if not 0 < norm < 1:
        raise DomainError(
            f"{record.codec}: normalized throughput {norm:.4g} on {profile.name} is outside (0, 1)"
        )
    if not record.ratio > 0:
        raise DomainError(f"{record.codec}: ratio must be > 0")
    if record.ratio >= 1:
        g = model.gamma(profile.c_prep, 1.0, norm, profile.norm_fs_throughput) if record.ratio == 1 else None
        return Verdict("harmful", projected, norm, g)
    fs = profile.norm_fs_throughput
    g = model.gamma(profile.c_prep, record.ratio, norm, fs)
    if model.break_even_satisfied(norm, record.ratio, fs):
        return Verdict("beneficial", projected, norm, g)
    return Verdict("size_only", projected, norm, g)


def verdict_label(record: BenchRecord, profile: model.SystemProfile) -> str:
    """``classify`` for tabular output: failures and out-of-domain cells get a label too."""
    if not record.ok:
        return "failed"
    try:
        return classify(record, profile).verdict
    except DomainError:
        return "out_of_domain"


# --------------------------------------------------------------------------
# export / import


def _row(record: BenchRecord) -> dict:
    return asdict(record)


def to_csv(records: Iterable[BenchRecord], profiles: Sequence[model.SystemProfile] = ()) -> str:
    buf = io.StringIO()
    extra = [f"verdict_{p.name}" for p in profiles]
    writer = csv.DictWriter(buf, fieldnames=RECORD_FIELDS + extra, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        row = _row(rec)
        for p in profiles:
            row[f"verdict_{p.name}"] = verdict_label(rec, p)
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def to_jsonl(records: Iterable[BenchRecord], profiles: Sequence[model.SystemProfile] = ()) -> str:
    lines = []
    for rec in records:
        row = _row(rec)
        if profiles:
            row["verdicts"] = {p.name: verdict_label(rec, p) for p in profiles}
        lines.append(json.dumps(row, allow_nan=True))
    return "".join(line + "\n" for line in lines)


def _coerce(name: str, value: str):
    kind = {f.name: f.type for f in fields(BenchRecord)}[name]
    if kind in ("int",):
        return int(float(value))
    if kind in ("float",):
        return float(value)
    if kind in ("bool",):
        return value.strip().lower() in ("1", "true", "yes")
    return value


def from_csv(text: str) -> list[BenchRecord]:
    """Read records written by ``to_csv`` (verdict columns are ignored)."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        kwargs = {k: _coerce(k, v) for k, v in row.items() if k in RECORD_FIELDS}
        out.append(BenchRecord(**kwargs))
    return out


def from_jsonl(text: str) -> list[BenchRecord]:
    out = []
    for line in text.splitlines():
        if line.strip():
            row = json.loads(line)
            out.append(BenchRecord(**{k: v for k, v in row.items() if k in RECORD_FIELDS}))
    return out


def import_external(text: str, default_memcpy: float | None = None) -> list[BenchRecord]:
    """Read externally measured (T_C, f_C) points.

    CSV columns: ``codec`` and ``ratio`` are required, plus either
    ``throughput`` (unit suffix allowed, e.g. ``"1.2 GiB/s"``) together with
    ``memcpy_throughput`` (or ``default_memcpy``), or ``norm_throughput``.
    ``preconditioner``, ``n_threads`` and ``data_class`` are optional.
    """
    out = []
    reader = csv.DictReader(io.StringIO(text))
    for lineno, row in enumerate(reader, start=2):
        try:
            name = row["codec"]
            ratio = float(row["ratio"])
            memcpy = row.get("memcpy_throughput")
            memcpy = parse_throughput(memcpy) if memcpy else default_memcpy
            if row.get("throughput"):
                tput = parse_throughput(row["throughput"])
                if memcpy is None:
                    raise ConfigError("throughput given without memcpy_throughput")
                norm = tput / memcpy
            elif row.get("norm_throughput"):
                norm = float(row["norm_throughput"])
                if memcpy is None:
                    raise ConfigError("norm_throughput given without a memcpy baseline")
                tput = norm * memcpy
            else:
                raise ConfigError("need a throughput or norm_throughput column")
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"import line {lineno}: {exc}") from None
        nan = float("nan")
        out.append(
            BenchRecord(
                codec=name,
                preconditioner=row.get("preconditioner") or "unknown",
                n_threads=int(row.get("n_threads") or 0),
                data_class=row.get("data_class") or "imported",
                input_bytes=0,
                container_bytes=0,
                t_compress=nan,
                t_min=nan,
                t_max=nan,
                throughput=tput,
                ratio=ratio,
                norm_throughput=norm,
                memcpy_throughput=memcpy,
                repetitions=0,
                status="imported",
                adapter_version=row.get("adapter_version") or "",
            )
        )
    return out
