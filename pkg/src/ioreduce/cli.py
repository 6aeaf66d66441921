"""Command-line frontend.

Exit codes (stable):

    0  success
    2  configuration error (bad flags, profile, scenario, matrix, unknown codec)
    3  integrity error (block checksum mismatch while unpacking)
    4  partial benchmark failure (some matrix cells failed, the rest was written)
    5  I/O error (missing input, unwritable output)
    6  format error (not a container, truncated, unsupported version or codec id)
    7  model domain error (inputs outside the model's domain)

``IOREDUCE_THREADS`` sets the default for every ``--threads`` flag.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, bench, engine, model, pipesim, report, synthgen
from . import codec as codecs
from .config import BenchMatrix, load_matrix_text, load_profile, load_scenario
from .errors import CodecLookupError, ConfigError, DomainError, FormatError, IntegrityError
from .precondition import KINDS
from .units import UnitError, parse_size

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRITY = 3
EXIT_PARTIAL = 4
EXIT_IO = 5
EXIT_FORMAT = 6
EXIT_DOMAIN = 7

DEFAULT_RATIOS = (0.1, 0.25, 0.5, 0.75, 1.0)


@dataclass
class RunConfig:
    """Fully resolved inputs of one invocation; written next to every report."""

    subcommand: str
    profiles: list[dict] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    out_dir: str = ""
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=str) + "\n"


# --------------------------------------------------------------------------
# helpers


def _floats(text: str, what: str) -> list[float]:
    items = [t for t in (s.strip() for s in text.split(",")) if t]
    if not items:
        raise ConfigError(f"{what} list is empty")
    try:
        return [float(t) for t in items]
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _names(text: str, what: str) -> list[str]:
    items = [t for t in (s.strip() for s in text.split(",")) if t]
    if not items:
        raise ConfigError(f"{what} list is empty")
    return items


def _ints(text: str, what: str) -> list[int]:
    try:
        return [int(t) for t in _names(text, what)]
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _size(text: str) -> int:
    try:
        return int(parse_size(text))
    except UnitError as exc:
        raise ConfigError(str(exc)) from None


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    print(f"wrote {path}")


def _threads(value) -> int:
    n = engine.default_threads() if value is None else value
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    return n


def _profiles(refs: list[str]) -> list[model.SystemProfile]:
    return [load_profile(r) for r in refs]


# --------------------------------------------------------------------------
# model


def cmd_model(args) -> int:
    ratios = _floats(args.ratios, "f_C")
    for f in ratios:
        if not 0 <= f <= 1:
            raise DomainError(f"compression ratio {f} outside [0, 1]")
    if args.grid:
        grid = _floats(args.grid, "grid")
    else:
        if args.grid_points < 2:
            raise ConfigError("--grid-points must be >= 2")
        lo, hi = math.log10(args.grid_min), math.log10(args.grid_max)
        grid = [10 ** (lo + (hi - lo) * i / (args.grid_points - 1)) for i in range(args.grid_points)]
    profiles = _profiles(args.profile)
    out = _out_dir(args.out)
    cfg = RunConfig(
        "model",
        [report.profile_dict(p) for p in profiles],
        {"ratios": ratios, "grid": grid},
        str(out),
    )
    for p in profiles:
        series = report.gamma_series(p, ratios, grid)
        _write(out / f"model_{p.name}_series.csv", report.gamma_series_csv(p, series))
        meta = {"config": asdict(cfg)}
        _write(out / f"model_{p.name}.svg", report.gamma_svg(p, series, meta=meta))
        th = report.thresholds(p, ratios)
        _write(out / f"model_{p.name}_thresholds.json", json.dumps(th, indent=2) + "\n")
        print(f"{p.name}: norm T_FS = {th['norm_fs_throughput']:.6g}, perfect-reduction threshold = {th['perfect_reduction_threshold']:.6g}")
        for f, t in th["min_codec_throughput"].items():
            print(f"  f_C = {f}: min normalized codec throughput = {t if t is None else format(t, '.6g')}")
    _write(out / "run_config.json", cfg.to_json())
    return EXIT_OK


# --------------------------------------------------------------------------
# bench


def _matrix(args) -> BenchMatrix:
    if args.matrix:
        path = Path(args.matrix)
        matrix = load_matrix_text(path.read_text(), source=str(path))
    else:
        matrix = BenchMatrix()
    if args.codecs:
        matrix.codecs = _names(args.codecs, "codec")
    if args.preconditioners:
        matrix.preconditioners = _names(args.preconditioners, "preconditioner")
    if args.threads:
        matrix.threads = _ints(args.threads, "thread count")
    if args.data_classes:
        matrix.data_classes = _names(args.data_classes, "data class")
    for key in ("reps", "n_particles", "seed"):
        if getattr(args, key) is not None:
            setattr(matrix, key, getattr(args, key))
    if args.block_size:
        matrix.block_size = _size(args.block_size)
    return matrix


def cmd_bench(args) -> int:
    matrix = _matrix(args)
    profiles = _profiles(_names(args.profiles, "profile"))
    datasets = {}
    for ref in args.input or []:
        data, _ = synthgen.read_raw(ref)
        # file names keep imported data apart from the synthetic entropy classes
        label = f"file:{Path(ref).name}"
        datasets[label] = data
        if label not in matrix.data_classes:
            matrix.data_classes.append(label)
    imported = []
    if args.import_csv:
        imported = bench.import_external(Path(args.import_csv).read_text(), default_memcpy=None)
    out = _out_dir(args.out)

    memcpy = bench.measure_memcpy(_size(args.memcpy_size))
    print(f"memcpy baseline: {memcpy / 2**30:.3f} GiB/s")
    records = bench.sweep(
        matrix.codecs,
        matrix.preconditioners,
        matrix.threads,
        matrix.data_classes,
        reps=matrix.reps,
        n_particles=matrix.n_particles,
        seed=matrix.seed,
        block_size=matrix.block_size,
        memcpy_throughput=memcpy,
        datasets=datasets,
    )
    cfg = RunConfig(
        "bench",
        [report.profile_dict(p) for p in profiles],
        {
            "matrix": asdict(matrix),
            "memcpy_throughput": memcpy,
            "inputs": list(args.input or []),
            "import": args.import_csv,
        },
        str(out),
    )
    everything = records + imported
    _write(out / "bench.csv", bench.to_csv(everything, profiles))
    _write(out / "bench.jsonl", bench.to_jsonl(everything, profiles))
    _write(out / "bench_summary.md", report.markdown_summary(everything, profiles))
    if not args.no_svg:
        _write(out / "bench.svg", report.scatter_svg(everything, profiles, meta={"config": asdict(cfg)}))
    _write(out / "run_config.json", cfg.to_json())
    failed = [r for r in records if not r.ok]
    for r in failed:
        print(f"failed: {r.codec}/{r.preconditioner}/{r.n_threads}t/{r.data_class}: {r.error}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


# --------------------------------------------------------------------------
# simulate


def _model_prediction(scenario) -> float | None:
    """Closed-form t_IO for a synchronous [reduce] -> drain pipeline, else None."""
    st, wl = scenario.stages, scenario.workload
    if wl.mode != "synchronous":
        return None
    kinds = [s.kind for s in st]
    S = wl.bytes_per_output
    if kinds == ["drain"]:
        return wl.t_prep + S / st[0].throughput
    if kinds == ["reduce", "drain"]:
        return wl.t_prep + S / st[0].throughput + st[0].ratio * S / st[1].throughput
    return None


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    out = _out_dir(args.out)
    timeline = pipesim.simulate(scenario.stages, scenario.workload)
    summary = timeline.summary()
    predicted = _model_prediction(scenario)
    summary["model_t_io_s"] = predicted
    if predicted:
        summary["model_relative_error"] = abs(timeline.mean_t_io - predicted) / predicted
    summary["config"] = asdict(
        RunConfig(
            "simulate",
            [],
            {
                "scenario": scenario.name,
                "source": scenario.source,
                "description": scenario.description,
                "stages": [asdict(s) for s in scenario.stages],
                "workload": asdict(scenario.workload),
            },
            str(out),
        )
    )
    _write(out / f"{scenario.name}_timeline.csv", timeline.to_csv())
    _write(out / f"{scenario.name}_summary.json", json.dumps(summary, indent=2, default=str) + "\n")
    print(f"scenario {scenario.name}: mean t_IO = {timeline.mean_t_io:.6g} s, backlog_detected = {str(timeline.backlog_detected).lower()}")
    if timeline.effective_throughput is not None:
        print(f"  effective throughput = {timeline.effective_throughput / 2**30:.6g} GiB/s")
    for name, slope in summary["occupancy_slope_B_per_output"].items():
        print(f"  buffer {name}: occupancy slope = {slope / 2**30:.6g} GiB/output")
    return EXIT_OK


# --------------------------------------------------------------------------
# pack / unpack / corpus


def cmd_pack(args) -> int:
    data = Path(args.input).read_bytes()
    params = engine.EngineParams(
        block_size=_size(args.block_size),
        elem_size=args.elem_size,
        preconditioner=args.preconditioner,
        codec=args.codec,
        n_threads=_threads(args.threads),
    )
    container = engine.pack(data, params)
    blob = container.to_bytes()
    Path(args.output).write_bytes(blob)
    print(
        f"{args.input}: {len(data)} -> {len(blob)} bytes (f_C = {container.ratio:.6g}), "
        f"{container.n_blocks} blocks, crc32 {zlib.crc32(blob):08x}"
    )
    return EXIT_OK


def cmd_unpack(args) -> int:
    blob = Path(args.input).read_bytes()
    data = engine.unpack(blob, n_threads=_threads(args.threads))
    Path(args.output).write_bytes(data)
    print(f"{args.input}: restored {len(data)} bytes, crc32 {zlib.crc32(data):08x}")
    return EXIT_OK


def cmd_corpus(args) -> int:
    spec = synthgen.CorpusSpec(
        seed=args.seed,
        n_particles=args.n_particles,
        momentum_sigma=args.momentum_sigma,
        cells_per_block=args.cells_per_block,
        entropy_class=args.entropy_class,
    )
    path = synthgen.write_raw(args.output, synthgen.corpus_bytes(spec), spec)
    print(f"wrote {path} ({spec.nbytes} bytes) and {synthgen.sidecar_path(path)}")
    return EXIT_OK


# --------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    records = []
    for ref in args.bench or []:
        text = Path(ref).read_text()
        records += bench.from_jsonl(text) if ref.endswith(".jsonl") else bench.from_csv(text)
    if args.import_csv:
        records += bench.import_external(Path(args.import_csv).read_text())
    profiles = _profiles(_names(args.profiles, "profile"))
    ratios = _floats(args.ratios, "f_C")
    grid = list(report.DEFAULT_GRID)
    out = _out_dir(args.out)
    cfg = RunConfig(
        "report",
        [report.profile_dict(p) for p in profiles],
        {"bench": args.bench, "import": args.import_csv, "ratios": ratios, "grid": grid},
        str(out),
    )
    meta = {"config": asdict(cfg)}
    for p in profiles:
        points = []
        for r in records:
            if not r.ok or not r.ratio > 0:
                continue
            # projected onto this profile's memcpy baseline
            norm = r.throughput / p.memcpy_throughput
            if 0 < norm <= 1 and r.ratio <= 1:
                g = model.gamma(p.c_prep, r.ratio, norm, p.norm_fs_throughput)
                points.append((norm, g, f"{r.codec}/{r.preconditioner}/{r.n_threads}t/{r.data_class}"))
        series = report.gamma_series(p, ratios, grid)
        _write(out / f"report_{p.name}_gamma.svg", report.gamma_svg(p, series, points, meta=meta))
    if records:
        _write(out / "report_scatter.svg", report.scatter_svg(records, profiles, meta=meta))
        _write(out / "report_summary.md", report.markdown_summary(records, profiles))
    _write(out / "run_config.json", cfg.to_json())
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ioreduce", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"ioreduce {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("model", help="iso-compression series, thresholds and a gamma plot per profile")
    p.add_argument("--profile", action="append", help="preset name or profile file (repeatable; default titan)")
    p.add_argument("--ratios", default=",".join(map(str, DEFAULT_RATIOS)), help="comma-separated f_C values (default %(default)s)")
    p.add_argument("--grid", help="explicit comma-separated normalized codec throughputs")
    p.add_argument("--grid-min", type=float, default=1e-3, help="log grid lower end (default %(default)s)")
    p.add_argument("--grid-max", type=float, default=1.0, help="log grid upper end (default %(default)s)")
    p.add_argument("--grid-points", type=int, default=121, help="log grid size (default %(default)s)")
    p.add_argument("--out", default="ioreduce-out", help="output directory (default %(default)s)")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("bench", help="measure codec throughput and ratio over a matrix")
    p.add_argument("--matrix", help="TOML matrix file; flags below override its entries")
    p.add_argument("--codecs", help=f"comma-separated codec names (registered: {', '.join(codecs.names())})")
    p.add_argument("--preconditioners", help=f"comma-separated ({', '.join(KINDS)})")
    p.add_argument("--threads", help="comma-separated thread counts (default 1,4)")
    p.add_argument("--data-classes", help="comma-separated entropy classes (default full,truncated(16))")
    p.add_argument("--reps", type=int, help="timed repetitions per cell, >= 5 (default 5)")
    p.add_argument("--n-particles", type=int, help="surrogate corpus size (default 262144)")
    p.add_argument("--seed", type=int, help="surrogate corpus seed (default 0)")
    p.add_argument("--block-size", help="engine block size (default 1 MiB)")
    p.add_argument("--input", action="append", help="raw data file to bench as its own data class (repeatable)")
    p.add_argument("--import", dest="import_csv", help="CSV of externally measured (T_C, f_C) points")
    p.add_argument("--profiles", default="titan,hypnos_k20", help="profiles for verdict columns and overlay (default %(default)s)")
    p.add_argument("--memcpy-size", default="64 MiB", help="memcpy baseline buffer size (default %(default)s)")
    p.add_argument("--no-svg", action="store_true", help="skip the scatter plot")
    p.add_argument("--out", default="ioreduce-out", help="output directory (default %(default)s)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="run a pipeline scenario")
    p.add_argument("scenario", help="scenario file or shipped name (titan-sync, backlog, no-backlog, summit-like)")
    p.add_argument("--out", default="ioreduce-out", help="output directory (default %(default)s)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pack", help="compress a file into a container")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--codec", default="reference-lz", help="codec name (default %(default)s)")
    p.add_argument("--preconditioner", default="bitshuffle", choices=KINDS, help="(default %(default)s)")
    p.add_argument("--elem-size", type=int, default=4, help="element size in bytes (default %(default)s)")
    p.add_argument("--block-size", default="1 MiB", help="(default %(default)s)")
    p.add_argument("--threads", type=int, help="worker threads (default $IOREDUCE_THREADS or 1)")
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("unpack", help="restore a file from a container")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--threads", type=int, help="worker threads (default $IOREDUCE_THREADS or 1)")
    p.set_defaults(func=cmd_unpack)

    p = sub.add_parser("corpus", help="write a synthetic particle corpus as raw binary plus JSON sidecar")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--n-particles", type=int, default=1 << 18, help="(default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="(default %(default)s)")
    p.add_argument("--entropy-class", default="full", help="full or truncated(k) (default %(default)s)")
    p.add_argument("--momentum-sigma", type=float, default=1.0, help="(default %(default)s)")
    p.add_argument("--cells-per-block", type=int, default=4096, help="(default %(default)s)")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("report", help="plots and tables from saved bench records and imported points")
    p.add_argument("--bench", action="append", help="bench.jsonl or bench.csv (repeatable)")
    p.add_argument("--import", dest="import_csv", help="CSV of externally measured points")
    p.add_argument("--profiles", default="titan,hypnos_k20", help="(default %(default)s)")
    p.add_argument("--ratios", default=",".join(map(str, DEFAULT_RATIOS)), help="iso-compression lines (default %(default)s)")
    p.add_argument("--out", default="ioreduce-out", help="output directory (default %(default)s)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "profile", "unset") is None:
        args.profile = ["titan"]
    try:
        return args.func(args)
    except IntegrityError as exc:
        code, msg = EXIT_INTEGRITY, f"integrity error: {exc}"
    except FormatError as exc:
        code, msg = EXIT_FORMAT, f"format error: {exc}"
    except DomainError as exc:
        code, msg = EXIT_DOMAIN, f"domain error: {exc}"
    except (ConfigError, CodecLookupError, UnitError) as exc:
        code, msg = EXIT_CONFIG, f"config error: {exc}"
    except OSError as exc:
        code, msg = EXIT_IO, f"I/O error: {exc}"
    print(f"ioreduce: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
