import csv
import json
import os
import subprocess
import sys
import xml.etree.ElementTree as ET
import zlib

import pytest

from ioreduce import cli, engine, synthgen

SVG = "{http://www.w3.org/2000/svg}"


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_model_outputs(tmp_path):
    assert run("model", "--profile", "titan", "--ratios", "0.1,0.5,1.0", "--out", tmp_path) == cli.EXIT_OK
    rows = list(csv.DictReader((tmp_path / "model_titan_series.csv").open()))
    assert sorted({r["ratio"] for r in rows}) == ["0.1", "0.5", "1.0"]
    th = json.loads((tmp_path / "model_titan_thresholds.json").read_text())
    assert th["min_codec_throughput"]["0.0"] == pytest.approx(0.0090834, abs=5e-8)
    assert th["perfect_reduction_threshold"] == pytest.approx(0.0090834, abs=5e-8)
    assert th["min_codec_throughput"]["0.5"] == pytest.approx(0.018003, abs=5e-7)
    assert th["min_codec_throughput"]["1.0"] is None
    root = ET.parse(tmp_path / "model_titan.svg").getroot()
    assert root.get("data-kind") == "gamma"
    assert len(root.findall(f".//{SVG}polyline[@class='series']")) == 3
    assert root.find(f".//{SVG}line[@id='break-even']") is not None
    meta = json.loads(root.find(f"{SVG}metadata").text)
    assert meta["config"]["profiles"][0]["n_nodes"] == 18000
    cfg = json.loads((tmp_path / "run_config.json").read_text())
    assert cfg["params"]["ratios"] == [0.1, 0.5, 1.0]
    assert len(cfg["params"]["grid"]) == 121


def test_model_series_recomputable(tmp_path):
    from ioreduce import model

    run("model", "--profile", "hypnos_k20", "--ratios", "0.3", "--grid", "0.01,0.5,1", "--out", tmp_path)
    cfg = json.loads((tmp_path / "run_config.json").read_text())
    p = cfg["profiles"][0]
    c_prep = p["t_prep"] / p["bytes_per_node"] * p["memcpy_throughput"]
    fs = p["fs_throughput_per_node"] / p["memcpy_throughput"]
    for row in csv.DictReader((tmp_path / "model_hypnos_k20_series.csv").open()):
        expected = model.gamma(c_prep, float(row["ratio"]), float(row["norm_codec_throughput"]), fs)
        assert float(row["gamma"]) == pytest.approx(expected, rel=1e-12)


def test_model_empty_ratio_list(tmp_path, capsys):
    assert run("model", "--ratios", "", "--out", tmp_path) == cli.EXIT_CONFIG
    assert "empty" in capsys.readouterr().err


def test_model_unknown_profile(tmp_path, capsys):
    assert run("model", "--profile", "summit", "--out", tmp_path) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "titan" in err and "hypnos_k20" in err


def test_model_domain_error(tmp_path):
    assert run("model", "--ratios", "1.5", "--out", tmp_path) == cli.EXIT_DOMAIN


def test_model_profile_file(tmp_path):
    prof = tmp_path / "mine.toml"
    prof.write_text(
        'name = "mine"\nn_nodes = 4\nbytes_per_node = "1 GiB"\nt_prep = "0 s"\n'
        'fs_throughput_per_node = "100 MiB/s"\nmemcpy_throughput = "5 GiB/s"\n'
    )
    assert run("model", "--profile", prof, "--out", tmp_path) == 0
    assert (tmp_path / "model_mine.svg").exists()


def test_simulate_titan_sync(tmp_path):
    assert run("simulate", "titan-sync", "--out", tmp_path) == 0
    s = json.loads((tmp_path / "titan-sync_summary.json").read_text())
    assert s["mean_t_io_s"] == pytest.approx(s["model_t_io_s"], rel=1e-3)
    assert s["mean_t_io_s"] == pytest.approx(74.394, abs=5e-4)
    assert s["backlog_detected"] is False
    assert s["config"]["params"]["workload"]["bytes_per_output"] == 4 * 2**30


def test_simulate_backlog(tmp_path):
    assert run("simulate", "backlog", "--out", tmp_path) == 0
    s = json.loads((tmp_path / "backlog_summary.json").read_text())
    assert s["backlog_detected"] is True
    rows = list(csv.DictReader((tmp_path / "backlog_timeline.csv").open()))
    assert len(rows) == 12


def test_simulate_missing_file(tmp_path):
    assert run("simulate", tmp_path / "nope.toml", "--out", tmp_path) == cli.EXIT_IO


def test_simulate_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[workload]\nbytes_per_output = "4 GiB"\noutput_period = "x"\nn_outputs = 2\n[[stage]]\nkind = "drain"\nthroughput = "1 GiB/s"\n')
    assert run("simulate", bad, "--out", tmp_path) == cli.EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err


def test_pack_unpack(tmp_path):
    src = tmp_path / "in.bin"
    data = synthgen.corpus_bytes(synthgen.CorpusSpec(n_particles=50_000, entropy_class="truncated(16)")) + b"xyz"
    src.write_bytes(data)
    a, b = tmp_path / "a.iorc", tmp_path / "b.iorc"
    assert run("pack", src, "-o", a, "--threads", "1", "--block-size", "256 KiB") == 0
    assert run("pack", src, "-o", b, "--threads", "8", "--block-size", "256 KiB") == 0
    assert zlib.crc32(a.read_bytes()) == zlib.crc32(b.read_bytes())
    out = tmp_path / "out.bin"
    assert run("unpack", a, "-o", out, "--threads", "3") == 0
    assert zlib.crc32(out.read_bytes()) == zlib.crc32(data)
    assert out.read_bytes() == data


def test_unpack_corrupt(tmp_path):
    src = tmp_path / "in.bin"
    src.write_bytes(bytes(range(256)) * 1000)
    c = tmp_path / "c.iorc"
    run("pack", src, "-o", c, "--codec", "rle", "--preconditioner", "shuffle")
    blob = bytearray(c.read_bytes())
    blob[-5] ^= 0x40
    c.write_bytes(bytes(blob))
    assert run("unpack", c, "-o", tmp_path / "x") == cli.EXIT_INTEGRITY


def test_unpack_not_a_container(tmp_path):
    f = tmp_path / "junk"
    f.write_bytes(b"hello world" * 10)
    assert run("unpack", f, "-o", tmp_path / "x") == cli.EXIT_FORMAT


def test_pack_errors(tmp_path):
    assert run("pack", tmp_path / "missing", "-o", tmp_path / "x") == cli.EXIT_IO
    f = tmp_path / "f"
    f.write_bytes(b"abc")
    assert run("pack", f, "-o", tmp_path / "x", "--codec", "brotli") == cli.EXIT_CONFIG
    assert run("pack", f, "-o", tmp_path / "x", "--block-size", "6", "--elem-size", "4") == cli.EXIT_CONFIG
    assert run("pack", f, "-o", tmp_path / "x", "--threads", "0") == cli.EXIT_CONFIG


def test_bench_end_to_end(tmp_path):
    ext = tmp_path / "ext.csv"
    ext.write_text("codec,ratio,throughput,memcpy_throughput\nzfp,0.2,3 GiB/s,6 GiB/s\n")
    rc = run(
        "bench", "--codecs", "null,rle", "--preconditioners", "none,shuffle", "--threads", "1,2",
        "--data-classes", "truncated(16)", "--n-particles", "8192", "--import", ext, "--out", tmp_path,
    )
    assert rc == 0
    rows = list(csv.DictReader((tmp_path / "bench.csv").open()))
    assert len(rows) == 9
    assert rows[-1]["status"] == "imported"
    lines = (tmp_path / "bench.jsonl").read_text().splitlines()
    assert len(lines) == 9 and "verdicts" in json.loads(lines[0])
    root = ET.parse(tmp_path / "bench.svg").getroot()
    assert root.get("data-kind") == "scatter"
    labels = [c.get("data-label") for c in root.iter(f"{SVG}circle")]
    assert "zfp/unknown/0t/imported" in labels
    assert len(root.findall(f".//{SVG}polyline[@class='series']")) == 2
    cfg = json.loads((tmp_path / "run_config.json").read_text())
    assert cfg["params"]["matrix"]["seed"] == 0
    assert cfg["params"]["memcpy_throughput"] > 0


def test_bench_partial_failure(tmp_path):
    rc = run("bench", "--codecs", "rle,missing", "--preconditioners", "none", "--threads", "1", "--data-classes", "full", "--n-particles", "4096", "--no-svg", "--out", tmp_path)
    assert rc == cli.EXIT_PARTIAL
    rows = list(csv.DictReader((tmp_path / "bench.csv").open()))
    assert [r["status"] for r in rows] == ["ok", "failed"]
    assert rows[1]["verdict_titan"] == "failed"


def test_bench_input_file(tmp_path):
    raw = tmp_path / "data.bin"
    synthgen.write_raw(raw, bytes(1 << 18), label="zeros")
    rc = run("bench", "--codecs", "rle", "--preconditioners", "none", "--threads", "1", "--data-classes", "full", "--n-particles", "2048", "--input", raw, "--out", tmp_path)
    assert rc == 0
    rows = list(csv.DictReader((tmp_path / "bench.csv").open()))
    assert [r["data_class"] for r in rows] == ["full", "file:data.bin"]
    assert float(rows[1]["ratio"]) < 0.01


def test_bench_matrix_file(tmp_path):
    m = tmp_path / "m.toml"
    m.write_text('codecs = ["rle"]\npreconditioners = ["bitshuffle"]\nthreads = [1]\ndata_classes = ["full"]\nn_particles = 2048\nblock_size = "64 KiB"\n')
    assert run("bench", "--matrix", m, "--no-svg", "--out", tmp_path) == 0
    rows = list(csv.DictReader((tmp_path / "bench.csv").open()))
    assert len(rows) == 1 and rows[0]["block_size"] == str(64 * 1024)
    m.write_text("colour = 3\n")
    assert run("bench", "--matrix", m, "--out", tmp_path) == cli.EXIT_CONFIG


def test_report(tmp_path):
    run("bench", "--codecs", "rle", "--preconditioners", "shuffle", "--threads", "1", "--data-classes", "truncated(16)", "--n-particles", "4096", "--no-svg", "--out", tmp_path / "b")
    ext = tmp_path / "ext.csv"
    ext.write_text("codec,ratio,norm_throughput,memcpy_throughput\nfast,0.4,0.6,6 GiB/s\n")
    assert run("report", "--bench", tmp_path / "b" / "bench.jsonl", "--import", ext, "--out", tmp_path / "r") == 0
    root = ET.parse(tmp_path / "r" / "report_titan_gamma.svg").getroot()
    points = root.findall(f".//{SVG}circle[@class='point']")
    assert len(points) == 2
    assert (tmp_path / "r" / "report_scatter.svg").exists()
    assert "fast" in (tmp_path / "r" / "report_summary.md").read_text()


def test_corpus_command(tmp_path):
    out = tmp_path / "c.bin"
    assert run("corpus", "-o", out, "--n-particles", "100", "--seed", "3") == 0
    assert out.stat().st_size == 3200
    assert json.loads(synthgen.sidecar_path(out).read_text())["corpus"]["seed"] == 3


def test_threads_env_and_console_script(tmp_path):
    src = tmp_path / "in.bin"
    src.write_bytes(bytes(100_000))
    env = {**os.environ, "IOREDUCE_THREADS": "4"}
    r = subprocess.run([sys.executable, "-m", "ioreduce", "pack", str(src), "-o", str(tmp_path / "c")], env=env, capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    env["IOREDUCE_THREADS"] = "many"
    r = subprocess.run([sys.executable, "-m", "ioreduce", "pack", str(src), "-o", str(tmp_path / "c")], env=env, capture_output=True, text=True)
    assert r.returncode == cli.EXIT_CONFIG
    assert "IOREDUCE_THREADS" in r.stderr


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        run("--help")
    out = capsys.readouterr().out
    for name in ("model", "bench", "simulate", "pack", "unpack", "report"):
        assert name in out


def test_exit_codes_distinct():
    codes = [cli.EXIT_CONFIG, cli.EXIT_INTEGRITY, cli.EXIT_PARTIAL, cli.EXIT_IO, cli.EXIT_FORMAT, cli.EXIT_DOMAIN]
    assert len(set(codes)) == len(codes) and cli.EXIT_OK == 0 and 0 not in codes
    assert engine.THREADS_ENV == "IOREDUCE_THREADS"
