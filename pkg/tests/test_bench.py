import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ioreduce import bench, engine, model
from ioreduce.bench import BenchRecord
from ioreduce.errors import ConfigError, DomainError
from ioreduce.units import GiB

MEMCPY = 5.0 * GiB  # fixed baseline keeps these tests independent of the machine


@pytest.fixture(scope="module")
def titan():
    return model.load_preset("titan")


@pytest.fixture(scope="module")
def hypnos():
    return model.load_preset("hypnos_k20")


def record(norm, ratio, memcpy, **kw):
    base = dict(
        codec="x",
        preconditioner="none",
        n_threads=1,
        data_class="t",
        input_bytes=1000,
        container_bytes=int(1000 * ratio),
        t_compress=1.0,
        t_min=1.0,
        t_max=1.0,
        throughput=norm * memcpy,
        ratio=ratio,
        norm_throughput=norm,
        memcpy_throughput=memcpy,
        repetitions=5,
    )
    base.update(kw)
    return BenchRecord(**base)


def test_classify_examples(titan, hypnos):
    assert bench.classify(record(0.5, 0.5, titan.memcpy_throughput), titan).verdict == "beneficial"
    assert bench.classify(record(0.005, 0.5, hypnos.memcpy_throughput), hypnos).verdict == "size_only"
    for p in (titan, hypnos):
        assert bench.classify(record(0.9, 1.0, p.memcpy_throughput), p).verdict == "harmful"


def test_classify_expansion_is_harmful(titan):
    assert bench.classify(record(0.5, 1.01, titan.memcpy_throughput), titan).verdict == "harmful"


def test_classify_domain_error(titan):
    with pytest.raises(DomainError):
        bench.classify(record(1.0, 0.5, titan.memcpy_throughput), titan)
    with pytest.raises(DomainError):
        bench.classify(record(1.2, 0.5, titan.memcpy_throughput), titan)
    assert bench.verdict_label(record(1.2, 0.5, titan.memcpy_throughput), titan) == "out_of_domain"


def test_projection_flag(titan):
    own = bench.classify(record(0.5, 0.5, titan.memcpy_throughput), titan)
    assert not own.projected
    other = bench.classify(record(0.5, 0.5, 3 * GiB), titan)
    assert other.projected
    assert other.norm_throughput == pytest.approx(0.25)


@settings(max_examples=500, deadline=None)
@given(norm=st.floats(1e-4, 0.999), ratio=st.floats(1e-3, 1.0), which=st.sampled_from(model.PRESET_NAMES))
def test_verdict_agrees_with_gamma(norm, ratio, which):
    p = model.load_preset(which)
    v = bench.classify(record(norm, ratio, p.memcpy_throughput), p)
    g = model.gamma(p.c_prep, ratio, norm, p.norm_fs_throughput)
    lhs = norm * (1 - ratio) / (1 - norm)
    if abs(lhs - p.norm_fs_throughput) <= 1e-12 * p.norm_fs_throughput:
        return
    assert (v.verdict == "beneficial") == (g < 1)
    assert (v.verdict == "size_only") == (g >= 1 and ratio < 1)


def test_failed_label():
    r = record(0.5, 0.5, MEMCPY, status="failed")
    assert bench.verdict_label(r, model.load_preset("titan")) == "failed"


# measurement


def test_memcpy_preconditions():
    with pytest.raises(ConfigError):
        bench.measure_memcpy(1 << 20)
    with pytest.raises(ConfigError):
        bench.measure_memcpy(reps=1)


def test_memcpy_stable():
    a = bench.measure_memcpy()
    b = bench.measure_memcpy()
    assert a > 0 and b > 0
    assert abs(a - b) / max(a, b) <= 0.2


def test_measure_codec_null():
    data = bytes(range(256)) * 4096 * 3 + b"odd"
    r = bench.measure_codec(engine.EngineParams(codec="null", preconditioner="none", n_threads=1), data, memcpy_throughput=MEMCPY)
    n_blocks = math.ceil(len(data) / engine.DEFAULT_BLOCK_SIZE)
    assert r.container_bytes - r.input_bytes == engine.header_overhead(n_blocks)
    assert r.ratio - 1 == pytest.approx(engine.header_overhead(n_blocks) / len(data), rel=1e-12)
    assert r.ratio > 1
    assert r.repetitions == 5
    assert r.t_min <= r.t_compress <= r.t_max
    assert r.throughput == pytest.approx(len(data) / r.t_compress)
    assert r.norm_throughput == pytest.approx(r.throughput / MEMCPY)


def test_measure_codec_rle_zeros():
    r = bench.measure_codec(engine.EngineParams(codec="rle", preconditioner="none", n_threads=1), bytes(4 << 20), memcpy_throughput=MEMCPY)
    assert r.ratio < 0.01


def test_measure_codec_rejects():
    p = engine.EngineParams(n_threads=1)
    with pytest.raises(ConfigError):
        bench.measure_codec(p, b"abc", reps=4, memcpy_throughput=MEMCPY)
    with pytest.raises(ConfigError):
        bench.measure_codec(p, b"", memcpy_throughput=MEMCPY)


def test_sweep_cardinality_and_order():
    recs = bench.sweep(["null", "rle"], ["none", "shuffle"], [1, 2], ["full"], n_particles=4096, memcpy_throughput=MEMCPY)
    assert len(recs) == 8
    keys = [(r.codec, r.preconditioner, r.n_threads) for r in recs]
    assert keys == [(c, p, t) for c in ("null", "rle") for p in ("none", "shuffle") for t in (1, 2)]
    assert all(r.ok for r in recs)


def test_sweep_failed_cell():
    recs = bench.sweep(["rle", "no-such-codec"], ["none"], [1], ["full"], n_particles=2048, memcpy_throughput=MEMCPY)
    assert [r.status for r in recs] == ["ok", "failed"]
    assert "no-such-codec" in recs[1].error


def test_sweep_bad_data_class():
    recs = bench.sweep(["rle"], ["none"], [1], ["truncated(99)", "full"], n_particles=2048, memcpy_throughput=MEMCPY)
    assert [r.status for r in recs] == ["failed", "ok"]


@pytest.mark.parametrize("which", range(4))
def test_sweep_empty_matrix(which):
    args = [["rle"], ["none"], [1], ["full"]]
    args[which] = []
    with pytest.raises(ConfigError):
        bench.sweep(*args, memcpy_throughput=MEMCPY)


def test_sweep_datasets():
    recs = bench.sweep(["rle"], ["none"], [1], ["zeros"], datasets={"zeros": bytes(1 << 20)}, memcpy_throughput=MEMCPY)
    assert recs[0].data_class == "zeros" and recs[0].ratio < 0.01


def test_unstable_flag(monkeypatch):
    # the warmup run is not timed
    times = iter([0.0, 1.0, 1.0, 1.1, 2.0, 2.1, 3.0, 3.2, 4.0, 5.0])
    monkeypatch.setattr(bench.time, "perf_counter", lambda: next(times))
    r = bench.measure_codec(engine.EngineParams(n_threads=1), b"x" * 4096, memcpy_throughput=MEMCPY)
    # durations 1.0, 0.1, 0.1, 0.2, 1.0: spread 0.9 over median 0.2
    assert r.t_compress == pytest.approx(0.2)
    assert r.unstable


# export / import


def test_csv_jsonl_roundtrip(titan):
    recs = bench.sweep(["rle", "nope"], ["shuffle"], [1], ["truncated(16)"], n_particles=2048, memcpy_throughput=MEMCPY)
    csv_text = bench.to_csv(recs, [titan])
    header = csv_text.splitlines()[0].split(",")
    assert header == bench.RECORD_FIELDS + ["verdict_titan"]
    back = bench.from_csv(csv_text)
    assert back[0] == recs[0]
    assert back[1].status == "failed" and math.isnan(back[1].ratio)
    back = bench.from_jsonl(bench.to_jsonl(recs, [titan]))
    assert back[0] == recs[0]


def test_import_external(titan):
    text = "codec,ratio,throughput,memcpy_throughput\nzfp,0.2,3 GiB/s,6 GiB/s\nsnappy,0.7,,\n"
    with pytest.raises(ConfigError, match="line 3"):
        bench.import_external(text)
    recs = bench.import_external(text.replace("snappy,0.7,,", "snappy,0.7,1.5 GiB/s,6 GiB/s"))
    assert [r.status for r in recs] == ["imported", "imported"]
    assert recs[0].norm_throughput == pytest.approx(0.5)
    assert bench.classify(recs[0], titan).verdict == "beneficial"


def test_import_normalized():
    recs = bench.import_external("codec,ratio,norm_throughput\nlz4,0.9,0.3\n", default_memcpy=6 * GiB)
    assert recs[0].throughput == pytest.approx(1.8 * GiB)


def test_bitshuffle_helps_truncated_floats():
    from ioreduce import synthgen

    data = synthgen.corpus_bytes(synthgen.CorpusSpec(seed=0, n_particles=1 << 16, entropy_class="truncated(16)"))
    f = {}
    for pre in ("none", "bitshuffle"):
        c = engine.pack(data, engine.EngineParams(codec="reference-lz", preconditioner=pre, n_threads=1))
        f[pre] = c.ratio
    assert f["bitshuffle"] < 0.9 * f["none"]
    assert np.isfinite(f["none"])
