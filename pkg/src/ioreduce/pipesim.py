"""Event-driven simulator of a multi-stage output path.

A pipeline is an ordered list of stages.  ``reduce`` and ``drain`` stages
are servers: they take one output at a time, process it at a fixed rate
(input bytes per second) and forward it whole to the next stage.  A
``reduce`` stage shrinks what it forwards by its ratio.  ``buffer`` stages
sit between servers and hold data; their occupancy drains continuously while
the downstream server works through it.

Handover rules:

* A server that forwards straight into another server (no buffer, or a
  zero-capacity buffer) stays blocked until the downstream server has
  consumed the whole output.  The same holds for the application handing
  data to a first-stage server.
* A buffer accepts an output once it fits.  An output larger than the whole
  capacity bypasses the buffer when it is empty and the downstream server is
  idle, and is then treated like an unbuffered handover.  Overflow thus
  turns into waiting, never into lost data.

In ``synchronous`` mode the application is blocked until an output has left
the last stage.  In ``asynchronous`` mode it resumes as soon as the output
has left application memory (accepted by a buffer, or consumed by the first
server).  Between outputs the application computes for ``output_period``
seconds; the first output is taken after one period.

With zero-capacity buffers a synchronous run costs exactly
``t_prep + sum(stage_input / stage_rate)`` per output, which is the closed
form in ``ioreduce.model``.
"""

from __future__ import annotations

import csv
import heapq
import io
import itertools
from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

from . import model
from .errors import ConfigError, DomainError

#: Outputs excluded from backlog detection while buffers fill.
WARMUP_OUTPUTS = 2

_ABS_BYTES_EPS = 1e-6
_REL_EPS = 1e-12

STAGE_KINDS = ("reduce", "buffer", "drain")
MODES = ("synchronous", "asynchronous")


@dataclass(frozen=True)
class StageSpec:
    name: str
    kind: str
    throughput: float | None = None
    ratio: float = 1.0
    capacity: float | None = None

    @classmethod
    def reduce(cls, name: str, throughput: float, ratio: float = 1.0) -> "StageSpec":
        return cls(name, "reduce", throughput=throughput, ratio=ratio)

    @classmethod
    def buffer(cls, name: str, capacity: float) -> "StageSpec":
        return cls(name, "buffer", capacity=capacity)

    @classmethod
    def drain(cls, name: str, throughput: float) -> "StageSpec":
        return cls(name, "drain", throughput=throughput)

    @property
    def is_server(self) -> bool:
        return self.kind in ("reduce", "drain")

    def validate(self) -> None:
        if self.kind not in STAGE_KINDS:
            raise ConfigError(f"stage {self.name!r}: unknown kind {self.kind!r}")
        if self.is_server:
            if self.throughput is None or not self.throughput > 0:
                raise ConfigError(f"stage {self.name!r}: throughput must be > 0")
            if self.capacity is not None:
                raise ConfigError(f"stage {self.name!r}: only buffers have a capacity")
        if self.kind == "reduce" and not 0 < self.ratio <= 1:
            raise ConfigError(f"stage {self.name!r}: ratio must lie in (0, 1]")
        if self.kind != "reduce" and self.ratio != 1.0:
            raise ConfigError(f"stage {self.name!r}: only reduce stages have a ratio")
        if self.kind == "buffer":
            if self.capacity is None or not self.capacity >= 0:
                raise ConfigError(f"stage {self.name!r}: capacity must be >= 0")
            if self.throughput is not None:
                raise ConfigError(f"stage {self.name!r}: buffers have no throughput")


@dataclass(frozen=True)
class WorkloadSpec:
    bytes_per_output: float
    output_period: float
    n_outputs: int
    mode: str = "synchronous"
    t_prep: float = 0.0

    def validate(self) -> None:
        if not self.bytes_per_output > 0:
            raise ConfigError("bytes_per_output must be > 0")
        if not self.output_period > 0:
            raise ConfigError("output_period must be > 0")
        if self.n_outputs < 1:
            raise ConfigError("n_outputs must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.t_prep >= 0:
            raise ConfigError("t_prep must be >= 0")


@dataclass
class OutputRecord:
    index: int
    start_time: float
    stall_time: float
    wait_time: float
    completion_time: float
    occupancy: dict[str, float]


@dataclass
class SimTimeline:
    stages: tuple[StageSpec, ...]
    workload: WorkloadSpec
    outputs: list[OutputRecord]
    stage_bytes_in: dict[str, float]
    stage_bytes_out: dict[str, float]
    peak_occupancy: dict[str, float]
    backlog_detected: bool = False
    effective_throughput: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def total_stall(self) -> float:
        return sum(o.stall_time for o in self.outputs)

    @property
    def mean_t_io(self) -> float:
        return self.total_stall / len(self.outputs)

    @property
    def buffer_names(self) -> list[str]:
        return [s.name for s in self.stages if s.kind == "buffer"]

    def occupancy_slope(self, buffer_name: str, warmup: int = WARMUP_OUTPUTS) -> float:
        """Least-squares growth of a buffer's occupancy per output, after warmup."""
        pts = [(o.index, o.occupancy[buffer_name]) for o in self.outputs[warmup:]]
        if len(pts) < 2:
            return 0.0
        n = len(pts)
        mx = sum(p[0] for p in pts) / n
        my = sum(p[1] for p in pts) / n
        sxx = sum((p[0] - mx) ** 2 for p in pts)
        sxy = sum((p[0] - mx) * (p[1] - my) for p in pts)
        return sxy / sxx

    def summary(self) -> dict:
        return {
            "n_outputs": len(self.outputs),
            "mode": self.workload.mode,
            "total_stall_s": self.total_stall,
            "mean_t_io_s": self.mean_t_io,
            "effective_throughput_Bps": self.effective_throughput,
            "backlog_detected": self.backlog_detected,
            "occupancy_slope_B_per_output": {
                name: self.occupancy_slope(name) for name in self.buffer_names
            },
            "peak_occupancy_B": dict(self.peak_occupancy),
            "stage_bytes_in": dict(self.stage_bytes_in),
            "stage_bytes_out": dict(self.stage_bytes_out),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = self.buffer_names
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["output", "start_time_s", "stall_time_s", "wait_time_s", "completion_time_s"]
            + [f"occupancy_{n}_B" for n in names]
        )
        for o in self.outputs:
            writer.writerow(
                [o.index, repr(o.start_time), repr(o.stall_time), repr(o.wait_time), repr(o.completion_time)]
                + [repr(o.occupancy[n]) for n in names]
            )
        return buf.getvalue()


def validate_stages(stages: Sequence[StageSpec]) -> None:
    if not stages:
        raise ConfigError("stage list is empty")
    for s in stages:
        s.validate()
    names = [s.name for s in stages]
    if len(set(names)) != len(names):
        raise ConfigError("stage names must be unique")
    if stages[-1].kind != "drain":
        raise ConfigError("the last stage must be a drain")
    for a, b in zip(stages, stages[1:]):
        if a.kind == "buffer" and b.kind == "buffer":
            raise ConfigError(f"buffers {a.name!r} and {b.name!r} are adjacent; put a drain between them")


# --------------------------------------------------------------------------
# simulation core


class _Job:
    __slots__ = ("index", "size")

    def __init__(self, index: int, size: float):
        self.index = index
        self.size = size


class _Server:
    def __init__(self, pos: int, spec: StageSpec):
        self.pos = pos
        self.spec = spec
        self.rate = spec.throughput
        self.job: _Job | None = None
        self.start = 0.0
        self.end = 0.0
        self.holder = None  # ("app",) | ("server", _Server) | ("buffer", _Buffer)
        self.outbox: _Job | None = None
        self.outbox_handed = False

    @property
    def idle(self) -> bool:
        return self.job is None and self.outbox is None

    def remaining_input(self, now: float) -> float:
        if self.job is None:
            return 0.0
        return max(0.0, self.job.size - self.rate * (now - self.start))


class _Buffer:
    def __init__(self, pos: int, spec: StageSpec):
        self.pos = pos
        self.spec = spec
        self.capacity = spec.capacity
        self.queue: deque[_Job] = deque()
        self.downstream: _Server | None = None

    def occupancy(self, now: float) -> float:
        occ = sum(j.size for j in self.queue)
        ds = self.downstream
        if ds is not None and ds.holder is not None and ds.holder[0] == "buffer" and ds.holder[1] is self:
            occ += ds.remaining_input(now)
        return occ

    def fits(self, size: float, now: float) -> bool:
        return self.occupancy(now) + size <= self.capacity * (1 + _REL_EPS) + _ABS_BYTES_EPS

    def empty(self, now: float) -> bool:
        return self.occupancy(now) <= _ABS_BYTES_EPS and not self.queue


class _Simulation:
    def __init__(self, stages: Sequence[StageSpec], workload: WorkloadSpec):
        self.stages = tuple(stages)
        self.workload = workload
        self.nodes: list[_Server | _Buffer] = []
        for pos, spec in enumerate(self.stages):
            self.nodes.append(_Server(pos, spec) if spec.is_server else _Buffer(pos, spec))
        for pos, node in enumerate(self.nodes):
            if isinstance(node, _Buffer):
                node.downstream = self.nodes[pos + 1]
        self.servers = [n for n in self.nodes if isinstance(n, _Server)]
        self.buffers = [n for n in self.nodes if isinstance(n, _Buffer)]

        self.now = 0.0
        self._events: list = []
        self._seq = itertools.count()
        self._wakes: set[float] = set()

        self.bytes_in = {s.name: 0.0 for s in self.stages}
        self.bytes_out = {s.name: 0.0 for s in self.stages}
        self.peak = {b.spec.name: 0.0 for b in self.buffers}

        # application state
        self.app_job: _Job | None = None
        self.app_ready = False
        self.app_phase = "compute"
        self.next_output = 0
        self.start_times: dict[int, float] = {}
        self.ready_times: dict[int, float] = {}
        self.accept_times: dict[int, float] = {}
        self.release_times: dict[int, float] = {}
        self.completion_times: dict[int, float] = {}
        self.occupancy_at_start: dict[int, dict[str, float]] = {}

    # -- events -----------------------------------------------------------

    def _push(self, t: float, kind: str, payload=None) -> None:
        heapq.heappush(self._events, (t, next(self._seq), kind, payload))

    def run(self) -> None:
        self._push(self.workload.output_period, "output_start", 0)
        while self._events:
            t, _, kind, payload = heapq.heappop(self._events)
            self.now = max(self.now, t)
            if kind == "output_start":
                self._on_output_start(payload)
            elif kind == "prep_done":
                self.app_ready = True
                self.ready_times[self.app_job.index] = self.now
            elif kind == "service_end":
                server, job = payload
                if server.job is job:
                    self._on_service_end(server)
            elif kind == "wake":
                pass
            self._propagate()
        if len(self.completion_times) != self.workload.n_outputs:
            raise RuntimeError("simulation ended with undelivered outputs")

    def _on_output_start(self, index: int) -> None:
        self.start_times[index] = self.now
        self.occupancy_at_start[index] = {b.spec.name: b.occupancy(self.now) for b in self.buffers}
        self.app_job = _Job(index, float(self.workload.bytes_per_output))
        self.app_phase = "output"
        self.app_ready = False
        if self.workload.t_prep > 0:
            self._push(self.now + self.workload.t_prep, "prep_done")
        else:
            self.app_ready = True
            self.ready_times[index] = self.now

    def _release_app(self, index: int) -> None:
        self.release_times[index] = self.now
        self.app_phase = "compute"
        nxt = index + 1
        if nxt < self.workload.n_outputs:
            self._push(self.now + self.workload.output_period, "output_start", nxt)

    def _on_service_end(self, server: _Server) -> None:
        job = server.job
        spec = server.spec
        out_size = job.size * spec.ratio if spec.kind == "reduce" else job.size
        self.bytes_out[spec.name] += out_size
        holder = server.holder
        server.job = None
        server.holder = None
        if holder[0] == "app":
            self.accept_times.setdefault(job.index, self.now)
            if self.workload.mode == "asynchronous":
                self._release_app(job.index)
        elif holder[0] == "server":
            up = holder[1]
            up.outbox = None
            up.outbox_handed = False
        elif holder[0] == "buffer":
            self.bytes_out[holder[1].spec.name] += job.size
        server.outbox = _Job(job.index, out_size)
        server.outbox_handed = False

    # -- handover logic ---------------------------------------------------

    def _start_service(self, server: _Server, job: _Job, holder) -> None:
        server.job = job
        server.holder = holder
        server.start = self.now
        server.end = self.now + job.size / server.rate
        self.bytes_in[server.spec.name] += job.size
        self._push(server.end, "service_end", (server, job))

    def _offer_to_buffer(self, buf: _Buffer, job: _Job) -> str:
        """Try to place ``job`` into ``buf``.  Returns 'queued', 'bypass' or 'blocked'."""
        ds = buf.downstream
        if job.size <= buf.capacity * (1 + _REL_EPS) + _ABS_BYTES_EPS:
            if buf.fits(job.size, self.now):
                buf.queue.append(job)
                self.bytes_in[buf.spec.name] += job.size
                occ = buf.occupancy(self.now)
                self.peak[buf.spec.name] = max(self.peak[buf.spec.name], occ)
                return "queued"
            self._schedule_space_wake(buf, job.size)
            return "blocked"
        if buf.empty(self.now) and ds.idle:
            self.bytes_in[buf.spec.name] += job.size
            return "bypass"
        return "blocked"

    def _schedule_space_wake(self, buf: _Buffer, size: float) -> None:
        ds = buf.downstream
        if ds.job is None or ds.holder is None or ds.holder[0] != "buffer":
            return  # space only appears at a later service start/end
        excess = buf.occupancy(self.now) + size - buf.capacity
        t = self.now + excess / ds.rate
        if t < ds.end and t not in self._wakes:
            self._wakes.add(t)
            self._push(t, "wake")

    def _propagate(self) -> None:
        changed = True
        while changed:
            changed = False
            # downstream first so that freed space is visible upstream
            for server in reversed(self.servers):
                if server.outbox is not None and not server.outbox_handed:
                    changed |= self._deliver(server)
            for server in self.servers:
                if server.idle:
                    changed |= self._pull(server)
            if self.app_phase == "output" and self.app_ready and self.app_job is not None:
                changed |= self._app_handover()

    def _deliver(self, server: _Server) -> bool:
        job = server.outbox
        pos = server.pos
        if pos == len(self.nodes) - 1:
            self.completion_times[job.index] = self.now
            server.outbox = None
            if self.workload.mode == "synchronous":
                self._release_app(job.index)
            return True
        nxt = self.nodes[pos + 1]
        if isinstance(nxt, _Server):
            if nxt.idle:
                self._start_service(nxt, job, ("server", server))
                server.outbox_handed = True
                return True
            return False
        result = self._offer_to_buffer(nxt, job)
        if result == "queued":
            server.outbox = None
            return True
        if result == "bypass":
            # the two servers are coupled directly
            self._start_service(nxt.downstream, job, ("server", server))
            self.bytes_out[nxt.spec.name] += job.size
            server.outbox_handed = True
            return True
        return False

    def _pull(self, server: _Server) -> bool:
        pos = server.pos
        if pos == 0:
            return False  # fed by the application
        up = self.nodes[pos - 1]
        if isinstance(up, _Buffer) and up.queue:
            job = up.queue.popleft()
            self._start_service(server, job, ("buffer", up))
            return True
        return False

    def _app_handover(self) -> bool:
        job = self.app_job
        first = self.nodes[0]
        if isinstance(first, _Server):
            if not first.idle:
                return False
            self._start_service(first, job, ("app",))
        else:
            result = self._offer_to_buffer(first, job)
            if result == "blocked":
                return False
            if result == "bypass":
                self._start_service(first.downstream, job, ("app",))
                self.bytes_out[first.spec.name] += job.size
            else:
                self.accept_times[job.index] = self.now
                if self.workload.mode == "asynchronous":
                    self.app_job = None
                    self._release_app(job.index)
                    return True
        self.accept_times.setdefault(job.index, self.now)
        self.app_job = None
        self.app_phase = "handed"
        return True


def simulate(stages: Sequence[StageSpec], workload: WorkloadSpec) -> SimTimeline:
    """Run one scenario to completion and return its per-output timeline."""
    validate_stages(stages)
    workload.validate()
    sim = _Simulation(stages, workload)
    sim.run()

    outputs = []
    for i in range(workload.n_outputs):
        start = sim.start_times[i]
        stall = sim.release_times[i] - start
        wait = sim.accept_times[i] - sim.ready_times[i]
        outputs.append(
            OutputRecord(
                index=i + 1,
                start_time=start,
                stall_time=stall,
                wait_time=wait,
                completion_time=sim.completion_times[i],
                occupancy=sim.occupancy_at_start[i],
            )
        )
    timeline = SimTimeline(
        stages=tuple(stages),
        workload=workload,
        outputs=outputs,
        stage_bytes_in=sim.bytes_in,
        stage_bytes_out=sim.bytes_out,
        peak_occupancy=sim.peak,
    )
    timeline.backlog_detected = _detect_backlog(timeline)
    t_without = workload.n_outputs * workload.output_period
    t_with = t_without + timeline.total_stall
    try:
        timeline.effective_throughput = model.effective_throughput(1, workload.bytes_per_output * workload.n_outputs, t_with, t_without)
    except DomainError:
        timeline.effective_throughput = None
    return timeline


def _detect_backlog(timeline: SimTimeline, warmup: int = WARMUP_OUTPUTS) -> bool:
    steady = timeline.outputs[warmup:]
    if timeline.workload.mode == "asynchronous":
        tol = 1e-9 * max(1.0, timeline.workload.output_period)
        if any(o.wait_time > tol for o in steady):
            return True
    if len(steady) < 2:
        return False
    for name in timeline.buffer_names:
        occ = [o.occupancy[name] for o in steady]
        eps = _ABS_BYTES_EPS + _REL_EPS * timeline.workload.bytes_per_output
        if all(b > a + eps for a, b in zip(occ, occ[1:])):
            return True
    return False


# --------------------------------------------------------------------------
# break-even frontier


@dataclass
class Frontier:
    ratios: list[float]
    norm_codec_throughputs: list[float]
    beneficial: list[list[bool]]
    baseline_t_io: float

    def crossing(self, row: int) -> tuple[float, float] | None:
        """Grid cell (lo, hi) in which row ``row`` turns beneficial."""
        cells = self.beneficial[row]
        for j in range(1, len(cells)):
            if cells[j] and not cells[j - 1]:
                return self.norm_codec_throughputs[j - 1], self.norm_codec_throughputs[j]
        return None


def break_even_frontier(
    stages: Sequence[StageSpec],
    ratios: Sequence[float],
    norm_codec_throughputs: Sequence[float],
    workload: WorkloadSpec,
) -> Frontier:
    """Simulated counterpart of the break-even threshold.

    ``stages`` must contain exactly one reduce stage; its throughput is taken
    as the memcpy baseline (pass-through copy, ratio 1).  Every grid cell runs
    the pipeline with that stage replaced by a reduction of throughput
    ``norm * T_memcpy`` and the given ratio, and is beneficial when its mean
    stall is strictly below the baseline's.
    """
    ratios = list(ratios)
    grid = list(norm_codec_throughputs)
    if not ratios or not grid:
        raise ConfigError("frontier grids must be nonempty")
    reduce_pos = [i for i, s in enumerate(stages) if s.kind == "reduce"]
    if len(reduce_pos) != 1:
        raise ConfigError("frontier template needs exactly one reduce stage")
    pos = reduce_pos[0]
    template = list(stages)
    t_memcpy = template[pos].throughput

    def with_reduce(throughput: float, ratio: float) -> list[StageSpec]:
        st = list(template)
        st[pos] = replace(template[pos], throughput=throughput, ratio=ratio)
        return st

    baseline = simulate(with_reduce(t_memcpy, 1.0), workload).mean_t_io
    table = []
    for f in ratios:
        row = []
        for norm in grid:
            if not 0 < norm <= 1:
                raise DomainError(f"normalized codec throughput {norm} outside (0, 1]")
            t = simulate(with_reduce(norm * t_memcpy, f), workload).mean_t_io
            row.append(t < baseline)
        table.append(row)
    return Frontier(ratios, grid, table, baseline)
