"""Benchmark harnesses: put/OMB bandwidth sweeps, bidirectional runs,
latency with lifecycle breakdown, and the Jacobi halo-exchange model.

Every measurement is a deterministic simulation, so "mean over
iterations" reduces to one first-time run plus one steady-state run.
The baseline for speedups throughout is a single direct path submitted
per operation (one copy, no pipelining), the default transport the
multi-path configurations are compared against.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .graph import ExecGraph, GraphCache, OverheadModel, PHASES, build_graph, graph_key
from .integrity import IntegrityReport, check_timeline
from .paths import PathConfig, plan_contention_free, plan_paths
from .pipeline import ChunkPlan, make_chunk_plan
from .sim import (GRAPH_MODE, STREAMED_MODE, TransferSpec, simulate_concurrent,
                  streamed_host_cost)
from .topology import Topology, resolve
from .tuner import TuningTable

PUT_BW = "put_bw"
OMB_BW = "omb_bw"
OMB_BIBW = "omb_bibw"
OMB_LATENCY = "omb_latency"
JACOBI = "jacobi"

BASELINE_CONFIG = PathConfig(num_gpu_paths=1, host_path_enabled=False,
                             max_chunks=1, graph_mode=False)

CSV_HEADER = "benchmark,topology,size,window,gpu_paths,host,graph_mode,chunks,metric,value,speedup"


@dataclass
class BenchmarkSpec:
    kind: str
    sizes: list[int]
    window: int = 1
    iterations: int = 5
    warmup: int = 1
    config: PathConfig = field(default_factory=PathConfig)
    topology: str = "beluga"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.sizes:
            raise ValueError("size list is empty")
        if self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass
class BenchRow:
    benchmark: str
    topology: str
    size: int
    window: int
    gpu_paths: int
    host: bool
    graph_mode: bool
    chunks: int
    metric: str
    value: float
    speedup: float | None = None

    def to_csv(self) -> str:
        speedup = "" if self.speedup is None else repr(self.speedup)
        return (f"{self.benchmark},{self.topology},{self.size},{self.window},"
                f"{self.gpu_paths},{'on' if self.host else 'off'},"
                f"{'on' if self.graph_mode else 'off'},{self.chunks},"
                f"{self.metric},{self.value!r},{speedup}")


@dataclass
class BenchResult:
    rows: list[BenchRow]
    integrity_all_clear: bool = True

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER] + [r.to_csv() for r in self.rows]) + "\n"

    def value(self, size: int, metric: str) -> float:
        for row in self.rows:
            if row.size == size and row.metric == metric:
                return row.value
        raise KeyError(f"no row for size={size} metric={metric}")

    def speedup(self, size: int, metric: str) -> float:
        for row in self.rows:
            if row.size == size and row.metric == metric:
                if row.speedup is None:
                    raise KeyError(f"row size={size} metric={metric} has no speedup")
                return row.speedup
        raise KeyError(f"no row for size={size} metric={metric}")


@dataclass
class _Flow:
    """One directed message stream in a benchmark iteration."""

    plan: ChunkPlan
    graph: ExecGraph
    mode: str
    key: object  # GraphKey; buffer identities stand in for device addresses


_buffer_counter = 0


def _new_buffer_id() -> int:
    global _buffer_counter
    _buffer_counter += 1
    return _buffer_counter


def _make_flow(topology: Topology, config: PathConfig, size: int,
               model: OverheadModel, src: int, dst: int) -> _Flow:
    path_set = plan_paths(topology, topology.device(src), topology.device(dst), config)
    plan = make_chunk_plan(path_set, size, config.max_chunks)
    graph = build_graph(plan)
    mode = GRAPH_MODE if config.graph_mode else STREAMED_MODE
    key = graph_key(_new_buffer_id(), _new_buffer_id(), size, config, path_set)
    return _Flow(plan, graph, mode, key)


def _host_cost(flow: _Flow, model: OverheadModel, first_time: bool) -> float:
    if flow.mode == GRAPH_MODE:
        return model.graph_host_cost(flow.graph.node_count, first_time)
    return streamed_host_cost(flow.graph, model)


def _iteration_makespan(topology: Topology, flows: list[_Flow], window: int,
                        model: OverheadModel, cache: GraphCache) -> float:
    """Makespan of one iteration posting `window` messages per flow.

    Message submissions serialize on each flow's host. In graph mode the
    cache decides which messages pay one-time lifecycle costs: the first
    posting builds and instantiates, every later one hits.
    """
    specs = []
    clocks = [0.0] * len(flows)
    for _ in range(window):
        for f_idx, flow in enumerate(flows):
            if flow.mode == GRAPH_MODE:
                graph, hit = cache.get_or_build(flow.key, flow.plan)
                first_time = not hit
            else:
                graph, first_time = flow.graph, True
            specs.append(TransferSpec(flow.mode, clocks[f_idx], model,
                                      first_time=first_time, graph=graph))
            clocks[f_idx] += _host_cost(flow, model, first_time)
    timelines = simulate_concurrent(topology, specs)
    return max(t.end for t in timelines)


def _steady_mean(first: float, steady: float, iterations: int, warmup: int) -> float:
    """Mean over measured iterations, the first `warmup` excluded."""
    values = [first if i == 0 else steady for i in range(warmup + iterations)]
    measured = values[warmup:]
    return sum(measured) / len(measured)


def _resolve(spec: BenchmarkSpec, topology: Topology | None) -> Topology:
    return topology if topology is not None else resolve(spec.topology)


def _tuned_config(config: PathConfig, size: int, table: TuningTable | None) -> PathConfig:
    if table is None:
        return config
    mode = GRAPH_MODE if config.graph_mode else STREAMED_MODE
    entry = table.lookup(size, mode)
    return replace(config, max_chunks=entry.best.max_chunks)


def _row(spec: BenchmarkSpec, config: PathConfig, size: int, metric: str,
         value: float, speedup: float | None = None) -> BenchRow:
    return BenchRow(spec.kind, spec.topology, size, spec.window,
                    config.num_gpu_paths, config.host_path_enabled,
                    config.graph_mode, config.max_chunks, metric, value, speedup)


def run_bw(spec: BenchmarkSpec, model: OverheadModel | None = None,
           topology: Topology | None = None,
           tuning_table: TuningTable | None = None) -> BenchResult:
    """Unidirectional bandwidth sweep with a posting window."""
    model = OverheadModel() if model is None else model
    topo = _resolve(spec, topology)
    rows = []
    for size in spec.sizes:
        config = _tuned_config(spec.config, size, tuning_table)

        def sweep(cfg: PathConfig) -> tuple[float, float]:
            cache = GraphCache(cfg.cache_capacity)
            flow = _make_flow(topo, cfg, size, model, 0, 1)
            first = _iteration_makespan(topo, [flow], spec.window, model, cache)
            steady = _iteration_makespan(topo, [flow], spec.window, model, cache)
            return first, steady

        first, steady = sweep(config)
        mean = _steady_mean(first, steady, spec.iterations, spec.warmup)
        bandwidth = spec.window * size / mean
        base_first, base_steady = sweep(BASELINE_CONFIG)
        base_bw = spec.window * size / _steady_mean(base_first, base_steady,
                                                    spec.iterations, spec.warmup)
        rows.append(_row(spec, config, size, "bandwidth", bandwidth, bandwidth / base_bw))
        rows.append(_row(spec, config, size, "first_iteration_makespan", first))
    return BenchResult(rows)


def run_bibw(spec: BenchmarkSpec, model: OverheadModel | None = None,
             topology: Topology | None = None,
             tuning_table: TuningTable | None = None) -> BenchResult:
    """Bidirectional bandwidth: two opposite flows, aggregate reported."""
    model = OverheadModel() if model is None else model
    topo = _resolve(spec, topology)
    rows = []
    for size in spec.sizes:
        config = _tuned_config(spec.config, size, tuning_table)

        def aggregate(cfg: PathConfig) -> float:
            cache = GraphCache(cfg.cache_capacity)
            flows = [_make_flow(topo, cfg, size, model, 0, 1),
                     _make_flow(topo, cfg, size, model, 1, 0)]
            first = _iteration_makespan(topo, flows, spec.window, model, cache)
            steady = _iteration_makespan(topo, flows, spec.window, model, cache)
            mean = _steady_mean(first, steady, spec.iterations, spec.warmup)
            return 2 * spec.window * size / mean

        bandwidth = aggregate(config)
        base = aggregate(BASELINE_CONFIG)
        rows.append(_row(spec, config, size, "bandwidth", bandwidth, bandwidth / base))
    return BenchResult(rows)


def run_latency(spec: BenchmarkSpec, model: OverheadModel | None = None,
                topology: Topology | None = None,
                tuning_table: TuningTable | None = None) -> BenchResult:
    """Single-message latency with the per-phase lifecycle breakdown."""
    model = OverheadModel() if model is None else model
    topo = _resolve(spec, topology)
    rows = []
    for size in spec.sizes:
        config = _tuned_config(spec.config, size, tuning_table)
        cache = GraphCache(config.cache_capacity)
        flow = _make_flow(topo, config, size, model, 0, 1)
        first = _iteration_makespan(topo, [flow], 1, model, cache)
        steady = _iteration_makespan(topo, [flow], 1, model, cache)

        base_cache = GraphCache(BASELINE_CONFIG.cache_capacity)
        base_flow = _make_flow(topo, BASELINE_CONFIG, size, model, 0, 1)
        base_first = _iteration_makespan(topo, [base_flow], 1, model, base_cache)
        base_steady = _iteration_makespan(topo, [base_flow], 1, model, base_cache)

        n = flow.graph.node_count
        rows.append(_row(spec, config, size, "nodes", float(n)))
        rows.append(_row(spec, config, size, "latency_first", first, base_first / first))
        rows.append(_row(spec, config, size, "latency_steady", steady, base_steady / steady))
        if config.graph_mode:
            for phase in PHASES:
                cost_first = model.lifecycle_cost(n, True, phase)
                cost_steady = model.lifecycle_cost(n, False, phase)
                rows.append(_row(spec, config, size, f"phase_{phase}_first", cost_first))
                rows.append(_row(spec, config, size, f"fraction_{phase}_first",
                                 cost_first / first))
                rows.append(_row(spec, config, size, f"phase_{phase}_steady", cost_steady))
                rows.append(_row(spec, config, size, f"fraction_{phase}_steady",
                                 cost_steady / steady))
        else:
            submission = _host_cost(flow, model, True)
            rows.append(_row(spec, config, size, "phase_submission_first", submission))
            rows.append(_row(spec, config, size, "fraction_submission_first",
                             submission / first))
    return BenchResult(rows)


@dataclass
class JacobiSpec:
    nx_values: list[int]
    ranks: int = 4
    ny: int = 8
    element_size: int = 8
    iterations: int = 1000
    compute_time_per_cell: float = 0.0

    def __post_init__(self):
        if self.ranks != 4:
            raise ValueError("the halo-exchange model is defined for 4 ranks")
        if not self.nx_values:
            raise ValueError("no problem sizes given")
        for nx in self.nx_values:
            if nx % self.ranks:
                raise ValueError(f"nx={nx} is not divisible by {self.ranks} ranks")

    def halo_bytes(self, nx: int) -> int:
        return nx * self.element_size // self.ranks

    def compute_seconds(self, nx: int) -> float:
        return nx * self.ny * self.compute_time_per_cell / self.ranks


@dataclass
class _JacobiComm:
    first: float
    steady: float
    reports: list[IntegrityReport]


def _jacobi_comm(topology: Topology, config: PathConfig, halo: int,
                 model: OverheadModel) -> _JacobiComm:
    """One iteration's halo exchange: a forward ring phase then a backward
    ring phase, each planned jointly to avoid channel sharing."""
    ranks = 4
    mode = GRAPH_MODE if config.graph_mode else STREAMED_MODE
    cache = GraphCache(config.cache_capacity)
    phases = []
    for direction in (1, -1):
        ring = [(topology.device(r), topology.device((r + direction) % ranks))
                for r in range(ranks)]
        if config.num_gpu_paths > 1 or config.host_path_enabled:
            path_sets = plan_contention_free(topology, ring, config).path_sets
        else:
            path_sets = [plan_paths(topology, src, dst, config) for src, dst in ring]
        plans = [make_chunk_plan(ps, halo, config.max_chunks) for ps in path_sets]
        keys = [graph_key(_new_buffer_id(), _new_buffer_id(), halo, config, ps)
                for ps in path_sets]
        graphs = [build_graph(p) for p in plans]
        phases.append((plans, keys, graphs))

    reports: list[IntegrityReport] = []

    def exchange() -> float:
        total = 0.0
        for plans, keys, graphs in phases:
            specs = []
            for plan, key, graph in zip(plans, keys, graphs):
                if mode == GRAPH_MODE:
                    graph, hit = cache.get_or_build(key, plan)
                    first_time = not hit
                else:
                    first_time = True
                specs.append(TransferSpec(mode, 0.0, model, first_time=first_time,
                                          graph=graph))
            timelines = simulate_concurrent(topology, specs)
            for plan, timeline in zip(plans, timelines):
                reports.append(check_timeline(plan, timeline))
            total += max(t.end for t in timelines)
        return total

    return _JacobiComm(exchange(), exchange(), reports)


def run_jacobi(spec: JacobiSpec, config: PathConfig,
               model: OverheadModel | None = None,
               topology: Topology | None = None,
               topology_name: str = "beluga") -> BenchResult:
    """Iterations of compute plus ring halo exchange, against the
    single-path baseline on the same problem."""
    model = OverheadModel() if model is None else model
    topo = topology if topology is not None else resolve(topology_name)
    if len(topo.accelerators) != spec.ranks:
        raise ValueError(f"halo-exchange model needs a {spec.ranks}-accelerator "
                         f"topology, {topo.name!r} has {len(topo.accelerators)}")
    bench_spec = BenchmarkSpec(JACOBI, sizes=[spec.halo_bytes(nx) for nx in spec.nx_values],
                               iterations=spec.iterations, config=config,
                               topology=topo.name)
    rows = []
    all_clear = True
    for nx in spec.nx_values:
        halo = spec.halo_bytes(nx)
        comm = _jacobi_comm(topo, config, halo, model)
        base = _jacobi_comm(topo, BASELINE_CONFIG, halo, model)
        all_clear &= all(r.all_clear for r in comm.reports + base.reports)

        iters = spec.iterations
        compute = spec.compute_seconds(nx) * iters
        comm_total = comm.first + comm.steady * (iters - 1)
        base_comm_total = base.first + base.steady * (iters - 1)
        runtime = compute + comm_total
        base_runtime = compute + base_comm_total

        rows.append(_row(bench_spec, config, halo, "runtime", runtime,
                         base_runtime / runtime))
        rows.append(_row(bench_spec, config, halo, "comm_time", comm_total,
                         base_comm_total / comm_total))
        rows.append(_row(bench_spec, config, halo, "integrity",
                         1.0 if all_clear else 0.0))
    return BenchResult(rows, integrity_all_clear=all_clear)


def overhead_rows(model: OverheadModel, node_counts: list[int],
                  topology_name: str = "-") -> BenchResult:
    """Per-phase lifecycle costs and fractions by node count, first and
    subsequent iterations side by side."""
    rows = []
    spec = BenchmarkSpec("overhead", sizes=node_counts, topology=topology_name,
                         config=PathConfig(graph_mode=True))
    for n in node_counts:
        first_total = model.graph_host_cost(n, True)
        steady_total = model.graph_host_cost(n, False)
        for phase in PHASES:
            cost_first = model.lifecycle_cost(n, True, phase)
            cost_steady = model.lifecycle_cost(n, False, phase)
            rows.append(_row(spec, spec.config, n, f"phase_{phase}_first", cost_first))
            rows.append(_row(spec, spec.config, n, f"fraction_{phase}_first",
                             cost_first / first_total))
            rows.append(_row(spec, spec.config, n, f"phase_{phase}_steady", cost_steady))
            rows.append(_row(spec, spec.config, n, f"fraction_{phase}_steady",
                             cost_steady / steady_total))
    return BenchResult(rows)
