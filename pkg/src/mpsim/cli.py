"""Command-line front end: topology validation, one-off simulations,
benchmark sweeps, tuning, overhead tables, artifact verification, and
randomized self-checks.

Every flag has an environment-variable twin where one exists, and the
flag wins. Outputs are plain CSV; with --figures the report path also
renders matplotlib figures next to the delimited output. All outputs
are byte-deterministic for identical argv, environment, and seed.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
from dataclasses import fields, replace
from types import SimpleNamespace

from . import bench as bench_mod
from . import plots
from .graph import OverheadModel, build_graph
from .integrity import check_coverage, check_timeline
from .paths import (BANDWIDTH_PROPORTIONAL, EQUAL, PathConfig, PlanError,
                    plan_paths)
from .pipeline import ChunkError, make_chunk_plan
from .sim import (GRAPH_MODE, STREAMED_MODE, SimTask, SimulationError, Timeline,
                  simulate_graph, simulate_streamed)
from .topology import Channel, TopologyError, resolve
from .tuner import GridPoint, TuningTable, tune

_SUFFIXES = {"k": 1 << 10, "m": 1 << 20, "g": 1 << 30}


def parse_size(text: str) -> int:
    text = text.strip().lower()
    if text and text[-1] in _SUFFIXES:
        return int(float(text[:-1]) * _SUFFIXES[text[-1]])
    return int(text)


def parse_size_list(text: str) -> list[int]:
    """Either 'a,b,c' or a doubling range 'a..b' (b appended if missed)."""
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = parse_size(lo_s), parse_size(hi_s)
        if lo < 1 or hi < lo:
            raise ValueError(f"bad size range {text!r}")
        sizes = []
        value = lo
        while value <= hi:
            sizes.append(value)
            value *= 2
        if sizes[-1] != hi:
            sizes.append(hi)
        return sizes
    return [parse_size(part) for part in text.split(",") if part.strip()]


def _flag(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("on", "1", "true", "yes"):
        return True
    if lowered in ("off", "0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--gpu-paths", type=int, help="number of GPU paths incl. direct "
                        "(env MP_NUM_GPU_PATHS)")
    parser.add_argument("--host", type=_flag, help="enable the host-staged path "
                        "(env MP_ENABLE_HOST_PATH)")
    parser.add_argument("--chunks", type=int, help="max chunks per path (env MP_MAX_CHUNKS)")
    parser.add_argument("--graph", type=_flag, help="execute via cached graphs "
                        "(env MP_ENABLE_GRAPH)")
    parser.add_argument("--cache-size", type=int, help="graph cache capacity "
                        "(env MP_GRAPH_CACHE_SIZE)")
    parser.add_argument("--share-policy", choices=(EQUAL, BANDWIDTH_PROPORTIONAL),
                        help="how message bytes split across paths (env MP_SHARE_POLICY)")


def _config_from(args, env) -> PathConfig:
    config = PathConfig.from_env(env)
    if args.gpu_paths is not None:
        config = replace(config, num_gpu_paths=args.gpu_paths)
    if args.host is not None:
        config = replace(config, host_path_enabled=args.host)
    if args.chunks is not None:
        config = replace(config, max_chunks=args.chunks)
    if getattr(args, "graph", None) is not None:
        config = replace(config, graph_mode=args.graph)
    if args.cache_size is not None:
        config = replace(config, cache_capacity=args.cache_size)
    if args.share_policy is not None:
        config = replace(config, share_policy=args.share_policy)
    return config


def _overhead_model(args) -> OverheadModel:
    model = OverheadModel()
    names = {f.name for f in fields(OverheadModel)}
    for item in args.overhead or []:
        key, _, value = item.partition("=")
        if key not in names or not value:
            raise ValueError(f"bad --overhead entry {item!r}; known keys: "
                             + ", ".join(sorted(names)))
        model = replace(model, **{key: float(value)})
    return model


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _dump_plan(plan) -> str:
    lines = [f"plan {plan.total_size}"]
    for i, path in enumerate(plan.path_set.paths):
        stage = path.stage.label if path.stage is not None else "-"
        lines.append(f"path {i} {path.kind} {stage} {path.share!r}")
    for chunk in plan.chunks:
        lines.append(f"chunk {chunk.path_index} {chunk.offset} {chunk.length} {chunk.seq}")
    return "\n".join(lines) + "\n"


def _load_plan_dump(path: str):
    """Rebuild just enough plan structure for the integrity checks."""
    total = None
    paths: list[SimpleNamespace] = []
    chunks: list[SimpleNamespace] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "plan":
                total = int(parts[1])
            elif parts[0] == "path":
                hops = 1 if parts[2] == "direct" else 2
                paths.append(SimpleNamespace(kind=parts[2], hops=(None,) * hops))
            elif parts[0] == "chunk":
                chunks.append(SimpleNamespace(path_index=int(parts[1]),
                                              offset=int(parts[2]),
                                              length=int(parts[3]),
                                              seq=int(parts[4])))
    if total is None:
        raise ValueError(f"{path}: not a plan dump (missing 'plan' header)")
    return SimpleNamespace(total_size=total, chunks=chunks,
                           path_set=SimpleNamespace(paths=paths))


def _load_timeline_csv(path: str) -> Timeline:
    tasks = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "task_id,path,role,channel,start,end,offset,length":
            raise ValueError(f"{path}: not a timeline CSV")
        channels: dict[str, Channel] = {}
        for line in fh:
            if not line.strip():
                continue
            tid, pidx, role, chan, start, end, offset, length = line.strip().split(",")
            channel = channels.setdefault(chan, Channel(chan, 1.0, 0.0))
            tasks.append(SimTask(int(tid), int(pidx), role, channel, 0,
                                 int(offset), int(length),
                                 float(start), float(start), float(end)))
    if not tasks:
        raise ValueError(f"{path}: timeline has no tasks")
    busy: dict[str, list[tuple[float, float]]] = {}
    for t in sorted(tasks, key=lambda x: x.start_time):
        busy.setdefault(t.channel.id, []).append((t.start_time, t.end_time))
    makespan = max(t.end_time for t in tasks)
    return Timeline(0.0, tasks, busy, makespan, sum(t.length for t in tasks),
                    0.0, 0.0, 0)


def _cmd_topo(args, env) -> int:
    topo = resolve(args.topology)
    accel_links = sum(1 for l in topo.links if not l.b.is_host and not l.a.is_host)
    host_links = len(topo.links) - accel_links
    print(f"{topo.name}: {len(topo.accelerators)} accelerators, "
          f"{accel_links} accelerator links, {host_links} host links")
    return 0


def _cmd_simulate(args, env) -> int:
    topo = resolve(args.topology)
    config = _config_from(args, env)
    model = _overhead_model(args)
    src, dst = topo.device(args.src), topo.device(args.dst)
    path_set = plan_paths(topo, src, dst, config)
    plan = make_chunk_plan(path_set, args.size, config.max_chunks)
    if config.graph_mode:
        graph = build_graph(plan)
        timeline = simulate_graph(topo, graph, model, first_time=args.first_time)
    else:
        graph = build_graph(plan)
        timeline = simulate_streamed(topo, plan, model)
    if args.dump_plan:
        _write_text(args.dump_plan, _dump_plan(plan))
    if args.dump_graph:
        _write_text(args.dump_graph, graph.dump())
    if args.dump_timeline:
        _write_text(args.dump_timeline, timeline.to_csv())
    report = check_timeline(plan, timeline)
    mode = GRAPH_MODE if config.graph_mode else STREAMED_MODE
    print(f"mode {mode}")
    print(f"paths {len(path_set.paths)} chunks {len(plan.chunks)} nodes {graph.node_count}")
    print(f"makespan_s {timeline.makespan!r}")
    print(f"bandwidth_bytes_per_s {timeline.bytes_moved / timeline.makespan!r}")
    print(f"integrity {'clear' if report.all_clear else 'VIOLATED'}")
    return 0 if report.all_clear else 1


def _bench_spec(args, env, kind: str) -> bench_mod.BenchmarkSpec:
    return bench_mod.BenchmarkSpec(
        kind=kind, sizes=parse_size_list(args.sizes), window=args.window,
        iterations=args.iterations, warmup=args.warmup,
        config=_config_from(args, env), topology=args.topology)


def _cmd_bench(args, env) -> int:
    model = _overhead_model(args)
    table = None
    if args.tuning_table:
        with open(args.tuning_table, encoding="utf-8") as fh:
            table = TuningTable.from_csv(fh.read())

    if args.bench_kind == "jacobi":
        jspec = bench_mod.JacobiSpec(
            nx_values=parse_size_list(args.nx), ny=args.ny,
            element_size=args.element_size, iterations=args.iterations,
            compute_time_per_cell=args.compute_time_per_cell)
        config = _config_from(args, env)
        result = bench_mod.run_jacobi(jspec, config, model, topology_name=args.topology)
    else:
        spec = _bench_spec(args, env, f"omb_{args.bench_kind}"
                           if args.bench_kind != "bw" or args.window > 1 else "put_bw")
        runner = {"bw": bench_mod.run_bw, "bibw": bench_mod.run_bibw,
                  "latency": bench_mod.run_latency}[args.bench_kind]
        result = runner(spec, model, tuning_table=table)

    _write_text(args.output, result.to_csv())
    if args.figures:
        stem = f"{args.bench_kind}_{args.topology}"
        for figure in plots.render_for(args.bench_kind, result, args.figures, stem):
            print(f"figure {figure}", file=sys.stderr)
    if args.bench_kind == "jacobi" and not result.integrity_all_clear:
        print("error: integrity violation in a simulated exchange", file=sys.stderr)
        return 1
    return 0


def _cmd_tune(args, env) -> int:
    topo = resolve(args.topology)
    model = _overhead_model(args)
    grid = None
    if args.grid_chunks or args.grid_paths:
        from .tuner import DEFAULT_GPU_PATHS, DEFAULT_HOST_FLAGS, DEFAULT_MAX_CHUNKS
        paths = ([int(p) for p in args.grid_paths.split(",")]
                 if args.grid_paths else DEFAULT_GPU_PATHS)
        chunk_values = ([int(c) for c in args.grid_chunks.split(",")]
                        if args.grid_chunks else DEFAULT_MAX_CHUNKS)
        grid = [GridPoint(g, h, c) for g in paths for h in DEFAULT_HOST_FLAGS
                for c in chunk_values]
    modes = tuple(args.modes.split(","))
    table = tune(topo, parse_size_list(args.sizes), grid=grid, model=model,
                 reuse_count=args.reuse, modes=modes)
    _write_text(args.output, table.to_csv())
    return 0


def _cmd_overhead(args, env) -> int:
    model = _overhead_model(args)
    nodes = parse_size_list(args.nodes)
    result = bench_mod.overhead_rows(model, nodes)
    _write_text(args.output, result.to_csv())
    if args.figures:
        for figure in plots.render_for("overhead", result, args.figures, "overhead"):
            print(f"figure {figure}", file=sys.stderr)
    return 0


def _cmd_verify(args, env) -> int:
    plan = _load_plan_dump(args.plan)
    timeline = _load_timeline_csv(args.timeline)
    report = check_timeline(plan, timeline)
    if report.all_clear:
        print("verify: all clear")
        return 0
    if not report.coverage_ok:
        print(f"verify: coverage violated: {report.coverage_detail}")
    for offset, detail in report.ordering_violations:
        print(f"verify: ordering violated at offset {offset}: {detail}")
    for channel, detail in report.contention_violations:
        print(f"verify: contention on {channel}: {detail}")
    if not report.completion_ok:
        print("verify: completion precedes last task end")
    return 1


def _cmd_fuzz(args, env) -> int:
    topo = resolve(args.topology)
    model = OverheadModel()
    rng = random.Random(args.seed)
    lines = ["case,size,gpu_paths,host,chunks,coverage_ok,timeline_ok"]
    failures = 0
    for case in range(args.count):
        size = int(2 ** rng.uniform(0, 24))
        config = PathConfig(num_gpu_paths=rng.randint(1, 3),
                            host_path_enabled=rng.random() < 0.5,
                            max_chunks=rng.randint(1, 32))
        path_set = plan_paths(topo, topo.device(0), topo.device(1), config)
        plan = make_chunk_plan(path_set, size, config.max_chunks)
        coverage_ok = check_coverage(plan).all_clear
        timeline = simulate_streamed(topo, plan, model)
        timeline_ok = check_timeline(plan, timeline).all_clear
        failures += (not coverage_ok) + (not timeline_ok)
        lines.append(f"{case},{size},{config.num_gpu_paths},"
                     f"{'on' if config.host_path_enabled else 'off'},{config.max_chunks},"
                     f"{int(coverage_ok)},{int(timeline_ok)}")
    _write_text(args.output, "\n".join(lines) + "\n")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpsim",
        description="deterministic multi-path GPU transfer simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_topo = sub.add_parser("topo", help="topology utilities")
    topo_sub = p_topo.add_subparsers(dest="topo_command", required=True)
    p_validate = topo_sub.add_parser("validate", help="load and validate a topology")
    p_validate.add_argument("topology", help="preset name or config path")
    p_validate.set_defaults(func=_cmd_topo)

    p_sim = sub.add_parser("simulate", help="simulate one transfer")
    p_sim.add_argument("--topology", default="beluga")
    p_sim.add_argument("--src", type=int, default=0)
    p_sim.add_argument("--dst", type=int, default=1)
    p_sim.add_argument("--size", type=parse_size, required=True)
    p_sim.add_argument("--first-time", type=_flag, default=True,
                       help="bill one-time graph phases (graph mode)")
    p_sim.add_argument("--dump-timeline", metavar="FILE")
    p_sim.add_argument("--dump-plan", metavar="FILE")
    p_sim.add_argument("--dump-graph", metavar="FILE")
    p_sim.add_argument("--overhead", action="append", metavar="KEY=VAL")
    _add_config_flags(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_bench = sub.add_parser("bench", help="run a benchmark sweep")
    bench_sub = p_bench.add_subparsers(dest="bench_kind", required=True)
    for kind in ("bw", "bibw", "latency", "jacobi"):
        p_kind = bench_sub.add_parser(kind)
        p_kind.add_argument("--topology", default="beluga")
        p_kind.add_argument("--window", type=int, default=1)
        p_kind.add_argument("--iterations", type=int, default=5)
        p_kind.add_argument("--warmup", type=int, default=1)
        p_kind.add_argument("--output", metavar="FILE")
        p_kind.add_argument("--figures", metavar="DIR",
                            help="also render figures into this directory")
        p_kind.add_argument("--tuning-table", metavar="FILE")
        p_kind.add_argument("--overhead", action="append", metavar="KEY=VAL")
        _add_config_flags(p_kind)
        if kind == "jacobi":
            p_kind.add_argument("--nx", default="8M..1G",
                                help="horizontal cells, list or doubling range")
            p_kind.add_argument("--ny", type=int, default=8)
            p_kind.add_argument("--element-size", type=int, default=8)
            p_kind.add_argument("--compute-time-per-cell", type=float, default=0.0)
            p_kind.set_defaults(iterations=1000)
        else:
            p_kind.add_argument("--sizes", default="1M..512M")
        p_kind.set_defaults(func=_cmd_bench)

    p_tune = sub.add_parser("tune", help="exhaustive configuration search")
    p_tune.add_argument("--topology", default="beluga")
    p_tune.add_argument("--sizes", default="1M..512M")
    p_tune.add_argument("--reuse", type=int, default=1000,
                        help="iterations over which one-time graph costs amortize")
    p_tune.add_argument("--modes", default="graph,streamed")
    p_tune.add_argument("--grid-paths", metavar="LIST")
    p_tune.add_argument("--grid-chunks", metavar="LIST")
    p_tune.add_argument("--output", metavar="FILE")
    p_tune.add_argument("--overhead", action="append", metavar="KEY=VAL")
    p_tune.set_defaults(func=_cmd_tune)

    p_over = sub.add_parser("overhead", help="graph lifecycle cost table")
    p_over.add_argument("--nodes", default="2,8,16,34")
    p_over.add_argument("--mode", choices=("graph",), default="graph")
    p_over.add_argument("--output", metavar="FILE")
    p_over.add_argument("--figures", metavar="DIR")
    p_over.add_argument("--overhead", action="append", metavar="KEY=VAL")
    p_over.set_defaults(func=_cmd_overhead)

    p_verify = sub.add_parser("verify", help="check a plan dump and timeline CSV")
    p_verify.add_argument("--plan", required=True)
    p_verify.add_argument("--timeline", required=True)
    p_verify.set_defaults(func=_cmd_verify)

    p_fuzz = sub.add_parser("fuzz", help="randomized plan and simulation checks")
    p_fuzz.add_argument("--topology", default="beluga")
    p_fuzz.add_argument("--seed", type=int, default=0)
    p_fuzz.add_argument("--count", type=int, default=100)
    p_fuzz.add_argument("--output", metavar="FILE")
    p_fuzz.set_defaults(func=_cmd_fuzz)

    return parser


def main(argv: list[str] | None = None, env=None) -> int:
    env = os.environ if env is None else env
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, env)
    except (TopologyError, PlanError, ChunkError, SimulationError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
