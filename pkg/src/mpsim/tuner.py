"""Offline exhaustive search for the best transfer configuration.

Every grid point is simulated for every (size, mode) cell; graph mode
amortizes its one-time lifecycle cost over a configurable reuse count.
Ties go to fewer paths, then fewer chunks, then host off, keeping the
search deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .graph import OverheadModel, build_graph
from .paths import PathConfig, plan_paths
from .pipeline import make_chunk_plan
from .sim import GRAPH_MODE, STREAMED_MODE, simulate_graph, simulate_streamed
from .topology import Topology

DEFAULT_GPU_PATHS = (1, 2, 3)
DEFAULT_HOST_FLAGS = (False, True)
DEFAULT_MAX_CHUNKS = (1, 2, 4, 8, 16, 32)
MODES = (GRAPH_MODE, STREAMED_MODE)


@dataclass(frozen=True)
class GridPoint:
    gpu_paths: int
    host: bool
    max_chunks: int


def default_grid() -> list[GridPoint]:
    return [GridPoint(g, h, c)
            for g in DEFAULT_GPU_PATHS
            for h in DEFAULT_HOST_FLAGS
            for c in DEFAULT_MAX_CHUNKS]


@dataclass(frozen=True)
class TuningEntry:
    size: int
    mode: str
    best: GridPoint
    makespan: float  # predicted seconds per transfer at the winning point


@dataclass
class TuningTable:
    topology: str
    entries: list[TuningEntry]

    def lookup(self, size: int, mode: str) -> TuningEntry:
        """Entry for the nearest tuned size (log distance, smaller wins ties)."""
        candidates = [e for e in self.entries if e.mode == mode]
        if not candidates:
            raise KeyError(f"no tuning entries for mode {mode!r}")
        return min(candidates,
                   key=lambda e: (abs(math.log(size) - math.log(e.size)), e.size))

    def to_csv(self) -> str:
        lines = ["size,mode,gpu_paths,host,max_chunks,makespan"]
        for e in self.entries:
            lines.append(f"{e.size},{e.mode},{e.best.gpu_paths},"
                         f"{'on' if e.best.host else 'off'},{e.best.max_chunks},"
                         f"{e.makespan!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, topology: str = "") -> "TuningTable":
        entries = []
        lines = [ln for ln in text.splitlines() if ln.strip()]
        for line in lines[1:]:
            size_s, mode, paths_s, host_s, chunks_s, makespan_s = line.split(",")
            entries.append(TuningEntry(int(size_s), mode,
                                       GridPoint(int(paths_s), host_s == "on", int(chunks_s)),
                                       float(makespan_s)))
        return cls(topology, entries)


def predicted_makespan(topology: Topology, size: int, mode: str, point: GridPoint,
                       model: OverheadModel, reuse_count: int,
                       base_config: PathConfig | None = None) -> float:
    """Simulate one grid point; graph mode averages the first run and
    reuse_count - 1 cached replays."""
    config = base_config or PathConfig()
    config = replace(config, num_gpu_paths=point.gpu_paths,
                     host_path_enabled=point.host, max_chunks=point.max_chunks,
                     graph_mode=(mode == GRAPH_MODE))
    src, dst = topology.device(0), topology.device(1)
    plan = make_chunk_plan(plan_paths(topology, src, dst, config), size, point.max_chunks)
    if mode == STREAMED_MODE:
        return simulate_streamed(topology, plan, model).makespan
    graph = build_graph(plan)
    first = simulate_graph(topology, graph, model, first_time=True).makespan
    if reuse_count <= 1:
        return first
    steady = simulate_graph(topology, graph, model, first_time=False).makespan
    return (first + (reuse_count - 1) * steady) / reuse_count


def tune(topology: Topology, sizes: list[int], grid: list[GridPoint] | None = None,
         model: OverheadModel | None = None, reuse_count: int = 1000,
         modes: tuple[str, ...] = MODES) -> TuningTable:
    """Exhaustively search the grid per (size, mode) and record the argmin."""
    if not sizes:
        raise ValueError("size list is empty")
    grid = default_grid() if grid is None else grid
    if not grid:
        raise ValueError("tuning grid is empty")
    model = OverheadModel() if model is None else model

    entries = []
    for size in sizes:
        for mode in modes:
            best_key = None
            best = None
            for point in grid:
                makespan = predicted_makespan(topology, size, mode, point, model, reuse_count)
                key = (makespan, point.gpu_paths, point.max_chunks, point.host)
                if best_key is None or key < best_key:
                    best_key, best = key, TuningEntry(size, mode, point, makespan)
            entries.append(best)
    return TuningTable(topology.name, entries)
