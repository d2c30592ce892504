"""Reusable execution DAGs of copy nodes, keyed and cached under LRU.

A graph is the replayable product of a chunk plan: one node per
(chunk, hop) and one dependency edge per staged chunk. Building is pure
and stable, so the same plan always yields a bit-identical graph.
Lifecycle accounting follows four phases: creation, construction, and
instantiation are billed once per graph, launch on every replay.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass, fields

from .paths import DIRECT, PathConfig, PathSet
from .pipeline import ChunkPlan, lane_schedule
from .topology import Channel, DeviceId

ROLE_DIRECT = "direct"
ROLE_HOP1 = "stage_hop1"
ROLE_HOP2 = "stage_hop2"

PHASES = ("creation", "construction", "instantiation", "launch")
ONE_TIME_PHASES = ("creation", "construction", "instantiation")


@dataclass(frozen=True)
class CopyNode:
    id: int
    src_dev: DeviceId
    dst_dev: DeviceId
    channel: Channel
    offset: int
    length: int
    lane: int
    role: str
    chunk_index: int  # position in plan.chunks, links timeline back to plan
    path_index: int


@dataclass
class ExecGraph:
    nodes: list[CopyNode]
    edges: list[tuple[int, int]]  # (from id, to id), one per staged chunk
    lane_count: int
    key: "GraphKey | None" = None

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def predecessors(self) -> dict[int, list[int]]:
        preds: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for a, b in self.edges:
            preds[b].append(a)
        return preds

    def topological_order(self) -> list[int]:
        """Kahn order over dependency edges; raises on a cycle."""
        preds = self.predecessors()
        indeg = {nid: len(p) for nid, p in preds.items()}
        succs: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for a, b in self.edges:
            succs[a].append(b)
        frontier = [nid for nid in sorted(indeg) if indeg[nid] == 0]
        order: list[int] = []
        while frontier:
            nid = frontier.pop(0)
            order.append(nid)
            for succ in succs[nid]:
                indeg[succ] -= 1
                if indeg[succ] == 0:
                    frontier.append(succ)
        if len(order) != len(self.nodes):
            raise ValueError("execution graph contains a cycle")
        return order

    def dump(self) -> str:
        """Text edge-list form used by golden-file tests and the CLI."""
        lines = [f"node {n.id} {n.role} {n.src_dev}->{n.dst_dev} {n.offset} {n.length}"
                 for n in self.nodes]
        lines += [f"edge {a} {b}" for a, b in self.edges]
        return "\n".join(lines) + "\n"


def build_graph(plan: ChunkPlan) -> ExecGraph:
    """Materialize the DAG for a chunk plan: one node per chunk hop."""
    schedule = lane_schedule(plan)
    lane_of = {(lane.path_index, lane.hop): lane.lane_id for lane in schedule.lanes}
    nodes: list[CopyNode] = []
    edges: list[tuple[int, int]] = []
    for chunk_id, chunk in enumerate(plan.chunks):
        path = plan.path_set.paths[chunk.path_index]
        if path.kind == DIRECT:
            hop = path.hops[0]
            nodes.append(CopyNode(len(nodes), hop.src, hop.dst, hop.channel,
                                  chunk.offset, chunk.length,
                                  lane_of[(chunk.path_index, 0)], ROLE_DIRECT,
                                  chunk_id, chunk.path_index))
        else:
            hop1, hop2 = path.hops
            first = CopyNode(len(nodes), hop1.src, hop1.dst, hop1.channel,
                             chunk.offset, chunk.length,
                             lane_of[(chunk.path_index, 0)], ROLE_HOP1,
                             chunk_id, chunk.path_index)
            nodes.append(first)
            second = CopyNode(len(nodes), hop2.src, hop2.dst, hop2.channel,
                              chunk.offset, chunk.length,
                              lane_of[(chunk.path_index, 1)], ROLE_HOP2,
                              chunk_id, chunk.path_index)
            nodes.append(second)
            edges.append((first.id, second.id))
    return ExecGraph(nodes, edges, schedule.lane_count)


@dataclass(frozen=True)
class GraphKey:
    src_buffer_id: int
    dst_buffer_id: int
    size: int
    config_digest: str


def _digest(config: PathConfig, path_set: PathSet) -> str:
    hasher = hashlib.sha256()
    hasher.update(repr((
        config.num_gpu_paths, config.host_path_enabled, config.max_chunks,
        config.graph_mode, config.share_policy,
        path_set.src.label, path_set.dst.label,
        tuple((p.kind, p.stage.label if p.stage else None, p.share,
               tuple(h.channel.id for h in p.hops)) for p in path_set.paths),
    )).encode())
    return hasher.hexdigest()


def graph_key(src_buf: int, dst_buf: int, size: int,
              config: PathConfig, path_set: PathSet) -> GraphKey:
    """Stable identity of a graph: buffers, size, and configuration."""
    return GraphKey(src_buf, dst_buf, size, _digest(config, path_set))


@dataclass
class _CacheEntry:
    graph: ExecGraph
    instantiated: bool
    last_use: int


class GraphCache:
    """Fixed-capacity store of instantiated graphs with LRU eviction."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"cache capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._entries: OrderedDict[GraphKey, _CacheEntry] = OrderedDict()
        self._clock = 0

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key: GraphKey):
        return key in self._entries

    def keys(self) -> list[GraphKey]:
        return list(self._entries)

    def get_or_build(self, key: GraphKey, plan: ChunkPlan) -> tuple[ExecGraph, bool]:
        """Return (graph, hit). A miss builds, instantiates, and inserts."""
        self._clock += 1
        entry = self._entries.get(key)
        if entry is not None:
            self._entries.move_to_end(key)
            entry.last_use = self._clock
            return entry.graph, True
        graph = build_graph(plan)
        graph.key = key
        self._entries[key] = _CacheEntry(graph, instantiated=True, last_use=self._clock)
        while len(self._entries) > self.capacity:
            self._entries.popitem(last=False)
        return graph, False


def cache_get_or_build(cache: GraphCache, key: GraphKey,
                       plan: ChunkPlan) -> tuple[ExecGraph, bool]:
    return cache.get_or_build(key, plan)


@dataclass(frozen=True)
class OverheadModel:
    """Affine per-phase host costs: cost(phase, n) = a + b * n seconds.

    submit_cost is charged per individually submitted copy outside graph
    mode; event_cost per cross-lane synchronization event.
    """

    a_creation: float = 20e-6
    b_creation: float = 2e-6
    a_construction: float = 10e-6
    b_construction: float = 3e-6
    a_instantiation: float = 0.3e-3
    b_instantiation: float = 0.08e-3
    a_launch: float = 5e-6
    b_launch: float = 1.5e-6
    submit_cost: float = 7e-6
    event_cost: float = 2e-6

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"overhead coefficient {f.name} must be >= 0")

    @classmethod
    def zero(cls) -> "OverheadModel":
        return cls(0, 0, 0, 0, 0, 0, 0, 0, 0, 0)

    def phase_cost(self, phase: str, n: int) -> float:
        if phase not in PHASES:
            raise ValueError(f"unknown lifecycle phase {phase!r}")
        if n < 1:
            raise ValueError(f"node count must be >= 1, got {n}")
        return getattr(self, f"a_{phase}") + getattr(self, f"b_{phase}") * n

    def lifecycle_cost(self, n: int, first_time: bool, phase: str) -> float:
        """Billed cost of one phase; one-time phases are free on reuse."""
        if phase in ONE_TIME_PHASES and not first_time:
            return 0.0
        return self.phase_cost(phase, n)

    def graph_host_cost(self, n: int, first_time: bool) -> float:
        return sum(self.lifecycle_cost(n, first_time, phase) for phase in PHASES)


def lifecycle_cost(model: OverheadModel, n: int, first_time: bool, phase: str) -> float:
    return model.lifecycle_cost(n, first_time, phase)
