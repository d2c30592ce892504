"""Deterministic discrete-event execution of copy DAGs over a topology.

Channels are exclusive-occupancy resources with FIFO queueing by ready
time (ties broken by transfer arrival order, then node id). Lanes are
in-order queues: a task waits for its lane predecessor, its dependency
edges, and its host-side release before entering the channel queue.
All state is local to one invocation, so identical inputs produce
bit-identical timelines.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .graph import ExecGraph, OverheadModel, ROLE_HOP2, build_graph
from .pipeline import ChunkPlan
from .topology import Channel, Topology

GRAPH_MODE = "graph"
STREAMED_MODE = "streamed"

# Event kinds in processing priority at equal timestamps: all readiness
# updates settle before any channel picks its next task.
_READY, _DONE, _KICK = 0, 1, 2


class SimulationError(ValueError):
    pass


@dataclass
class SimTask:
    """One executed copy node with its simulated times."""

    node_id: int
    path_index: int
    role: str
    channel: Channel
    lane: int
    offset: int
    length: int
    ready_time: float
    start_time: float
    end_time: float

    @property
    def queue_time(self) -> float:
        return self.start_time - self.ready_time


@dataclass
class Timeline:
    """The simulator's output for a single transfer."""

    start: float
    tasks: list[SimTask]
    channel_busy: dict[str, list[tuple[float, float]]]
    makespan: float  # duration from `start`, final synchronization included
    bytes_moved: int
    host_cost: float
    final_sync_cost: float
    lane_count: int

    @property
    def end(self) -> float:
        return self.start + self.makespan

    @property
    def contention_queue_time(self) -> float:
        return sum(t.queue_time for t in self.tasks)

    def to_csv(self) -> str:
        lines = ["task_id,path,role,channel,start,end,offset,length"]
        for t in self.tasks:
            lines.append(f"{t.node_id},{t.path_index},{t.role},{t.channel.id},"
                         f"{t.start_time!r},{t.end_time!r},{t.offset},{t.length}")
        return "\n".join(lines) + "\n"


@dataclass
class SimReport:
    makespan: float
    bandwidth: float
    phase_breakdown: dict[str, float]
    contention_queue_time: float

    @classmethod
    def from_timeline(cls, timeline: Timeline, model: OverheadModel,
                      mode: str, first_time: bool, node_count: int) -> "SimReport":
        if mode == GRAPH_MODE:
            breakdown = {phase: model.lifecycle_cost(node_count, first_time, phase)
                         for phase in ("creation", "construction", "instantiation", "launch")}
        else:
            breakdown = {"submission": timeline.host_cost}
        bandwidth = timeline.bytes_moved / timeline.makespan if timeline.makespan > 0 else 0.0
        return cls(timeline.makespan, bandwidth, breakdown, timeline.contention_queue_time)


@dataclass
class TransferSpec:
    """One transfer to simulate: a graph or plan, its mode and arrival."""

    mode: str
    arrival: float
    model: OverheadModel
    first_time: bool = True
    graph: ExecGraph | None = None
    plan: ChunkPlan | None = None

    def resolve_graph(self) -> ExecGraph:
        if self.graph is not None:
            return self.graph
        if self.plan is None:
            raise SimulationError("transfer needs a graph or a plan")
        return build_graph(self.plan)


class _Task:
    __slots__ = ("uid", "node", "transfer", "base_ready", "pending", "ready_acc",
                 "ready_time", "start_time", "end_time", "succs")

    def __init__(self, uid, node, transfer, base_ready):
        self.uid = uid
        self.node = node
        self.transfer = transfer
        self.base_ready = base_ready
        self.pending = 0
        self.ready_acc = base_ready
        self.ready_time = None
        self.start_time = None
        self.end_time = None
        self.succs: list[int] = []


class _ChannelState:
    __slots__ = ("channel", "busy", "queue")

    def __init__(self, channel):
        self.channel = channel
        self.busy = False
        self.queue: list[tuple[float, int, int, int]] = []  # (ready, transfer, node, uid)


def streamed_host_cost(graph: ExecGraph, model: OverheadModel) -> float:
    """Host cost of per-operation submission: one serialized submit per
    node plus one synchronization event per cross-lane dependency."""
    events = sum(1 for node in graph.nodes if node.role == ROLE_HOP2)
    return model.submit_cost * graph.node_count + model.event_cost * events


def _run(topology: Topology, specs: list[TransferSpec]) -> list[Timeline]:
    known = set(map(id, topology.channels()))
    tasks: list[_Task] = []
    per_transfer: list[list[_Task]] = []
    host_costs: list[float] = []
    graphs: list[ExecGraph] = []

    for t_idx, spec in enumerate(specs):
        graph = spec.resolve_graph()
        graph.topological_order()  # defensive cycle check
        graphs.append(graph)
        if spec.mode == GRAPH_MODE:
            host_cost = spec.model.graph_host_cost(graph.node_count, spec.first_time)
        elif spec.mode == STREAMED_MODE:
            host_cost = streamed_host_cost(graph, spec.model)
        else:
            raise SimulationError(f"unknown simulation mode {spec.mode!r}")
        # Host work is a serial block: no task becomes ready before it ends.
        release = spec.arrival + host_cost
        host_costs.append(host_cost)

        base = len(tasks)
        these = []
        for node in graph.nodes:
            if id(node.channel) not in known:
                raise SimulationError(f"channel {node.channel.id} of node {node.id} "
                                      f"is not part of topology {topology.name!r}")
            task = _Task(base + node.id, node, t_idx, release)
            tasks.append(task)
            these.append(task)
        for a, b in graph.edges:
            tasks[base + a].succs.append(base + b)
            tasks[base + b].pending += 1
        last_in_lane: dict[int, int] = {}
        for node in graph.nodes:  # lane FIFO: previous lane entry must finish
            prev = last_in_lane.get(node.lane)
            if prev is not None:
                tasks[prev].succs.append(base + node.id)
                tasks[base + node.id].pending += 1
            last_in_lane[node.lane] = base + node.id
        per_transfer.append(these)

    channels: dict[int, _ChannelState] = {}
    for task in tasks:
        channels.setdefault(id(task.node.channel), _ChannelState(task.node.channel))

    events: list[tuple[float, int, int, int]] = []  # (time, priority, seq, uid/chan)
    seq = 0

    def push(time, priority, payload):
        nonlocal seq
        heapq.heappush(events, (time, priority, seq, payload))
        seq += 1

    for task in tasks:
        if task.pending == 0:
            push(task.base_ready, _READY, task.uid)

    completed = 0
    while events:
        time, priority, _, payload = heapq.heappop(events)
        if priority == _READY:
            task = tasks[payload]
            task.ready_time = time
            state = channels[id(task.node.channel)]
            heapq.heappush(state.queue, (time, task.transfer, task.node.id, task.uid))
            push(time, _KICK, id(task.node.channel))
        elif priority == _DONE:
            task = tasks[payload]
            state = channels[id(task.node.channel)]
            state.busy = False
            completed += 1
            push(time, _KICK, id(task.node.channel))
            for succ_uid in task.succs:
                succ = tasks[succ_uid]
                succ.pending -= 1
                succ.ready_acc = max(succ.ready_acc, time)
                if succ.pending == 0:
                    push(succ.ready_acc, _READY, succ_uid)
        else:  # _KICK: a channel may start its next queued task
            state = channels[payload]
            if not state.busy and state.queue:
                _, _, _, uid = heapq.heappop(state.queue)
                task = tasks[uid]
                task.start_time = time
                duration = state.channel.latency + task.node.length / state.channel.bandwidth
                task.end_time = time + duration
                state.busy = True
                push(task.end_time, _DONE, uid)

    if completed != len(tasks):
        raise SimulationError("simulation deadlocked; dependency graph is inconsistent")

    timelines = []
    for t_idx, spec in enumerate(specs):
        these = per_transfer[t_idx]
        sim_tasks = [SimTask(t.node.id, t.node.path_index, t.node.role,
                             t.node.channel, t.node.lane, t.node.offset,
                             t.node.length, t.ready_time, t.start_time, t.end_time)
                     for t in these]
        busy: dict[str, list[tuple[float, float]]] = {}
        for t in sorted(these, key=lambda x: x.start_time):
            busy.setdefault(t.node.channel.id, []).append((t.start_time, t.end_time))
        final_sync = spec.model.event_cost * graphs[t_idx].lane_count
        device_end = max(t.end_time for t in these)
        host_end = spec.arrival + host_costs[t_idx]
        makespan = max(device_end, host_end) + final_sync - spec.arrival
        timelines.append(Timeline(
            start=spec.arrival,
            tasks=sim_tasks,
            channel_busy=busy,
            makespan=makespan,
            bytes_moved=sum(t.node.length for t in these),
            host_cost=host_costs[t_idx],
            final_sync_cost=final_sync,
            lane_count=graphs[t_idx].lane_count,
        ))
    return timelines


def simulate_graph(topology: Topology, graph: ExecGraph, model: OverheadModel,
                   first_time: bool = True, start: float = 0.0) -> Timeline:
    """Execute a prebuilt graph in graph mode; lifecycle costs charged
    before the first task becomes ready."""
    spec = TransferSpec(GRAPH_MODE, start, model, first_time, graph=graph)
    return _run(topology, [spec])[0]


def simulate_streamed(topology: Topology, plan: ChunkPlan, model: OverheadModel,
                      start: float = 0.0) -> Timeline:
    """Execute a chunk plan with per-operation host submission."""
    spec = TransferSpec(STREAMED_MODE, start, model, first_time=True, plan=plan)
    return _run(topology, [spec])[0]


def simulate_concurrent(topology: Topology, transfers: list[TransferSpec]) -> list[Timeline]:
    """Execute transfers that share the topology's channels; per-channel
    arbitration is FIFO by ready time, ties by (arrival order, node id)."""
    if not transfers:
        raise SimulationError("no transfers to simulate")
    return _run(topology, transfers)
