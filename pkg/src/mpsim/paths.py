"""Multi-path selection: direct, GPU-staged, and host-staged routes.

Planning is a pure function of the immutable topology and the active
configuration, so identical inputs always yield identical path sets.
Staging devices are taken in ascending index order among non-endpoint
accelerators, which keeps plans deterministic for caching and tests.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field, replace

from .topology import Channel, DeviceId, Topology

DIRECT = "direct"
GPU_STAGED = "gpu"
HOST_STAGED = "host"

EQUAL = "equal"
BANDWIDTH_PROPORTIONAL = "bandwidth_proportional"

# Environment knobs; each has a CLI flag equivalent and the flag wins.
ENV_GPU_PATHS = "MP_NUM_GPU_PATHS"
ENV_HOST_PATH = "MP_ENABLE_HOST_PATH"
ENV_MAX_CHUNKS = "MP_MAX_CHUNKS"
ENV_GRAPH = "MP_ENABLE_GRAPH"
ENV_CACHE_SIZE = "MP_GRAPH_CACHE_SIZE"
ENV_SHARE_POLICY = "MP_SHARE_POLICY"


class PlanError(ValueError):
    """Raised when no valid path assignment exists for a request."""


@dataclass(frozen=True)
class Hop:
    """One copy step of a path: a direction channel plus its endpoints."""

    channel: Channel
    src: DeviceId
    dst: DeviceId


@dataclass(frozen=True)
class Path:
    kind: str  # DIRECT, GPU_STAGED, or HOST_STAGED
    hops: tuple[Hop, ...]
    share: float
    stage: DeviceId | None = None

    def __post_init__(self):
        expected = 1 if self.kind == DIRECT else 2
        if len(self.hops) != expected:
            raise PlanError(f"{self.kind} path must have {expected} hops, got {len(self.hops)}")
        if expected == 2 and self.hops[0].dst != self.hops[1].src:
            raise PlanError("staged path hops are not connected")
        if not 0.0 <= self.share <= 1.0:
            raise PlanError(f"path share must lie in [0,1], got {self.share}")

    @property
    def bottleneck_bandwidth(self) -> float:
        return min(h.channel.bandwidth for h in self.hops)


@dataclass(frozen=True)
class PathConfig:
    """Per-run transfer configuration, settable via env vars or flags."""

    num_gpu_paths: int = 1  # path 0 is always Direct
    host_path_enabled: bool = False
    max_chunks: int = 1
    graph_mode: bool = False
    cache_capacity: int = 16
    share_policy: str = BANDWIDTH_PROPORTIONAL

    def __post_init__(self):
        if self.num_gpu_paths < 1:
            raise PlanError("num_gpu_paths must be >= 1")
        if self.max_chunks < 1:
            raise PlanError("max_chunks must be >= 1")
        if self.cache_capacity < 1:
            raise PlanError("cache_capacity must be >= 1")
        if self.share_policy not in (EQUAL, BANDWIDTH_PROPORTIONAL):
            raise PlanError(f"unknown share policy {self.share_policy!r}")

    @classmethod
    def from_env(cls, env=None) -> "PathConfig":
        env = os.environ if env is None else env
        cfg = cls()
        if ENV_GPU_PATHS in env:
            cfg = replace(cfg, num_gpu_paths=int(env[ENV_GPU_PATHS]))
        if ENV_HOST_PATH in env:
            cfg = replace(cfg, host_path_enabled=_parse_flag(env[ENV_HOST_PATH]))
        if ENV_MAX_CHUNKS in env:
            cfg = replace(cfg, max_chunks=int(env[ENV_MAX_CHUNKS]))
        if ENV_GRAPH in env:
            cfg = replace(cfg, graph_mode=_parse_flag(env[ENV_GRAPH]))
        if ENV_CACHE_SIZE in env:
            cfg = replace(cfg, cache_capacity=int(env[ENV_CACHE_SIZE]))
        if ENV_SHARE_POLICY in env:
            cfg = replace(cfg, share_policy=env[ENV_SHARE_POLICY])
        return cfg


def _parse_flag(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "on", "true", "yes"):
        return True
    if lowered in ("0", "off", "false", "no"):
        return False
    raise PlanError(f"cannot parse flag value {text!r}")


@dataclass(frozen=True)
class PathSet:
    """The ordered paths chosen for one src -> dst transfer."""

    src: DeviceId
    dst: DeviceId
    paths: tuple[Path, ...]

    def __post_init__(self):
        total = sum(p.share for p in self.paths)
        if abs(total - 1.0) > 1e-12:
            raise PlanError(f"path shares must sum to 1, got {total!r}")
        stages = [p.stage for p in self.paths if p.stage is not None]
        if len(stages) != len(set(stages)):
            raise PlanError("staging devices must be pairwise distinct")
        if sum(1 for p in self.paths if p.kind == HOST_STAGED) > 1:
            raise PlanError("at most one host-staged path per transfer")

    def channels(self) -> list[Channel]:
        """Distinct channels touched by any hop, in path order."""
        out: list[Channel] = []
        for path in self.paths:
            for hop in path.hops:
                if hop.channel not in out:
                    out.append(hop.channel)
        return out


def _assign_shares(paths: list[Path], policy: str) -> tuple[Path, ...]:
    if policy == EQUAL:
        weights = [1.0] * len(paths)
    else:
        weights = [p.bottleneck_bandwidth for p in paths]
    total = sum(weights)
    return tuple(replace(p, share=w / total) for p, w in zip(paths, weights))


def _staged_path(topology: Topology, src: DeviceId, dst: DeviceId,
                 stage: DeviceId, kind: str) -> Path:
    hop1 = Hop(topology.channel_for(src, stage), src, stage)
    hop2 = Hop(topology.channel_for(stage, dst), stage, dst)
    return Path(kind, (hop1, hop2), share=0.0, stage=stage)


def _build_path_set(topology: Topology, src: DeviceId, dst: DeviceId,
                    stages: tuple[DeviceId, ...], config: PathConfig) -> PathSet:
    paths = [Path(DIRECT, (Hop(topology.channel_for(src, dst), src, dst),), share=0.0)]
    for stage in stages:
        paths.append(_staged_path(topology, src, dst, stage, GPU_STAGED))
    if config.host_path_enabled:
        paths.append(_staged_path(topology, src, dst, topology.host, HOST_STAGED))
    return PathSet(src, dst, _assign_shares(paths, config.share_policy))


def plan_paths(topology: Topology, src: DeviceId, dst: DeviceId,
               config: PathConfig) -> PathSet:
    """Select the path set for one transfer under the active configuration.

    Path 0 is always Direct; paths 1..num_gpu_paths-1 stage through the
    lowest-index non-endpoint accelerators; an optional host-staged path
    comes last.
    """
    if src == dst:
        raise PlanError(f"source and destination are the same device ({src})")
    if src.is_host or dst.is_host:
        raise PlanError("transfers run between accelerators")
    candidates = [d for d in topology.accelerators if d not in (src, dst)]
    needed = config.num_gpu_paths - 1
    if needed > len(candidates):
        raise PlanError(f"{config.num_gpu_paths} GPU paths need {needed} staging "
                        f"accelerators, only {len(candidates)} available")
    return _build_path_set(topology, src, dst, tuple(candidates[:needed]), config)


@dataclass
class ContentionPlan:
    """Result of joint planning across concurrent transfers."""

    path_sets: list[PathSet]
    shared_channel_count: int
    contention_free: bool = field(init=False)

    def __post_init__(self):
        self.contention_free = self.shared_channel_count == 0


def _shared_channel_count(path_sets: list[PathSet]) -> int:
    users: dict[int, set[int]] = {}
    for t, ps in enumerate(path_sets):
        for ch in ps.channels():
            users.setdefault(id(ch), set()).add(t)
    return sum(1 for owners in users.values() if len(owners) > 1)


def plan_contention_free(topology: Topology, transfers: list[tuple[DeviceId, DeviceId]],
                         config: PathConfig) -> ContentionPlan:
    """Choose staging devices jointly so transfers avoid sharing channels.

    Searches all staging assignments exhaustively and returns the one
    with the fewest channels used by more than one transfer; zero shared
    channels means the plan is contention free. Deterministic: candidate
    staging subsets are enumerated in ascending index order per transfer.
    """
    if not transfers:
        raise PlanError("transfer list is empty")
    options: list[list[tuple[DeviceId, ...]]] = []
    for src, dst in transfers:
        if src == dst:
            raise PlanError(f"source and destination are the same device ({src})")
        candidates = [d for d in topology.accelerators if d not in (src, dst)]
        needed = config.num_gpu_paths - 1
        if needed > len(candidates):
            raise PlanError(f"transfer {src}->{dst}: not enough staging accelerators")
        options.append(list(itertools.combinations(candidates, needed)))

    best: list[PathSet] | None = None
    best_count = None
    for assignment in itertools.product(*options):
        path_sets = [_build_path_set(topology, src, dst, stages, config)
                     for (src, dst), stages in zip(transfers, assignment)]
        count = _shared_channel_count(path_sets)
        if best_count is None or count < best_count:
            best, best_count = path_sets, count
            if count == 0:
                break
    assert best is not None
    return ContentionPlan(best, best_count)
