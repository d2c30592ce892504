"""2-D decomposition of a message: paths horizontally, chunks vertically.

Chunks are dealt round-robin across paths in path order, consuming
consecutive byte offsets, so the plan tiles [0, total_size) exactly.
Source and destination offsets are identical: transfers run between
same-layout buffers with per-chunk destination offsets fixed up front.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .paths import DIRECT, PathSet


class ChunkError(ValueError):
    pass


@dataclass(frozen=True)
class ChunkAssignment:
    path_index: int
    offset: int  # same offset in source and destination buffers
    length: int
    seq: int  # dense per-path sequence number, from 0

    def __post_init__(self):
        if self.length < 1:
            raise ChunkError(f"chunk length must be >= 1, got {self.length}")
        if self.offset < 0:
            raise ChunkError(f"chunk offset must be >= 0, got {self.offset}")


@dataclass(frozen=True)
class ChunkPlan:
    total_size: int
    chunks: tuple[ChunkAssignment, ...]  # in round-robin emission order
    path_set: PathSet

    def chunks_for_path(self, path_index: int) -> list[ChunkAssignment]:
        return [c for c in self.chunks if c.path_index == path_index]

    def chunk_counts(self) -> list[int]:
        counts = [0] * len(self.path_set.paths)
        for c in self.chunks:
            counts[c.path_index] += 1
        return counts


def make_chunk_plan(path_set: PathSet, size: int, max_chunks: int) -> ChunkPlan:
    """Split `size` bytes over the path set into a 2-D chunk plan.

    Per path the nominal chunk length is ceil(size * share / max_chunks);
    round-robin dealing continues until the message is covered, the final
    chunk truncated to fit.
    """
    if size < 1:
        raise ChunkError(f"message size must be >= 1 byte, got {size}")
    if max_chunks < 1:
        raise ChunkError(f"max_chunks must be >= 1, got {max_chunks}")

    active = [p for p, path in enumerate(path_set.paths) if path.share > 0.0]
    if not active:
        raise ChunkError("path set has no path with a positive share")
    nominal = {p: math.ceil(size * path_set.paths[p].share / max_chunks) for p in active}
    chunks: list[ChunkAssignment] = []
    seq = [0] * len(path_set.paths)
    offset = 0
    while offset < size:
        for p in active:
            if offset >= size:
                break
            length = min(nominal[p], size - offset)
            chunks.append(ChunkAssignment(p, offset, length, seq[p]))
            seq[p] += 1
            offset += length
    return ChunkPlan(size, tuple(chunks), path_set)


@dataclass(frozen=True)
class Lane:
    """A FIFO execution queue; the stream analog. One per path hop."""

    lane_id: int
    path_index: int
    hop: int  # 0 = direct or source->stage, 1 = stage->destination
    chunk_ids: tuple[int, ...]  # indices into plan.chunks, in seq order


@dataclass(frozen=True)
class LaneSchedule:
    lanes: tuple[Lane, ...]
    # ((lane, position), (lane, position)): hop-2 entry waits on hop-1 entry
    dependencies: tuple[tuple[tuple[int, int], tuple[int, int]], ...]

    @property
    def lane_count(self) -> int:
        return len(self.lanes)


def lane_schedule(plan: ChunkPlan) -> LaneSchedule:
    """Assign chunks to lanes: one lane per direct path, two per staged."""
    lane_ids: dict[tuple[int, int], int] = {}
    for p, path in enumerate(plan.path_set.paths):
        for hop in range(len(path.hops)):
            lane_ids[(p, hop)] = len(lane_ids)

    members: dict[int, list[int]] = {lid: [] for lid in lane_ids.values()}
    deps = []
    for chunk_id, chunk in enumerate(plan.chunks):
        path = plan.path_set.paths[chunk.path_index]
        if path.kind == DIRECT:
            members[lane_ids[(chunk.path_index, 0)]].append(chunk_id)
        else:
            lane1 = lane_ids[(chunk.path_index, 0)]
            lane2 = lane_ids[(chunk.path_index, 1)]
            members[lane1].append(chunk_id)
            members[lane2].append(chunk_id)
            pos = len(members[lane1]) - 1
            deps.append(((lane1, pos), (lane2, pos)))

    lanes = tuple(Lane(lid, p, hop, tuple(members[lid]))
                  for (p, hop), lid in lane_ids.items())
    return LaneSchedule(lanes, tuple(deps))
