"""Post-hoc verification of plans and timelines.

The checks mirror the guarantees the scheduler is built to uphold:
every destination byte written exactly once, staged hops ordered,
exclusive channel occupancy, and completion covering every task. They
run on artifacts rather than trusting construction, so simulator
regressions surface through an independent path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import ROLE_HOP1, ROLE_HOP2
from .pipeline import ChunkPlan
from .sim import Timeline


@dataclass
class IntegrityReport:
    coverage_ok: bool = True
    ordering_violations: list[tuple[int, str]] = field(default_factory=list)
    contention_violations: list[tuple[str, str]] = field(default_factory=list)
    completion_ok: bool = True
    coverage_detail: str = ""

    @property
    def all_clear(self) -> bool:
        return (self.coverage_ok and self.completion_ok
                and not self.ordering_violations and not self.contention_violations)

    def merged_with(self, other: "IntegrityReport") -> "IntegrityReport":
        return IntegrityReport(
            coverage_ok=self.coverage_ok and other.coverage_ok,
            ordering_violations=self.ordering_violations + other.ordering_violations,
            contention_violations=self.contention_violations + other.contention_violations,
            completion_ok=self.completion_ok and other.completion_ok,
            coverage_detail=self.coverage_detail or other.coverage_detail,
        )


def check_coverage(plan: ChunkPlan) -> IntegrityReport:
    """Verify the chunk ranges tile [0, total_size) with no gap or overlap."""
    report = IntegrityReport()
    cursor = 0
    for i, chunk in enumerate(sorted(plan.chunks, key=lambda c: c.offset)):
        if chunk.offset > cursor:
            report.coverage_ok = False
            report.coverage_detail = f"gap before byte {chunk.offset} (chunk {i})"
            return report
        if chunk.offset < cursor:
            report.coverage_ok = False
            report.coverage_detail = (f"overlap at byte {chunk.offset}: chunk {i} "
                                      f"rewrites bytes below {cursor}")
            return report
        cursor += chunk.length
    if cursor != plan.total_size:
        report.coverage_ok = False
        report.coverage_detail = f"covered {cursor} of {plan.total_size} bytes"
    return report


def check_timeline(plan: ChunkPlan, timeline: Timeline) -> IntegrityReport:
    """Check staged-hop ordering, exclusive occupancy, and completion."""
    report = check_coverage(plan)

    by_chunk: dict[int, dict[str, object]] = {}
    staged_bytes = 0
    for task in timeline.tasks:
        slot = by_chunk.setdefault(task.offset, {})
        slot[task.role] = task
        if task.role == ROLE_HOP1:
            staged_bytes += task.length
    expected_tasks = 0
    for chunk in plan.chunks:
        path = plan.path_set.paths[chunk.path_index]
        expected_tasks += len(path.hops)
    if expected_tasks != len(timeline.tasks):
        raise ValueError(f"timeline has {len(timeline.tasks)} tasks but the plan "
                         f"implies {expected_tasks}: plan/timeline mismatch")

    for offset, slot in sorted(by_chunk.items()):
        hop1 = slot.get(ROLE_HOP1)
        hop2 = slot.get(ROLE_HOP2)
        if (hop1 is None) != (hop2 is None):
            raise ValueError(f"chunk at offset {offset} has an unmatched staged hop")
        if hop1 is not None and hop2.start_time < hop1.end_time:
            report.ordering_violations.append(
                (offset, f"hop2 starts at {hop2.start_time!r} before hop1 ends "
                         f"at {hop1.end_time!r}"))

    for channel_id, intervals in timeline.channel_busy.items():
        ordered = sorted(intervals)
        for (s1, e1), (s2, e2) in zip(ordered, ordered[1:]):
            if s2 < e1:
                report.contention_violations.append(
                    (channel_id, f"[{s1!r},{e1!r}] overlaps [{s2!r},{e2!r}]"))

    last_end = max(t.end_time for t in timeline.tasks)
    report.completion_ok = timeline.start + timeline.makespan >= last_end
    return report
