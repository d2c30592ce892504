import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpsim.paths import PathConfig, plan_paths
from mpsim.pipeline import ChunkError, LaneSchedule, lane_schedule, make_chunk_plan

MiB = 1 << 20


def equal_share_paths(topo, n_paths, host=False):
    return plan_paths(topo, topo.device(0), topo.device(1),
                      PathConfig(num_gpu_paths=n_paths, host_path_enabled=host,
                                 share_policy="equal"))


def test_twelve_mib_three_paths_four_chunks(ideal):
    # ceil(12MiB * (1/3) / 4) = 1MiB nominal per path; round robin covers
    # the message in 12 chunks at consecutive offsets.
    ps = equal_share_paths(ideal, 3)
    plan = make_chunk_plan(ps, 12 * MiB, 4)
    assert len(plan.chunks) == 12
    assert all(c.length == MiB for c in plan.chunks)
    assert [c.offset for c in plan.chunks] == [i * MiB for i in range(12)]
    assert [c.path_index for c in plan.chunks] == [0, 1, 2] * 4
    assert [c.seq for c in plan.chunks] == [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]


def test_single_byte_message(ideal):
    ps = equal_share_paths(ideal, 1)
    plan = make_chunk_plan(ps, 1, 4)
    assert len(plan.chunks) == 1
    assert plan.chunks[0].offset == 0
    assert plan.chunks[0].length == 1


def test_zero_size_rejected(ideal):
    with pytest.raises(ChunkError, match="size"):
        make_chunk_plan(equal_share_paths(ideal, 1), 0, 4)


def byte_map_tiles_exactly(plan):
    marks = bytearray(plan.total_size)
    for chunk in plan.chunks:
        for b in range(chunk.offset, chunk.offset + chunk.length):
            if marks[b]:
                return False
            marks[b] = 1
    return all(marks)


@settings(max_examples=120, deadline=None)
@given(size=st.integers(min_value=1, max_value=200_000),
       n_paths=st.integers(min_value=1, max_value=3),
       host=st.booleans(),
       max_chunks=st.integers(min_value=1, max_value=32),
       policy=st.sampled_from(["equal", "bandwidth_proportional"]))
def test_coverage_property(size, n_paths, host, max_chunks, policy):
    from mpsim.topology import load_topology
    from conftest import IDEAL_MESH
    topo = load_topology(IDEAL_MESH)
    ps = plan_paths(topo, topo.device(0), topo.device(1),
                    PathConfig(num_gpu_paths=n_paths, host_path_enabled=host,
                               share_policy=policy, max_chunks=max_chunks))
    plan = make_chunk_plan(ps, size, max_chunks)
    assert byte_map_tiles_exactly(plan)
    # chunk count per path bounded by max_chunks plus truncation
    assert max(plan.chunk_counts()) <= max_chunks + 1
    # per-path seq numbers dense from zero
    for p, count in enumerate(plan.chunk_counts()):
        seqs = [c.seq for c in plan.chunks_for_path(p)]
        assert seqs == list(range(count))


def test_chunk_lengths_differ_only_by_final_truncation(ideal):
    ps = equal_share_paths(ideal, 3)
    plan = make_chunk_plan(ps, 10 * MiB + 12345, 8)
    for p in range(3):
        lengths = [c.length for c in plan.chunks_for_path(p)]
        assert len(set(lengths[:-1])) <= 1  # all full except possibly the last
        assert lengths[-1] <= lengths[0]


def test_lane_schedule_staged_path(ideal):
    ps = plan_paths(ideal, ideal.device(0), ideal.device(1),
                    PathConfig(num_gpu_paths=2, share_policy="equal"))
    plan = make_chunk_plan(ps, 6 * MiB, 3)
    schedule = lane_schedule(plan)
    assert isinstance(schedule, LaneSchedule)
    # direct path: one lane; staged path: two lanes
    assert schedule.lane_count == 3
    staged_lanes = [l for l in schedule.lanes if l.path_index == 1]
    assert len(staged_lanes) == 2
    hop1, hop2 = sorted(staged_lanes, key=lambda l: l.hop)
    assert hop1.chunk_ids == hop2.chunk_ids  # same chunks, hop by hop
    assert len(schedule.dependencies) == len(hop1.chunk_ids)


def test_lane_schedule_direct_only(ideal):
    ps = equal_share_paths(ideal, 1)
    plan = make_chunk_plan(ps, 4 * MiB, 4)
    schedule = lane_schedule(plan)
    assert schedule.lane_count == 1
    assert schedule.dependencies == ()
    assert schedule.lanes[0].chunk_ids == tuple(range(len(plan.chunks)))


def test_lane_schedule_counts_two_paths(ideal):
    # direct + staged, two chunks each: 3 lanes, 2 cross-lane dependencies
    ps = equal_share_paths(ideal, 2)
    plan = make_chunk_plan(ps, 4 * MiB, 2)
    assert plan.chunk_counts() == [2, 2]
    schedule = lane_schedule(plan)
    assert schedule.lane_count == 3
    assert len(schedule.dependencies) == 2


def test_lanes_preserve_seq_order(ideal):
    ps = equal_share_paths(ideal, 3, host=True)
    plan = make_chunk_plan(ps, 9 * MiB + 7, 4)
    for lane in lane_schedule(plan).lanes:
        seqs = [plan.chunks[cid].seq for cid in lane.chunk_ids]
        assert seqs == sorted(seqs)
