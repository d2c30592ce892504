"""Deterministic performance simulator and scheduling library for
multi-path intra-node GPU-to-GPU transfers."""

from .topology import (DeviceId, LinkSpec, Topology, TopologyError,  # noqa: F401
                       load_topology, load_topology_file, preset)
from .paths import (Path, PathConfig, PathSet, PlanError,  # noqa: F401
                    plan_contention_free, plan_paths)
from .pipeline import ChunkAssignment, ChunkPlan, lane_schedule, make_chunk_plan  # noqa: F401
from .graph import (CopyNode, ExecGraph, GraphCache, GraphKey, OverheadModel,  # noqa: F401
                    build_graph, cache_get_or_build, graph_key, lifecycle_cost)
from .sim import (SimReport, SimTask, Timeline, TransferSpec,  # noqa: F401
                  simulate_concurrent, simulate_graph, simulate_streamed)
from .integrity import IntegrityReport, check_coverage, check_timeline  # noqa: F401
from .bench import BenchmarkSpec, BenchResult, JacobiSpec, run_bibw, run_bw, run_jacobi, run_latency  # noqa: F401
from .tuner import TuningEntry, TuningTable, tune  # noqa: F401

__version__ = "0.1.0"
