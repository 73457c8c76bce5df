"""Deterministic simulator of trust rounds in a DODAG-rooted sensor network."""

from e2etrust.sim.network import (
    DataPacket,
    Dio,
    Failure,
    RootState,
    SimConfig,
    SimNode,
    SimulationResult,
    World,
    handle_parent_unavailable,
    issue_dio,
    maybe_trigger_dio,
    on_dio,
    run_round,
    run_simulation,
)
from e2etrust.sim.topology import ROOT, Topology, TopologyError, build_initial_dodag, candidate_parents
from e2etrust.sim.trace import TraceEvent

__all__ = [
    "DataPacket", "Dio", "Failure", "RootState", "SimConfig", "SimNode", "SimulationResult",
    "World", "handle_parent_unavailable", "issue_dio", "maybe_trigger_dio", "on_dio",
    "run_round", "run_simulation", "ROOT", "Topology", "TopologyError", "build_initial_dodag",
    "candidate_parents", "TraceEvent",
]
