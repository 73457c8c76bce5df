"""Discrete-event simulation of trust rounds over a DODAG.

Time is a global integer tick that advances once per packet hop and once per
DIO; there is no wall clock. Within a trust round the non-root nodes take
turns (lowest id first) sending one data packet each until every node has
sent ``packets_per_round`` packets. The root starts a new round by issuing a
DIO when

* ``dio_period`` ticks have passed since the previous DIO (if every node is
  already done, time skips ahead to that point), or
* the packets seen from some node fall below ``loss_trigger_fraction`` of
  what its highest sequence number implies were sent.

Every packet is credited to the round stamped on it. A packet chosen to be
late (``late_delivery_fraction``) reaches the root only after the next DIO
has gone out; the DIO after that reports it in its ``late`` map, and the
source node uses those counts as extra deliveries for its next rating.

Each node keeps a Simple-metric trust value per candidate parent and only
the current parent is rated. Candidates are the neighbours that are strictly
closer to the root, so the parent graph stays acyclic whatever is selected.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Any, Optional

from e2etrust.metrics import MetricParams, SimpleState, delivery_rate, simple_init, simple_update
from e2etrust.sim import trace as tr
from e2etrust.sim.topology import ROOT, Topology, build_initial_dodag, candidate_parents
from e2etrust.sim.trace import TraceEvent

logger = logging.getLogger(__name__)

FAIL = "fail"
RECOVER = "recover"

REASON_PERIODIC = "periodic"
REASON_LOSS = "loss"


@dataclass(frozen=True)
class Failure:
    """A scripted outage (or recovery) of ``node`` taking effect at ``tick``."""

    tick: int
    node: int
    action: str = FAIL

    def __post_init__(self):
        if self.action not in (FAIL, RECOVER):
            raise ValueError(f"failure action must be {FAIL!r} or {RECOVER!r}, got {self.action!r}")
        if self.node == ROOT:
            raise ValueError("the root cannot fail")
        if self.tick < 0:
            raise ValueError("failure tick must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "Failure":
        """Parse ``TICK:NODE[:fail|recover]``."""
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"expected TICK:NODE[:ACTION], got {text!r}")
        action = parts[2] if len(parts) == 3 else FAIL
        return cls(int(parts[0]), int(parts[1]), action)


@dataclass(frozen=True)
class SimConfig:
    alpha: float = 0.5
    rounds: int = 10
    packets_per_round: int = 10
    dio_period: int = 100_000
    loss_trigger_fraction: float = 0.0
    seed: int = 0
    late_delivery_fraction: float = 0.0
    failures: tuple[Failure, ...] = ()

    def __post_init__(self):
        MetricParams(alpha=self.alpha)
        if self.rounds < 1:
            raise ValueError("rounds must be positive")
        if self.packets_per_round < 1:
            raise ValueError("packets_per_round must be positive")
        if self.dio_period < 1:
            raise ValueError("dio_period must be positive")
        for name in ("loss_trigger_fraction", "late_delivery_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        object.__setattr__(self, "failures", tuple(sorted(self.failures, key=lambda f: f.tick)))

    @property
    def metric_params(self) -> MetricParams:
        return MetricParams(alpha=self.alpha)

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "rounds": self.rounds,
            "packets_per_round": self.packets_per_round,
            "dio_period": self.dio_period,
            "loss_trigger_fraction": self.loss_trigger_fraction,
            "seed": self.seed,
            "late_delivery_fraction": self.late_delivery_fraction,
            "failures": [[f.tick, f.node, f.action] for f in self.failures],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimConfig":
        data = dict(data)
        data["failures"] = tuple(Failure(*f) for f in data.get("failures", ()))
        return cls(**data)


@dataclass
class SimNode:
    id: int
    parent: Optional[int]
    candidates: tuple[int, ...]
    trust_table: dict[int, SimpleState]
    seq_counter: int = 0
    current_round: int = 0
    late_credit: int = 0
    failed: bool = False

    @property
    def dormant(self) -> bool:
        return self.parent is None

    @property
    def sent_this_round(self) -> int:
        return self.seq_counter


@dataclass
class RootState:
    current_round: int = 0
    received: dict[tuple[int, int], int] = field(default_factory=dict)
    highest_seq: dict[tuple[int, int], int] = field(default_factory=dict)
    late_since_dio: dict[int, int] = field(default_factory=dict)
    last_dio_tick: int = 0
    dio_count: int = 0

    def credit(self, source: int, stamped_round: int, seq: int, late: bool = False) -> None:
        key = (source, stamped_round)
        self.received[key] = self.received.get(key, 0) + 1
        if seq > self.highest_seq.get(key, -1):
            self.highest_seq[key] = seq
        if late:
            self.late_since_dio[source] = self.late_since_dio.get(source, 0) + 1

    def lossy_nodes(self, fraction: float) -> list[int]:
        """Nodes whose current-round count is below ``fraction`` of the expected count."""
        lossy = []
        for (node, rnd), highest in self.highest_seq.items():
            if rnd == self.current_round and self.received[(node, rnd)] < fraction * (highest + 1):
                lossy.append(node)
        return sorted(lossy)


@dataclass(frozen=True)
class Dio:
    round: int
    delivered: dict[int, int]
    late: dict[int, int] = field(default_factory=dict)
    reason: str = REASON_PERIODIC


@dataclass(frozen=True)
class DataPacket:
    source: int
    seq: int
    round: int
    hops: int = 0


def dio_trigger_reason(root: RootState, config: SimConfig, tick: int) -> Optional[str]:
    if tick - root.last_dio_tick >= config.dio_period:
        return REASON_PERIODIC
    if config.loss_trigger_fraction > 0 and root.lossy_nodes(config.loss_trigger_fraction):
        return REASON_LOSS
    return None


def issue_dio(root: RootState, node_ids, tick: int, reason: str = REASON_PERIODIC) -> Dio:
    """Close the current round at the root and build the DIO that opens the next."""
    closing = root.current_round
    delivered = {n: root.received.get((n, closing), 0) for n in node_ids if n != ROOT}
    late = dict(sorted(root.late_since_dio.items()))
    root.late_since_dio.clear()
    root.current_round = closing + 1
    root.dio_count += 1
    root.last_dio_tick = tick
    # Only the closing round can still receive (late) packets.
    for table in (root.received, root.highest_seq):
        for key in [k for k in table if k[1] < closing]:
            del table[key]
    return Dio(round=root.current_round, delivered=delivered, late=late, reason=reason)


def maybe_trigger_dio(root: RootState, config: SimConfig, tick: int, node_ids) -> Optional[Dio]:
    reason = dio_trigger_reason(root, config, tick)
    if reason is None:
        return None
    return issue_dio(root, node_ids, tick, reason)


def _select(node: SimNode, unavailable) -> Optional[int]:
    """Max-trust candidate; the current parent wins ties, then the lowest id."""
    usable = [c for c in node.candidates if c not in unavailable]
    if not usable:
        return None
    best = max(node.trust_table[c].trust for c in usable)
    if node.parent in usable and node.trust_table[node.parent].trust == best:
        return node.parent
    return min(c for c in usable if node.trust_table[c].trust == best)


def _switch(node: SimNode, new_parent: Optional[int], tick: int) -> list[TraceEvent]:
    if new_parent == node.parent:
        return []
    event = TraceEvent(tick, tr.PARENT_SWITCHED, node=node.id, peer=new_parent,
                       round=node.current_round, value_old=node.parent, value_new=new_parent)
    if new_parent is None:
        logger.info("node %d has no usable parent and goes dormant", node.id)
    node.parent = new_parent
    return [event]


def on_dio(node: SimNode, dio: Dio, config: SimConfig, tick: int = 0, unavailable=()) -> list[TraceEvent]:
    """Rate the parent for the closing round, re-select, and start the new round."""
    if dio.round <= node.current_round:
        logger.info("node %d ignores stale DIO for round %d", node.id, dio.round)
        return []
    events = []
    sent = node.seq_counter
    credit = node.late_credit + dio.late.get(node.id, 0)
    if sent > 0 and node.parent is not None:
        delivered = dio.delivered.get(node.id, 0)
        used = min(credit, sent - delivered)
        xi = delivery_rate(delivered + used, sent)
        credit -= used
        parent = node.parent
        old = node.trust_table[parent].trust
        params = config.metric_params
        node.trust_table = {
            c: simple_update(state, xi, params, is_parent=(c == parent))
            for c, state in node.trust_table.items()
        }
        events.append(TraceEvent(
            tick, tr.TRUST_UPDATED, node=node.id, peer=parent, round=dio.round - 1,
            value_old=old, value_new=node.trust_table[parent].trust,
            extra={"xi": xi, "sent": sent, "delivered": delivered, "late_credit": used},
        ))
    node.late_credit = credit
    node.current_round = dio.round
    node.seq_counter = 0
    events.extend(_switch(node, _select(node, unavailable), tick))
    return events


def handle_parent_unavailable(node: SimNode, unavailable, tick: int = 0) -> list[TraceEvent]:
    """Re-select right away, outside the round boundary; no candidate left means dormant."""
    return _switch(node, _select(node, unavailable), tick)


class World:
    """Mutable simulation state: nodes, root, clock, RNG and the trace so far."""

    def __init__(self, topology: Topology, config: SimConfig):
        self.topology = topology
        self.config = config
        parents = build_initial_dodag(topology)
        candidates = candidate_parents(topology)
        self.nodes: dict[int, SimNode] = {
            n: SimNode(
                id=n,
                parent=parents[n],
                candidates=candidates[n],
                trust_table={c: simple_init() for c in candidates[n]},
            )
            for n in topology.nodes
            if n != ROOT
        }
        self.root = RootState()
        self.rng = random.Random(config.seed)
        self.tick = 0
        self.trace: list[TraceEvent] = []
        self.held: list[DataPacket] = []
        self.failed: set[int] = set()
        self._pending_failures = list(config.failures)
        self.rounds_completed = 0

    @property
    def node_ids(self) -> list[int]:
        return sorted(self.nodes)

    # -- failures --------------------------------------------------------

    def _next_failure_tick(self) -> Optional[int]:
        return self._pending_failures[0].tick if self._pending_failures else None

    def apply_failures(self) -> None:
        while self._pending_failures and self._pending_failures[0].tick <= self.tick:
            failure = self._pending_failures.pop(0)
            node = self.nodes.get(failure.node)
            if node is None:
                raise ValueError(f"scripted failure names unknown node {failure.node}")
            if failure.action == FAIL:
                logger.info("tick %d: node %d fails", self.tick, node.id)
                node.failed = True
                self.failed.add(node.id)
                for child in self.node_ids:
                    if self.nodes[child].parent == node.id:
                        self.trace.extend(handle_parent_unavailable(self.nodes[child], self.failed, self.tick))
            else:
                logger.info("tick %d: node %d recovers", self.tick, node.id)
                node.failed = False
                self.failed.discard(node.id)
                for child in self.node_ids:
                    other = self.nodes[child]
                    if other.dormant and node.id in other.candidates:
                        self.trace.extend(handle_parent_unavailable(other, self.failed, self.tick))

    # -- packets ---------------------------------------------------------

    def can_send(self, node: SimNode) -> bool:
        return not node.failed and node.parent is not None and node.seq_counter < self.config.packets_per_round

    def send_packet(self, node: SimNode) -> None:
        packet = DataPacket(node.id, node.seq_counter, node.current_round)
        node.seq_counter += 1
        self.trace.append(TraceEvent(self.tick, tr.PACKET_SENT, node=node.id, peer=node.parent,
                                     seq=packet.seq, round=packet.round))
        here = node.id
        while here != ROOT:
            nxt = self.nodes[here].parent
            self.tick += 1
            survived = nxt is not None and nxt not in self.failed
            # One draw per hop attempt keeps the RNG stream independent of outcomes.
            draw = self.rng.random()
            if survived:
                survived = draw < self.topology.delivery_probability(here, nxt)
            if not survived:
                self.trace.append(TraceEvent(self.tick, tr.PACKET_LOST, node=packet.source,
                                             peer=here if nxt is None else nxt,
                                             seq=packet.seq, round=packet.round))
                return
            here = nxt
        if self.config.late_delivery_fraction > 0 and self.rng.random() < self.config.late_delivery_fraction:
            self.held.append(packet)
            return
        self.root.credit(packet.source, packet.round, packet.seq)
        self.trace.append(TraceEvent(self.tick, tr.PACKET_DELIVERED, node=packet.source, peer=ROOT,
                                     seq=packet.seq, round=packet.round))

    def release_held(self) -> None:
        for packet in self.held:
            self.root.credit(packet.source, packet.round, packet.seq, late=True)
            self.trace.append(TraceEvent(self.tick, tr.PACKET_LATE, node=packet.source, peer=ROOT,
                                         seq=packet.seq, round=packet.round))
        self.held = []

    # -- rounds ----------------------------------------------------------

    def _sending_phase(self) -> Dio:
        config = self.config
        while True:
            self.apply_failures()
            progressed = False
            for nid in self.node_ids:
                node = self.nodes[nid]
                if not self.can_send(node):
                    continue
                self.send_packet(node)
                progressed = True
                dio = maybe_trigger_dio(self.root, config, self.tick, self.node_ids)
                if dio is not None:
                    return dio
                self.apply_failures()
            if progressed:
                continue
            # Nothing to send: idle until the DIO timer or the next scripted event.
            due = self.root.last_dio_tick + config.dio_period
            next_failure = self._next_failure_tick()
            if next_failure is not None and next_failure < due:
                self.tick = max(self.tick, next_failure)
                continue
            self.tick = max(self.tick, due)
            self.apply_failures()
            return issue_dio(self.root, self.node_ids, self.tick, REASON_PERIODIC)

    def deliver_dio(self, dio: Dio) -> None:
        self.tick += 1
        self.root.last_dio_tick = self.tick
        self.trace.append(TraceEvent(
            self.tick, tr.DIO_ISSUED, node=ROOT, round=dio.round,
            extra={
                "reason": dio.reason,
                "delivered": {str(n): c for n, c in dio.delivered.items()},
                "late": {str(n): c for n, c in dio.late.items()},
            },
        ))
        self.release_held()
        for nid in self.node_ids:
            self.trace.extend(on_dio(self.nodes[nid], dio, self.config, self.tick, self.failed))
        self.rounds_completed += 1

    def summary(self) -> dict[str, Any]:
        return {
            "final_parents": {str(n): self.nodes[n].parent for n in self.node_ids},
            "trust_tables": {
                str(n): {str(c): s.trust for c, s in sorted(self.nodes[n].trust_table.items())}
                for n in self.node_ids
            },
            "dio_count": self.root.dio_count,
            "rounds_completed": self.rounds_completed,
        }


def run_round(world: World, rng: Optional[random.Random] = None) -> World:
    """Run one trust round: sending until the root triggers a DIO, then the DIO itself."""
    if rng is not None:
        world.rng = rng
    world.deliver_dio(world._sending_phase())
    return world


@dataclass
class SimulationResult:
    trace: list[TraceEvent]
    summary: dict[str, Any]
    world: World


def run_simulation(topology: Topology, config: SimConfig) -> SimulationResult:
    world = World(topology, config)
    for _ in range(config.rounds):
        run_round(world)
    return SimulationResult(trace=world.trace, summary=world.summary(), world=world)
