"""Trace events and their JSONL / CSV encodings."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

PACKET_SENT = "packet-sent"
PACKET_DELIVERED = "packet-delivered"
PACKET_LOST = "packet-lost"
PACKET_LATE = "packet-late"
DIO_ISSUED = "dio-issued"
TRUST_UPDATED = "trust-updated"
PARENT_SWITCHED = "parent-switched"
EVENT_KINDS = (
    PACKET_SENT, PACKET_DELIVERED, PACKET_LOST, PACKET_LATE,
    DIO_ISSUED, TRUST_UPDATED, PARENT_SWITCHED,
)

CSV_COLUMNS = ("tick", "kind", "node", "peer", "seq", "round", "value_old", "value_new")
TRACE_FORMATS = ("jsonl", "csv")


@dataclass
class TraceEvent:
    tick: int
    kind: str
    node: Optional[int] = None
    peer: Optional[int] = None
    seq: Optional[int] = None
    round: Optional[int] = None
    value_old: Optional[float] = None
    value_new: Optional[float] = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"tick": self.tick, "kind": self.kind}
        for name in CSV_COLUMNS[2:]:
            value = getattr(self, name)
            if value is not None:
                data[name] = value
        data.update(self.extra)
        return data


def to_jsonl(events: Iterable[TraceEvent]) -> str:
    return "".join(json.dumps(e.to_dict()) + "\n" for e in events)


def to_csv(events: Iterable[TraceEvent]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for e in events:
        row = [e.tick, e.kind, e.node, e.peer, e.seq, e.round, e.value_old, e.value_new]
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def render(events: Iterable[TraceEvent], fmt: str) -> str:
    if fmt == "jsonl":
        return to_jsonl(events)
    if fmt == "csv":
        return to_csv(events)
    raise ValueError(f"unknown trace format: {fmt!r}")


def read_jsonl(text: str) -> list[dict[str, Any]]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]
