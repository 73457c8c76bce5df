"""Network topology and the initial DODAG."""

from __future__ import annotations

import json
from collections import deque
from pathlib import Path
from typing import Any, Iterable, Union

ROOT = 0


class TopologyError(ValueError):
    pass


class Topology:
    """Undirected links with a per-link delivery probability."""

    def __init__(self, nodes: Iterable[int], links: Iterable[tuple[int, int, float]]):
        self.nodes = tuple(sorted({int(n) for n in nodes}))
        if ROOT not in self.nodes:
            raise TopologyError("topology has no root node 0")
        if any(n < 0 for n in self.nodes):
            raise TopologyError("node ids must be nonnegative")
        self._adjacent: dict[int, dict[int, float]] = {n: {} for n in self.nodes}
        for a, b, p in links:
            a, b, p = int(a), int(b), float(p)
            if a == b:
                raise TopologyError(f"self-link on node {a}")
            for end in (a, b):
                if end not in self._adjacent:
                    raise TopologyError(f"link {a}-{b} names unknown node {end}")
            if not 0.0 <= p <= 1.0:
                raise TopologyError(f"link {a}-{b} has delivery probability {p} outside [0, 1]")
            if b in self._adjacent[a]:
                raise TopologyError(f"duplicate link {a}-{b}")
            self._adjacent[a][b] = p
            self._adjacent[b][a] = p

    def neighbors(self, node: int) -> dict[int, float]:
        return self._adjacent[node]

    def delivery_probability(self, a: int, b: int) -> float:
        try:
            return self._adjacent[a][b]
        except KeyError:
            raise TopologyError(f"no link between {a} and {b}") from None

    def links(self) -> list[tuple[int, int, float]]:
        return [(a, b, p) for a in self.nodes for b, p in sorted(self._adjacent[a].items()) if a < b]

    def hop_distances(self) -> dict[int, int]:
        dist = {ROOT: 0}
        queue = deque([ROOT])
        while queue:
            here = queue.popleft()
            for nxt in sorted(self._adjacent[here]):
                if nxt not in dist:
                    dist[nxt] = dist[here] + 1
                    queue.append(nxt)
        return dist

    def to_dict(self) -> dict[str, Any]:
        return {"nodes": list(self.nodes), "links": [{"a": a, "b": b, "p": p} for a, b, p in self.links()]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Topology":
        try:
            links = [(link["a"], link["b"], link["p"]) for link in data["links"]]
            return cls(data["nodes"], links)
        except (KeyError, TypeError) as exc:
            raise TopologyError(f"malformed topology: {exc}") from exc

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Topology":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise TopologyError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)


def _check_connected(topology: Topology) -> dict[int, int]:
    dist = topology.hop_distances()
    unreachable = [n for n in topology.nodes if n not in dist]
    if unreachable:
        raise TopologyError(f"nodes unreachable from the root: {unreachable}")
    return dist


def build_initial_dodag(topology: Topology) -> dict[int, int]:
    """Parent of every non-root node: the lowest-id neighbour one hop closer to the root."""
    dist = _check_connected(topology)
    parents = {}
    for node in topology.nodes:
        if node == ROOT:
            continue
        closer = [n for n in topology.neighbors(node) if dist[n] == dist[node] - 1]
        parents[node] = min(closer)
    return parents


def candidate_parents(topology: Topology) -> dict[int, tuple[int, ...]]:
    """Neighbours strictly closer to the root.

    Restricting re-selection to these keeps every parent graph acyclic.
    """
    dist = _check_connected(topology)
    return {
        node: tuple(sorted(n for n in topology.neighbors(node) if dist[n] < dist[node]))
        for node in topology.nodes
        if node != ROOT
    }
