"""Road graph, per-segment safety and safest-route search.

Route safety is the product of independent segment safeties.  Taking
-ln of each segment probability turns the max-product problem into a
min-sum one with nonnegative weights, which Dijkstra solves.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import (
    ConflictingEvidence,
    NonPositiveProbability,
    SafeRouteError,
    SchemaMismatch,
    UnknownEdge,
    UnknownNode,
    Unreachable,
)
from .inference import evidence_from_labels, safety_probability
from .network import BayesianNetwork

REVERSE_SUFFIX = ".rev"


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str
    static: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class RoadGraph:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        if len(set(self.nodes)) != len(self.nodes):
            raise SchemaMismatch("duplicate node labels in graph")
        known = set(self.nodes)
        ids = set()
        for e in self.edges:
            if e.id in ids:
                raise SchemaMismatch(f"duplicate edge id {e.id!r}")
            ids.add(e.id)
            for end in (e.tail, e.head):
                if end not in known:
                    raise UnknownNode(f"edge {e.id!r} references unknown node {end!r}")
        object.__setattr__(self, "_by_id", {e.id: e for e in self.edges})
        out: dict[str, list[Edge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            out[e.tail].append(e)
        object.__setattr__(self, "_out", out)

    def edge(self, edge_id: str) -> Edge:
        try:
            return self._by_id[edge_id]
        except KeyError:
            raise UnknownEdge(f"unknown edge {edge_id!r}") from None

    def __contains__(self, edge_id) -> bool:
        return edge_id in self._by_id

    def out_edges(self, node: str) -> list[Edge]:
        return self._out[node]

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [
                {"id": e.id, "tail": e.tail, "head": e.head, "static": dict(e.static)}
                for e in self.edges
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RoadGraph":
        """Build from the graph file layout.

        An edge entry carrying ``"undirected": true`` becomes two directed
        edges, ``id`` (tail -> head) and ``id + ".rev"`` (head -> tail),
        sharing the static attributes.
        """
        try:
            edges = []
            for item in doc["edges"]:
                static = {str(k): str(v) for k, v in (item.get("static") or {}).items()}
                eid = str(item["id"])
                edges.append(Edge(eid, str(item["tail"]), str(item["head"]), static))
                if item.get("undirected"):
                    edges.append(Edge(eid + REVERSE_SUFFIX, str(item["head"]), str(item["tail"]), static))
            return cls(tuple(str(n) for n in doc["nodes"]), tuple(edges))
        except (KeyError, TypeError, AttributeError) as exc:
            raise SchemaMismatch(f"malformed graph document: {exc!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "RoadGraph":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SegmentState:
    edge_id: str
    probability: float

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise NonPositiveProbability(
                f"edge {self.edge_id!r}: safety probability {self.probability!r} outside [0, 1]"
            )


@dataclass(frozen=True)
class Route:
    edges: tuple[str, ...]
    nodes: tuple[str, ...]
    safety: float
    score: float

    def to_dict(self) -> dict:
        return {
            "edges": list(self.edges),
            "nodes": list(self.nodes),
            "p_route": self.safety,
            "score": score_to_json(self.score),
        }


def score_to_json(score: float):
    return "inf" if math.isinf(score) else score


def merge_evidence(edge: Edge, dynamic: Mapping[str, str]) -> dict[str, str]:
    merged = dict(edge.static)
    for name, label in dynamic.items():
        if name in merged and merged[name] != label:
            raise ConflictingEvidence(
                f"edge {edge.id!r}: {name} is {merged[name]!r} statically "
                f"but {label!r} dynamically"
            )
        merged[name] = label
    return merged


def assign_safety(
    graph: RoadGraph,
    bn: BayesianNetwork,
    evidence_per_edge: Mapping[str, Mapping[str, str]],
) -> dict[str, SegmentState]:
    """Safety probability for every edge from its static + dynamic evidence.

    Evidence maps are name -> state label.  Every edge needs an entry
    (possibly empty).  Edges with identical merged evidence share one
    inference call.
    """
    for eid in evidence_per_edge:
        graph.edge(eid)
    cache: dict[tuple, float] = {}
    states = {}
    for e in graph.edges:
        if e.id not in evidence_per_edge:
            raise UnknownEdge(f"no evidence entry for edge {e.id!r}")
        merged = merge_evidence(e, evidence_per_edge[e.id])
        key = tuple(sorted(merged.items()))
        if key not in cache:
            try:
                cache[key] = safety_probability(bn, evidence_from_labels(bn.schema, merged))
            except SafeRouteError as exc:
                raise type(exc)(f"edge {e.id!r}: {exc}") from exc
        states[e.id] = SegmentState(e.id, cache[key])
    return states


def route_safety(probabilities: Iterable[float]) -> float:
    """Product of segment safeties, accumulated as exp(sum ln p)."""
    total = 0.0
    for p in probabilities:
        if not 0.0 < p <= 1.0:
            raise NonPositiveProbability(f"segment probability {p!r} outside (0, 1]")
        total += math.log(p)
    return math.exp(total)


def edge_weight(p: float) -> float:
    """-ln p; zero for a certainly-safe segment."""
    if not p > 0.0:
        raise NonPositiveProbability(f"cannot weight a segment with probability {p!r}")
    if p > 1.0:
        raise NonPositiveProbability(f"segment probability {p!r} exceeds 1")
    return 0.0 - math.log(p)


def route_score(p_route: float) -> float:
    """-ln(1 - p(R)); +inf for a route that is certainly safe."""
    if not 0.0 <= p_route <= 1.0:
        raise ValueError(f"route probability {p_route!r} outside [0, 1]")
    if p_route == 1.0:
        return math.inf
    return 0.0 - math.log1p(-p_route)


def safest_route(
    graph: RoadGraph,
    states: Mapping[str, SegmentState | float],
    source: str,
    dest: str,
) -> Route:
    """Maximum-safety path from ``source`` to ``dest``.

    Dijkstra over -ln p.  Equal-weight alternatives are resolved by fewer
    edges, then the lexicographically smaller edge-id sequence.  Segments
    with p == 0 are dropped before the search.
    """
    for node in (source, dest):
        if node not in graph._out:
            raise UnknownNode(f"unknown node {node!r}")
    weights = {}
    for e in graph.edges:
        if e.id not in states:
            raise UnknownEdge(f"no safety state for edge {e.id!r}")
        s = states[e.id]
        p = s.probability if isinstance(s, SegmentState) else float(s)
        if p > 0.0:
            weights[e.id] = edge_weight(p)

    # label = (distance, edge count, edge-id path); the tuple order is the tie rule
    best: dict[str, tuple] = {source: (0.0, 0, ())}
    heap = [(0.0, 0, (), source)]
    done = set()
    while heap:
        dist, hops, path, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == dest:
            break
        for e in graph.out_edges(node):
            if e.id not in weights or e.head in done:
                continue
            label = (dist + weights[e.id], hops + 1, path + (e.id,))
            if e.head not in best or label < best[e.head]:
                best[e.head] = label
                heapq.heappush(heap, label + (e.head,))

    if dest not in done:
        raise Unreachable(f"no route from {source!r} to {dest!r}")
    edges = best[dest][2]
    nodes = [source] + [graph.edge(eid).head for eid in edges]
    p_route = route_safety(
        s.probability if isinstance(s, SegmentState) else float(s)
        for s in (states[eid] for eid in edges)
    )
    return Route(tuple(edges), tuple(nodes), p_route, route_score(p_route))


def route_from_edges(graph: RoadGraph, states: Mapping[str, SegmentState], edges: Sequence[str]) -> Route:
    """Evaluate a given edge sequence (used to compare fixed routes over time)."""
    if not edges:
        raise ValueError("empty edge sequence")
    nodes = [graph.edge(edges[0]).tail]
    for eid in edges:
        e = graph.edge(eid)
        if e.tail != nodes[-1]:
            raise SchemaMismatch(f"edge {eid!r} does not continue from {nodes[-1]!r}")
        nodes.append(e.head)
    p = route_safety(states[eid].probability for eid in edges)
    return Route(tuple(edges), tuple(nodes), p, route_score(p))
