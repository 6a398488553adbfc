"""Time-optimal itineraries over the mean-time network.

Nodes are (stop, line) presences plus a source and a sink per stop.  Ride arcs
follow each line with the edge mean time, transfer arcs connect the presences
of different lines at a shared stop and cost ``transfer_penalty_s``.  Ties on
expected time are broken by fewer transfers, then by the lexicographic
sequence of line ids.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .model import Leg, LinePlan, PassengerItinerary, TransitNetwork, Variant


class NoPathError(LookupError):
    pass


class Arc(NamedTuple):
    head: int
    weight: float
    kind: str  # "board", "ride", "transfer", "alight"


@dataclass
class RoutingGraph:
    """Adjacency lists over integer node ids; see :func:`build_routing_graph`."""

    nodes: list[tuple]  # ("src", stop) | ("sink", stop) | ("at", stop, line)
    index: dict[tuple, int]
    arcs: list[list[Arc]]
    transfer_penalty_s: float
    _trees: dict[str, dict] = field(default_factory=dict, repr=False)

    def arcs_of_kind(self, kind: str) -> list[tuple[tuple, tuple, float]]:
        return [(self.nodes[u], self.nodes[a.head], a.weight)
                for u, out in enumerate(self.arcs) for a in out if a.kind == kind]


def build_routing_graph(
    network: TransitNetwork, lines: Iterable[LinePlan], transfer_penalty_s: float = 0.0
) -> RoutingGraph:
    if transfer_penalty_s < 0:
        raise ValueError("transfer_penalty_s must be non-negative")
    nodes: list[tuple] = []
    index: dict[tuple, int] = {}

    def node(key: tuple) -> int:
        if key not in index:
            index[key] = len(nodes)
            nodes.append(key)
        return index[key]

    for s in sorted(st.id for st in network.stops):
        node(("src", s))
        node(("sink", s))

    lines = sorted(lines, key=lambda ln: ln.line_id)
    served: dict[str, list[str]] = {}
    for ln in lines:
        for s in ln.stop_sequence:
            node(("at", s, ln.line_id))
            served.setdefault(s, []).append(ln.line_id)

    arcs: list[list[Arc]] = [[] for _ in nodes]
    for ln in lines:
        seq = ln.stop_sequence
        for i, s in enumerate(seq):
            at = index[("at", s, ln.line_id)]
            if i + 1 < len(seq):
                arcs[index[("src", s)]].append(Arc(at, 0.0, "board"))
                nxt = index[("at", seq[i + 1], ln.line_id)]
                arcs[at].append(Arc(nxt, float(network.edge(s, seq[i + 1]).mean_s), "ride"))
            if i > 0:
                arcs[at].append(Arc(index[("sink", s)], 0.0, "alight"))
    for s, line_ids in sorted(served.items()):
        for a in line_ids:
            for b in line_ids:
                if a != b:
                    arcs[index[("at", s, a)]].append(Arc(index[("at", s, b)], float(transfer_penalty_s), "transfer"))
    return RoutingGraph(nodes, index, arcs, float(transfer_penalty_s))


def _line_of(key: tuple) -> str | None:
    return key[2] if key[0] == "at" else None


def shortest_path_tree(graph: RoutingGraph, origin: str) -> dict[int, tuple]:
    """Label-setting search from ``origin``'s source node.

    Labels are ``(cost, transfers, line_ids, node, parent)`` compared
    lexicographically; this order is preserved by arc extension because
    paths with equal transfer counts carry equally long line sequences.
    """
    cached = graph._trees.get(origin)
    if cached is not None:
        return cached
    start = graph.index[("src", origin)]
    best: dict[int, tuple] = {}
    heap = [(0.0, 0, (), start, -1)]
    while heap:
        label = heapq.heappop(heap)
        cost, transfers, line_ids, u, _ = label
        if u in best:
            continue
        best[u] = label
        for arc in graph.arcs[u]:
            if arc.head in best:
                continue
            if arc.kind == "board":
                ext = (cost, transfers, line_ids + (_line_of(graph.nodes[arc.head]),))
            elif arc.kind == "transfer":
                ext = (cost + arc.weight, transfers + 1, line_ids + (_line_of(graph.nodes[arc.head]),))
            else:
                ext = (cost + arc.weight, transfers, line_ids)
            heapq.heappush(heap, (*ext, arc.head, u))
    graph._trees[origin] = best
    return best


def compute_time_optimal_route(
    graph: RoutingGraph,
    origin: str,
    destination: str,
    passenger_id: str = "",
    appearance_time: int = 0,
) -> tuple[PassengerItinerary, float]:
    """Minimum expected-time itinerary from ``origin`` to ``destination``."""
    if origin == destination:
        raise ValueError("origin and destination must differ")
    for s in (origin, destination):
        if ("src", s) not in graph.index:
            raise KeyError(f"unknown stop {s!r}")
    tree = shortest_path_tree(graph, origin)
    goal = graph.index[("sink", destination)]
    if goal not in tree:
        raise NoPathError(f"no path from {origin!r} to {destination!r}")

    path = []
    u = goal
    while u != -1:
        path.append(graph.nodes[u])
        u = tree[u][4]
    path.reverse()
    presences = [k for k in path if k[0] == "at"]

    legs: list[Leg] = []
    board = presences[0]
    for prev, cur in zip(presences, presences[1:]):
        if cur[2] != prev[2]:  # transfer arc at a shared stop
            if prev[1] != board[1]:
                legs.append(Leg(prev[2], board[1], prev[1]))
            board = cur
    last = presences[-1]
    legs.append(Leg(last[2], board[1], last[1]))
    itinerary = PassengerItinerary(passenger_id, tuple(legs), appearance_time, Variant.OPTIMAL)
    return itinerary, tree[goal][0]


def extract_transfer_stops(itinerary: PassengerItinerary) -> list[str]:
    return [leg.alight_stop for leg in itinerary.legs[:-1]]


def route_all(
    graph: RoutingGraph, itineraries: Sequence[PassengerItinerary]
) -> tuple[list[PassengerItinerary], list[str]]:
    """OPTIMAL counterparts for ``itineraries`` (same rider, origin, destination, appearance).

    Returns the routed itineraries and the ids of riders with no path.
    """
    routed, missing = [], []
    for it in itineraries:
        try:
            opt, _ = compute_time_optimal_route(graph, it.origin, it.destination, it.passenger_id, it.appearance_time)
        except NoPathError:
            missing.append(it.passenger_id)
            continue
        routed.append(opt)
    return routed, missing
