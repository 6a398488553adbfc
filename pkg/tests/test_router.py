import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import chain_scenario, rider
from crimeroute.model import LinePlan, Stop, TimeEdge, TransitNetwork, Variant, validate_scenario
from crimeroute.router import (
    NoPathError,
    build_routing_graph,
    compute_time_optimal_route,
    extract_transfer_stops,
    route_all,
)


def random_network(rng, max_stops=8, max_lines=3):
    """Random lines over at most 8 stops, integer mean times so costs compare exactly."""
    n = int(rng.integers(2, max_stops + 1))
    ids = [f"S{i}" for i in range(n)]
    stops = tuple(Stop(s, 0.001 * i, 0.0) for i, s in enumerate(ids))
    edges, lines = {}, []
    for j in range(int(rng.integers(1, max_lines + 1))):
        k = int(rng.integers(2, n + 1))
        seq = [ids[int(i)] for i in rng.permutation(n)[:k]]
        for a, b in zip(seq, seq[1:]):
            edges.setdefault((a, b), TimeEdge(a, b, float(rng.integers(1, 300)), 0.0))
        lines.append(LinePlan(f"L{j}", tuple(seq)))
    return TransitNetwork(stops, tuple(edges.values())), lines


def brute_force_min(network, lines, origin, dest, penalty):
    """Exhaustive search over itineraries that never revisit a stop; None if unreachable."""
    best = None
    served = {}
    for ln in lines:
        for i, s in enumerate(ln.stop_sequence):
            served.setdefault(s, []).append((ln, i))

    def walk(ln, i, cost, visited, rode):
        nonlocal best
        stop = ln.stop_sequence[i]
        if stop == dest and rode:
            best = cost if best is None else min(best, cost)
        if i + 1 < len(ln.stop_sequence):
            nxt = ln.stop_sequence[i + 1]
            if nxt not in visited:
                walk(ln, i + 1, cost + network.edge(stop, nxt).mean_s, visited | {nxt}, True)
        if rode:
            for other, k in served[stop]:
                if other.line_id != ln.line_id:
                    walk(other, k, cost + penalty, visited, False)

    for ln, i in served.get(origin, []):
        walk(ln, i, 0.0, {origin}, False)
    return best


def itinerary_cost(network, lines, it, penalty):
    by_id = {ln.line_id: ln for ln in lines}
    total = penalty * (len(it.legs) - 1)
    for leg in it.legs:
        seq = by_id[leg.line_id].stop_sequence
        a, b = seq.index(leg.board_stop), seq.index(leg.alight_stop)
        total += sum(network.edge(x, y).mean_s for x, y in zip(seq[a:b], seq[a + 1:b + 1]))
    return total


def test_single_line_graph_shape():
    sc = chain_scenario([60, 60])
    g = build_routing_graph(sc.network, sc.lines)
    assert len(g.arcs_of_kind("ride")) == 2
    assert g.arcs_of_kind("transfer") == []


def test_shared_stop_gets_transfer_arcs_both_ways():
    sc = chain_scenario([60, 60])
    net = TransitNetwork(sc.network.stops + (Stop("X", 0, 0),), sc.network.edges + (TimeEdge("S1", "X", 30, 0),))
    g = build_routing_graph(net, sc.lines + (LinePlan("L2", ("S1", "X")),), 45)
    transfers = {(a, b): w for a, b, w in g.arcs_of_kind("transfer")}
    assert transfers == {(("at", "S1", "L1"), ("at", "S1", "L2")): 45.0,
                         (("at", "S1", "L2"), ("at", "S1", "L1")): 45.0}


def test_direct_line_one_leg_and_zero_penalty_cost():
    sc = chain_scenario([60, 70, 80])
    g = build_routing_graph(sc.network, sc.lines)
    it, cost = compute_time_optimal_route(g, "S0", "S3", "P1", 100)
    assert [tuple(leg) for leg in it.legs] == [("L1", "S0", "S3")]
    assert it.variant is Variant.OPTIMAL and it.appearance_time == 100
    assert cost == 210.0


def two_route_network():
    # A -> B via line FAST (900 s total with transfer at M) or line SLOW (1100 s direct)
    stops = tuple(Stop(s, 0, 0) for s in ("A", "M", "B"))
    edges = (TimeEdge("A", "M", 400, 0), TimeEdge("M", "B", 500, 0), TimeEdge("A", "B", 1100, 0))
    lines = [LinePlan("SLOW", ("A", "B")), LinePlan("F1", ("A", "M")), LinePlan("F2", ("M", "B"))]
    return TransitNetwork(stops, edges), lines


def test_faster_path_wins_and_penalty_flips_it():
    net, lines = two_route_network()
    it, cost = compute_time_optimal_route(build_routing_graph(net, lines), "A", "B")
    assert cost == 900.0 and extract_transfer_stops(it) == ["M"]
    it, cost = compute_time_optimal_route(build_routing_graph(net, lines, 300), "A", "B")
    assert cost == 1100.0 and [leg.line_id for leg in it.legs] == ["SLOW"]


def test_tie_prefers_fewer_transfers():
    net, lines = two_route_network()
    it, cost = compute_time_optimal_route(build_routing_graph(net, lines, 200), "A", "B")
    assert cost == 1100.0 and len(it.legs) == 1


def test_unreachable_destination():
    net, lines = two_route_network()
    g = build_routing_graph(net, lines)
    with pytest.raises(NoPathError):
        compute_time_optimal_route(g, "B", "A")
    with pytest.raises(ValueError):
        compute_time_optimal_route(g, "A", "A")
    routed, missing = route_all(g, [rider("P1", 0, ("F2", "M", "B")), rider("P2", 0, ("SLOW", "A", "B"))])
    assert missing == [] and len(routed) == 2


def test_extract_transfer_stops():
    assert extract_transfer_stops(rider("P", 0, ("L1", "A", "B"))) == []
    assert extract_transfer_stops(rider("P", 0, ("L1", "A", "T"), ("L2", "T", "B"))) == ["T"]
    three = rider("P", 0, ("L1", "A", "T"), ("L2", "T", "U"), ("L3", "U", "B"))
    assert extract_transfer_stops(three) == ["T", "U"]


def check_against_enumeration(seed):
    rng = np.random.default_rng(seed)
    net, lines = random_network(rng)
    penalty = float(rng.choice([0, 0, 30, 120]))
    g = build_routing_graph(net, lines, penalty)
    checked = 0
    for o in net.stops:
        for d in net.stops:
            if o.id == d.id:
                continue
            expect = brute_force_min(net, lines, o.id, d.id, penalty)
            if expect is None:
                with pytest.raises(NoPathError):
                    compute_time_optimal_route(g, o.id, d.id)
                continue
            it, cost = compute_time_optimal_route(g, o.id, d.id, "P1")
            assert cost == expect, (seed, o.id, d.id)
            assert itinerary_cost(net, lines, it, penalty) == cost
            assert validate_scenario(net, lines, (), (it,)) == []
            checked += 1
    return checked


@pytest.mark.parametrize("block", range(4))
def test_matches_exhaustive_enumeration(block):
    for seed in range(block * 50, block * 50 + 50):
        check_against_enumeration(seed)


@given(st.integers(0, 2**32), st.integers(0, 200), st.integers(0, 200))
@settings(max_examples=60)
def test_penalty_monotonicity(seed, p1, p2):
    lo, hi = sorted((p1, p2))
    net, lines = random_network(np.random.default_rng(seed))
    g_lo, g_hi = build_routing_graph(net, lines, lo), build_routing_graph(net, lines, hi)
    for o in net.stops:
        for d in net.stops:
            if o.id == d.id:
                continue
            try:
                it_lo, c_lo = compute_time_optimal_route(g_lo, o.id, d.id)
            except NoPathError:
                continue
            it_hi, c_hi = compute_time_optimal_route(g_hi, o.id, d.id)
            assert c_hi >= c_lo
            assert len(it_hi.legs) <= len(it_lo.legs)
