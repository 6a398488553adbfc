"""Acceptance gate: one test group per criterion, summarised at the end of the run."""

import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import chain_scenario, rider, synthetic_scenarios
from crimeroute.engine import EventKind, Phase, run_simulation, sample_edge_time
from crimeroute.metrics import (
    compare_scenarios,
    crimes_near_stop,
    fit_power_law,
    occupancy_bucket,
    occupancy_histogram,
    snapshot_counts,
)
from crimeroute.model import SimConfig, Stop, TimeEdge, Variant
from crimeroute.router import NoPathError, build_routing_graph, compute_time_optimal_route
from crimeroute.scenario_io import events_to_csv, load_scenario, read_report, write_report, write_scenario
from crimeroute.synthetic import SyntheticParams, generate_synthetic
from test_metrics import brute_haversine, crime, north_of, power_law_sample
from test_router import brute_force_min, random_network

FUNNEL = Path(__file__).resolve().parent.parent / "scenarios" / "funnel"


def partition_holds(events):
    hist = occupancy_histogram(events)
    snaps = [e for e in events if e.kind is EventKind.SNAPSHOT]
    return len(snaps) == len(hist.clocks) and all(
        lo + mid + hi == len(snapshot_counts(e)) for e, lo, mid, hi in zip(snaps, hist.low, hist.mid, hist.high))


@pytest.fixture(scope="module")
def full_day():
    t0 = time.perf_counter()
    sc = generate_synthetic(SyntheticParams(n_stops=100, n_lines=10, n_vehicles=50, n_passengers=10_000), 0)
    rep = run_simulation(sc, SimConfig(rng_seed=0))
    return sc, rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def funnel_runs():
    sc = load_scenario(FUNNEL)
    runs = []
    for seed in range(3):
        cfg = SimConfig(rng_seed=seed)
        ra, ro = run_simulation(sc, cfg, Variant.ACTUAL), run_simulation(sc, cfg, Variant.OPTIMAL)
        runs.append((ra, ro, compare_scenarios(ra, ro, sc.network, sc.crimes, cfg, sc.itineraries)))
    return sc, runs


# 1 ---------------------------------------------------------------------------------------------


@pytest.mark.criterion(1, "capacity safety and conservation on a full-day synthetic run")
def test_c1_capacity_and_conservation(full_day):
    sc, rep, elapsed = full_day
    assert len(sc.network.stops) == 100 and len(sc.lines) == 10 and len(sc.schedules) == 50
    assert len(rep.passengers) == 10_000
    for e in rep.events_of(EventKind.SNAPSHOT):
        assert all(n <= 80 for n in snapshot_counts(e).values())
    boards = Counter(e.subject for e in rep.events_of(EventKind.BOARD))
    alights = Counter(e.subject for e in rep.events_of(EventKind.ALIGHT))
    stranded = {e.subject for e in rep.events_of(EventKind.ALIGHT) if e.fields().get("stranded") == "1"}
    for p in rep.passengers:
        assert boards[p.passenger_id] == alights[p.passenger_id] + (p.phase is Phase.ONBOARD)
        assert (p.phase is Phase.STRANDED) == (p.passenger_id in stranded)
    print(f"\nfull-day run: {len(rep.events)} events, {sum(boards.values())} boardings, {elapsed:.2f} s")
    assert elapsed < 10.0


# 2 ---------------------------------------------------------------------------------------------


@pytest.mark.criterion(2, "determinism of logs and reports; seed sensitivity")
def test_c2_determinism(tmp_path):
    sc = generate_synthetic(SyntheticParams(n_stops=40, n_lines=5, n_vehicles=10, n_passengers=800), 5)
    cfg = SimConfig(rng_seed=123)
    a, b = run_simulation(sc, cfg), run_simulation(sc, cfg)
    assert events_to_csv(a.events) == events_to_csv(b.events)
    da, db = write_report(a, tmp_path / "a"), write_report(b, tmp_path / "b")
    for f in sorted(da.iterdir()):
        assert f.read_bytes() == (db / f.name).read_bytes()
    c = run_simulation(sc, SimConfig(rng_seed=124))
    arrivals = lambda r: [(e.clock_s, e.subject, e.payload) for e in r.events_of(EventKind.ARRIVE_STOP)]  # noqa: E731
    assert arrivals(a) != arrivals(c)


# 3 ---------------------------------------------------------------------------------------------


@pytest.mark.criterion(3, "edge-time sampler moments, zero variance, floor")
def test_c3_sampler():
    rng = np.random.default_rng(2024)
    x = np.array([sample_edge_time(TimeEdge("A", "B", 120.0, 30.0), rng) for _ in range(100_000)])
    assert abs(x.mean() - 120.0) <= 1.0 and abs(x.std() - 30.0) <= 1.0
    assert x.min() >= 1.0
    assert {sample_edge_time(TimeEdge("A", "B", 120.0, 0.0), rng) for _ in range(1000)} == {120.0}
    y = [sample_edge_time(TimeEdge("A", "B", 30.0, 60.0), rng) for _ in range(10_000)]
    assert min(y) >= 1.0


# 4 ---------------------------------------------------------------------------------------------


@pytest.mark.criterion(4, "zero-variance single bus matches hand-computed tick arithmetic")
def test_c4_sigma_zero_oracle():
    # departs 05:30 (19800); cumulative 90, 110, 160, 220, 350 s -> arrivals at the end of ticks 2, 2, 3, 4, 6
    sc = chain_scenario([90, 20, 50, 60, 130],
                        riders=[rider("P1", 19500, ("L1", "S0", "S2")), rider("P2", 19500, ("L1", "S1", "S5"))])
    rep = run_simulation(sc)
    arrivals = [(e.clock_s, e.fields()["stop"]) for e in rep.events_of(EventKind.ARRIVE_STOP)]
    assert arrivals == [(19920, "S1"), (19920, "S2"), (19980, "S3"), (20040, "S4"), (20160, "S5")]
    board = {e.subject: e.clock_s for e in rep.events_of(EventKind.BOARD)}
    alight = {e.subject: e.clock_s for e in rep.events_of(EventKind.ALIGHT)}
    assert board == {"P1": 19800, "P2": 19920} and alight == {"P1": 19920, "P2": 20160}


# 5 ---------------------------------------------------------------------------------------------


@pytest.mark.criterion(5, "router cost equals exhaustive enumeration on 200 small networks")
def test_c5_router_optimality():
    pairs = 0
    for seed in range(200):
        rng = np.random.default_rng(10_000 + seed)
        net, lines = random_network(rng)
        penalty = float(rng.choice([0, 45]))
        g = build_routing_graph(net, lines, penalty)
        for o in net.stops:
            for d in net.stops:
                if o.id == d.id:
                    continue
                expect = brute_force_min(net, lines, o.id, d.id, penalty)
                try:
                    _, cost = compute_time_optimal_route(g, o.id, d.id)
                except NoPathError:
                    cost = None
                assert cost == expect, (seed, o.id, d.id)
                pairs += expect is not None
    assert pairs > 1000


# 6 ---------------------------------------------------------------------------------------------


@pytest.mark.criterion(6, "spatial join equals brute-force double loop; 200/201 m boundary")
def test_c6_spatial_join():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        s = Stop("S", float(rng.uniform(-60, 60)), float(rng.uniform(-170, 170)))
        crimes = [crime(s.lat + rng.uniform(-0.004, 0.004), s.lon + rng.uniform(-0.004, 0.004))
                  for _ in range(int(rng.integers(0, 1001)))]
        radius = float(rng.uniform(50, 400))
        expected = sum(1 for c in crimes if brute_haversine(s.lat, s.lon, c.lat, c.lon) <= radius)
        assert crimes_near_stop(s, crimes, radius) == expected
    s = Stop("S", -3.7319, -38.5267)
    assert crimes_near_stop(s, [crime(s.lat, s.lon)], 200) == 1
    assert crimes_near_stop(s, [north_of(s, 199.99)], 200) == 1
    assert crimes_near_stop(s, [north_of(s, 201)], 200) == 0


# 7 ---------------------------------------------------------------------------------------------


@pytest.mark.criterion(7, "power-law MLE recovers alpha within 0.15 at n = 10^4")
@pytest.mark.parametrize("alpha", [1.5, 2.0, 2.5])
def test_c7_power_law_recovery(alpha):
    fit = fit_power_law(power_law_sample(np.random.default_rng(int(alpha * 10)), alpha, 10_000))
    print(f"\nalpha={alpha}: fitted {fit.alpha:.3f} (xmin {fit.xmin:.3g}, ks {fit.ks:.4f})")
    assert abs(fit.alpha - alpha) <= 0.15


# 8 ---------------------------------------------------------------------------------------------


@pytest.mark.criterion(8, "funnel scenario: optimal routes wait longer and transfer at riskier stops")
def test_c8_direction_of_effect(funnel_runs):
    _, runs = funnel_runs
    for _, _, comp in runs:
        a, o = comp.scalars(comp.actual), comp.scalars(comp.optimal)
        print(f"\nwait {a['mean_window_wait_s']:.1f} -> {o['mean_window_wait_s']:.1f} s, "
              f"rate {a['mean_transfer_rate']} -> {o['mean_transfer_rate']}")
        assert o["mean_window_wait_s"] > a["mean_window_wait_s"]
        assert o["mean_transfer_rate"] > a["mean_transfer_rate"]


# 9 ---------------------------------------------------------------------------------------------


@pytest.mark.criterion(9, "occupancy buckets partition the active fleet; 20/21/60/61 boundaries")
def test_c9_boundaries():
    assert [occupancy_bucket(n) for n in (0, 20, 21, 60, 61, 80)] == ["LOW", "LOW", "MID", "MID", "HIGH", "HIGH"]


@pytest.mark.criterion(9, "occupancy buckets partition the active fleet; 20/21/60/61 boundaries")
def test_c9_partition_on_fixed_runs(full_day, funnel_runs):
    assert partition_holds(full_day[1].events)
    for ra, ro, _ in funnel_runs[1]:
        assert partition_holds(ra.events) and partition_holds(ro.events)


@pytest.mark.criterion(9, "occupancy buckets partition the active fleet; 20/21/60/61 boundaries")
@given(synthetic_scenarios(max_passengers=150), st.integers(0, 2**32))
@settings(max_examples=25)
def test_c9_partition_property(sc, seed):
    assert partition_holds(run_simulation(sc, SimConfig(rng_seed=seed)).events)


# 10 --------------------------------------------------------------------------------------------


@pytest.mark.criterion(10, "scenario and report files round-trip to equal values")
@given(synthetic_scenarios(), st.integers(0, 2**64 - 1))
@settings(max_examples=30)
def test_c10_round_trip(tmp_path_factory, sc, seed):
    d = tmp_path_factory.mktemp("rt")
    assert load_scenario(write_scenario(sc, d / "scenario")) == sc
    for variant in Variant:
        rep = run_simulation(sc, SimConfig(rng_seed=seed), variant)
        assert read_report(write_report(rep, d / variant.value)) == rep


@pytest.mark.criterion(10, "scenario and report files round-trip to equal values")
def test_c10_round_trip_funnel(tmp_path, funnel_runs):
    sc, runs = funnel_runs
    assert load_scenario(write_scenario(sc, tmp_path / "sc")) == sc
    ra = runs[0][0]
    assert read_report(write_report(ra, tmp_path / "a")) == ra
