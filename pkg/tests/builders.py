"""Small hand-built scenarios and hypothesis strategies shared by the tests."""

from __future__ import annotations

from hypothesis import strategies as st

from crimeroute.model import (
    Leg,
    LinePlan,
    PassengerItinerary,
    Scenario,
    Stop,
    TimeEdge,
    TransitNetwork,
    Trip,
    Variant,
    VehicleSchedule,
)
from crimeroute.synthetic import SyntheticParams, generate_synthetic

T0530 = 5 * 3600 + 30 * 60


def chain_scenario(means, stds=None, departures=(T0530,), riders=(), capacity=80, n_vehicles=1):
    """One line ``S0 -> S1 -> ...`` with the given edge means; each vehicle runs all ``departures``."""
    stds = stds or [0.0] * len(means)
    ids = [f"S{i}" for i in range(len(means) + 1)]
    stops = tuple(Stop(s, -3.7 + 0.002 * i, -38.5) for i, s in enumerate(ids))
    edges = tuple(TimeEdge(a, b, float(m), float(sd)) for a, b, m, sd in zip(ids, ids[1:], means, stds))
    line = LinePlan("L1", tuple(ids))
    buses = tuple(VehicleSchedule(f"V{k}", tuple(Trip("L1", d) for d in departures), capacity)
                  for k in range(1, n_vehicles + 1))
    return Scenario(TransitNetwork(stops, edges), (line,), buses, tuple(riders))


def rider(pid, appear, *legs, variant=Variant.ACTUAL):
    return PassengerItinerary(pid, tuple(Leg(*leg) for leg in legs), appear, variant)


@st.composite
def synthetic_params(draw, max_passengers=60):
    n_stops = draw(st.integers(2, 30))
    return SyntheticParams(
        n_stops=n_stops,
        n_lines=draw(st.integers(1, 4)),
        stops_per_line=draw(st.integers(2, min(n_stops, 8))),
        n_vehicles=draw(st.integers(1, 5)),
        trips_per_vehicle=draw(st.integers(1, 4)),
        n_passengers=draw(st.integers(0, max_passengers)),
        n_crimes=draw(st.integers(0, 60)),
        crime_hotspot_count=draw(st.integers(0, min(n_stops, 3))),
        n_terminals=draw(st.integers(1, min(n_stops, 3))),
        cv=(0.0, draw(st.sampled_from([0.0, 0.2, 0.5]))),
        appearance_window=(5 * 3600, 8 * 3600),
        capacity=draw(st.integers(1, 12)),
        line_change_prob=draw(st.sampled_from([0.0, 0.5])),
    )


@st.composite
def synthetic_scenarios(draw, max_passengers=60):
    params = draw(synthetic_params(max_passengers))
    return generate_synthetic(params, draw(st.integers(0, 2**32)))
