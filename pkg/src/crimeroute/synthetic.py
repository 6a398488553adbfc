"""Synthetic scenarios: a random city generator plus two hand-built fixtures.

The generator lays stops on a jittered grid, threads lines through
designated terminal stops, and gives every rider an ACTUAL itinerary that
prefers changing buses at a terminal plus the router's OPTIMAL itinerary.
Crimes cluster around stops with power-law distributed intensities, the
strongest clusters sitting on non-terminal stops where lines cross.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .model import (
    DEFAULT_CAPACITY,
    CrimeRecord,
    CrimeType,
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
from .router import build_routing_graph, compute_time_optimal_route

M_PER_DEG_LAT = 111_320.0
CRIME_EPOCH = datetime(2015, 1, 1)


class InfeasibleParamsError(ValueError):
    def __init__(self, param: str, reason: str):
        self.param = param
        super().__init__(f"{param}: {reason}")


@dataclass(frozen=True)
class SyntheticParams:
    n_stops: int = 100
    n_lines: int = 10
    stops_per_line: int = 12
    n_vehicles: int = 50
    trips_per_vehicle: int = 40
    n_passengers: int = 10_000
    n_crimes: int = 10_000
    crime_hotspot_count: int = 5
    crime_exponent: float = 2.0
    background_crime_fraction: float = 0.1
    n_terminals: int = 4
    mean_edge_s: tuple[float, float] = (60.0, 180.0)
    cv: tuple[float, float] = (0.1, 0.3)
    appearance_window: tuple[int, int] = (5 * 3600, 22 * 3600)
    service_start: int = 4 * 3600 + 30 * 60
    single_leg_fraction: float = 0.3
    line_change_prob: float = 0.2
    layover_s: int = 300
    capacity: int = DEFAULT_CAPACITY
    stop_spacing_m: float = 600.0
    placement_radius_m: float = 150.0
    center: tuple[float, float] = (-3.7319, -38.5267)
    transfer_penalty_s: float = 0.0

    def check(self) -> None:
        for name in ("n_stops", "n_lines", "n_vehicles", "trips_per_vehicle", "n_terminals", "capacity"):
            if getattr(self, name) < 1:
                raise InfeasibleParamsError(name, "must be >= 1")
        for name in ("n_passengers", "n_crimes", "crime_hotspot_count", "layover_s"):
            if getattr(self, name) < 0:
                raise InfeasibleParamsError(name, "must be >= 0")
        if self.n_stops < 2:
            raise InfeasibleParamsError("n_stops", "need at least 2 stops")
        if not 2 <= self.stops_per_line <= self.n_stops:
            raise InfeasibleParamsError("stops_per_line", f"must lie in [2, n_stops={self.n_stops}]")
        if self.n_terminals > self.n_stops:
            raise InfeasibleParamsError("n_terminals", "exceeds n_stops")
        if self.crime_hotspot_count > self.n_stops:
            raise InfeasibleParamsError("crime_hotspot_count", "exceeds n_stops")
        if not self.crime_exponent > 1.0:
            raise InfeasibleParamsError("crime_exponent", "must be > 1")
        for name in ("mean_edge_s", "cv", "appearance_window"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise InfeasibleParamsError(name, "range is reversed")
        if self.mean_edge_s[0] <= 0:
            raise InfeasibleParamsError("mean_edge_s", "must be positive")
        if self.cv[0] < 0:
            raise InfeasibleParamsError("cv", "must be non-negative")
        for name in ("single_leg_fraction", "line_change_prob", "background_crime_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InfeasibleParamsError(name, "must lie in [0, 1]")
        if not 0 < self.placement_radius_m < self.stop_spacing_m / 2:
            raise InfeasibleParamsError("placement_radius_m", "must be positive and below half the stop spacing")


def _uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return lo if hi == lo else float(rng.uniform(lo, hi))


def _offset(lat: float, lon: float, north_m: float, east_m: float) -> tuple[float, float]:
    dlat = north_m / M_PER_DEG_LAT
    dlon = east_m / (M_PER_DEG_LAT * math.cos(math.radians(lat)))
    return round(lat + dlat, 7), round(lon + dlon, 7)


def _layout(p: SyntheticParams, rng: np.random.Generator) -> tuple[list[Stop], dict[int, list[int]]]:
    side = math.ceil(math.sqrt(p.n_stops))
    width = len(str(p.n_stops - 1))
    stops, cells = [], {}
    for k in range(p.n_stops):
        r, c = divmod(k, side)
        jitter = rng.uniform(-0.15, 0.15, size=2) * p.stop_spacing_m
        lat, lon = _offset(*p.center, (r - side / 2) * p.stop_spacing_m + jitter[0],
                           (c - side / 2) * p.stop_spacing_m + jitter[1])
        stops.append(Stop(f"S{k:0{width}d}", lat, lon))
        cells[(r, c)] = k
    adj = {}
    for (r, c), k in cells.items():
        adj[k] = [cells[n] for n in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)) if n in cells]
    return stops, adj


def _grid_distance(a: int, b: int, side: int) -> int:
    ra, ca = divmod(a, side)
    rb, cb = divmod(b, side)
    return abs(ra - rb) + abs(ca - cb)


def _thread_line(start: int, length: int, adj: dict[int, list[int]], n_stops: int,
                 rng: np.random.Generator) -> list[int]:
    """Self-avoiding walk grown at both ends from ``start``; jumps to the nearest free stop when boxed in."""
    side = math.ceil(math.sqrt(n_stops))
    path = [start]
    used = {start}
    while len(path) < length:
        at_head = bool(rng.integers(2))
        end = path[0] if at_head else path[-1]
        options = [n for n in adj[end] if n not in used]
        if not options:
            end = path[-1] if at_head else path[0]
            at_head = not at_head
            options = [n for n in adj[end] if n not in used]
        if not options:
            free = [k for k in range(n_stops) if k not in used]
            best = min(_grid_distance(end, k, side) for k in free)
            options = [k for k in free if _grid_distance(end, k, side) == best]
        nxt = options[int(rng.integers(len(options)))]
        used.add(nxt)
        if at_head:
            path.insert(0, nxt)
        else:
            path.append(nxt)
    return path


def pareto_weights(n: int, exponent: float) -> np.ndarray:
    """Mid-quantiles of the density proportional to ``w**-exponent`` on ``w >= 1``, largest first.

    Stratified rather than random draws: the set has the exact tail shape
    even for a few hundred stops.
    """
    q = (np.arange(n) + 0.5) / n
    return q ** (-1.0 / (exponent - 1.0))


def generate_crimes(
    stops: list[Stop],
    p: SyntheticParams,
    rng: np.random.Generator,
    hotspot_stops: list[str] = (),
) -> tuple[CrimeRecord, ...]:
    """Uniform background plus Gaussian clusters centred on stops.

    Cluster sizes are a multinomial split of the non-background crimes with
    power-law weights, so crimes-per-stop inherits the tail exponent
    ``p.crime_exponent``.  The largest weights go to ``hotspot_stops``.
    """
    n_bg = int(round(p.background_crime_fraction * p.n_crimes))
    n_cluster = p.n_crimes - n_bg
    weights = pareto_weights(len(stops), p.crime_exponent)
    by_id = {s.id: i for i, s in enumerate(stops)}
    hot = [by_id[s] for s in hotspot_stops]
    hot_set = set(hot)
    rest = [i for i in rng.permutation(len(stops)) if i not in hot_set]
    order = hot + rest
    stop_weight = np.empty(len(stops))
    stop_weight[order] = weights
    counts = rng.multinomial(n_cluster, stop_weight / stop_weight.sum()) if n_cluster else np.zeros(len(stops), int)

    sigma = p.placement_radius_m / 3.0
    positions = []
    for i, k in enumerate(counts):
        for _ in range(int(k)):
            while True:
                dn, de = rng.normal(0.0, sigma, size=2)
                if dn * dn + de * de <= p.placement_radius_m ** 2:
                    break
            positions.append(_offset(stops[i].lat, stops[i].lon, dn, de))
    if n_bg:
        lats = [s.lat for s in stops]
        lons = [s.lon for s in stops]
        pad = p.stop_spacing_m / M_PER_DEG_LAT
        for _ in range(n_bg):
            positions.append((round(_uniform(rng, min(lats) - pad, max(lats) + pad), 7),
                              round(_uniform(rng, min(lons) - pad, max(lons) + pad), 7)))
    types = list(CrimeType)
    kinds = rng.choice(len(types), size=len(positions), p=[0.5, 0.35, 0.15])
    minutes = rng.integers(0, 2 * 365 * 24 * 60, size=len(positions))
    return tuple(
        CrimeRecord(lat, lon, types[int(k)], CRIME_EPOCH + timedelta(minutes=int(m)))
        for (lat, lon), k, m in zip(positions, kinds, minutes)
    )


def _ceil_minute(x: float) -> int:
    return int(math.ceil(x / 60.0)) * 60


def generate_synthetic(params: SyntheticParams | None = None, seed: int = 0) -> Scenario:
    p = params or SyntheticParams()
    p.check()
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(5)]
    r_layout, r_lines, r_fleet, r_riders, r_crime = streams

    stops, adj = _layout(p, r_layout)
    sid = [s.id for s in stops]
    terminals = sorted(int(k) for k in r_layout.choice(p.n_stops, size=p.n_terminals, replace=False))

    lw = len(str(p.n_lines - 1))
    lines, edges = [], {}
    for j in range(p.n_lines):
        walk = _thread_line(terminals[j % len(terminals)], p.stops_per_line, adj, p.n_stops, r_lines)
        seq = tuple(sid[k] for k in walk)
        lines.append(LinePlan(f"L{j:0{lw}d}", seq))
        for a, b in zip(seq, seq[1:]):
            if (a, b) not in edges:
                mu = round(_uniform(r_lines, *p.mean_edge_s), 1)
                edges[(a, b)] = TimeEdge(a, b, mu, round(mu * _uniform(r_lines, *p.cv), 2))
    network = TransitNetwork(tuple(stops), tuple(edges.values()))
    duration = {ln.line_id: sum(edges[(a, b)].mean_s for a, b in zip(ln.stop_sequence, ln.stop_sequence[1:]))
                for ln in lines}

    vw = len(str(p.n_vehicles - 1))
    per_line = [[v for v in range(p.n_vehicles) if v % p.n_lines == j] for j in range(p.n_lines)]
    schedules = []
    for v in range(p.n_vehicles):
        line = lines[v % p.n_lines].line_id
        group = per_line[v % p.n_lines]
        cycle = duration[line] * 1.2 + p.layover_s
        dep = p.service_start + _ceil_minute(cycle * group.index(v) / len(group))
        trips = []
        for _ in range(p.trips_per_vehicle):
            trips.append(Trip(line, dep))
            dep += _ceil_minute(duration[line] * 1.2 + p.layover_s)
            if p.n_lines > 1 and r_fleet.random() < p.line_change_prob:
                line = lines[int(r_fleet.integers(p.n_lines))].line_id
        schedules.append(VehicleSchedule(f"V{v:0{vw}d}", tuple(trips), p.capacity))

    terminal_ids = {sid[k] for k in terminals}
    into = {t: [ln for ln in lines if ln.position.get(t, 0) > 0] for t in terminal_ids}
    out_of = {t: [ln for ln in lines if t in ln.position and ln.position[t] < len(ln.stop_sequence) - 1]
              for t in terminal_ids}
    transfer_terminals = sorted(t for t in terminal_ids
                                if any(a.line_id != b.line_id for a in into[t] for b in out_of[t]))

    graph = build_routing_graph(network, lines, p.transfer_penalty_s)
    pw = len(str(max(p.n_passengers - 1, 0)))
    itineraries = []
    for i in range(p.n_passengers):
        appear = int(r_riders.integers(p.appearance_window[0], p.appearance_window[1] + 1))
        legs = None
        while legs is None:
            if transfer_terminals and r_riders.random() >= p.single_leg_fraction:
                t = transfer_terminals[int(r_riders.integers(len(transfer_terminals)))]
                a = into[t][int(r_riders.integers(len(into[t])))]
                choices = [b for b in out_of[t] if b.line_id != a.line_id]
                if not choices:
                    continue
                b = choices[int(r_riders.integers(len(choices)))]
                o = a.stop_sequence[int(r_riders.integers(a.position[t]))]
                lo = b.position[t] + 1
                d = b.stop_sequence[int(r_riders.integers(lo, len(b.stop_sequence)))]
                if o != d:
                    legs = (Leg(a.line_id, o, t), Leg(b.line_id, t, d))
            else:
                ln = lines[int(r_riders.integers(len(lines)))]
                x, y = sorted(int(k) for k in r_riders.choice(len(ln.stop_sequence), size=2, replace=False))
                legs = (Leg(ln.line_id, ln.stop_sequence[x], ln.stop_sequence[y]),)
        pid = f"P{i:0{pw}d}"
        actual = PassengerItinerary(pid, legs, appear, Variant.ACTUAL)
        optimal, _ = compute_time_optimal_route(graph, actual.origin, actual.destination, pid, appear)
        itineraries += [actual, optimal]

    served_by = {}
    for ln in lines:
        for s in ln.stop_sequence:
            served_by.setdefault(s, set()).add(ln.line_id)
    crossings = sorted(s for s, ls in served_by.items() if len(ls) >= 2 and s not in terminal_ids)
    hotspots = [crossings[int(k)] for k in r_crime.permutation(len(crossings))][: p.crime_hotspot_count]
    others = [s for s in sid if s not in terminal_ids and s not in hotspots]
    while len(hotspots) < p.crime_hotspot_count and others:
        hotspots.append(others.pop(int(r_crime.integers(len(others)))))
    crimes = generate_crimes(stops, p, r_crime, hotspots) if p.n_crimes else ()

    return Scenario(network, tuple(lines), tuple(schedules), tuple(itineraries), crimes)


# --------------------------------------------------------------------------- fixtures


def build_minimal_scenario() -> Scenario:
    """Three stops 60 s apart on one line, one bus departing 05:30, one rider appearing 05:20."""
    stops = tuple(Stop(f"S{i}", -3.73 + 0.005 * i, -38.52) for i in (1, 2, 3))
    edges = (TimeEdge("S1", "S2", 60.0, 0.0), TimeEdge("S2", "S3", 60.0, 0.0))
    line = LinePlan("L1", ("S1", "S2", "S3"))
    bus = VehicleSchedule("V1", (Trip("L1", 5 * 3600 + 30 * 60),))
    rider = PassengerItinerary("P1", (Leg("L1", "S1", "S3"),), 5 * 3600 + 20 * 60, Variant.ACTUAL)
    return Scenario(TransitNetwork(stops, edges), (line,), (bus,), (rider,), ())


def build_funnel_scenario(riders_per_group: int = 240, seed: int = 7) -> Scenario:
    """Two rider groups whose fastest routes change buses at crime-heavy hubs.

    Each group travels from three origin stops to three destination stops.
    The ACTUAL routes change buses at a shared terminal served every 6
    minutes; the faster hub routes run every 30 minutes with half-size buses.
    Crime clusters sit on the two hubs and none near the terminal.
    """
    rng = np.random.default_rng(seed)
    center = (-3.7319, -38.5267)
    place = {"T": (0, 0), "HA": (1500, -2500), "HB": (-1500, -2500)}
    for g, north in (("A", 3000), ("B", -3000)):
        for i in range(3):
            place[f"O{g}{i + 1}"] = (north, -6000 + 1000 * i)
            place[f"D{g}{i + 1}"] = (north, 2000 + 1000 * i)
    stops = tuple(Stop(k, *_offset(*center, *place[k])) for k in sorted(place))

    edges: dict[tuple[str, str], TimeEdge] = {}

    def chain(*hops: tuple[str, str, float]) -> None:
        for a, b, mu in hops:
            edges.setdefault((a, b), TimeEdge(a, b, mu, round(mu * 0.1, 1)))

    lines = []
    for g in ("A", "B"):
        o = [f"O{g}{i}" for i in (1, 2, 3)]
        d = [f"D{g}{i}" for i in (1, 2, 3)]
        chain((o[0], o[1], 120.0), (o[1], o[2], 120.0), (o[2], "T", 600.0), (o[2], f"H{g}", 120.0),
              ("T", d[0], 600.0), (f"H{g}", d[0], 120.0), (d[0], d[1], 120.0), (d[1], d[2], 120.0))
        lines += [
            LinePlan(f"FEED_{g}", (*o, "T")),
            LinePlan(f"TRUNK_{g}", ("T", *d)),
            LinePlan(f"HUBFEED_{g}", (*o, f"H{g}")),
            LinePlan(f"HUBTRUNK_{g}", (f"H{g}", *d)),
        ]
    lines.sort(key=lambda ln: ln.line_id)
    network = TransitNetwork(stops, tuple(edges[k] for k in sorted(edges)))

    schedules = []
    first, last = 4 * 3600 + 30 * 60, 11 * 3600
    for ln in lines:
        frequent = ln.line_id.startswith(("FEED", "TRUNK"))
        headway, fleet, cap = (360, 5, 80) if frequent else (1800, 1, 50)
        for v in range(fleet):
            deps = range(first + v * headway, last, headway * fleet)
            schedules.append(VehicleSchedule(f"{ln.line_id}_{v}", tuple(Trip(ln.line_id, t) for t in deps), cap))
    schedules.sort(key=lambda s: s.vehicle_id)

    graph = build_routing_graph(network, lines)
    itineraries = []
    for g in ("A", "B"):
        for i in range(riders_per_group):
            o = f"O{g}{int(rng.integers(1, 4))}"
            d = f"D{g}{int(rng.integers(1, 4))}"
            pid = f"{g}{i:03d}"
            appear = int(rng.integers(5 * 3600, 7 * 3600 + 30 * 60))
            actual = PassengerItinerary(pid, (Leg(f"FEED_{g}", o, "T"), Leg(f"TRUNK_{g}", "T", d)), appear)
            optimal, _ = compute_time_optimal_route(graph, o, d, pid, appear)
            itineraries += [actual, optimal]

    crimes = []
    by_id = {s.id: s for s in stops}
    for hub in ("HA", "HB"):
        for _ in range(40):
            dn, de = rng.normal(0.0, 40.0, size=2)
            crimes.append(CrimeRecord(*_offset(by_id[hub].lat, by_id[hub].lon, dn, de), CrimeType.ROBBERY,
                                      CRIME_EPOCH + timedelta(minutes=int(rng.integers(0, 525_600)))))
    return Scenario(network, tuple(lines), tuple(schedules), tuple(itineraries), tuple(crimes))
