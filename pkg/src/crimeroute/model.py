"""Core value types for the bus network, schedules, riders and crimes.

All clocks are integer seconds since midnight of simulation day 0, so the
default run starts at 02:00 (7200) and ends at 02:00 of the next day (93600).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import datetime
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

DEFAULT_CAPACITY = 80
TICK_S = 60

# characters reserved by the file formats and event payload encoding
_RESERVED_ID_CHARS = frozenset(",;=\n\r\"")


class Variant(str, enum.Enum):
    ACTUAL = "actual"
    OPTIMAL = "optimal"


class CrimeType(str, enum.Enum):
    THEFT = "theft"
    ROBBERY = "robbery"
    BURGLARY = "burglary"


@dataclass(frozen=True)
class Stop:
    id: str
    lat: float
    lon: float


@dataclass(frozen=True)
class TimeEdge:
    """Directed stop-to-stop link with Gaussian traversal time (seconds)."""

    from_stop: str
    to_stop: str
    mean_s: float
    std_s: float


@dataclass(frozen=True)
class TransitNetwork:
    stops: tuple[Stop, ...]
    edges: tuple[TimeEdge, ...]

    @cached_property
    def stop_by_id(self) -> dict[str, Stop]:
        return {s.id: s for s in self.stops}

    @cached_property
    def edge_by_pair(self) -> dict[tuple[str, str], TimeEdge]:
        return {(e.from_stop, e.to_stop): e for e in self.edges}

    def edge(self, a: str, b: str) -> TimeEdge:
        return self.edge_by_pair[(a, b)]


@dataclass(frozen=True)
class LinePlan:
    line_id: str
    stop_sequence: tuple[str, ...]

    @cached_property
    def position(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.stop_sequence)}


class Trip(NamedTuple):
    line_id: str
    departure_s: int


@dataclass(frozen=True)
class VehicleSchedule:
    vehicle_id: str
    trips: tuple[Trip, ...]
    capacity: int = DEFAULT_CAPACITY


class Leg(NamedTuple):
    line_id: str
    board_stop: str
    alight_stop: str


@dataclass(frozen=True)
class PassengerItinerary:
    passenger_id: str
    legs: tuple[Leg, ...]
    appearance_time: int
    variant: Variant = Variant.ACTUAL

    @property
    def origin(self) -> str:
        return self.legs[0].board_stop

    @property
    def destination(self) -> str:
        return self.legs[-1].alight_stop


@dataclass(frozen=True)
class CrimeRecord:
    lat: float
    lon: float
    crime_type: CrimeType
    occurred_at: datetime


def parse_hhmm(text: str) -> int:
    """``"05:30"`` -> 19800; a ``+1d`` suffix adds a day."""
    text = text.strip()
    day = 0
    if text.endswith("+1d"):
        day, text = 1, text[:-3]
    hh, mm = text.split(":")
    h, m = int(hh), int(mm)
    if not (0 <= h <= 24 and 0 <= m < 60):
        raise ValueError(f"bad clock {text!r}")
    return day * 86400 + h * 3600 + m * 60


def format_clock(clock_s: int) -> str:
    day, rem = divmod(int(clock_s), 86400)
    h, rem = divmod(rem, 3600)
    m, s = divmod(rem, 60)
    out = f"{h:02d}:{m:02d}" + (f":{s:02d}" if s else "")
    return out + (f"+{day}d" if day else "")


@dataclass(frozen=True)
class SimConfig:
    start_clock: int = 2 * 3600
    end_clock: int = 26 * 3600
    tick_s: int = TICK_S
    crime_radius_m: float = 200.0
    rng_seed: int = 0
    # analysis window (peak hours by default) and waiting-time bin width
    report_window: tuple[int, int] = (5 * 3600, 8 * 3600)
    wait_bin_s: int = 3600
    transfer_penalty_s: float = 0.0

    def __post_init__(self) -> None:
        if self.tick_s != TICK_S:
            raise ValueError(f"tick_s must be {TICK_S}, got {self.tick_s}")
        if self.end_clock <= self.start_clock:
            raise ValueError("end_clock must be after start_clock")
        if self.crime_radius_m <= 0:
            raise ValueError("crime_radius_m must be positive")
        lo, hi = self.report_window
        if hi <= lo:
            raise ValueError("report_window must be non-empty")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class Violation:
    entity: str
    entity_id: str
    message: str

    def __str__(self) -> str:
        return f"{self.entity} {self.entity_id!r}: {self.message}"


def _bad_id(value: str) -> bool:
    return not value or any(c in _RESERVED_ID_CHARS for c in value)


def validate_scenario(
    network: TransitNetwork,
    lines: Iterable[LinePlan],
    schedules: Iterable[VehicleSchedule],
    itineraries: Iterable[PassengerItinerary],
) -> list[Violation]:
    """Collect every invariant violation; an empty list means the scenario is valid."""
    out: list[Violation] = []
    add = lambda *a: out.append(Violation(*a))  # noqa: E731

    stop_ids: set[str] = set()
    for s in network.stops:
        if _bad_id(s.id):
            add("stop", s.id, "id is empty or contains a reserved character")
        if s.id in stop_ids:
            add("stop", s.id, "duplicate stop id")
        stop_ids.add(s.id)
        if not -90.0 <= s.lat <= 90.0:
            add("stop", s.id, f"latitude {s.lat} out of range")
        if not -180.0 <= s.lon <= 180.0:
            add("stop", s.id, f"longitude {s.lon} out of range")

    pairs: set[tuple[str, str]] = set()
    for e in network.edges:
        key = f"{e.from_stop}->{e.to_stop}"
        if not e.mean_s > 0:
            add("edge", key, f"mean_s must be > 0, got {e.mean_s}")
        if not e.std_s >= 0:
            add("edge", key, f"std_s must be >= 0, got {e.std_s}")
        for end in (e.from_stop, e.to_stop):
            if end not in stop_ids:
                add("edge", key, f"unknown stop {end!r}")
        if e.from_stop == e.to_stop:
            add("edge", key, "self-loop")
        if (e.from_stop, e.to_stop) in pairs:
            add("edge", key, "duplicate edge")
        pairs.add((e.from_stop, e.to_stop))

    line_map: dict[str, LinePlan] = {}
    for ln in lines:
        if _bad_id(ln.line_id):
            add("line", ln.line_id, "id is empty or contains a reserved character")
        if ln.line_id in line_map:
            add("line", ln.line_id, "duplicate line id")
        line_map[ln.line_id] = ln
        seq = ln.stop_sequence
        if len(seq) < 2:
            add("line", ln.line_id, "needs at least two stops")
        if len(set(seq)) != len(seq):
            add("line", ln.line_id, "stop sequence repeats a stop")
        for s in seq:
            if s not in stop_ids:
                add("line", ln.line_id, f"unknown stop {s!r}")
        for a, b in zip(seq, seq[1:]):
            if (a, b) not in pairs:
                add("line", ln.line_id, f"no time edge for stop pair ({a}, {b})")

    vehicle_ids: set[str] = set()
    for v in schedules:
        if _bad_id(v.vehicle_id):
            add("vehicle", v.vehicle_id, "id is empty or contains a reserved character")
        if v.vehicle_id in vehicle_ids:
            add("vehicle", v.vehicle_id, "duplicate vehicle id")
        vehicle_ids.add(v.vehicle_id)
        if v.capacity <= 0:
            add("vehicle", v.vehicle_id, f"capacity must be > 0, got {v.capacity}")
        if not v.trips:
            add("vehicle", v.vehicle_id, "has no trips")
        for t in v.trips:
            if t.line_id not in line_map:
                add("vehicle", v.vehicle_id, f"trip on unknown line {t.line_id!r}")
        deps = [t.departure_s for t in v.trips]
        if deps != sorted(deps):
            add("vehicle", v.vehicle_id, "trips not ordered by departure")

    seen: set[tuple[str, Variant]] = set()
    for it in itineraries:
        pid = it.passenger_id
        if _bad_id(pid):
            add("passenger", pid, "id is empty or contains a reserved character")
        if (pid, it.variant) in seen:
            add("passenger", pid, f"duplicate {it.variant.value} itinerary")
        seen.add((pid, it.variant))
        if not it.legs:
            add("passenger", pid, "itinerary has no legs")
            continue
        for k, leg in enumerate(it.legs):
            ln = line_map.get(leg.line_id)
            if ln is None:
                add("passenger", pid, f"leg {k} uses unknown line {leg.line_id!r}")
                continue
            bi = ln.position.get(leg.board_stop)
            ai = ln.position.get(leg.alight_stop)
            if bi is None or ai is None:
                add("passenger", pid, f"leg {k} stop not served by line {leg.line_id!r}")
            elif bi >= ai:
                add("passenger", pid, f"leg {k} boards at or after its alighting stop")
        for k in range(len(it.legs) - 1):
            if it.legs[k].alight_stop != it.legs[k + 1].board_stop:
                add("passenger", pid, f"leg {k + 1} does not board where leg {k} alights")
    return out


@dataclass(frozen=True)
class Scenario:
    network: TransitNetwork
    lines: tuple[LinePlan, ...] = ()
    schedules: tuple[VehicleSchedule, ...] = ()
    itineraries: tuple[PassengerItinerary, ...] = ()
    crimes: tuple[CrimeRecord, ...] = ()

    @cached_property
    def line_by_id(self) -> dict[str, LinePlan]:
        return {ln.line_id: ln for ln in self.lines}

    def validate(self) -> list[Violation]:
        return validate_scenario(self.network, self.lines, self.schedules, self.itineraries)

    def itineraries_for(self, variant: Variant) -> tuple[PassengerItinerary, ...]:
        return tuple(it for it in self.itineraries if it.variant == variant)

    def with_itineraries(self, itineraries: Sequence[PassengerItinerary]) -> "Scenario":
        return Scenario(self.network, self.lines, self.schedules, tuple(itineraries), self.crimes)


class ScenarioValidationError(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        lines = "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(f"scenario has {len(self.violations)} violation(s):\n{lines}")


def crime_type_filter(crimes: Iterable[CrimeRecord], types: Iterable[CrimeType | str]) -> tuple[CrimeRecord, ...]:
    wanted = {CrimeType(t) for t in types}
    return tuple(c for c in crimes if c.crime_type in wanted)

