"""Tick-based bus network simulator.

One tick is one minute.  Each tick: riders whose appearance time has been
reached join their boarding queue, the dispatch event releases buses whose
next departure has been reached, the clock advances by the tick, and every
active bus spends a 60 s travel budget along its line.  Events produced while
moving are stamped with the clock at the end of the tick, so the log clock is
non-decreasing.
"""

from __future__ import annotations

import bisect
import enum
import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import (
    TICK_S,
    Leg,
    LinePlan,
    PassengerItinerary,
    Scenario,
    ScenarioValidationError,
    SimConfig,
    TimeEdge,
    Variant,
    VehicleSchedule,
)

MIN_EDGE_S = 1.0


class EventKind(str, enum.Enum):
    APPEAR = "APPEAR"
    DISPATCH = "DISPATCH"
    ARRIVE_STOP = "ARRIVE_STOP"
    BOARD = "BOARD"
    ALIGHT = "ALIGHT"
    TRIP_CHANGE = "TRIP_CHANGE"
    BUS_REMOVED = "BUS_REMOVED"
    SNAPSHOT = "SNAPSHOT"


class Event(NamedTuple):
    clock_s: int
    kind: EventKind
    subject: str
    payload: str = ""

    def fields(self) -> dict[str, str]:
        if not self.payload:
            return {}
        return dict(item.split("=", 1) for item in self.payload.split(";"))


def encode_payload(**values) -> str:
    return ";".join(f"{k}={v}" for k, v in values.items())


class Phase(str, enum.Enum):
    NOT_YET_APPEARED = "NOT_YET_APPEARED"
    WAITING = "WAITING"
    ONBOARD = "ONBOARD"
    ARRIVED = "ARRIVED"
    STRANDED = "STRANDED"


class BusStatus(enum.Enum):
    PENDING = "pending"  # first trip not yet dispatched
    RUNNING = "running"
    LAYOVER = "layover"  # repositioned at the next trip's first stop, waiting for departure
    REMOVED = "removed"


def vehicle_rng(seed: int, vehicle_id: str) -> np.random.Generator:
    """PCG64 stream for one vehicle, keyed by a stable hash of its id.

    Streams are independent of fleet composition, so adding or removing a
    vehicle leaves the travel times of the others untouched.
    """
    key = int.from_bytes(hashlib.blake2b(vehicle_id.encode(), digest_size=8).digest(), "little")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(key,))))


def sample_edge_time(edge: TimeEdge, rng: np.random.Generator) -> float:
    """Normal(mean_s, std_s) draw truncated below at 1 s; always consumes one normal."""
    z = rng.standard_normal()
    return max(MIN_EDGE_S, edge.mean_s + edge.std_s * float(z))


@dataclass(eq=False)
class PassengerState:
    passenger_id: str
    legs: tuple[Leg, ...]
    appearance_time: int
    leg_cursor: int = 0
    phase: Phase = Phase.NOT_YET_APPEARED
    ready_at: int = 0  # clock the rider started waiting for the current leg
    board_clocks: list[int] = field(default_factory=list)

    @property
    def leg(self) -> Leg:
        return self.legs[self.leg_cursor]


@dataclass(eq=False)
class BusState:
    vehicle_id: str
    schedule: VehicleSchedule
    rng: np.random.Generator
    status: BusStatus = BusStatus.PENDING
    trip_cursor: int = 0
    line: LinePlan | None = None
    stop_idx: int = 0
    remaining_edge_s: float = 0.0
    # passenger id -> alight stop, in boarding order
    onboard: dict[str, str] = field(default_factory=dict)

    @property
    def capacity(self) -> int:
        return self.schedule.capacity

    @property
    def current_stop(self) -> str:
        return self.line.stop_sequence[self.stop_idx]

    @property
    def next_stop(self) -> str | None:
        seq = self.line.stop_sequence
        return seq[self.stop_idx + 1] if self.stop_idx + 1 < len(seq) else None

    @property
    def active(self) -> bool:
        return self.status in (BusStatus.RUNNING, BusStatus.LAYOVER)


class PassengerOutcome(NamedTuple):
    passenger_id: str
    phase: Phase
    leg_cursor: int


@dataclass(frozen=True)
class SimulationReport:
    variant: Variant
    seed: int
    events: tuple[Event, ...]
    passengers: tuple[PassengerOutcome, ...]

    def events_of(self, *kinds: EventKind) -> list[Event]:
        return [e for e in self.events if e.kind in kinds]


class SimState:
    """Mutable world for one run; built by :func:`run_simulation`."""

    def __init__(self, scenario: Scenario, config: SimConfig, itineraries: tuple[PassengerItinerary, ...]):
        self.scenario = scenario
        self.config = config
        self.lines = scenario.line_by_id
        self.network = scenario.network
        self.log: list[Event] = []
        self.buses = [
            BusState(v.vehicle_id, v, vehicle_rng(config.rng_seed, v.vehicle_id))
            for v in sorted(scenario.schedules, key=lambda v: v.vehicle_id)
        ]
        self.passengers = {
            it.passenger_id: PassengerState(it.passenger_id, it.legs, it.appearance_time)
            for it in itineraries
        }
        self.pending = sorted(self.passengers.values(), key=lambda p: (p.appearance_time, p.passenger_id))
        self._next_pending = 0
        # (stop, line) -> [(ready_at, passenger_id)] kept sorted
        self.queues: dict[tuple[str, str], list[tuple[int, str]]] = {}

    def emit(self, clock: int, kind: EventKind, subject: str, payload: str = "") -> None:
        self.log.append(Event(clock, kind, subject, payload))

    def enqueue(self, p: PassengerState, ready_at: int) -> None:
        p.phase = Phase.WAITING
        p.ready_at = ready_at
        q = self.queues.setdefault((p.leg.board_stop, p.leg.line_id), [])
        bisect.insort(q, (ready_at, p.passenger_id))

    def activate_passengers(self, clock: int) -> None:
        while self._next_pending < len(self.pending) and self.pending[self._next_pending].appearance_time <= clock:
            p = self.pending[self._next_pending]
            self._next_pending += 1
            self.emit(clock, EventKind.APPEAR, p.passenger_id,
                      encode_payload(stop=p.legs[0].board_stop, at=p.appearance_time))
            self.enqueue(p, p.appearance_time)

    def sample(self, bus: BusState) -> float:
        a = bus.line.stop_sequence[bus.stop_idx]
        b = bus.line.stop_sequence[bus.stop_idx + 1]
        return sample_edge_time(self.network.edge(a, b), bus.rng)

    def snapshot(self, clock: int) -> None:
        counts = [f"{b.vehicle_id}={len(b.onboard)}" for b in self.buses if b.active]
        self.emit(clock, EventKind.SNAPSHOT, "", ";".join(counts))


def dispatch_step(sim: SimState, clock: int) -> list[BusState]:
    """Release every idle bus whose next departure is due, in vehicle id order."""
    released = []
    for bus in sim.buses:
        if bus.status not in (BusStatus.PENDING, BusStatus.LAYOVER):
            continue
        trip = bus.schedule.trips[bus.trip_cursor]
        if trip.departure_s > clock:
            continue
        bus.line = sim.lines[trip.line_id]
        bus.stop_idx = 0
        bus.status = BusStatus.RUNNING
        sim.emit(clock, EventKind.DISPATCH, bus.vehicle_id,
                 encode_payload(line=trip.line_id, trip=bus.trip_cursor, stop=bus.current_stop))
        process_stop_arrival(bus, bus.current_stop, sim, clock)
        bus.remaining_edge_s = sim.sample(bus)
        released.append(bus)
    return released


def move_bus(bus: BusState, sim: SimState, clock: int) -> None:
    """Spend one tick of travel budget; ``clock`` stamps any arrivals."""
    budget = float(TICK_S)
    while bus.status is BusStatus.RUNNING:
        if bus.remaining_edge_s > budget:
            bus.remaining_edge_s -= budget
            return
        budget -= bus.remaining_edge_s
        bus.remaining_edge_s = 0.0
        bus.stop_idx += 1
        stop = bus.current_stop
        sim.emit(clock, EventKind.ARRIVE_STOP, bus.vehicle_id, encode_payload(line=bus.line.line_id, stop=stop))
        process_stop_arrival(bus, stop, sim, clock)
        if bus.next_stop is None:
            chain_trips(bus, sim, clock)
            return
        bus.remaining_edge_s = sim.sample(bus)
        if budget <= 0.0:
            return


def process_stop_arrival(bus: BusState, stop: str, sim: SimState, clock: int) -> None:
    """Alight everyone ending a leg here, then board the queue in FIFO order up to capacity."""
    line_id = bus.line.line_id
    leaving = [pid for pid, dest in bus.onboard.items() if dest == stop] if bus.onboard else []
    for pid in leaving:
        del bus.onboard[pid]
        p = sim.passengers[pid]
        leg_no = p.leg_cursor
        final = leg_no == len(p.legs) - 1
        sim.emit(clock, EventKind.ALIGHT, pid,
                 encode_payload(vehicle=bus.vehicle_id, line=line_id, stop=stop, leg=leg_no, final=int(final)))
        if final:
            p.phase = Phase.ARRIVED
        else:
            p.leg_cursor += 1
            sim.enqueue(p, clock)

    q = sim.queues.get((stop, line_id))
    if not q:
        return
    room = bus.capacity - len(bus.onboard)
    if room <= 0:
        return
    boarding, q[:room] = q[:room], []
    for _, pid in boarding:
        p = sim.passengers[pid]
        p.phase = Phase.ONBOARD
        p.board_clocks.append(clock)
        bus.onboard[pid] = p.leg.alight_stop
        sim.emit(clock, EventKind.BOARD, pid,
                 encode_payload(vehicle=bus.vehicle_id, line=line_id, stop=stop, leg=p.leg_cursor))


def chain_trips(bus: BusState, sim: SimState, clock: int) -> None:
    """At the end of a trip: start the next one (possibly on another line) or retire the bus."""
    for pid in list(bus.onboard):
        # unreachable for validated scenarios: every leg ends at or before the final stop
        p = sim.passengers[pid]
        p.phase = Phase.STRANDED
        sim.emit(clock, EventKind.ALIGHT, pid,
                 encode_payload(vehicle=bus.vehicle_id, line=bus.line.line_id, stop=bus.current_stop,
                                leg=p.leg_cursor, final=0, stranded=1))
    stranded = len(bus.onboard)
    bus.onboard.clear()

    trips = bus.schedule.trips
    if bus.trip_cursor + 1 < len(trips):
        old = bus.line.line_id
        bus.trip_cursor += 1
        bus.line = sim.lines[trips[bus.trip_cursor].line_id]
        bus.stop_idx = 0
        bus.remaining_edge_s = 0.0
        bus.status = BusStatus.LAYOVER
        sim.emit(clock, EventKind.TRIP_CHANGE, bus.vehicle_id,
                 encode_payload(**{"from": old, "to": bus.line.line_id, "trip": bus.trip_cursor}))
    else:
        bus.status = BusStatus.REMOVED
        sim.emit(clock, EventKind.BUS_REMOVED, bus.vehicle_id, encode_payload(stranded=stranded))


def run_simulation(
    scenario: Scenario,
    config: SimConfig | None = None,
    variant: Variant = Variant.ACTUAL,
    itineraries: tuple[PassengerItinerary, ...] | None = None,
) -> SimulationReport:
    """Run the scenario from ``start_clock`` to ``end_clock``.

    Riders come from ``itineraries`` when given, otherwise from the scenario's
    itineraries of ``variant``.  Stops early once every bus has retired.
    """
    config = config or SimConfig()
    riders = scenario.itineraries_for(variant) if itineraries is None else tuple(itineraries)
    violations = Scenario(scenario.network, scenario.lines, scenario.schedules, riders).validate()
    if violations:
        raise ScenarioValidationError(violations)

    sim = SimState(scenario, config, riders)
    clock = config.start_clock
    while clock < config.end_clock:
        sim.activate_passengers(clock)
        dispatch_step(sim, clock)
        clock += TICK_S
        for bus in sim.buses:
            if bus.status is BusStatus.RUNNING:
                move_bus(bus, sim, clock)
        sim.snapshot(clock)
        if all(b.status is BusStatus.REMOVED for b in sim.buses):
            break

    outcomes = tuple(
        PassengerOutcome(p.passenger_id, p.phase, p.leg_cursor)
        for p in sorted(sim.passengers.values(), key=lambda p: p.passenger_id)
    )
    return SimulationReport(variant, config.rng_seed, tuple(sim.log), outcomes)
