"""Plain-text scenario and report files.

A scenario directory holds six comma-delimited files, each with a header row:

===================  ==========================================================
stops.csv            stop_id,lat,lon
edges.csv            from_stop,to_stop,mean_s,std_s
lines.csv            line_id,position,stop_id          (one row per line stop)
schedules.csv        vehicle_id,capacity,trip_index,line_id,departure_s
itineraries.csv      passenger_id,variant,appearance_s,leg_index,line_id,board_stop,alight_stop
crimes.csv           lat,lon,crime_type,occurred_at    (ISO 8601 timestamp)
===================  ==========================================================

Clocks are integer seconds since midnight of day 0.  Coordinates are written
with at least seven fractional digits.
"""

from __future__ import annotations

import csv
import io
import math
from collections import OrderedDict
from datetime import datetime
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .engine import Event, EventKind, PassengerOutcome, Phase, SimulationReport
from .metrics import ComparisonReport, VariantSummary, occupancy_histogram, waiting_times
from .model import (
    CrimeRecord,
    CrimeType,
    Leg,
    LinePlan,
    PassengerItinerary,
    Scenario,
    ScenarioValidationError,
    Stop,
    TimeEdge,
    TransitNetwork,
    Trip,
    Variant,
    VehicleSchedule,
)

SCENARIO_FILES = {
    "stops": ("stop_id", "lat", "lon"),
    "edges": ("from_stop", "to_stop", "mean_s", "std_s"),
    "lines": ("line_id", "position", "stop_id"),
    "schedules": ("vehicle_id", "capacity", "trip_index", "line_id", "departure_s"),
    "itineraries": ("passenger_id", "variant", "appearance_s", "leg_index", "line_id", "board_stop", "alight_stop"),
    "crimes": ("lat", "lon", "crime_type", "occurred_at"),
}
EVENT_COLUMNS = ("clock_s", "kind", "subject", "payload")
UNDEFINED = "UNDEFINED"


class ScenarioFileMissing(FileNotFoundError):
    def __init__(self, name: str, path: Path):
        self.name = name
        super().__init__(f"missing {name} file: {path}")


class MalformedRecordError(ValueError):
    def __init__(self, path: Path, line_no: int, reason: str):
        self.path = Path(path)
        self.line_no = line_no
        super().__init__(f"{self.path.name}:{line_no}: {reason}")


def fmt_coord(x: float) -> str:
    s = f"{x:.7f}"
    return s if float(s) == x else repr(float(x))


def fmt_float(x: float | None) -> str:
    if x is None:
        return UNDEFINED
    return repr(float(x))


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _read_rows(path: Path, header: Sequence[str]) -> Iterable[tuple[int, list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(first) != tuple(header):
            raise MalformedRecordError(path, 1, f"expected header {','.join(header)}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRecordError(path, reader.line_num, f"expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, row


def _parse(path: Path, line_no: int, fn: Callable, value: str, what: str):
    try:
        return fn(value)
    except (ValueError, KeyError) as exc:
        raise MalformedRecordError(path, line_no, f"bad {what} {value!r}") from exc


def _coord(path: Path, line_no: int, lat_s: str, lon_s: str) -> tuple[float, float]:
    lat = _parse(path, line_no, float, lat_s, "latitude")
    lon = _parse(path, line_no, float, lon_s, "longitude")
    if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
        raise MalformedRecordError(path, line_no, f"latitude {lat} out of range")
    if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
        raise MalformedRecordError(path, line_no, f"longitude {lon} out of range")
    return lat, lon


# --------------------------------------------------------------------------- scenarios


def write_scenario(scenario: Scenario, directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    net = scenario.network
    write_rows(d / "stops.csv", SCENARIO_FILES["stops"],
               ((s.id, fmt_coord(s.lat), fmt_coord(s.lon)) for s in net.stops))
    write_rows(d / "edges.csv", SCENARIO_FILES["edges"],
               ((e.from_stop, e.to_stop, fmt_float(e.mean_s), fmt_float(e.std_s)) for e in net.edges))
    write_rows(d / "lines.csv", SCENARIO_FILES["lines"],
               ((ln.line_id, i, s) for ln in scenario.lines for i, s in enumerate(ln.stop_sequence)))
    write_rows(d / "schedules.csv", SCENARIO_FILES["schedules"],
               ((v.vehicle_id, v.capacity, k, t.line_id, t.departure_s)
                for v in scenario.schedules for k, t in enumerate(v.trips)))
    write_itineraries(scenario.itineraries, d / "itineraries.csv")
    write_rows(d / "crimes.csv", SCENARIO_FILES["crimes"],
               ((fmt_coord(c.lat), fmt_coord(c.lon), c.crime_type.value, c.occurred_at.isoformat())
                for c in scenario.crimes))
    return d


def _path(d: Path, name: str) -> Path:
    p = d / f"{name}.csv"
    if not p.is_file():
        raise ScenarioFileMissing(name, p)
    return p


def load_crimes(path: str | Path, types: Iterable[CrimeType | str] | None = None) -> tuple[CrimeRecord, ...]:
    """Read a crimes file, optionally keeping only some crime types."""
    path = Path(path)
    wanted = None if types is None else {CrimeType(t) for t in types}
    out = []
    for n, (lat_s, lon_s, kind, when) in _read_rows(path, SCENARIO_FILES["crimes"]):
        lat, lon = _coord(path, n, lat_s, lon_s)
        crime = CrimeRecord(lat, lon, _parse(path, n, CrimeType, kind, "crime_type"),
                            _parse(path, n, datetime.fromisoformat, when, "timestamp"))
        if wanted is None or crime.crime_type in wanted:
            out.append(crime)
    return tuple(out)


def load_stops(path: str | Path) -> tuple[Stop, ...]:
    path = Path(path)
    return tuple(Stop(sid, *_coord(path, n, lat, lon)) for n, (sid, lat, lon) in _read_rows(path, SCENARIO_FILES["stops"]))


def _contiguous(path: Path, n: int, got: int, expected: int, what: str) -> None:
    if got != expected:
        raise MalformedRecordError(path, n, f"{what} {got} out of order (expected {expected})")


def load_scenario(directory: str | Path, crime_types: Iterable[CrimeType | str] | None = None,
                  validate: bool = True) -> Scenario:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"scenario directory not found: {d}")
    paths = {name: _path(d, name) for name in SCENARIO_FILES}

    stops = load_stops(paths["stops"])

    p = paths["edges"]
    edges = tuple(
        TimeEdge(a, b, _parse(p, n, float, mu, "mean_s"), _parse(p, n, float, sd, "std_s"))
        for n, (a, b, mu, sd) in _read_rows(p, SCENARIO_FILES["edges"])
    )

    p = paths["lines"]
    seqs: OrderedDict[str, list[str]] = OrderedDict()
    for n, (lid, pos, sid) in _read_rows(p, SCENARIO_FILES["lines"]):
        seq = seqs.setdefault(lid, [])
        _contiguous(p, n, _parse(p, n, int, pos, "position"), len(seq), "position")
        seq.append(sid)
    lines = tuple(LinePlan(lid, tuple(seq)) for lid, seq in seqs.items())

    p = paths["schedules"]
    vehicles: OrderedDict[str, tuple[int, list[Trip]]] = OrderedDict()
    for n, (vid, cap, k, lid, dep) in _read_rows(p, SCENARIO_FILES["schedules"]):
        capacity = _parse(p, n, int, cap, "capacity")
        entry = vehicles.setdefault(vid, (capacity, []))
        if entry[0] != capacity:
            raise MalformedRecordError(p, n, f"capacity differs from earlier rows of vehicle {vid!r}")
        _contiguous(p, n, _parse(p, n, int, k, "trip_index"), len(entry[1]), "trip_index")
        entry[1].append(Trip(lid, _parse(p, n, int, dep, "departure_s")))
    schedules = tuple(VehicleSchedule(vid, tuple(trips), cap) for vid, (cap, trips) in vehicles.items())

    itineraries = read_itineraries(paths["itineraries"])

    scenario = Scenario(TransitNetwork(stops, edges), lines, schedules, itineraries,
                        load_crimes(paths["crimes"], crime_types))
    if validate:
        violations = scenario.validate()
        if violations:
            raise ScenarioValidationError(violations)
    return scenario


# --------------------------------------------------------------------------- simulation reports


def events_to_csv(events: Iterable[Event]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    w.writerows((e.clock_s, e.kind.value, e.subject, e.payload) for e in events)
    return buf.getvalue()


def write_report(report: SimulationReport, directory: str | Path) -> Path:
    """Write the event log, final rider states and plot-ready indicator files."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "events.csv").write_text(events_to_csv(report.events), encoding="utf-8")
    write_rows(d / "meta.csv", ("key", "value"), [("variant", report.variant.value), ("seed", report.seed)])
    write_rows(d / "passengers.csv", ("passenger_id", "phase", "leg_cursor"),
               ((p.passenger_id, p.phase.value, p.leg_cursor) for p in report.passengers))
    waits = waiting_times(report.events)
    write_rows(d / "waiting.csv", ("wait_s",), ((s.wait_s,) for s in waits.samples))
    write_rows(d / "occupancy.csv", ("clock_s", "low", "mid", "high"), occupancy_histogram(report.events).rows())
    return d


def read_events(path: str | Path) -> tuple[Event, ...]:
    path = Path(path)
    return tuple(
        Event(_parse(path, n, int, c, "clock_s"), _parse(path, n, EventKind, k, "kind"), s, pl)
        for n, (c, k, s, pl) in _read_rows(path, EVENT_COLUMNS)
    )


def read_report(directory: str | Path) -> SimulationReport:
    d = Path(directory)
    for name in ("events", "meta", "passengers"):
        _path(d, name)
    meta = {k: v for _, (k, v) in _read_rows(d / "meta.csv", ("key", "value"))}
    p = d / "passengers.csv"
    outcomes = tuple(
        PassengerOutcome(pid, _parse(p, n, Phase, ph, "phase"), _parse(p, n, int, cur, "leg_cursor"))
        for n, (pid, ph, cur) in _read_rows(p, ("passenger_id", "phase", "leg_cursor"))
    )
    return SimulationReport(Variant(meta["variant"]), int(meta["seed"]), read_events(d / "events.csv"), outcomes)


def write_itineraries(itineraries: Iterable[PassengerItinerary], path: str | Path) -> None:
    write_rows(Path(path), SCENARIO_FILES["itineraries"],
               ((it.passenger_id, it.variant.value, it.appearance_time, k, leg.line_id, leg.board_stop, leg.alight_stop)
                for it in itineraries for k, leg in enumerate(it.legs)))


def read_itineraries(path: str | Path) -> tuple[PassengerItinerary, ...]:
    p = Path(path)
    riders: OrderedDict[tuple[str, Variant], tuple[int, list[Leg]]] = OrderedDict()
    for n, (pid, var, app, k, lid, b, a) in _read_rows(p, SCENARIO_FILES["itineraries"]):
        key = (pid, _parse(p, n, Variant, var, "variant"))
        appearance = _parse(p, n, int, app, "appearance_s")
        entry = riders.setdefault(key, (appearance, []))
        if entry[0] != appearance:
            raise MalformedRecordError(p, n, f"appearance differs from earlier legs of passenger {pid!r}")
        _contiguous(p, n, _parse(p, n, int, k, "leg_index"), len(entry[1]), "leg_index")
        entry[1].append(Leg(lid, b, a))
    return tuple(PassengerItinerary(pid, tuple(legs), app, var) for (pid, var), (app, legs) in riders.items())


# --------------------------------------------------------------------------- comparison reports


def _write_variant(d: Path, s: VariantSummary) -> None:
    v = s.variant.value
    write_rows(d / f"occupancy_{v}.csv", ("clock_s", "low", "mid", "high"), s.occupancy.rows())
    write_rows(d / f"waiting_{v}.csv", ("bin_start_s", "n", "mean_wait_s"),
               ((b, n, fmt_float(m)) for b, n, m in s.waiting_by_bin))
    write_rows(d / f"transfer_crime_{v}.csv", ("stop_id", "crimes", "users", "rate"),
               ((p.stop_id, p.crime_count, p.users_on_site, fmt_float(p.rate)) for p in s.transfer_profiles))


def write_comparison(comp: ComparisonReport, directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    _write_variant(d, comp.actual)
    _write_variant(d, comp.optimal)
    fit = comp.power_law
    write_rows(d / "powerlaw.csv", ("status", "alpha", "xmin", "ks", "n_tail"),
               [(comp.power_law_status,
                 *((fmt_float(fit.alpha), fmt_float(fit.xmin), fmt_float(fit.ks), fit.n_tail) if fit
                   else (UNDEFINED,) * 4))])
    write_rows(d / "crimes_per_stop.csv", ("stop_id", "crimes"), sorted(comp.crimes_per_stop.items()))
    a, o, delta = comp.scalars(comp.actual), comp.scalars(comp.optimal), comp.deltas()
    write_rows(d / "summary.csv", ("metric", "actual", "optimal", "delta"),
               ((k, fmt_float(a[k]), fmt_float(o[k]), fmt_float(delta[k])) for k in a))
    return d


def read_table(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
