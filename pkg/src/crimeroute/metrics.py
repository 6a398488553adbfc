"""Quality and safety indicators computed from event logs and crime records."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .engine import Event, EventKind, SimulationReport
from .model import CrimeRecord, PassengerItinerary, SimConfig, Stop, TransitNetwork, Variant
from .router import extract_transfer_stops

EARTH_RADIUS_M = 6_371_000.0
LOW_MAX = 20
MID_MAX = 60
DEFAULT_THRESHOLD = 10


class InsufficientDataError(ValueError):
    pass


class VariantMismatchError(ValueError):
    pass


# --------------------------------------------------------------------------- waiting


class WaitSample(NamedTuple):
    passenger_id: str
    leg: int
    ready_clock: int
    board_clock: int

    @property
    def wait_s(self) -> int:
        return self.board_clock - self.ready_clock


@dataclass(frozen=True)
class WaitingTimes:
    samples: tuple[WaitSample, ...]
    served: int
    unserved: int

    def by_bin(self, bin_s: int = 3600) -> list[tuple[int, int, float]]:
        """``(bin_start_s, n, mean_wait_s)`` rows, binned by the clock the wait began."""
        groups: dict[int, list[int]] = defaultdict(list)
        for s in self.samples:
            groups[(s.ready_clock // bin_s) * bin_s].append(s.wait_s)
        return [(b, len(w), sum(w) / len(w)) for b, w in sorted(groups.items())]

    def mean_in_window(self, window: tuple[int, int]) -> float | None:
        lo, hi = window
        w = [s.wait_s for s in self.samples if lo <= s.ready_clock < hi]
        return sum(w) / len(w) if w else None


def waiting_times(events: Iterable[Event]) -> WaitingTimes:
    """One sample per boarding: board clock minus appearance (first leg) or previous alighting."""
    appeared: dict[str, int] = {}
    alighted: dict[tuple[str, int], int] = {}
    samples = []
    for e in events:
        if e.kind is EventKind.APPEAR:
            appeared[e.subject] = int(e.fields()["at"])
        elif e.kind is EventKind.ALIGHT:
            f = e.fields()
            if f.get("stranded") != "1":
                alighted[(e.subject, int(f["leg"]))] = e.clock_s
        elif e.kind is EventKind.BOARD:
            leg = int(e.fields()["leg"])
            ready = appeared[e.subject] if leg == 0 else alighted[(e.subject, leg - 1)]
            samples.append(WaitSample(e.subject, leg, ready, e.clock_s))
    served = len({s.passenger_id for s in samples})
    return WaitingTimes(tuple(samples), served, len(appeared) - served)


# --------------------------------------------------------------------------- occupancy


def occupancy_bucket(onboard: int) -> str:
    if onboard <= LOW_MAX:
        return "LOW"
    if onboard <= MID_MAX:
        return "MID"
    return "HIGH"


@dataclass(frozen=True)
class OccupancyHistogram:
    clocks: tuple[int, ...]
    low: tuple[int, ...]
    mid: tuple[int, ...]
    high: tuple[int, ...]
    active: tuple[int, ...]

    def rows(self) -> list[tuple[int, int, int, int]]:
        return list(zip(self.clocks, self.low, self.mid, self.high))

    def mean_share(self, bucket: str, window: tuple[int, int] | None = None) -> float | None:
        col = {"LOW": self.low, "MID": self.mid, "HIGH": self.high}[bucket]
        num = den = 0
        for c, n, a in zip(self.clocks, col, self.active):
            if window is None or window[0] <= c < window[1]:
                num += n
                den += a
        return num / den if den else None


def snapshot_counts(event: Event) -> dict[str, int]:
    return {k: int(v) for k, v in event.fields().items()}


def occupancy_histogram(events: Iterable[Event]) -> OccupancyHistogram:
    clocks, low, mid, high, active = [], [], [], [], []
    for e in events:
        if e.kind is not EventKind.SNAPSHOT:
            continue
        counts = {"LOW": 0, "MID": 0, "HIGH": 0}
        per_bus = snapshot_counts(e)
        for n in per_bus.values():
            counts[occupancy_bucket(n)] += 1
        clocks.append(e.clock_s)
        low.append(counts["LOW"])
        mid.append(counts["MID"])
        high.append(counts["HIGH"])
        active.append(len(per_bus))
    return OccupancyHistogram(tuple(clocks), tuple(low), tuple(mid), tuple(high), tuple(active))


# --------------------------------------------------------------------------- crime proximity


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in metres; accepts scalars or numpy arrays."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dp / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(a, 1.0)))


def _coords(crimes: Sequence[CrimeRecord]) -> tuple[np.ndarray, np.ndarray]:
    lat = np.fromiter((c.lat for c in crimes), dtype=float, count=len(crimes))
    lon = np.fromiter((c.lon for c in crimes), dtype=float, count=len(crimes))
    return lat, lon


def crimes_near_stop(stop: Stop, crimes: Sequence[CrimeRecord], radius_m: float) -> int:
    if radius_m <= 0:
        raise ValueError("radius_m must be positive")
    if not crimes:
        return 0
    lat, lon = _coords(crimes)
    return int(np.count_nonzero(haversine_m(stop.lat, stop.lon, lat, lon) <= radius_m))


def crimes_per_stop(stops: Sequence[Stop], crimes: Sequence[CrimeRecord], radius_m: float) -> dict[str, int]:
    """Crime counts within ``radius_m`` of every stop (chunked all-pairs join)."""
    if radius_m <= 0:
        raise ValueError("radius_m must be positive")
    if not crimes:
        return {s.id: 0 for s in stops}
    lat, lon = _coords(crimes)
    out: dict[str, int] = {}
    chunk = max(1, 2_000_000 // max(1, len(crimes)))
    for i in range(0, len(stops), chunk):
        block = stops[i:i + chunk]
        slat = np.array([s.lat for s in block])[:, None]
        slon = np.array([s.lon for s in block])[:, None]
        counts = np.count_nonzero(haversine_m(slat, slon, lat[None, :], lon[None, :]) <= radius_m, axis=1)
        out.update((s.id, int(n)) for s, n in zip(block, counts))
    return out


@dataclass(frozen=True)
class StopCrimeProfile:
    stop_id: str
    crime_count: int
    users_on_site: int

    @property
    def rate(self) -> float | None:
        """Crimes per transferring user; ``None`` when nobody transferred here."""
        return self.crime_count / self.users_on_site if self.users_on_site else None


def crime_rate_at_stop(stop: Stop, crimes: Sequence[CrimeRecord], users_on_site: int, radius_m: float) -> float | None:
    return StopCrimeProfile(stop.id, crimes_near_stop(stop, crimes, radius_m), users_on_site).rate


def transfer_users(events: Iterable[Event], window: tuple[int, int] | None = None) -> dict[str, set[str]]:
    """Distinct riders alighting to transfer at each stop within ``window``."""
    users: dict[str, set[str]] = defaultdict(set)
    for e in events:
        if e.kind is not EventKind.ALIGHT:
            continue
        if window is not None and not window[0] <= e.clock_s < window[1]:
            continue
        f = e.fields()
        if f["final"] == "0" and f.get("stranded") != "1":
            users[f["stop"]].add(e.subject)
    return dict(users)


def transfer_crime_profiles(
    events: Iterable[Event],
    network: TransitNetwork,
    crimes: Sequence[CrimeRecord],
    radius_m: float,
    window: tuple[int, int] | None = None,
    crime_counts: dict[str, int] | None = None,
) -> list[StopCrimeProfile]:
    users = transfer_users(events, window)
    stops = [network.stop_by_id[s] for s in sorted(users)]
    counts = crime_counts if crime_counts is not None else crimes_per_stop(stops, crimes, radius_m)
    return [StopCrimeProfile(s.id, counts[s.id], len(users[s.id])) for s in stops]


def mean_rate(profiles: Iterable[StopCrimeProfile]) -> float | None:
    rates = [p.rate for p in profiles if p.rate is not None]
    return sum(rates) / len(rates) if rates else None


def transfer_crime_exposure(
    itineraries: Iterable[PassengerItinerary],
    network: TransitNetwork,
    crimes: Sequence[CrimeRecord],
    radius_m: float,
    threshold: int = DEFAULT_THRESHOLD,
    crime_counts: dict[str, int] | None = None,
) -> dict[Variant, float]:
    """Fraction of transfer occurrences whose stop has more than ``threshold`` nearby crimes.

    Counted per occurrence, not per unique stop; a variant with no transfers scores 0.0.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    transfers: dict[Variant, list[str]] = {v: [] for v in Variant}
    for it in itineraries:
        transfers[it.variant].extend(extract_transfer_stops(it))
    if crime_counts is None:
        needed = sorted({s for stops in transfers.values() for s in stops})
        crime_counts = crimes_per_stop([network.stop_by_id[s] for s in needed], crimes, radius_m)
    out = {}
    for v, stops in transfers.items():
        hot = sum(1 for s in stops if crime_counts[s] > threshold)
        out[v] = hot / len(stops) if stops else 0.0
    return out


# --------------------------------------------------------------------------- power law


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float  # pdf ~ x**(-alpha); the reported log-log slope is -alpha
    xmin: float
    ks: float
    n_tail: int


def fit_power_law(counts: Iterable[float], min_tail: int = 10) -> PowerLawFit:
    """Continuous maximum-likelihood power-law fit with KS-selected ``xmin``.

    For each candidate ``xmin`` among the observed values the exponent is
    ``1 + n / sum(ln(x / xmin))`` over the ``n`` samples at or above it; the
    candidate with the smallest Kolmogorov-Smirnov distance wins.
    """
    x = np.asarray([c for c in counts if c > 0], dtype=float)
    u, mult = np.unique(x, return_counts=True)
    if len(u) < 10:
        raise InsufficientDataError(f"need at least 10 distinct positive values, got {len(u)}")
    logu = np.log(u)
    # samples at or above u[j], and the sum of their logs
    tail_n = np.cumsum(mult[::-1])[::-1]
    tail_log = np.cumsum((mult * logu)[::-1])[::-1]
    cum = np.cumsum(mult)

    best: PowerLawFit | None = None
    for j in range(len(u)):
        m = int(tail_n[j])
        if m < min_tail:
            break
        denom = tail_log[j] - m * logu[j]
        if denom <= 0:
            continue
        alpha = 1.0 + m / denom
        seen = cum[j:] - (cum[j - 1] if j else 0)
        upto = seen / m  # ECDF at each distinct tail value
        below = (seen - mult[j:]) / m  # ECDF just before it
        model = -np.expm1((1.0 - alpha) * (logu[j:] - logu[j]))
        d = float(max(np.max(np.abs(upto - model)), np.max(np.abs(below - model))))
        if best is None or d < best.ks:
            best = PowerLawFit(float(alpha), float(u[j]), d, m)
    if best is None:
        raise InsufficientDataError("no candidate xmin leaves a usable tail")
    return best


# --------------------------------------------------------------------------- comparison


@dataclass(frozen=True)
class VariantSummary:
    variant: Variant
    occupancy: OccupancyHistogram
    waiting: WaitingTimes
    waiting_by_bin: tuple[tuple[int, int, float], ...]
    mean_window_wait_s: float | None
    transfer_profiles: tuple[StopCrimeProfile, ...]
    mean_transfer_rate: float | None
    exposure: float | None


@dataclass(frozen=True)
class ComparisonReport:
    actual: VariantSummary
    optimal: VariantSummary
    crimes_per_stop: dict[str, int]
    power_law: PowerLawFit | None
    power_law_status: str
    radius_m: float
    threshold: int
    window: tuple[int, int]

    def scalars(self, s: VariantSummary) -> dict[str, float | None]:
        return {
            "mean_window_wait_s": s.mean_window_wait_s,
            "served": float(s.waiting.served),
            "unserved": float(s.waiting.unserved),
            "mean_transfer_rate": s.mean_transfer_rate,
            "transfer_exposure": s.exposure,
            "share_low": s.occupancy.mean_share("LOW", self.window),
            "share_mid": s.occupancy.mean_share("MID", self.window),
            "share_high": s.occupancy.mean_share("HIGH", self.window),
        }

    def deltas(self) -> dict[str, float | None]:
        """OPTIMAL minus ACTUAL for each scalar indicator (``None`` if either side is undefined)."""
        a, o = self.scalars(self.actual), self.scalars(self.optimal)
        return {k: (None if a[k] is None or o[k] is None else o[k] - a[k]) for k in a}


def summarize_variant(
    report: SimulationReport,
    network: TransitNetwork,
    crimes: Sequence[CrimeRecord],
    config: SimConfig,
    crime_counts: dict[str, int],
    itineraries: Sequence[PassengerItinerary] | None = None,
    threshold: int = DEFAULT_THRESHOLD,
) -> VariantSummary:
    waits = waiting_times(report.events)
    profiles = transfer_crime_profiles(report.events, network, crimes, config.crime_radius_m,
                                       config.report_window, crime_counts)
    exposure = None
    if itineraries is not None:
        mine = [it for it in itineraries if it.variant == report.variant]
        exposure = transfer_crime_exposure(mine, network, crimes, config.crime_radius_m, threshold,
                                           crime_counts)[report.variant]
    return VariantSummary(
        report.variant,
        occupancy_histogram(report.events),
        waits,
        tuple(waits.by_bin(config.wait_bin_s)),
        waits.mean_in_window(config.report_window),
        tuple(profiles),
        mean_rate(profiles),
        exposure,
    )


def compare_scenarios(
    report_actual: SimulationReport,
    report_optimal: SimulationReport,
    network: TransitNetwork,
    crimes: Sequence[CrimeRecord],
    config: SimConfig | None = None,
    itineraries: Sequence[PassengerItinerary] | None = None,
    threshold: int = DEFAULT_THRESHOLD,
) -> ComparisonReport:
    config = config or SimConfig()
    if report_actual.variant is not Variant.ACTUAL or report_optimal.variant is not Variant.OPTIMAL:
        raise VariantMismatchError(
            f"expected (actual, optimal) reports, got ({report_actual.variant.value}, {report_optimal.variant.value})"
        )
    counts = crimes_per_stop(network.stops, crimes, config.crime_radius_m)
    try:
        fit, status = fit_power_law(counts.values()), "ok"
    except InsufficientDataError as exc:
        fit, status = None, f"insufficient-data: {exc}"
    args = (network, crimes, config, counts, itineraries, threshold)
    return ComparisonReport(
        summarize_variant(report_actual, *args),
        summarize_variant(report_optimal, *args),
        counts,
        fit,
        status,
        config.crime_radius_m,
        threshold,
        config.report_window,
    )
