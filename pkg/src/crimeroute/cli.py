"""Command line: ``generate`` scenarios, ``simulate`` variants, ``analyze`` crime exposure."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .engine import run_simulation
from .metrics import (
    DEFAULT_THRESHOLD,
    InsufficientDataError,
    compare_scenarios,
    crimes_per_stop,
    fit_power_law,
    transfer_crime_exposure,
    transfer_crime_profiles,
)
from .model import Scenario, ScenarioValidationError, SimConfig, TransitNetwork, Variant, parse_hhmm
from .router import build_routing_graph, route_all
from .scenario_io import (
    MalformedRecordError,
    ScenarioFileMissing,
    UNDEFINED,
    fmt_float,
    load_crimes,
    load_scenario,
    load_stops,
    read_itineraries,
    read_report,
    write_comparison,
    write_itineraries,
    write_report,
    write_rows,
    write_scenario,
)
from .synthetic import InfeasibleParamsError, SyntheticParams, build_funnel_scenario, build_minimal_scenario, generate_synthetic

MANIFEST = "manifest.json"


class CliError(Exception):
    pass


def _window(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split("-")
        return parse_hhmm(lo), parse_hhmm(hi)
    except ValueError as exc:
        raise CliError(f"bad window {text!r}, expected HH:MM-HH:MM") from exc


def _clock(text: str) -> int:
    try:
        return parse_hhmm(text)
    except ValueError as exc:
        raise CliError(f"bad clock {text!r}, expected HH:MM or HH:MM+1d") from exc


def _write_manifest(out: Path, command: str, argv: list[str], seed: int | None, **extra) -> None:
    out.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "argv": argv, "seed": seed, "version": __version__, **extra}
    (out / MANIFEST).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _scalar_params() -> list[dataclasses.Field]:
    return [f for f in dataclasses.fields(SyntheticParams) if f.type in ("int", "float")]


def cmd_generate(args: argparse.Namespace, argv: list[str]) -> int:
    out = Path(args.out)
    if args.fixture == "minimal":
        scenario = build_minimal_scenario()
    elif args.fixture == "funnel":
        scenario = build_funnel_scenario(seed=args.seed)
    else:
        overrides = {f.name: getattr(args, f.name) for f in _scalar_params() if getattr(args, f.name) is not None}
        try:
            scenario = generate_synthetic(SyntheticParams(**overrides), args.seed)
        except InfeasibleParamsError as exc:
            raise CliError(f"infeasible parameters: {exc}") from exc
    write_scenario(scenario, out)
    _write_manifest(out, "generate", argv, args.seed)
    n_riders = len(scenario.itineraries_for(Variant.ACTUAL))
    print(f"stops={len(scenario.network.stops)} edges={len(scenario.network.edges)} lines={len(scenario.lines)} "
          f"vehicles={len(scenario.schedules)} passengers={n_riders} crimes={len(scenario.crimes)} -> {out}")
    return 0


def _config(args: argparse.Namespace) -> SimConfig:
    kw = {"rng_seed": args.seed, "crime_radius_m": args.radius_m}
    if args.report_window:
        kw["report_window"] = _window(args.report_window)
    if args.end_clock:
        kw["end_clock"] = _clock(args.end_clock)
    if args.start_clock:
        kw["start_clock"] = _clock(args.start_clock)
    if args.transfer_penalty_s is not None:
        kw["transfer_penalty_s"] = args.transfer_penalty_s
    try:
        return SimConfig(**kw)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _base_riders(scenario: Scenario):
    actual = scenario.itineraries_for(Variant.ACTUAL)
    return actual if actual else scenario.itineraries_for(Variant.OPTIMAL)


def cmd_simulate(args: argparse.Namespace, argv: list[str]) -> int:
    config = _config(args)
    scenario = load_scenario(args.scenario)
    out = Path(args.out)
    variants = [Variant.ACTUAL, Variant.OPTIMAL] if args.variant == "both" else [Variant(args.variant)]
    base = _base_riders(scenario)
    reports, used = {}, []
    for v in variants:
        if v is Variant.ACTUAL:
            riders = tuple(it for it in base if it.variant is Variant.ACTUAL)
        else:
            graph = build_routing_graph(scenario.network, scenario.lines, config.transfer_penalty_s)
            routed, missing = route_all(graph, base)
            if missing:
                print(f"warning: {len(missing)} passenger(s) have no path and were left out of the optimal run",
                      file=sys.stderr)
            riders = tuple(routed)
        report = run_simulation(scenario, config, v, riders)
        write_report(report, out / v.value)
        write_itineraries(riders, out / v.value / "itineraries.csv")
        reports[v] = report
        used += riders
        print(f"{v.value}: {len(report.events)} events, "
              f"{sum(1 for p in report.passengers if p.phase.value == 'ARRIVED')}/{len(riders)} arrived")
    if len(variants) == 2:
        comp = compare_scenarios(reports[Variant.ACTUAL], reports[Variant.OPTIMAL], scenario.network,
                                 scenario.crimes, config, used, args.threshold)
        write_comparison(comp, out / "comparison")
        for k, d in comp.deltas().items():
            print(f"  delta {k}: {UNDEFINED if d is None else f'{d:.4g}'}")
    _write_manifest(out, "simulate", argv, args.seed, scenario=str(Path(args.scenario)))
    return 0


def cmd_analyze(args: argparse.Namespace, argv: list[str]) -> int:
    log_dir = Path(args.log_dir)
    if not log_dir.is_dir():
        raise CliError(f"log directory not found: {log_dir}")
    manifest = {}
    if (log_dir / MANIFEST).is_file():
        manifest = json.loads((log_dir / MANIFEST).read_text())
    scenario_dir = Path(args.scenario or manifest.get("scenario", ""))
    if not args.scenario and "scenario" not in manifest:
        raise CliError("no --scenario given and the log manifest does not name one")
    crimes_file = Path(args.crimes) if args.crimes else scenario_dir / "crimes.csv"
    if not crimes_file.is_file():
        raise CliError(f"crimes file not found: {crimes_file}")
    stops_file = scenario_dir / "stops.csv"
    if not stops_file.is_file():
        raise CliError(f"stops file not found: {stops_file}")
    variant_dirs = [v for v in Variant if (log_dir / v.value / "events.csv").is_file()]
    if not variant_dirs:
        raise CliError(f"no simulation logs under {log_dir}")

    stops = load_stops(stops_file)
    crimes = load_crimes(crimes_file)
    counts = crimes_per_stop(stops, crimes, args.radius_m)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    write_rows(out / "crimes_per_stop.csv", ("stop_id", "crimes"), sorted(counts.items()))
    hist: dict[int, int] = {}
    for n in counts.values():
        hist[n] = hist.get(n, 0) + 1
    write_rows(out / "crimes_hist.csv", ("crimes", "stops"), sorted(hist.items()))
    try:
        fit = fit_power_law(counts.values())
        row = ("ok", fmt_float(fit.alpha), fmt_float(fit.xmin), fmt_float(fit.ks), fit.n_tail)
        print(f"power law: alpha={fit.alpha:.3f} xmin={fit.xmin:g} ks={fit.ks:.3f} n_tail={fit.n_tail}")
    except InsufficientDataError as exc:
        row = (f"insufficient-data: {exc}", UNDEFINED, UNDEFINED, UNDEFINED, UNDEFINED)
        print(f"power law: insufficient-data ({exc})")
    write_rows(out / "powerlaw.csv", ("status", "alpha", "xmin", "ks", "n_tail"), [row])

    network = TransitNetwork(stops, ())
    window = _window(args.report_window) if args.report_window else None
    exposure_rows = []
    for v in variant_dirs:
        riders = read_itineraries(log_dir / v.value / "itineraries.csv")
        frac = transfer_crime_exposure(riders, network, crimes, args.radius_m, args.threshold, counts)[v]
        n_transfers = sum(len(it.legs) - 1 for it in riders)
        exposure_rows.append((v.value, n_transfers, args.threshold, fmt_float(frac)))
        print(f"{v.value}: {frac:.3f} of {n_transfers} transfers have more than {args.threshold} crimes nearby")
        report = read_report(log_dir / v.value)
        profiles = transfer_crime_profiles(report.events, network, crimes, args.radius_m, window, counts)
        write_rows(out / f"transfer_crime_{v.value}.csv", ("stop_id", "crimes", "users", "rate"),
                   ((p.stop_id, p.crime_count, p.users_on_site, fmt_float(p.rate)) for p in profiles))
    write_rows(out / "exposure.csv", ("variant", "transfers", "threshold", "fraction_above"), exposure_rows)
    _write_manifest(out, "analyze", argv, manifest.get("seed"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crimeroute", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic or bundled scenario directory")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--fixture", choices=("minimal", "funnel"))
    for f in _scalar_params():
        g.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=int if f.type == "int" else float)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="run actual and/or optimal itineraries through the fleet")
    s.add_argument("scenario")
    s.add_argument("--variant", choices=("actual", "optimal", "both"), default="both")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--radius-m", type=float, default=200.0)
    s.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD)
    s.add_argument("--report-window", help="HH:MM-HH:MM, default 05:00-08:00")
    s.add_argument("--start-clock", help="HH:MM, default 02:00")
    s.add_argument("--end-clock", help="HH:MM or HH:MM+1d, default 02:00+1d")
    s.add_argument("--transfer-penalty-s", type=float)
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="crimes near stops, power-law fit and transfer exposure")
    a.add_argument("log_dir")
    a.add_argument("--crimes", help="crimes file, default: the simulated scenario's crimes.csv")
    a.add_argument("--scenario", help="scenario directory, default: taken from the log manifest")
    a.add_argument("--radius-m", type=float, default=200.0)
    a.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD)
    a.add_argument("--report-window", help="HH:MM-HH:MM window for transfer users (default: whole run)")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    seed = getattr(args, "seed", None)
    if seed is not None and not 0 <= seed < 2**64:
        print("error: --seed must fit in 64 unsigned bits", file=sys.stderr)
        return 2
    try:
        return args.func(args, argv)
    except ScenarioValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ScenarioFileMissing, MalformedRecordError, CliError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
