"""Regenerate the bundled scenario directories under ``scenarios/``."""

from pathlib import Path

from crimeroute.scenario_io import write_scenario
from crimeroute.synthetic import build_funnel_scenario, build_minimal_scenario

ROOT = Path(__file__).resolve().parent.parent / "scenarios"


def main() -> None:
    for name, scenario in (("minimal", build_minimal_scenario()), ("funnel", build_funnel_scenario())):
        assert not scenario.validate(), name
        out = write_scenario(scenario, ROOT / name)
        print(f"{name}: {len(scenario.network.stops)} stops, {len(scenario.itineraries)} itineraries -> {out}")


if __name__ == "__main__":
    main()
