"""ACTUAL vs OPTIMAL on the funnel scenario: waiting, occupancy and transfer crime rates."""

import argparse

from crimeroute.engine import run_simulation
from crimeroute.metrics import compare_scenarios
from crimeroute.model import SimConfig, Variant
from crimeroute.synthetic import build_funnel_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--riders", type=int, default=240, help="riders per origin group")
    args = ap.parse_args()

    scenario = build_funnel_scenario(args.riders)
    print("seed  wait_actual  wait_optimal  rate_actual  rate_optimal  exposure_actual  exposure_optimal")
    for seed in range(args.seeds):
        cfg = SimConfig(rng_seed=seed)
        ra = run_simulation(scenario, cfg, Variant.ACTUAL)
        ro = run_simulation(scenario, cfg, Variant.OPTIMAL)
        comp = compare_scenarios(ra, ro, scenario.network, scenario.crimes, cfg, scenario.itineraries)
        a, o = comp.scalars(comp.actual), comp.scalars(comp.optimal)
        print(f"{seed:4d}  {a['mean_window_wait_s']:11.1f}  {o['mean_window_wait_s']:12.1f}  "
              f"{a['mean_transfer_rate'] or 0:11.3f}  {o['mean_transfer_rate'] or 0:12.3f}  "
              f"{a['transfer_exposure']:15.3f}  {o['transfer_exposure']:16.3f}")


if __name__ == "__main__":
    main()
