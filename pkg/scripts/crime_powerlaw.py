"""Crimes-per-stop tail on synthetic cities: fitted exponent vs the generating one."""

import argparse

from crimeroute.metrics import crimes_per_stop, fit_power_law
from crimeroute.synthetic import SyntheticParams, generate_synthetic


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--stops", type=int, default=400)
    ap.add_argument("--crimes", type=int, default=20000)
    ap.add_argument("--exponents", type=float, nargs="+", default=[2.0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--radius-m", type=float, default=200.0)
    args = ap.parse_args()

    print("exponent  seed  alpha   xmin  n_tail  ks")
    for exponent in args.exponents:
        for seed in range(args.seeds):
            p = SyntheticParams(n_stops=args.stops, n_crimes=args.crimes, crime_exponent=exponent,
                                n_passengers=0)
            sc = generate_synthetic(p, seed)
            fit = fit_power_law(crimes_per_stop(sc.network.stops, sc.crimes, args.radius_m).values())
            print(f"{exponent:8.2f}  {seed:4d}  {fit.alpha:5.3f}  {fit.xmin:5g}  {fit.n_tail:6d}  {fit.ks:.3f}")


if __name__ == "__main__":
    main()
