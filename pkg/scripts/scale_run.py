"""Time a full-day synthetic run and check the capacity and conservation invariants."""

import argparse
import time
from collections import Counter

from crimeroute.engine import EventKind, Phase, run_simulation
from crimeroute.metrics import snapshot_counts
from crimeroute.model import SimConfig
from crimeroute.synthetic import SyntheticParams, generate_synthetic


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--passengers", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    sc = generate_synthetic(SyntheticParams(n_passengers=args.passengers), args.seed)
    t1 = time.perf_counter()
    rep = run_simulation(sc, SimConfig(rng_seed=args.seed))
    t2 = time.perf_counter()

    kinds = Counter(e.kind for e in rep.events)
    peak = max((n for e in rep.events_of(EventKind.SNAPSHOT) for n in snapshot_counts(e).values()), default=0)
    phases = Counter(p.phase for p in rep.passengers)
    print(f"generate {t1 - t0:.2f} s, simulate {t2 - t1:.2f} s, {len(rep.events)} events")
    print(f"boardings {kinds[EventKind.BOARD]}, alightings {kinds[EventKind.ALIGHT]}, peak load {peak}")
    print(", ".join(f"{ph.value} {phases[ph]}" for ph in Phase))


if __name__ == "__main__":
    main()
