"""NC and MC contacts under each noncompliance scenario, next to the heuristic baselines.

    python scripts/run_table2.py --reps 30
"""

import argparse
from dataclasses import replace

from cfroute.sim import NONCOMPLIANCE_SCENARIOS, Policy, SimConfig, run_scenarios


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--type-c-prob", type=float, default=0.2)
    args = ap.parse_args()

    base = SimConfig(type_c_prob=args.type_c_prob)
    heur = {}
    for policy in (Policy.GREEDY, Policy.PREFERENTIAL):
        s = run_scenarios({"none": base}, policy, args.reps, args.seed, workers=args.workers)["none"]
        heur[policy] = s.aggregate()["contacts"]["mean"]
        print(f"{policy.value:<13} contacts {heur[policy]:7.1f}")
    floor = min(heur.values())
    scen = {nc: replace(base, noncompliance=nc) for nc in NONCOMPLIANCE_SCENARIOS}
    print(f"\n{'policy':<8}" + "".join(f"{nc:>16}" for nc in NONCOMPLIANCE_SCENARIOS))
    for policy in (Policy.TSP_NC, Policy.TSP_MC):
        res = run_scenarios(scen, policy, args.reps, args.seed, workers=args.workers)
        cells = []
        for nc in NONCOMPLIANCE_SCENARIOS:
            m = res[nc].aggregate()["contacts"]["mean"]
            cells.append(f"{m:8.1f} ({1 - m / floor:5.1%})")
        print(f"{policy.value:<8}" + "".join(f"{c:>16}" for c in cells))
    print("\n(percentages: reduction against the better heuristic)")


if __name__ == "__main__":
    main()
