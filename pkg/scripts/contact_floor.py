"""Compare simulated contacts with the level expected if visit times at each node were independent.

If visits to a node form a Poisson stream of rate r = lambda * p per minute,
each visit overlaps on average r * 2 E[b] others, so a node sees about
r^2 * E[b] * T unordered overlapping pairs over a window of T minutes.  Routing that only reorders an agent's own
visits cannot move contacts far from this level unless it reacts to other agents.

    python scripts/contact_floor.py --reps 10
"""

import argparse

from cfroute.grid import default_layout
from cfroute.sim import Policy, SimConfig, run_scenarios


def independent_level(cfg: SimConfig, n_nodes: int) -> float:
    st = cfg.stoch
    rate = st.arrival_rate / 60 * st.node_probability
    return n_nodes * rate ** 2 * st.dwell_mean * (st.horizon - st.warmup)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = SimConfig()
    layout = default_layout()
    print(f"independent-visit level: {independent_level(cfg, len(layout.non_entry_nodes)):.0f}")
    for policy in Policy:
        s = run_scenarios({"run": cfg}, policy, args.reps, args.seed, layout)["run"]
        print(f"{policy.value:<13} {s.aggregate()['contacts']['mean']:7.1f}")


if __name__ == "__main__":
    main()
