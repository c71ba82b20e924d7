"""Mean base objective, cost and runtime of every planner over seeded instances.

    python scripts/plan_compare.py --scale Small --seeds 20
"""
import argparse
import statistics
import time

from crowdsense.harness.generate import generate_instance
from crowdsense.harness.scales import get_scale
from crowdsense.planners import ALGORITHMS, PlannerConfig, plan


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scale", default="Small")
    ap.add_argument("--dataset", default="tdrive", choices=("tdrive", "grab"))
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--algorithms", nargs="+", default=list(ALGORITHMS))
    a = ap.parse_args()
    scale = get_scale(a.scale, a.dataset)
    insts = [generate_instance(scale, s) for s in range(a.seeds)]
    print(f"{'planner':8} {'mean J':>8} {'std':>7} {'cost':>7} {'sec/inst':>9}")
    for algo in a.algorithms:
        js, costs = [], []
        t = time.perf_counter()
        for seed, inst in enumerate(insts):
            r = plan(inst, PlannerConfig(algo, seed))
            js.append(0.0 if r.objective.empty else r.objective.objective)
            costs.append(r.cost)
        dt = (time.perf_counter() - t) / len(insts)
        sd = statistics.stdev(js) if len(js) > 1 else 0.0
        print(f"{algo:8} {statistics.fmean(js):8.4f} {sd:7.4f} {statistics.fmean(costs):7.1f} {dt:9.3f}")


if __name__ == "__main__":
    main()
