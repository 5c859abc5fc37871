"""Rounding failure rate, drift tail and coupling gap as p_max shrinks.

Each row uses the same random graph; the p/10 version repeats every arrival
ten times so total edge mass stays comparable.

    python3 scripts/reductions.py --trials 1000 --delta 0.15
"""
import argparse

from srmatch.instance import gen_random
from srmatch.potential import iterated_table
from srmatch.simulate import coupling_gap, default_delta, rounding_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--delta", type=float, default=0.15, help="fixed rounding slack for the trend")
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    f = iterated_table(3, 2000)
    print("p_max    fail rate (fixed d)  fail rate (default d)  frac-int gap  coupling gap    tail@d vs bound")
    for scale, copies in ((1.0, 1), (0.3, 3), (0.1, 10), (0.03, 30)):
        inst = gen_random(20, 40, 0.3, (0.05 * scale, 0.1 * scale), seed=4, copies=copies)
        r = rounding_experiment(inst, f, a.delta, a.trials, a.seed)
        d0 = default_delta(inst.p_max, inst.n_offline)
        r0 = rounding_experiment(inst, f, d0, a.trials, a.seed)
        c = coupling_gap(inst, "greedy", a.trials, a.seed)
        emp, se, bound = r.tail(a.delta)
        print(f"{inst.p_max:.4f}   {r.failure_rate:.3f} +- {r.failure_se:.3f}      {r0.failure_rate:.3f} (d={d0:.2f})"
              f"        {r.objective_gap.mean:.4f}        {c.mean:.4f} +- {c.se:.4f}   {emp:.4f} <= {bound:.4f}")


if __name__ == "__main__":
    main()
