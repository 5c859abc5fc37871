"""Empirical competitive ratios against the standard LP.

    python3 scripts/ratio_experiments.py --trials 1000 --out out/ratios.csv
"""
import argparse
import csv
import math

from srmatch.instance import gen_cascade, gen_random, gen_upper_triangular
from srmatch.potential import equal_closed_table, iterated_table
from srmatch.simulate import AlgoConfig, estimate_ratio


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="out/ratios.csv")
    a = ap.parse_args()
    f_eq, f_it = equal_closed_table(), iterated_table(3, 2000)
    cases = []
    for p in (0.1, 0.01):
        tri = gen_upper_triangular(50, p)
        wtri = gen_upper_triangular(20, p, ("geometric", 1.01))
        cas = gen_cascade(4, p / 2, repeat=max(1, round(0.5 / p)))
        rnd = gen_random(20, 100, 0.3, (p / 10, p), seed=3, copies=max(1, round(0.1 / p)))
        cases += [(f"triangle p={p}", tri, "sb", f_eq), (f"triangle p={p}", tri, "greedy", f_eq),
                  (f"weighted-triangle p={p}", wtri, "weighted", f_eq),
                  (f"weighted-triangle p={p}", wtri, "greedy", f_eq),
                  (f"cascade p={p}", cas, "fractional", f_it), (f"cascade p={p}", cas, "greedy", f_it),
                  (f"random p={p}", rnd, "fractional", f_it), (f"random p={p}", rnd, "rounded", f_it)]
    rows = []
    for name, inst, algo, f in cases:
        est = estimate_ratio(inst, AlgoConfig(algo, delta=3 * inst.p_max ** (1 / 3)), a.trials, a.seed, f=f,
                             workers=a.workers)
        rows.append([name, algo, f"{est.mean:.5f}", f"{est.se:.5f}"])
        print(f"{name:26s} {algo:10s} {est.mean:.4f} +- {est.se:.4f}")
    with open(a.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "algorithm", "ratio", "se"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
