"""Standard LP minus configuration LP on tiny instances as all probabilities shrink.

    python3 scripts/lp_gap.py --instances 100
"""
import argparse

import numpy as np

from srmatch.benchmark import config_lp_opt_bruteforce, std_lp_opt
from srmatch.instance import gen_random


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--instances", type=int, default=100)
    a = ap.parse_args()
    base = [gen_random(3, 6, 0.7, (0.3, 1.0), (0.5, 2.0), seed=s) for s in range(a.instances)]
    print("scale   mean StdLP   mean ConfigLP   mean gap     max(Config - Std)")
    for scale in (1.0, 0.5, 0.25, 0.1):
        std = np.array([std_lp_opt(i.scaled(scale)) for i in base])
        cfg = np.array([config_lp_opt_bruteforce(i.scaled(scale)) for i in base])
        print(f"{scale:5.2f}   {std.mean():.5f}      {cfg.mean():.5f}         {np.mean(std - cfg):.6f}     "
              f"{np.max(cfg - std):.1e}")


if __name__ == "__main__":
    main()
