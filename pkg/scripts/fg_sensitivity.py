"""How the first iterate's ratio moves with the truncation point and the grid.

Anchors the formulation: with l_max = 1 the first LP must return the closed
form (1 + e^-2)/2.  The remaining rows show how far l_max or a coarse grid
would have to move to reach the reference value 0.5725971.

    python3 scripts/fg_sensitivity.py
"""
import math

from srmatch.potential import best_response_g, constant_table, optimize_f_given_g

REFERENCE = 0.5725971


def first_gamma(l_max: float, grid: int) -> float:
    g = best_response_g(constant_table(0.5, grid, l_max))
    return optimize_f_given_g(g, l_max, grid).gamma


def main():
    print(f"closed form (1+e^-2)/2 = {(1 + math.exp(-2)) / 2:.7f}")
    print("l_max  grid  gamma1     minus reference")
    for l_max, grid in ((1.0, 500), (1.25, 625), (1.5, 750), (1.75, 875), (2.0, 1000), (2.0, 100), (2.0, 250),
                        (2.0, 2000), (3.0, 1500)):
        g = first_gamma(l_max, grid)
        print(f"{l_max:5.2f} {grid:5d}  {g:.7f}  {g - REFERENCE:+.2e}")


if __name__ == "__main__":
    main()
