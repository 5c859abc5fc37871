import math

import numpy as np
import pytest

from srmatch.potential import (ONE_MINUS_INV_E, CutoffTable, PotentialError, PotentialTable, best_response_g,
                               check_de_equal, check_de_unequal, check_ode_equal, check_unequal_simplest,
                               coefficient_rows, constant_table, de_equal_lhs, equal_closed_table, f_equal,
                               f_unequal_closed, optimize_f_given_g, relaxed_slack, unequal_closed_table,
                               write_fg_trajectory, iterate_fg)
from scipy.integrate import quad


def test_f_equal_constants():
    assert 1 - f_equal(0.0) == pytest.approx(0.576102, abs=1e-4)
    assert f_equal(1.0) == pytest.approx(ONE_MINUS_INV_E, abs=1e-12)
    assert f_equal(2.0) == ONE_MINUS_INV_E


def test_f_unequal_closed_constants():
    assert 1 - f_unequal_closed(0.0) == pytest.approx((1 + math.exp(-2)) / 2, abs=1e-15)
    assert f_unequal_closed(1.0) == pytest.approx(ONE_MINUS_INV_E, abs=1e-15)
    assert f_unequal_closed(3.0) == ONE_MINUS_INV_E


def test_g_denominator_bounded_away_from_zero():
    xs = np.linspace(0, 1, 1001)
    assert np.min(2 - xs - np.exp(-xs)) > 0.3


@pytest.mark.parametrize("x", [0.0, 0.13, 0.5, 0.77, 0.999])
def test_equal_table_matches_pointwise_quadrature(f_eq, x):
    i = int(round(x * 2000))
    assert f_eq.values[i] == pytest.approx(f_equal(f_eq.grid[i]), abs=1e-8)


def test_unequal_table_matches_closed_form(f_uneq):
    for i in range(0, 2001, 37):
        assert f_uneq.values[i] == pytest.approx(f_unequal_closed(f_uneq.grid[i]), abs=1e-14)


def test_tables_monotone_and_bounded(f_eq, f_uneq, f_iter):
    for t in (f_eq, f_uneq, f_iter):
        assert np.all(np.diff(t.values) >= -1e-12)
        assert t.values.min() >= 0 and t.values.max() <= ONE_MINUS_INV_E + 1e-12
        assert t.gamma == 1 - t.values[0]


def test_table_invariants_enforced():
    grid = np.linspace(0, 1, 11)
    with pytest.raises(PotentialError, match="non-decreasing"):
        PotentialTable.from_values(grid, np.linspace(0.6, 0.5, 11), "tabulated")
    with pytest.raises(PotentialError, match="1 - 1/e"):
        PotentialTable.from_values(grid, np.full(11, 0.5), "equal-closed")
    with pytest.raises(PotentialError, match="gamma"):
        PotentialTable(grid, np.full(11, 0.5), 0.4, "constant(0.5)")
    with pytest.raises(PotentialError):
        CutoffTable(grid, grid + 0.1)


def test_integrals_against_refined_trapezoid(f_iter):
    for x in (0.0, 0.3, 1.234, 2.0, 2.7):
        ys = np.union1d(np.linspace(0, x, 200001), f_iter.grid[f_iter.grid <= x])
        fy = f_iter(ys)
        assert f_iter.F(x) == pytest.approx(np.trapezoid(fy, ys), abs=1e-12)
        assert f_iter.E(x) == pytest.approx(np.trapezoid(np.exp(-ys) * fy, ys), abs=1e-9)
        assert f_iter.C(x) == pytest.approx(x - f_iter.F(x), abs=1e-12)


def test_equal_table_vs_pointwise_integral_form(f_eq):
    # pointwise values come from nested quadrature on the closed form, independent of the table
    x = 0.4
    assert f_eq.F(x) == pytest.approx(quad(f_equal, 0, x)[0], abs=1e-8)


def test_coefficient_rows_reproduce_integrals(f_iter):
    xs = np.array([0.0, 0.0005, 0.5, 1.3337, 2.0])
    CE, C1 = coefficient_rows(f_iter.grid, xs)
    assert CE @ f_iter.values == pytest.approx(f_iter.E(xs), abs=1e-13)
    assert C1 @ f_iter.values == pytest.approx(f_iter.F(xs), abs=1e-13)


def test_c_inverse_round_trip(f_iter):
    ys = np.linspace(0, 2.5, 77)
    assert f_iter.C_inverse(f_iter.C(ys)) == pytest.approx(ys, abs=1e-10)


def test_inverse_sup(f_uneq):
    assert f_uneq.inverse_sup(0.7) == np.inf
    assert f_uneq.inverse_sup(0.1) == -1.0
    y = f_uneq.inverse_sup(0.5)
    assert f_uneq(y) == pytest.approx(0.5, abs=1e-9)


def test_check_de_equal(f_eq):
    rep = check_de_equal(f_eq, 200, 200)
    assert rep.min_slack >= -1e-6
    # p = 0 column is the non-negative LHS itself
    lhs = de_equal_lhs(f_eq, np.linspace(0, 3, 50), [0.0])
    assert np.all(lhs >= 0)


def test_check_de_equal_negative_control(f_eq):
    # a constant potential cannot certify the equal-case ratio
    bad = constant_table(ONE_MINUS_INV_E, 2000, 1.0)
    assert check_de_equal(bad, 100, 100, gamma=f_eq.gamma).min_slack < -0.1


def test_check_de_unequal(f_uneq):
    rep = check_de_unequal(f_uneq, 200, 200)
    assert rep.min_slack >= -1e-6


def test_check_de_unequal_left_column(f_uneq):
    from srmatch.potential import de_unequal_lhs
    ps = np.linspace(0, 1, 11)
    slack = de_unequal_lhs(f_uneq, [0.0], ps)[0] - f_uneq.gamma * ps
    assert np.max(np.abs(slack)) <= 1e-12


def test_std_lp_mode_constant_half():
    rep = check_de_unequal(constant_table(0.5), 300, 50, l_max=30.0, std_lp=True)
    assert abs(rep.min_slack) <= 1e-6


def test_ode_residual(f_eq):
    assert check_ode_equal(f_eq) <= 1e-6
    assert check_ode_equal(constant_table(0.5, 2000, 1.0)) > 1e-3
    assert check_ode_equal(f_eq, [1.0]) <= 1e-6


def test_unequal_simplest_equality():
    assert check_unequal_simplest() <= 1e-10


def test_best_response_from_half():
    g = best_response_g(constant_table(0.5, 400, 2.0))
    assert g.values == pytest.approx(np.maximum(0, g.grid - 1), abs=1e-12)
    assert g.values[0] == 0


def test_best_response_satisfies_equation(f_iter):
    g = best_response_g(f_iter)
    l = f_iter.grid
    pos = g.values > 0
    lhs = f_iter.C(l[pos]) - f_iter.C(g.values[pos])
    assert lhs == pytest.approx(1 - f_iter.values[pos], abs=f_iter.h ** 2)
    # fallback branch: g = 0 exactly when 1 - f(l) >= C(l)
    assert np.all((1 - f_iter.values[~pos]) >= f_iter.C(l[~pos]) - 1e-12)


def test_optimize_with_trivial_window():
    grid = np.linspace(0, 2, 201)
    f = optimize_f_given_g(CutoffTable(grid, grid.copy()), 2.0, 200, right_boundary=None)
    assert f.gamma == pytest.approx(0.5, abs=1e-9)
    assert f.values == pytest.approx(0.5, abs=1e-9)


def test_optimize_boundaries_and_feasibility():
    g = best_response_g(constant_table(0.5, 400, 2.0))
    f = optimize_f_given_g(g, 2.0, 400)
    assert f.values[0] == pytest.approx(1 - f.gamma)
    assert f.values[-1] == pytest.approx(ONE_MINUS_INV_E, abs=1e-12)
    assert relaxed_slack(f, g).min() >= -1e-9
    assert f.kind == "unequal-iterated(1)"


def test_l_max_one_reproduces_closed_form_ratio():
    g = best_response_g(constant_table(0.5, 500, 1.0))
    f = optimize_f_given_g(g, 1.0, 500)
    assert f.gamma == pytest.approx((1 + math.exp(-2)) / 2, abs=1e-6)


def test_iterates_dominate_full_inequality(f_iter):
    # relaxed constraints imply the exact (.)^+ form
    assert check_de_unequal(f_iter, 300, 100).min_slack >= -1e-9


def test_csv_round_trip(tmp_path, f_iter):
    f_iter.to_csv(tmp_path / "f.csv")
    back = PotentialTable.from_csv(tmp_path / "f.csv")
    assert back.values == pytest.approx(f_iter.values, rel=1e-11)
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "x,f"


def test_trajectory_files(tmp_path):
    steps = iterate_fg(2, 200)
    write_fg_trajectory(steps, tmp_path)
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0] == "iter,gamma" and len(summary) == 3
    assert steps[0].gamma <= steps[1].gamma + 1e-12
