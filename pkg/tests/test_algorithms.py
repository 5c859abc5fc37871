import csv
import math

import numpy as np
import pytest

from srmatch.algorithms import (AlgorithmError, run_fractional, run_greedy, run_integral, run_rewards_model,
                                run_stochastic_balance, run_weighted_order_based)
from srmatch.instance import Instance, gen_random, gen_upper_triangular
from srmatch.simulate import sample_thresholds

INF = np.inf


def inst(offline, online, edges):
    return Instance(tuple(offline), tuple(online), edges)


def test_sb_only_neighbor():
    g = inst([("u", 1)], ["v1", "v2"], {("u", "v1"): 0.5, ("u", "v2"): 0.5})
    tr = run_stochastic_balance(g, [INF])
    assert list(tr.matched) == [0, 0]
    assert tr.loads[0] == 1.0


def test_sb_least_load():
    # preload a to 0.4 and b to 0.2 with private arrivals, then a shared arrival
    p = 0.2
    edges = {("a", "x1"): p, ("a", "x2"): p, ("b", "y1"): p, ("a", "z"): p, ("b", "z"): p}
    g = inst([("a", 1), ("b", 1)], ["x1", "x2", "y1", "z"], edges)
    tr = run_stochastic_balance(g, [INF, INF])
    assert tr.inst.offline_ids[tr.matched[-1]] == "b"


def test_sb_tie_lexicographic():
    # ids listed out of order to make sure position is not the tie-break
    g = inst([("zz", 1), ("aa", 1)], ["v"], {("zz", "v"): 0.1, ("aa", "v"): 0.1})
    tr = run_stochastic_balance(g, [INF, INF])
    assert g.offline_ids[tr.matched[0]] == "aa"


def test_sb_skips_successful():
    g = inst([("a", 1), ("b", 1)], ["v1", "v2"], {("a", "v1"): 0.5, ("a", "v2"): 0.5, ("b", "v2"): 0.5})
    tr = run_stochastic_balance(g, [0.3, INF])
    assert tr.successful[0]
    assert g.offline_ids[tr.matched[1]] == "b"
    assert tr.gain[0] == pytest.approx(0.3)
    assert tr.loads[0] == 0.5  # full matched mass is recorded


def test_sb_dual_updates(f_eq):
    g = inst([("u", 1)], ["v1", "v2"], {("u", "v1"): 0.25, ("u", "v2"): 0.25})
    tr = run_stochastic_balance(g, [INF], f_eq)
    assert tr.alpha_inc[1] == pytest.approx(0.25 * f_eq(0.25), abs=1e-15)
    assert tr.beta[1] == pytest.approx(0.25 * (1 - f_eq(0.25)), abs=1e-15)


def test_unequal_probabilities_rejected():
    g = inst([("a", 1), ("b", 1)], ["v"], {("a", "v"): 0.1, ("b", "v"): 0.2})
    with pytest.raises(AlgorithmError, match="equal"):
        run_stochastic_balance(g, [INF, INF])
    with pytest.raises(AlgorithmError):
        run_weighted_order_based(g, [INF, INF], None)
    run_greedy(g, [INF, INF])  # greedy is defined for any probabilities


def test_threshold_shape_checked():
    g = gen_upper_triangular(3, 0.5)
    with pytest.raises(AlgorithmError, match="thresholds"):
        run_stochastic_balance(g, [1.0])


def test_weighted_prefers_heavier(f_eq):
    g = inst([("a", 1), ("b", 2)], ["v"], {("a", "v"): 0.1, ("b", "v"): 0.1})
    tr = run_weighted_order_based(g, [INF, INF], f_eq)
    assert g.offline_ids[tr.matched[0]] == "b"
    assert tr.alpha_inc[0] == pytest.approx(2 * 0.1 * f_eq(0.0))


def test_weighted_never_prefers_zero_weight(f_eq):
    g = inst([("a", 0), ("b", 0.01)], ["v1", "v2", "v3"],
             {(u, v): 0.3 for u in "ab" for v in ("v1", "v2", "v3")})
    tr = run_weighted_order_based(g, [INF, INF], f_eq)
    assert all(g.offline_ids[m] == "b" for m in tr.matched)


@pytest.mark.parametrize("seed", range(100))
def test_weighted_equals_sb_on_equal_weights(seed, f_eq):
    rng = np.random.default_rng(seed)
    p = float(rng.choice([0.05, 0.1, 0.25]))
    g = gen_random(int(rng.integers(2, 8)), int(rng.integers(5, 40)), 0.5, (p, p), seed=seed)
    th = sample_thresholds(g, "exponential", rng)
    a = run_stochastic_balance(g, th, f_eq)
    b = run_weighted_order_based(g, th, f_eq)
    assert np.array_equal(a.matched, b.matched)


def test_greedy_picks_max_wp():
    g = inst([("a", 1), ("b", 3)], ["v"], {("a", "v"): 0.5, ("b", "v"): 0.2})
    assert g.offline_ids[run_greedy(g, [INF, INF]).matched[0]] == "b"


@pytest.mark.parametrize("algo", ["sb", "weighted", "greedy"])
@pytest.mark.parametrize("rule", ["point", "integral"])
def test_primal_dual_equality_every_arrival(algo, rule, f_eq):
    g = gen_random(6, 60, 0.4, (0.1, 0.1), (0.5, 2.0), seed=7)
    th = sample_thresholds(g, "exponential", 3)
    tr = run_integral(g, algo, th, f_eq, dual_rule=rule)
    assert np.max(np.abs(np.cumsum(tr.gain) - np.cumsum(tr.alpha_inc + tr.beta))) <= 1e-12


def test_integral_rule_alpha_is_F(f_eq):
    g = gen_upper_triangular(5, 0.1)
    tr = run_integral(g, "sb", None, f_eq, dual_rule="integral")
    assert tr.alpha == pytest.approx(f_eq.F(tr.loads), abs=1e-13)


def test_unmatched_arrival_has_zero_beta():
    g = inst([("a", 1)], ["v1", "v2"], {("a", "v1"): 1.0, ("a", "v2"): 1.0})
    tr = run_stochastic_balance(g, [0.5])
    assert tr.matched[1] == -1 and tr.beta[1] == 0


# ---------------------------------------------------------------- fractional

def test_fractional_single_neighbor(f_iter):
    g = inst([("u", 1.5)], ["v"], {("u", "v"): 0.3})
    tr = run_fractional(g, [INF], f_iter)
    assert tr.x[0] == 1.0 and tr.loads[0] == pytest.approx(0.3)
    assert tr.beta[0] == pytest.approx(1.5 * f_iter.C(0.3), abs=1e-14)


def test_fractional_two_identical_neighbors(f_iter):
    g = inst([("a", 1), ("b", 1)], ["v"], {("a", "v"): 0.2, ("b", "v"): 0.2})
    tr = run_fractional(g, [INF, INF], f_iter)
    assert tr.x.sum() == pytest.approx(1.0, abs=1e-12)
    assert tr.x == pytest.approx([0.5, 0.5], abs=1e-9)
    s = 0.2 * (1 - f_iter(tr.loads))
    assert s[0] == pytest.approx(s[1], abs=1e-9)


def test_fractional_budget_cap(f_iter):
    g = inst([("u", 1)], ["v"], {("u", "v"): 0.3})
    tr = run_fractional(g, [0.1], f_iter)
    assert tr.loads[0] == 0.1 and tr.successful[0]
    # the largest fraction that keeps l <= theta
    assert tr.x[0] == pytest.approx(1 / 3)
    assert tr.gain[0] == pytest.approx(0.1)


def test_fractional_equalizes_scores(f_iter):
    g = inst([("a", 1), ("b", 1.3), ("c", 1)], ["v0", "v"],
             {("a", "v0"): 0.4, ("a", "v"): 0.8, ("b", "v"): 0.8, ("c", "v"): 0.8})
    tr = run_fractional(g, [INF] * 3, f_iter)
    c = g.csr
    sl = slice(c.indptr[1], c.indptr[2])
    xs = tr.x[sl]
    assert xs.sum() == pytest.approx(1.0, abs=1e-12)
    scores = c.p[sl] * g.weights[c.u[sl]] * (1 - f_iter(tr.loads[c.u[sl]]))
    # every vertex with positive mass ends at the same score unless capped at x = 1
    active = (xs > 1e-12) & (xs < 1 - 1e-12)
    assert active.sum() >= 2
    assert np.ptp(scores[active]) <= 1e-9
    # and no vertex left out has a strictly larger score
    assert np.all(scores[xs <= 1e-12] <= scores[active].min() + 1e-9)


def test_fractional_primal_dual(f_iter):
    g = gen_random(8, 80, 0.3, (0.01, 0.2), (0.5, 2.0), seed=11)
    th = sample_thresholds(g, "exponential", 5)
    tr = run_fractional(g, th, f_iter, record_loads=True)
    assert np.max(np.abs(np.cumsum(tr.gain) - np.cumsum(tr.alpha_inc + tr.beta))) <= 1e-12
    assert tr.alpha == pytest.approx(g.weights * f_iter.F(tr.loads), abs=1e-12)
    assert np.all(tr.loads <= th.values + 1e-15)


# ---------------------------------------------------------------- rewards model

def test_rewards_deterministic_success():
    g = inst([("u", 2)], ["v"], {("u", "v"): 1.0})
    tr = run_rewards_model(g, "greedy", 0)
    assert tr.successful[0] and tr.objective == 2


def test_rewards_bernoulli_rate():
    g = inst([("u", 1)], ["v"], {("u", "v"): 0.5})
    hits = sum(run_rewards_model(g, "sb", s).successful[0] for s in range(10_000))
    assert abs(hits / 10_000 - 0.5) <= 0.02


def test_rewards_success_equals_expected_load():
    g = gen_upper_triangular(4, 0.25)
    succ, load = [], []
    for s in range(4000):
        tr = run_rewards_model(g, "sb", s)
        succ.append(tr.objective)
        # expected reward of the attempts actually made: load up to and including the success
        load.append(float(np.dot(g.weights, tr.loads)))
    succ, load = np.array(succ), np.array(load)
    d = succ - load
    assert abs(d.mean()) <= 3 * d.std(ddof=1) / math.sqrt(d.size)


def test_trace_csv(tmp_path, f_iter):
    g = inst([("a", 1), ("b", 1)], ["v1", "v2"], {("a", "v1"): 0.5, ("b", "v2"): 0.5, ("a", "v2"): 0.5})
    run_stochastic_balance(g, [INF, INF]).to_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["arrival_id", "matched_to", "load_after", "alpha_total", "beta_v"]
    assert rows[1][:3] == ["v1", "a", "0.5"] and rows[2][:3] == ["v2", "b", "0.5"]
    run_fractional(g, [INF, INF], f_iter, record_loads=True).to_csv(tmp_path / "f.csv")
    rows = list(csv.reader(open(tmp_path / "f.csv")))
    assert rows[1][1] == "a:1"
