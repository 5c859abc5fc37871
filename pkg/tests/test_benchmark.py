import csv

import numpy as np
import pytest

from srmatch.benchmark import (audit_dual_feasibility, audit_std_lp, config_lp_opt_bruteforce, sample_pairs,
                               std_lp_opt, std_lp_solve)
from srmatch.instance import Instance, gen_random, gen_upper_triangular
from srmatch.potential import constant_table
from srmatch.simulate import AlgoConfig


def test_std_lp_single_edge():
    g = Instance((("u", 1.0),), ("v",), {("u", "v"): 0.5})
    assert std_lp_opt(g) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("k", [1, 3, 8])
def test_std_lp_budget_saturates(k):
    g = Instance((("u", 1.0),), tuple(f"v{i}" for i in range(k)), {("u", f"v{i}"): 1 / k for i in range(k)})
    assert std_lp_opt(g) == pytest.approx(1.0, abs=1e-12)


def test_std_lp_upper_triangular():
    assert std_lp_opt(gen_upper_triangular(2, 1.0)) == pytest.approx(2.0, abs=1e-12)
    assert std_lp_opt(gen_upper_triangular(10, 0.1)) == pytest.approx(10.0, abs=1e-9)


def test_std_lp_weight_homogeneity():
    g = gen_random(5, 12, 0.5, (0.1, 0.6), (0.5, 2.0), seed=1)
    assert std_lp_opt(g.with_weights(3 * g.weights)) == pytest.approx(3 * std_lp_opt(g), rel=1e-10)


def test_std_lp_relabel_invariant():
    g = gen_random(5, 12, 0.5, (0.1, 0.6), (0.5, 2.0), seed=2)
    ren = {u: f"z{u}" for u in g.offline_ids}
    h = Instance(tuple((ren[u], w) for u, w in g.offline), g.online[::-1],
                 {(ren[u], v): p for (u, v), p in g.edges.items()})
    assert std_lp_opt(h) == pytest.approx(std_lp_opt(g), abs=1e-9)


def test_std_lp_aggregation_matches_plain():
    # repeated online vertices are merged; compare with a relabelled copy that has no repeats in the key
    g = gen_random(4, 5, 0.7, (0.2, 0.5), seed=3, copies=3)
    res = std_lp_solve(g)
    assert res.value == pytest.approx(std_lp_opt(g))
    base = gen_random(4, 5, 0.7, (0.2, 0.5), seed=3)
    assert res.value <= 3 * std_lp_opt(base) + 1e-9


def test_config_lp_single_edge():
    g = Instance((("u", 1.0),), ("v",), {("u", "v"): 0.5})
    assert config_lp_opt_bruteforce(g) == pytest.approx(0.5, abs=1e-12)


def test_config_lp_refuses_large():
    g = Instance((("u", 1.0),), tuple(f"v{i}" for i in range(13)), {("u", f"v{i}"): 0.1 for i in range(13)})
    with pytest.raises(ValueError, match="brute force"):
        config_lp_opt_bruteforce(g)


@pytest.mark.parametrize("seed", range(20))
def test_config_below_std(seed):
    g = gen_random(3, 5, 0.6, (0.1, 0.9), (0.5, 2.0), seed=seed)
    assert config_lp_opt_bruteforce(g) <= std_lp_opt(g) + 1e-9


def test_config_std_gap_shrinks():
    g = gen_random(3, 4, 0.8, (0.3, 0.9), seed=5)
    gaps = []
    for s in (1.0, 0.1):
        h = g.scaled(s)
        gaps.append(std_lp_opt(h) - config_lp_opt_bruteforce(h))
    assert gaps[1] < gaps[0]


def test_audit_std_lp_half():
    rep = audit_std_lp(constant_table(0.5))
    assert rep.inf_lhs == pytest.approx(0.5, abs=1e-6)
    assert rep.lhs_at_zero == pytest.approx(0.5, abs=1e-12)


def test_audit_std_lp_equal_closed(f_eq):
    assert audit_std_lp(f_eq).inf_lhs < 0.576


def test_sample_pairs_mix():
    g = gen_upper_triangular(5, 0.25)
    prs = sample_pairs(g, 20, 0)
    assert len(prs) == 20
    srcs = {s for _, _, s in prs}
    assert "random" in srcs and len(srcs) >= 3
    for u, S, _ in prs:
        assert S and all((u, v) in g.edges for v in S)


def test_audit_sb_passes(f_eq, tmp_path):
    g = gen_upper_triangular(10, 0.05)
    rep = audit_dual_feasibility(g, AlgoConfig("sb"), f_eq, 30, 200, 0)
    assert rep.max_primal_dual_gap <= 1e-9 and not rep.violations
    assert rep.min_ratio == min(e.ratio for e in rep.pairs)
    assert rep.passes(0.05)
    rep.to_csv(tmp_path / "a.csv")
    rows = list(csv.reader(open(tmp_path / "a.csv")))
    assert rows[0] == ["u", "S_size", "p_uS", "est", "se", "ratio"] and len(rows) == len(rep.pairs) + 1
    assert "min ratio" in rep.summary()


def test_audit_conditional(f_eq):
    g = gen_upper_triangular(6, 0.1)
    u = g.offline_ids[0]
    rep = audit_dual_feasibility(g, AlgoConfig("sb"), f_eq, 12, 100, 1, mode="conditional", fixed_u=u)
    assert {e.u for e in rep.pairs} == {u}
    with pytest.raises(ValueError):
        audit_dual_feasibility(g, AlgoConfig("sb"), f_eq, 4, 4, 1, mode="bogus")


def test_audit_negative_control(f_iter):
    g = gen_upper_triangular(20, 0.05)
    cfg = AlgoConfig("fractional")
    good = audit_dual_feasibility(g, cfg, f_iter, 40, 100, 2)
    bad_f = constant_table(1 - np.exp(-1), 1000, 2.0)
    bad = audit_dual_feasibility(g, cfg, bad_f, 40, 100, 2, gamma=f_iter.gamma)
    assert bad.min_ratio < good.min_ratio
    assert not bad.passes(0.02) and good.passes(0.02)


def test_audit_worker_independent(f_eq):
    g = gen_upper_triangular(5, 0.2)
    a = audit_dual_feasibility(g, AlgoConfig("sb"), f_eq, 10, 30, 3)
    b = audit_dual_feasibility(g, AlgoConfig("sb"), f_eq, 10, 30, 3, workers=2)
    assert [e.est for e in a.pairs] == [e.est for e in b.pairs]
