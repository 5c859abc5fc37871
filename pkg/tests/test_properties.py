import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from srmatch import _kernels as K
from srmatch.algorithms import run_fractional, run_integral
from srmatch.benchmark import config_lp_opt_bruteforce, std_lp_opt
from srmatch.instance import gen_random, instance_from_dict, instance_to_dict
from srmatch.potential import PotentialTable, constant_table, iterated_table

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
F_ITER = iterated_table(3, 1000)


@st.composite
def instances(draw, equal=False, max_off=6, max_on=25):
    n_off = draw(st.integers(1, max_off))
    n_on = draw(st.integers(0, max_on))
    seed = draw(st.integers(0, 2 ** 31))
    lo = draw(st.sampled_from([0.01, 0.05, 0.2]))
    hi = lo if equal else draw(st.sampled_from([0.2, 0.5, 1.0]))
    return gen_random(n_off, n_on, draw(st.floats(0.1, 1.0)), (lo, hi), (0.0, 3.0), seed=seed)


@st.composite
def tables(draw):
    n = draw(st.integers(2, 60))
    incs = np.array(draw(st.lists(st.floats(0, 1), min_size=n, max_size=n)))
    start = draw(st.floats(0.0, 1 - 1 / np.e))
    vals = np.concatenate([[0.0], np.cumsum(incs)])
    vals = start + (1 - 1 / np.e - start) * (vals / vals[-1] if vals[-1] > 0 else vals)
    vals[-1] = 1 - 1 / np.e
    return PotentialTable.from_values(np.linspace(0, draw(st.floats(0.5, 3.0)), n + 1), vals, "tabulated")


@SETTINGS
@given(tables(), st.floats(0, 4), st.floats(0, 4))
def test_integrals_additive_and_monotone(t, a, b):
    a, b = min(a, b), max(a, b)
    assert t.F(b) - t.F(a) >= -1e-12
    assert t.C(b) - t.C(a) >= -1e-12
    assert abs((t.F(b) - t.F(a)) + (t.C(b) - t.C(a)) - (b - a)) <= 1e-12
    assert t.C_inverse(t.C(b)) == np.float64(t.C_inverse(t.C(b)))
    assert abs(t.C(t.C_inverse(t.C(b))) - t.C(b)) <= 1e-10


@SETTINGS
@given(tables(), st.floats(0, 1))
def test_inverse_sup_definition(t, c):
    y = t.inverse_sup(c)
    if y == np.inf:
        assert c >= t.values[-1]
    elif y < 0:
        assert c < t.values[0]
    else:
        assert t(y) <= c + 1e-12
        assert t(y + 1e-6) >= c - 1e-12


@SETTINGS
@given(instances(equal=True), st.sampled_from(["sb", "weighted", "greedy"]), st.integers(0, 10 ** 6),
       st.sampled_from(["point", "integral"]))
def test_integral_primal_dual_and_caps(inst, algo, seed, rule):
    th = np.random.default_rng(seed).exponential(size=inst.n_offline)
    tr = run_integral(inst, algo, th, F_ITER, dual_rule=rule)
    assert np.all(np.abs(np.cumsum(tr.gain) - np.cumsum(tr.alpha_inc + tr.beta)) <= 1e-12)
    assert tr.objective <= float(np.dot(inst.weights, np.minimum(tr.loads, th))) + 1e-12
    assert np.all(tr.beta >= 0) and np.all(tr.alpha >= 0)
    # every vertex goes over its threshold at most once
    assert np.all(tr.loads - th <= inst.p_max + 1e-12)


@SETTINGS
@given(instances(), st.integers(0, 10 ** 6))
def test_fractional_feasible(inst, seed):
    th = np.random.default_rng(seed).exponential(size=inst.n_offline)
    tr = run_fractional(inst, th, F_ITER)
    c = inst.csr
    assert np.all(tr.x >= 0) and np.all(tr.x <= 1 + 1e-12)
    per = np.array([tr.x[c.indptr[j]:c.indptr[j + 1]].sum() for j in range(inst.n_online)])
    assert np.all(per <= 1 + 1e-9)
    assert np.all(tr.loads <= th + 1e-12)
    assert np.all(np.abs(np.cumsum(tr.gain) - np.cumsum(tr.alpha_inc + tr.beta)) <= 1e-12)


@SETTINGS
@given(st.lists(st.floats(0, 1), min_size=1, max_size=12), st.floats(0, 5))
def test_water_fill_conserves(room, amount):
    room = np.array(room)
    out = np.zeros_like(room)
    left = K._water_fill(room, amount, out)
    assert abs(out.sum() + left - amount) <= 1e-12
    assert np.all(out <= room + 1e-15) and left >= -1e-12
    if left > 1e-12:
        assert np.allclose(out, room)


@SETTINGS
@given(instances(max_off=3, max_on=4))
def test_config_lp_below_std_lp(inst):
    assert config_lp_opt_bruteforce(inst) <= std_lp_opt(inst) + 1e-9


@SETTINGS
@given(instances())
def test_instance_dict_round_trip(inst):
    assert instance_from_dict(instance_to_dict(inst)) == inst


@SETTINGS
@given(st.floats(0.0, 1 - 1 / np.e))
def test_constant_std_lp_value(c):
    t = constant_table(c)
    ls = np.linspace(0, 10, 101)
    lhs = t.E(ls) + np.exp(-ls) * (1 - t(ls))
    assert np.allclose(lhs, c * -np.expm1(-ls) + np.exp(-ls) * (1 - c), atol=1e-12)
