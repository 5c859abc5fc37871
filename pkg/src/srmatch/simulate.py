"""Threshold laws, the reward/budget coupling, randomized rounding and the Monte Carlo harness."""
from __future__ import annotations

import csv
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .algorithms import RunTrace, run_fractional, run_integral
from .instance import Instance, read_instance
from .potential import PotentialTable, equal_closed_table, load_potential


# ---------------------------------------------------------------- randomness

def substream(seed: int, trial: int, purpose: str) -> np.random.Generator:
    """Generator for (seed, trial, purpose); the purpose tag is hashed with CRC-32."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial), zlib.crc32(purpose.encode())))
    return np.random.default_rng(ss)


@dataclass(frozen=True, eq=False)
class ThresholdVector:
    values: np.ndarray
    law: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if np.any(v <= 0):
            raise ValueError("thresholds must be positive")


def parse_law(law: str) -> tuple[str, float | None]:
    law = law.strip()
    if law == "exponential":
        return "exponential", None
    for name in ("geometric", "delta-enhanced"):
        if law.startswith(name + "(") and law.endswith(")"):
            val = float(law[len(name) + 1:-1])
            if name == "geometric" and not 0 < val <= 1:
                raise ValueError(f"geometric law needs 0 < p <= 1, got {val}")
            if name == "delta-enhanced" and val < 0:
                raise ValueError(f"delta must be non-negative, got {val}")
            return name, val
    raise ValueError(f"unknown threshold law {law!r}")


def sample_thresholds(inst_or_n, law: str = "exponential", seed=0) -> ThresholdVector:
    """Independent thresholds per offline vertex.

    geometric(p) picks interval [(i-1)p, ip) with probability p(1-p)^(i-1) and a
    uniform offset inside it; delta-enhanced(d) is d + Exp(1).
    """
    n = inst_or_n if isinstance(inst_or_n, (int, np.integer)) else inst_or_n.n_offline
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    name, par = parse_law(law)
    if name == "exponential":
        v = rng.exponential(1.0, n)
    elif name == "geometric":
        i = rng.geometric(par, n)
        v = (i - 1 + rng.random(n)) * par
        v[v == 0] = par * 1e-12
    else:
        v = par + rng.exponential(1.0, n)
    # zero has probability zero; keep the positivity invariant under float underflow
    return ThresholdVector(np.maximum(v, np.finfo(float).tiny), law)


def exponential_conditioned(rng, lo: float, hi: float) -> float:
    """Exp(1) conditioned on [lo, hi)."""
    u = rng.random()
    return lo - math.log1p(-u * -math.expm1(-(hi - lo)))


# ---------------------------------------------------------------- reward <-> budget

@dataclass(eq=False)
class CouplingResult:
    rewards: RunTrace
    budget: RunTrace
    thresholds: np.ndarray
    decisions_match: bool

    @property
    def overshoot_gap(self) -> float:
        """sum_u w_u (l_u - min(l_u, theta_u)): rewards-side expected objective minus budget objective."""
        w = self.rewards.inst.weights
        return float(np.dot(w, self.rewards.loads)) - self.budget.objective


def couple_reward_to_budget(inst: Instance, algorithm: str, seed: int, trial: int = 0,
                            f: PotentialTable | None = None) -> CouplingResult:
    """Run in the rewards model, then replay in the budget model with coupled thresholds.

    A vertex that succeeds at prior load l via an edge of probability p gets
    theta ~ Exp(1) conditioned on [l, l + p); a vertex that never succeeds gets
    theta = inf, so no draw is issued for it.
    """
    rng = substream(seed, trial, "rewards")
    rew = run_integral(inst, algorithm, None, f, model="rewards", uniforms=rng.random(inst.n_online))
    crng = substream(seed, trial, "coupling")
    theta = np.full(inst.n_offline, np.inf)
    for u in np.flatnonzero(rew.successful):
        lo = rew.extra["prior_load"][u]
        theta[u] = exponential_conditioned(crng, lo, lo + rew.extra["success_p"][u])
    bud = run_integral(inst, algorithm, theta, f, model="budget")
    return CouplingResult(rew, bud, theta, bool(np.array_equal(rew.matched, bud.matched)))


# ---------------------------------------------------------------- fractional -> integral

def default_delta(p_max: float, n_offline: int, const: float = 3.0) -> float:
    return const * p_max ** (1 / 3) * math.log(max(n_offline, 2))


@dataclass(eq=False)
class RoundingResult:
    fractional: RunTrace
    matched: np.ndarray
    integral_loads: np.ndarray
    fractional_loads: np.ndarray
    max_drift: np.ndarray
    integral_objective: float
    failed: bool
    first_failure: int
    theta_int: np.ndarray
    delta: float

    @property
    def fractional_objective(self) -> float:
        """Fractional gain measured against the integral budgets theta' (not theta' + delta)."""
        w = self.fractional.inst.weights
        return float(np.dot(w, np.minimum(self.fractional_loads, self.theta_int)))


def round_fractional_to_integral(inst: Instance, f: PotentialTable, delta: float, seed: int, trial: int = 0,
                                 theta=None) -> RoundingResult:
    """Run the fractional algorithm with budgets theta' + delta and round each arrival independently.

    Failure means l^A'_u < l^A_u - delta for some u at some arrival; the
    integral run keeps going with its own budgets theta' either way.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    th = sample_thresholds(inst, "exponential", substream(seed, trial, "thresholds")).values if theta is None \
        else np.asarray(theta, float)
    frac = run_fractional(inst, th + delta, f)
    c = inst.csr
    u01 = substream(seed, trial, "rounding").random(inst.n_online)
    matched, lb, la, drift, obj, first = K.run_rounding(c.indptr, c.u, c.p, inst.weights, th, frac.x,
                                                        frac.extra["dl"], u01, delta)
    return RoundingResult(frac, matched, lb, la, drift, float(obj), first >= 0, int(first), th, delta)


def max_drift_check(frac_loads, int_loads) -> float:
    """max over arrival prefixes of l^A_u - l^A'_u for one vertex (load histories, same length)."""
    d = np.asarray(frac_loads, float) - np.asarray(int_loads, float)
    return float(max(0.0, d.max(initial=0.0)))


def maximal_bernstein_bound(t, a: float, M) -> np.ndarray:
    """min(1, 2 exp(-t^2 / (4 a t + M)))."""
    t = np.asarray(t, float)
    M = np.asarray(M, float)
    return np.minimum(1.0, 2.0 * np.exp(-t * t / (4 * a * t + M)))


@dataclass(frozen=True)
class RoundingSummary:
    failure_rate: float
    failure_se: float
    objective_gap: "MonteCarloEstimate"  # fractional minus integral objective
    drift: np.ndarray  # (trials, n_offline) max over arrivals of l^A - l^A'
    theta_a: np.ndarray  # (trials, n_offline) enhanced budgets theta' + delta
    p_max: float

    def tail(self, t: float) -> tuple[float, float, float]:
        """(empirical Pr[drift >= t], its SE, mean maximal-Bernstein bound) over (trial, vertex) pairs."""
        hit = (self.drift >= t).ravel().astype(float)
        # a vertex's load variance is at most p_max times the load it can reach
        bound = maximal_bernstein_bound(t, self.p_max, self.p_max * self.theta_a.ravel())
        return float(hit.mean()), float(hit.std(ddof=1) / math.sqrt(hit.size)), float(bound.mean())


def rounding_experiment(inst: Instance, f: PotentialTable, delta: float, trials: int, seed: int,
                        workers: int = 1) -> RoundingSummary:
    res = map_trials(lambda t: round_fractional_to_integral(inst, f, delta, seed, t), trials, workers)
    fails = np.array([r.failed for r in res], float)
    gaps = [r.fractional_objective - r.integral_objective for r in res]
    return RoundingSummary(float(fails.mean()), float(fails.std(ddof=1) / math.sqrt(trials)),
                           MonteCarloEstimate.from_samples(gaps, seed), np.array([r.max_drift for r in res]),
                           np.array([r.theta_int + delta for r in res]), inst.p_max)


def coupling_gap(inst: Instance, algorithm: str, trials: int, seed: int, f: PotentialTable | None = None,
                 workers: int = 1) -> MonteCarloEstimate:
    """Per-trial overshoot gap of the reward/budget coupling; its mean is E[rewards] - E[budget]."""
    gaps = map_trials(lambda t: couple_reward_to_budget(inst, algorithm, seed, t, f).overshoot_gap, trials, workers)
    return MonteCarloEstimate.from_samples(gaps, seed)


# ---------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    se: float
    trials: int
    seed: int
    samples: np.ndarray = field(repr=False, compare=False, default=None)

    @classmethod
    def from_samples(cls, xs, seed: int) -> "MonteCarloEstimate":
        xs = np.asarray(xs, float)
        se = float(xs.std(ddof=1) / math.sqrt(xs.size)) if xs.size > 1 else float("nan")
        return cls(float(xs.mean()), se, int(xs.size), int(seed), xs)


@dataclass(frozen=True)
class AlgoConfig:
    algorithm: str = "sb"  # sb | weighted | greedy | fractional | rounded
    model: str = "budget"  # budget | rewards
    potential: str = "equal-closed"
    law: str = "exponential"
    delta: float | None = None  # rounding slack; default_delta when None
    dual_rule: str = "point"


def run_trial(inst: Instance, cfg: AlgoConfig, f: PotentialTable, seed: int, trial: int):
    """One trial: returns (objective, trace-like object)."""
    if cfg.algorithm == "rounded":
        delta = cfg.delta if cfg.delta is not None else default_delta(inst.p_max, inst.n_offline)
        r = round_fractional_to_integral(inst, f, delta, seed, trial)
        return r.integral_objective, r
    if cfg.model == "rewards":
        u = substream(seed, trial, "rewards").random(inst.n_online)
        tr = run_integral(inst, cfg.algorithm, None, f, model="rewards", uniforms=u, dual_rule=cfg.dual_rule)
        return tr.objective, tr
    th = sample_thresholds(inst, cfg.law, substream(seed, trial, "thresholds")).values
    if cfg.algorithm == "fractional":
        tr = run_fractional(inst, th, f)
    else:
        tr = run_integral(inst, cfg.algorithm, th, f, dual_rule=cfg.dual_rule)
    return tr.objective, tr


def map_trials(fn, trials: int, workers: int = 1) -> list:
    """fn(trial) for every trial, reduced in trial order regardless of ``workers``."""
    if workers <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(trials)))


def estimate_ratio(inst: Instance, cfg: AlgoConfig, trials: int, seed: int, opt: float | None = None,
                   f: PotentialTable | None = None, workers: int = 1) -> MonteCarloEstimate:
    """Mean of objective / StdLP optimum over independent trials."""
    if opt is None:
        from .benchmark import std_lp_opt
        opt = std_lp_opt(inst)
    if opt <= 0:
        raise ValueError("LP optimum is zero; ratio undefined")
    f = f if f is not None else load_potential(cfg.potential)
    objs = map_trials(lambda t: run_trial(inst, cfg, f, seed, t)[0], trials, workers)
    return MonteCarloEstimate.from_samples(np.array(objs) / opt, seed)


# ---------------------------------------------------------------- experiment files

EXPERIMENT_KEYS = ("instance", "algorithm", "potential", "law", "trials", "seed", "delta")


def read_experiment(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    unknown = set(doc) - set(EXPERIMENT_KEYS) - {"model"}
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    if "instance" not in doc:
        raise ValueError(f"{path}: missing field 'instance'")
    return doc


def run_experiment(doc: dict, base_dir=".", workers: int = 1):
    """Returns (rows, summary) where rows are (trial, objective, opt, ratio)."""
    from .benchmark import std_lp_opt
    inst = read_instance(Path(base_dir) / doc["instance"])
    cfg = AlgoConfig(doc.get("algorithm", "sb"), doc.get("model", "budget"), doc.get("potential", "equal-closed"),
                     doc.get("law", "exponential"), doc.get("delta"))
    trials, seed = int(doc.get("trials", 1000)), int(doc.get("seed", 0))
    opt = std_lp_opt(inst)
    f = load_potential(cfg.potential)
    objs = map_trials(lambda t: run_trial(inst, cfg, f, seed, t)[0], trials, workers)
    rows = [(t, o, opt, o / opt) for t, o in enumerate(objs)]
    return rows, MonteCarloEstimate.from_samples([r[3] for r in rows], seed)


def write_results_csv(rows, summary: MonteCarloEstimate, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "objective", "opt", "ratio"])
        for t, o, opt, r in rows:
            w.writerow([t, f"{o:.12g}", f"{opt:.12g}", f"{r:.12g}"])
        w.writerow(["mean", "", "", f"{summary.mean:.12g}"])
        w.writerow(["se", "", "", f"{summary.se:.12g}"])
