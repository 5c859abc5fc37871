"""Online algorithms with primal-dual bookkeeping.

Integral algorithms (Stochastic Balance, the weighted order-based rule,
greedy) run in either the budget model or the original stochastic-rewards
model.  The fractional algorithm runs in the budget model only.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .instance import Instance
from .potential import PotentialTable, equal_closed_table

ALGORITHMS = ("sb", "weighted", "greedy")
_ALGO_CODE = {"sb": K.SB, "weighted": K.WEIGHTED, "greedy": K.GREEDY}


class AlgorithmError(ValueError):
    pass


@dataclass(eq=False)
class RunTrace:
    """Everything a single run produced.  Per-arrival arrays are indexed by online position."""

    algorithm: str
    model: str
    inst: Instance
    thresholds: np.ndarray | None
    matched: np.ndarray | None  # offline index per arrival, -1 if unmatched (integral runs)
    x: np.ndarray | None  # fraction per CSR edge (fractional runs)
    gain: np.ndarray  # primal increment per arrival (capped at thresholds in the budget model)
    beta: np.ndarray
    alpha_inc: np.ndarray
    alpha: np.ndarray
    loads: np.ndarray
    successful: np.ndarray
    load_after: np.ndarray | None = None
    loads_history: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        if self.model == "rewards":
            return float(np.dot(self.inst.weights, self.successful))
        return float(self.gain.sum())

    @property
    def capped_objective(self) -> float:
        """sum_u w_u min(l_u, theta_u); equals ``objective`` in the budget model."""
        th = self.thresholds if self.thresholds is not None else np.full(self.loads.size, np.inf)
        return float(np.dot(self.inst.weights, np.minimum(self.loads, th)))

    @property
    def dual_total(self) -> float:
        return float(self.alpha.sum() + self.beta.sum())

    def fractions(self, j: int) -> dict[str, float]:
        c = self.inst.csr
        ids = self.inst.offline_ids
        if self.x is None:
            u = self.matched[j]
            return {} if u < 0 else {ids[u]: 1.0}
        sl = slice(c.indptr[j], c.indptr[j + 1])
        return {ids[u]: float(xv) for u, xv in zip(c.u[sl], self.x[sl]) if xv > 0}

    def to_csv(self, path) -> None:
        ids = self.inst.offline_ids
        alpha_total = np.cumsum(self.alpha_inc)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["arrival_id", "matched_to", "load_after", "alpha_total", "beta_v"])
            for j, v in enumerate(self.inst.online):
                if self.x is None:
                    u = self.matched[j]
                    to = "" if u < 0 else ids[u]
                    la = "" if u < 0 else f"{self.load_after[j]:.12g}"
                else:
                    fr = self.fractions(j)
                    to = ";".join(f"{k}:{val:.12g}" for k, val in fr.items())
                    la = ";".join(f"{self.loads_history[j + 1, self.inst.offline_index[k]]:.12g}" for k in fr) \
                        if self.loads_history is not None else ""
                w.writerow([v, to, la, f"{alpha_total[j]:.12g}", f"{self.beta[j]:.12g}"])


def _table_args(f: PotentialTable):
    h, fv, cumf, cumq = f.kernel_arrays()
    return h, fv, np.ascontiguousarray(1.0 - fv), cumf, cumq


def _thresholds(inst: Instance, thresholds) -> np.ndarray:
    th = np.full(inst.n_offline, np.inf) if thresholds is None else np.asarray(getattr(thresholds, "values", thresholds), float)
    if th.shape != (inst.n_offline,):
        raise AlgorithmError(f"need {inst.n_offline} thresholds, got shape {th.shape}")
    return np.ascontiguousarray(th)


def run_integral(inst: Instance, algorithm: str, thresholds=None, f: PotentialTable | None = None,
                 model: str = "budget", uniforms=None, dual_rule: str = "point",
                 record_loads: bool = False) -> RunTrace:
    """Shared driver for the integral algorithms.

    ``dual_rule='point'`` charges alpha_u += w c f(l_u), beta_v = w c (1 - f(l_u)) for the
    (capped) gain c of an attempt; ``'integral'`` charges w times the integrals of f and
    1 - f over the covered load segment, which keeps alpha_u = w_u F(l_u) exactly.
    """
    if algorithm not in _ALGO_CODE:
        raise AlgorithmError(f"unknown algorithm {algorithm!r}")
    if model not in ("budget", "rewards"):
        raise AlgorithmError(f"unknown model {model!r}")
    if algorithm in ("sb", "weighted") and not inst.has_equal_probabilities():
        raise AlgorithmError(f"{algorithm} requires equal edge probabilities")
    if f is None:
        f = equal_closed_table()
    c = inst.csr
    th = _thresholds(inst, thresholds) if model == "budget" else np.full(inst.n_offline, np.inf)
    if model == "rewards":
        if uniforms is None:
            raise AlgorithmError("rewards model needs one uniform draw per arrival")
        uniforms = np.ascontiguousarray(uniforms, dtype=float)
    else:
        uniforms = np.zeros(inst.n_online)
    out = K.run_integral(c.indptr, c.u, c.p, inst.weights, inst.lex_rank, th, _ALGO_CODE[algorithm],
                         K.BUDGET if model == "budget" else K.REWARDS, uniforms, *_table_args(f),
                         K.POINT_RULE if dual_rule == "point" else K.INTEGRAL_RULE, record_loads)
    matched, gain, beta, alpha_inc, load_after, alpha, loads, succ, prior, succ_p, hist = out
    return RunTrace(algorithm, model, inst, th if model == "budget" else None, matched, None, gain, beta,
                    alpha_inc, alpha, loads, succ, load_after, hist if record_loads else None,
                    {"prior_load": prior, "success_p": succ_p, "potential": f})


def run_stochastic_balance(inst: Instance, thresholds=None, f: PotentialTable | None = None, **kw) -> RunTrace:
    return run_integral(inst, "sb", thresholds, f, **kw)


def run_weighted_order_based(inst: Instance, thresholds, f: PotentialTable, **kw) -> RunTrace:
    return run_integral(inst, "weighted", thresholds, f, **kw)


def run_greedy(inst: Instance, thresholds=None, f: PotentialTable | None = None, **kw) -> RunTrace:
    return run_integral(inst, "greedy", thresholds, f, **kw)


def run_rewards_model(inst: Instance, algorithm: str, rng, f: PotentialTable | None = None, **kw) -> RunTrace:
    """Original semantics: each attempt on (u, v) succeeds independently with probability p_uv."""
    rng = np.random.default_rng(rng)
    return run_integral(inst, algorithm, None, f, model="rewards", uniforms=rng.random(inst.n_online), **kw)


def run_fractional(inst: Instance, thresholds, f: PotentialTable, record_loads: bool = False) -> RunTrace:
    c = inst.csr
    th = _thresholds(inst, thresholds)
    x, dl, gain, beta, alpha_inc, alpha, loads, hist = K.run_fractional(
        c.indptr, c.u, c.p, inst.weights, th, *_table_args(f), record_loads)
    return RunTrace("fractional", "budget", inst, th, None, x, gain, beta, alpha_inc, alpha, loads,
                    loads >= th, None, hist if record_loads else None, {"dl": dl, "potential": f})
