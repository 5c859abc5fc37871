"""LP benchmarks and the dual-feasibility auditor."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .algorithms import run_fractional, run_integral
from .instance import Instance
from .potential import PotentialTable
from .simplex import LpProblem, LpResult, linprog_max, simplex_solve  # noqa: F401  (re-exported)
from .simulate import AlgoConfig, map_trials, sample_thresholds, substream

CONFIG_LP_MAX_NEIGHBORS = 12


def _online_groups(inst: Instance):
    """Online vertices with identical (neighbor, probability) lists, as (edges, multiplicity)."""
    c = inst.csr
    groups: dict[tuple, int] = {}
    for j in range(inst.n_online):
        sl = slice(c.indptr[j], c.indptr[j + 1])
        key = tuple(zip(c.u[sl].tolist(), c.p[sl].tolist()))
        if key:
            groups[key] = groups.get(key, 0) + 1
    return list(groups.items())


def std_lp_solve(inst: Instance) -> LpResult:
    """Standard matching LP.  Identical online vertices are merged into one with capacity equal to
    their multiplicity, which leaves the optimum unchanged and keeps the tableau small."""
    groups = _online_groups(inst)
    cols = [(g, u, p) for g, (edges, _) in enumerate(groups) for u, p in edges]
    nv = len(cols)
    if nv == 0:
        return LpResult(0.0, np.zeros(0), np.zeros(0), 0)
    w = inst.weights
    cost = np.array([w[u] * p for _, u, p in cols])
    A = np.zeros((inst.n_offline + len(groups), nv))
    b = np.concatenate([np.ones(inst.n_offline), [float(k) for _, k in groups]])
    for i, (g, u, p) in enumerate(cols):
        A[u, i] = p
        A[inst.n_offline + g, i] = 1.0
    return linprog_max(cost, A, b)


def std_lp_opt(inst: Instance) -> float:
    return float(std_lp_solve(inst).value)


def config_lp_opt_bruteforce(inst: Instance) -> float:
    """Configuration LP with every (u, S) column enumerated."""
    nbrs = {}
    for (u, v) in inst.edges:
        nbrs.setdefault(u, []).append(v)
    if any(len(vs) > CONFIG_LP_MAX_NEIGHBORS for vs in nbrs.values()):
        raise ValueError(f"a neighborhood exceeds {CONFIG_LP_MAX_NEIGHBORS} vertices; brute force refused")
    vi = inst.online_index
    cols, cost = [], []
    for u, w in inst.offline:
        vs = sorted(nbrs.get(u, []))
        for r in range(1, len(vs) + 1):
            for S in itertools.combinations(vs, r):
                cols.append((u, S))
                cost.append(w * min(1.0, sum(inst.edges[(u, v)] for v in S)))
    if not cols:
        return 0.0
    ui = inst.offline_index
    A = np.zeros((inst.n_offline + inst.n_online, len(cols)))
    for i, (u, S) in enumerate(cols):
        A[ui[u], i] = 1.0
        for v in S:
            A[inst.n_offline + vi[v], i] = 1.0
    return float(linprog_max(np.array(cost), A, np.ones(A.shape[0])).value)


# ---------------------------------------------------------------- audits

@dataclass(frozen=True)
class PairEstimate:
    u: str
    S: tuple[str, ...]
    p_uS: float
    est: float
    se: float
    ratio: float
    ratio_se: float
    source: str


@dataclass(eq=False)
class AuditReport:
    gamma: float
    pairs: list[PairEstimate]
    trials: int
    mode: str
    max_primal_dual_gap: float
    violations: list[str] = field(default_factory=list)

    @property
    def worst(self) -> PairEstimate:
        return min(self.pairs, key=lambda e: e.ratio)

    @property
    def min_ratio(self) -> float:
        return self.worst.ratio

    @property
    def min_ratio_se(self) -> float:
        return self.worst.ratio_se

    def passes(self, tol: float, se_mult: float = 3.0) -> bool:
        return self.min_ratio >= self.gamma - tol - se_mult * self.min_ratio_se

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["u", "S_size", "p_uS", "est", "se", "ratio"])
            for e in self.pairs:
                w.writerow([e.u, len(e.S), f"{e.p_uS:.12g}", f"{e.est:.12g}", f"{e.se:.12g}", f"{e.ratio:.12g}"])

    def summary(self) -> str:
        b = self.worst
        lines = [
            f"audit mode      : {self.mode}",
            f"pairs, trials   : {len(self.pairs)}, {self.trials}",
            f"gamma           : {self.gamma:.6f}",
            f"min ratio       : {b.ratio:.6f} (se {b.ratio_se:.6f}) at u={b.u}, |S|={len(b.S)}, p_u(S)={b.p_uS:.4f} [{b.source}]",
            f"primal-dual gap : {self.max_primal_dual_gap:.3e}",
        ]
        lines += [f"violation       : {v}" for v in self.violations]
        return "\n".join(lines)


def sample_pairs(inst: Instance, n_pairs: int, rng) -> list[tuple[str, tuple[str, ...], str]]:
    """Half uniform random subsets, half structured suspects (N_u, top-p prefix, unit-mass
    prefixes and suffixes in arrival order)."""
    rng = np.random.default_rng(rng)
    offl = [u for u in inst.offline_ids if any(True for _ in _nbrs(inst, u))]
    if not offl:
        return []
    structured = []
    for u in offl:
        vs = _nbrs(inst, u)
        ps = [inst.edges[(u, v)] for v in vs]
        structured.append((u, tuple(vs), "full"))
        order = sorted(range(len(vs)), key=lambda i: -ps[i])
        structured.append((u, _unit_prefix([vs[i] for i in order], [ps[i] for i in order]), "top-p"))
        structured.append((u, _unit_prefix(vs, ps), "first-arrivals"))
        structured.append((u, _unit_prefix(vs[::-1], ps[::-1]), "last-arrivals"))
    n_struct = min(len(structured), n_pairs - n_pairs // 2)
    pick = rng.choice(len(structured), n_struct, replace=False) if n_struct < len(structured) else range(len(structured))
    out = [structured[i] for i in pick]
    while len(out) < n_pairs:
        u = offl[rng.integers(len(offl))]
        vs = _nbrs(inst, u)
        mask = rng.random(len(vs)) < rng.random()
        if not mask.any():
            mask[rng.integers(len(vs))] = True
        out.append((u, tuple(v for v, m in zip(vs, mask) if m), "random"))
    return out


def _nbrs(inst: Instance, u: str) -> list[str]:
    cache = inst.__dict__.setdefault("_nbr_cache", {})
    if not cache:
        for v in inst.online:
            for uu in inst.offline_neighbors(v):
                cache.setdefault(uu, []).append(v)
    return cache.get(u, [])


def _unit_prefix(vs, ps) -> tuple[str, ...]:
    out, tot = [], 0.0
    for v, p in zip(vs, ps):
        out.append(v)
        tot += p
        if tot >= 1.0 - 1e-12:
            break
    return tuple(out)


def _run_duals(inst: Instance, cfg: AlgoConfig, f: PotentialTable, theta: np.ndarray):
    if cfg.algorithm == "fractional":
        tr = run_fractional(inst, theta, f)
    else:
        tr = run_integral(inst, cfg.algorithm, theta, f, dual_rule=cfg.dual_rule)
    gap = np.max(np.abs(np.cumsum(tr.gain) - np.cumsum(tr.alpha_inc + tr.beta)), initial=0.0)
    return tr.alpha, tr.beta, gap


def audit_dual_feasibility(inst: Instance, cfg: AlgoConfig, f: PotentialTable, pairs: int, trials: int,
                           seed: int, mode: str = "unconditional", fixed_u: str | None = None,
                           gamma: float | None = None, workers: int = 1) -> AuditReport:
    """Estimate E[alpha_u + sum_{v in S} beta_v] / (w_u p_u(S)) for sampled pairs.

    ``mode='conditional'`` fixes theta_{-u} from one draw and resamples only
    theta_u of ``fixed_u`` (default: the first sampled u), auditing that u's pairs.
    """
    if mode not in ("unconditional", "conditional"):
        raise ValueError(f"unknown audit mode {mode!r}")
    prng = substream(seed, 0, "audit-pairs")
    plist = sample_pairs(inst, pairs, prng)
    if mode == "conditional":
        fixed_u = fixed_u or plist[0][0]
        plist = [pr for pr in plist if pr[0] == fixed_u] or [(fixed_u, tuple(_nbrs(inst, fixed_u)), "full")]
        base = sample_thresholds(inst, cfg.law, substream(seed, 0, "audit-base")).values
        ui = inst.offline_index[fixed_u]
    ui_map, vi_map = inst.offline_index, inst.online_index
    w = inst.weights
    idx = [(ui_map[u], np.array([vi_map[v] for v in S], dtype=np.int64)) for u, S, _ in plist]
    mass = np.array([min(1.0, sum(inst.edges[(u, v)] for v in S)) for u, S, _ in plist])

    def one(t):
        if mode == "conditional":
            th = base.copy()
            th[ui] = sample_thresholds(1, cfg.law, substream(seed, t, "audit-theta-u")).values[0]
        else:
            th = sample_thresholds(inst, cfg.law, substream(seed, t, "audit-theta")).values
        a, b, gap = _run_duals(inst, cfg, f, th)
        return np.array([a[u] + b[S].sum() for u, S in idx]), gap

    res = map_trials(one, trials, workers)
    vals = np.array([r[0] for r in res])
    max_gap = max(r[1] for r in res)
    est = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.full(len(plist), np.nan)
    out = []
    for k, (u, S, src) in enumerate(plist):
        denom = w[ui_map[u]] * mass[k]
        if denom <= 0:
            continue  # ratio undefined
        out.append(PairEstimate(u, S, float(mass[k]), float(est[k]), float(se[k]), float(est[k] / denom),
                                float(se[k] / denom), src))
    G = f.gamma if gamma is None else gamma
    viol = []
    if max_gap > 1e-9:
        viol.append(f"primal-dual equality off by {max_gap:.3e}")
    return AuditReport(G, out, trials, mode, float(max_gap), viol)


@dataclass(frozen=True)
class StdLpReport:
    inf_lhs: float
    argmin: float
    lhs_at_zero: float


def audit_std_lp(f: PotentialTable, l_max: float = 10.0, n: int = 10001) -> StdLpReport:
    """inf over l in [0, l_max] of int_0^l e^{-t} f(t) dt + e^{-l}(1 - f(l))."""
    ls = np.linspace(0.0, l_max, n)
    lhs = f.E(ls) + np.exp(-ls) * (1 - f(ls))
    i = int(np.argmin(lhs))
    return StdLpReport(float(lhs[i]), float(ls[i]), float(lhs[0]))
