"""Independent oracles for the structural properties, checked by exact replay."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algorithms import run_fractional
from .instance import Instance
from .potential import PotentialTable


# ---------------------------------------------------------------- copies graph (equal probabilities)

class CopiesGraph:
    """Offline vertex u with c_u copies (u, 0), (u, p), ...; each arrival takes the
    highest-ranked available copy among its neighbors.

    Ranks are total orders on (u, k) where k indexes the copy at load k*p:
    ``"sb"`` ranks by (k, id); ``"weighted"`` by (-w_u (1 - f(k p)), k, id).
    Plain Python on purpose: it shares no code with the compiled kernels.
    """

    def __init__(self, inst: Instance, rule: str = "sb", f: PotentialTable | None = None):
        if not inst.has_equal_probabilities():
            raise ValueError("copies graph needs equal probabilities")
        self.inst = inst
        self.p = inst.p_max
        self.rule = rule
        self.f = f
        self.w = dict(inst.offline)
        self.nbrs = {v: sorted({u for (u, vv) in inst.edges if vv == v}) for v in inst.online}

    def key(self, u: str, k: int):
        if self.rule == "sb":
            return (k, u)
        score = self.w[u] * (1.0 - float(self.f(k * self.p)))
        return (-score, k, u)

    def match(self, copies: dict[str, float]) -> list[tuple[str, int] | None]:
        """Per arrival, the copy taken (or None).  ``copies[u]`` may be ``inf``."""
        used = {u: 0 for u in self.w}
        out = []
        for v in self.inst.online:
            cands = [(self.key(u, used[u]), u) for u in self.nbrs[v] if used[u] < copies[u]]
            if not cands:
                out.append(None)
                continue
            _, u = min(cands)
            out.append((u, used[u]))
            used[u] += 1
        return out

    def good_set(self, matching, u: str, k_inf: int) -> set[str]:
        """Arrivals matched to copies ranked strictly above (u, k_inf)."""
        ref = self.key(u, k_inf)
        return {v for v, m in zip(self.inst.online, matching) if m is not None and self.key(*m) < ref}


@dataclass(frozen=True)
class StructuralCheck:
    u: str
    k_inf: int
    k_theta: int
    sym_diff: int

    @property
    def bound(self) -> int:
        return self.k_inf - self.k_theta

    @property
    def ok(self) -> bool:
        return self.sym_diff <= self.bound


def check_equal_structural(inst: Instance, copies: dict[str, float], u: str, k_theta: int,
                           rule: str = "sb", f: PotentialTable | None = None) -> StructuralCheck | None:
    """Compare good sets with u's copies unlimited versus k_theta copies.

    Returns None when k_theta >= l_u^inf / p (the two runs coincide).
    """
    g = CopiesGraph(inst, rule, f)
    base = dict(copies)
    base[u] = float("inf")
    m_inf = g.match(base)
    k_inf = sum(1 for m in m_inf if m is not None and m[0] == u)
    if k_theta >= k_inf:
        return None
    cut = dict(copies)
    cut[u] = k_theta
    m_cut = g.match(cut)
    d = g.good_set(m_inf, u, k_inf) ^ g.good_set(m_cut, u, k_inf)
    return StructuralCheck(u, k_inf, k_theta, len(d))


# ---------------------------------------------------------------- fractional replays (unequal probabilities)

@dataclass(frozen=True)
class ReplayCheck:
    load_violation: float  # max over (arrival, u' != u) of l_u'(theta_hi) - l_u'(theta_lo)
    beta_violation: float  # max over v of beta_v(theta_lo) - beta_v(theta_hi)
    structural_slack: float  # min over subsets S of the unequal structural inequality slack


def replay_fractional(inst: Instance, f: PotentialTable, theta: np.ndarray, u: int, theta_lo: float,
                      theta_hi: float, subsets: list[np.ndarray] = ()) -> ReplayCheck:
    """Run the fractional algorithm twice, differing only in theta_u (theta_lo < theta_hi).

    The structural inequality is checked against the theta_u = inf run:
    sum_S beta(theta_lo) >= sum_S beta(inf) - w_u int_{theta_lo}^{l_u^inf} (1 - f).
    """
    th_hi, th_lo, th_inf = theta.copy(), theta.copy(), theta.copy()
    th_hi[u], th_lo[u], th_inf[u] = theta_hi, theta_lo, np.inf
    a = run_fractional(inst, th_hi, f, record_loads=True)
    b = run_fractional(inst, th_lo, f, record_loads=True)
    others = np.arange(inst.n_offline) != u
    load_v = float(np.max(a.loads_history[:, others] - b.loads_history[:, others], initial=0.0))
    beta_v = float(np.max(b.beta - a.beta, initial=0.0))
    slack = np.inf
    if len(subsets):
        c = run_fractional(inst, th_inf, f)
        l_inf = c.loads[u]
        allow = inst.weights[u] * max(0.0, float(f.C(l_inf) - f.C(min(theta_lo, l_inf))))
        for S in subsets:
            slack = min(slack, float(b.beta[S].sum() - (c.beta[S].sum() - allow)))
    return ReplayCheck(load_v, beta_v, float(slack))
