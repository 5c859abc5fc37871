"""Dense two-phase simplex on a compact (nonbasic-columns-only) tableau.

Pricing is Dantzig's rule; after ``m`` consecutive pivots without objective
progress the solver switches to Bland's rule until progress resumes.  Once
the optimal basis is found the primal and dual solutions are recomputed
from the original data by direct solves against the basis matrix, so the
reported residuals do not carry the round-off accumulated over pivots.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dger

PIVOT_TOL = 1e-11
COST_TOL = 1e-10
FEAS_TOL = 1e-9


class LpError(Exception):
    pass


class LpInfeasible(LpError):
    pass


class LpUnbounded(LpError):
    pass


class LpIterationLimit(LpError):
    pass


@dataclass
class LpProblem:
    """``maximize`` (or minimize) ``c @ x`` subject to ``A x (sense) b`` and bounds.

    ``senses`` holds one of ``"<="``, ``">="``, ``"=="`` per row.  Bounds
    default to ``0 <= x < inf``; use ``-np.inf`` for free variables.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: list[str]
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    maximize: bool = True

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.senses = list(self.senses)
        m = self.A.shape[0]
        if self.b.size != m or len(self.senses) != m:
            raise ValueError(f"dimension mismatch: A has {m} rows, b {self.b.size}, senses {len(self.senses)}")
        bad = set(self.senses) - {"<=", ">=", "=="}
        if bad:
            raise ValueError(f"unknown row senses {sorted(bad)}")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ValueError("LP coefficients must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("variable lower bound exceeds upper bound")

    @property
    def shape(self):
        return self.A.shape


@dataclass
class LpResult:
    value: float
    x: np.ndarray
    duals: np.ndarray  # one per row of the original problem, sign convention of `maximize`
    iterations: int
    bland_pivots: int = 0
    basis: np.ndarray = field(default=None, repr=False)


class _StandardForm:
    """min c'z  s.t.  M z = r, z >= 0, r >= 0, plus the map back to x."""

    def __init__(self, lp: LpProblem):
        m, n = lp.A.shape
        cols = []       # (kind, index, sign) per standard column
        shift = np.zeros(n)
        A_cols = []
        cost = []
        sgn = -1.0 if lp.maximize else 1.0
        extra_rows = []  # (col position, bound) for finite two-sided ranges
        for j in range(n):
            lo, hi = lp.lower[j], lp.upper[j]
            a = lp.A[:, j]
            if np.isfinite(lo):
                shift[j] = lo
                cols.append((j, 1.0))
                A_cols.append(a)
                cost.append(sgn * lp.c[j])
                if np.isfinite(hi):
                    extra_rows.append((len(cols) - 1, hi - lo))
            elif np.isfinite(hi):
                shift[j] = hi
                cols.append((j, -1.0))
                A_cols.append(-a)
                cost.append(-sgn * lp.c[j])
            else:
                cols.append((j, 1.0))
                A_cols.append(a)
                cost.append(sgn * lp.c[j])
                cols.append((j, -1.0))
                A_cols.append(-a)
                cost.append(-sgn * lp.c[j])
        nz = len(cols)
        A = np.column_stack(A_cols) if A_cols else np.zeros((m, 0))
        b = lp.b - lp.A @ shift
        senses = list(lp.senses)
        if extra_rows:
            ext = np.zeros((len(extra_rows), nz))
            for k, (pos, ub) in enumerate(extra_rows):
                ext[k, pos] = 1.0
            A = np.vstack([A, ext])
            b = np.concatenate([b, [ub for _, ub in extra_rows]])
            senses += ["<="] * len(extra_rows)
        rows = A.shape[0]
        # row flips so that rhs >= 0
        flip = np.where(b < 0, -1.0, 1.0)
        A = A * flip[:, None]
        b = b * flip
        senses = [
            s if f > 0 else {"<=": ">=", ">=": "<=", "==": "=="}[s] for s, f in zip(senses, flip)
        ]
        # slack (+1 for <=) and surplus (-1 for >=) columns
        slack_cols = []
        for i, s in enumerate(senses):
            if s in ("<=", ">="):
                col = np.zeros(rows)
                col[i] = 1.0 if s == "<=" else -1.0
                slack_cols.append(col)
        n_slack = len(slack_cols)
        self.M = np.hstack([A, np.column_stack(slack_cols)]) if n_slack else A
        self.cost = np.concatenate([cost, np.zeros(n_slack)])
        self.r = b
        self.senses = senses
        self.flip = flip
        self.cols = cols
        self.shift = shift
        self.n_struct = nz
        self.n_orig = n
        self.m_orig = m
        self.sign = sgn
        # initial basis: slack of each <= row, artificial otherwise
        self.slack_of_row = {}
        k = nz
        for i, s in enumerate(senses):
            if s in ("<=", ">="):
                self.slack_of_row[i] = k
                k += 1

    def recover_x(self, z):
        x = self.shift.copy()
        for k, (j, s) in enumerate(self.cols):
            x[j] += s * z[k]
        return x


def _pivot(T, r, s):
    # T is Fortran-ordered so the rank-one update runs in place
    piv = T[r, s]
    col = T[:, s].copy()
    row = T[r, :] / piv
    dger(-1.0, col, row, a=T, overwrite_a=1)
    T[r, :] = row
    T[:, s] = -col / piv
    T[r, s] = 1.0 / piv


def _run(T, basis, nonbasis, allowed, max_iter, it0):
    """Minimize the objective stored in the last row of ``T`` (entries are reduced costs)."""
    m = T.shape[0] - 1
    it = it0
    stall = 0
    bland = False
    bland_count = 0
    best = T[m, -1]
    while True:
        d = T[m, :-1]
        if d.size == 0:
            return it, bland_count
        if bland:
            cand = np.flatnonzero((d < -COST_TOL) & allowed)
            if cand.size == 0:
                return it, bland_count
            s = cand[np.argmin(nonbasis[cand])]
        else:
            dd = np.where(allowed, d, 0.0)
            s = int(np.argmin(dd))
            if dd[s] >= -COST_TOL:
                return it, bland_count
        col = T[:m, s]
        pos = col > PIVOT_TOL
        if not np.any(pos):
            raise LpUnbounded(f"unbounded direction along column {nonbasis[s]}")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / col[pos]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + 1e-12 * max(1.0, abs(rmin)))
        if bland:
            r = ties[np.argmin(basis[ties])]
        else:
            r = ties[np.argmax(col[ties])]
        _pivot(T, r, s)
        basis[r], nonbasis[s] = nonbasis[s], basis[r]
        it += 1
        if bland:
            bland_count += 1
        if it - it0 > max_iter:
            raise LpIterationLimit(f"no convergence after {max_iter} pivots")
        # objective row stores -z; progress means the rhs entry increased
        if T[m, -1] > best + 1e-12 * max(1.0, abs(best)):
            best = T[m, -1]
            stall = 0
            bland = False
        else:
            stall += 1
            if stall > m:
                bland = True


def simplex_solve(lp: LpProblem, max_iter: int | None = None) -> LpResult:
    sf = _StandardForm(lp)
    M, r, cost = sf.M, sf.r, sf.cost
    m, ntot = M.shape
    max_iter = max_iter or 50 * (m + ntot) + 1000

    basis = np.empty(m, dtype=np.int64)
    art_rows = []
    for i in range(m):
        if sf.senses[i] == "<=":
            basis[i] = sf.slack_of_row[i]
        else:
            art_rows.append(i)
    n_art = len(art_rows)
    art_ids = np.arange(ntot, ntot + n_art)
    basis[art_rows] = art_ids
    is_slack_basic = np.zeros(ntot, dtype=bool)
    is_slack_basic[basis[basis < ntot]] = True
    nonbasis = np.flatnonzero(~is_slack_basic)
    # Compact tableau: rows = basic variables (+ objective row), columns = nonbasic (+ rhs).
    T = np.zeros((m + 1, nonbasis.size + 1), order="F")
    T[:m, :-1] = M[:, nonbasis]
    T[:m, -1] = r

    it = 0
    bland_total = 0
    if n_art:
        T[m, :] = -T[art_rows, :].sum(axis=0)
        allowed = np.ones(nonbasis.size, dtype=bool)
        it, bc = _run(T, basis, nonbasis, allowed, max_iter, it)
        bland_total += bc
        if -T[m, -1] > FEAS_TOL * max(1.0, np.abs(r).max(initial=0.0)):
            raise LpInfeasible(f"phase 1 ended with infeasibility {-T[m, -1]:.3e}")
        # drive remaining artificials out of the basis
        for i in np.flatnonzero(basis >= ntot):
            cand = np.flatnonzero((np.abs(T[i, :-1]) > 1e-9) & (nonbasis < ntot))
            if cand.size:
                s = cand[np.argmax(np.abs(T[i, cand]))]
                _pivot(T, i, s)
                basis[i], nonbasis[s] = nonbasis[s], basis[i]
                it += 1
        keep_rows = np.flatnonzero(basis < ntot)  # rows still holding artificials are redundant
        keep_cols = np.flatnonzero(nonbasis < ntot)
        T = np.asfortranarray(np.vstack([T[keep_rows][:, np.append(keep_cols, T.shape[1] - 1)],
                                         np.zeros((1, keep_cols.size + 1))]))
        basis = basis[keep_rows]
        nonbasis = nonbasis[keep_cols]
        m_eff = keep_rows.size
    else:
        keep_rows = np.arange(m)
        m_eff = m

    # phase 2 objective row: reduced costs d_N = c_N - c_B B^-1 N, and -z in the rhs slot
    cB = cost[basis]
    T[m_eff, :-1] = cost[nonbasis] - cB @ T[:m_eff, :-1]
    T[m_eff, -1] = -(cB @ T[:m_eff, -1])
    allowed = np.ones(nonbasis.size, dtype=bool)
    it, bc = _run(T, basis, nonbasis, allowed, max_iter, it)
    bland_total += bc

    # Recompute the vertex from the original data for clean residuals.
    B = M[keep_rows][:, basis]
    zB = np.linalg.solve(B, r[keep_rows])
    z = np.zeros(ntot)
    z[basis] = np.maximum(zB, 0.0)
    yk = np.linalg.solve(B.T, cost[basis])
    y_std = np.zeros(m)
    y_std[keep_rows] = yk
    x = sf.recover_x(z[: sf.n_struct])
    # duals of the user's rows: undo row flips and the min/max sign change
    duals = (y_std[: sf.m_orig] * sf.flip[: sf.m_orig]) * sf.sign
    value = float(lp.c @ x)
    return LpResult(value=value, x=x, duals=duals, iterations=it, bland_pivots=bland_total, basis=basis)


def complementary_slackness(lp: LpProblem, res: LpResult) -> float:
    """Largest violation of |y_i * slack_i| and |reduced_cost_j * (x_j - bound_j)|.

    Only meaningful for problems whose variables all have finite lower bounds.
    """
    slack = lp.b - lp.A @ res.x
    row_cs = np.abs(res.duals * slack)
    red = lp.c - lp.A.T @ res.duals
    gap = np.where(np.isfinite(lp.lower), res.x - lp.lower, 0.0)
    up_gap = np.where(np.isfinite(lp.upper), lp.upper - res.x, np.inf)
    col_cs = np.abs(red) * np.minimum(gap, up_gap)
    return float(max(row_cs.max(initial=0.0), col_cs.max(initial=0.0)))


def linprog_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lower=None, upper=None) -> LpResult:
    """Convenience wrapper mirroring the common ub/eq split."""
    c = np.asarray(c, dtype=float)
    blocks, rhs, senses = [], [], []
    if A_ub is not None and len(b_ub):
        blocks.append(np.asarray(A_ub, dtype=float).reshape(-1, c.size))
        rhs.append(np.asarray(b_ub, dtype=float))
        senses += ["<="] * len(b_ub)
    if A_eq is not None and len(b_eq):
        blocks.append(np.asarray(A_eq, dtype=float).reshape(-1, c.size))
        rhs.append(np.asarray(b_eq, dtype=float))
        senses += ["=="] * len(b_eq)
    A = np.vstack(blocks) if blocks else np.zeros((0, c.size))
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    return simplex_solve(LpProblem(c, A, b, senses, lower, upper, maximize=True))
