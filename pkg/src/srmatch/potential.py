"""Potential functions f, their grid checks, and the iterative f/g linear program.

Tables hold a piecewise-linear f on a uniform grid [0, L_max], extended by
the constant f(L_max) beyond.  All integrals of a table are exact for that
piecewise-linear function: trapezoid for integrals of f itself and exact
exponential moments for integrals against e^{-y}.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
from scipy.integrate import quad, solve_ivp

from .simplex import LpInfeasible, linprog_max

ONE_MINUS_INV_E = 1.0 - math.exp(-1.0)


class PotentialError(ValueError):
    pass


# ---------------------------------------------------------------- piecewise-linear calculus

def _cells(grid: np.ndarray, x):
    """Cell index k and in-cell offset t = x - x_k for x clipped to [0, L_max]."""
    n = grid.size - 1
    h = grid[1] - grid[0]
    xc = np.clip(np.asarray(x, dtype=float), 0.0, grid[-1])
    k = np.minimum(np.floor(xc / h).astype(np.int64), n - 1)
    return k, xc - grid[k], h


def _exp_moments(a, t, h):
    """(int_a^{a+t} e^{-y}(1-(y-a)/h) dy, int_a^{a+t} e^{-y}(y-a)/h dy)."""
    ea = np.exp(-a)
    m0 = -ea * np.expm1(-t)
    m1 = ea * (-np.expm1(-t) - t * np.exp(-t)) / h
    return m0 - m1, m1


def coefficient_rows(grid: np.ndarray, xs):
    """Linear functionals of the node values for int_0^x f e^{-y} and int_0^x f.

    Returns (CE, C1), each of shape (len(xs), N+1), so that
    ``CE @ values`` is the exact exponential-weighted integral of the
    piecewise-linear interpolant up to each x.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    n = grid.size - 1
    k, t, h = _cells(grid, xs)
    full_lo, full_hi = _exp_moments(grid[:-1], h, h)
    j = np.arange(n + 1)[None, :]
    kk = k[:, None]
    CE = np.zeros((xs.size, n + 1))
    C1 = np.zeros((xs.size, n + 1))
    lo_pad = np.append(full_lo, 0.0)[None, :]
    hi_pad = np.insert(full_hi, 0, 0.0)[None, :]
    CE += np.where(j < kk, lo_pad, 0.0) + np.where((j >= 1) & (j <= kk), hi_pad, 0.0)
    C1 += np.where(j < kk, h / 2, 0.0) + np.where((j >= 1) & (j <= kk), h / 2, 0.0)
    plo, phi = _exp_moments(grid[k], t, h)
    rows = np.arange(xs.size)
    CE[rows, k] += plo
    CE[rows, k + 1] += phi
    s = t / h
    C1[rows, k] += h * (s - s * s / 2)
    C1[rows, k + 1] += h * s * s / 2
    # constant extension past L_max
    beyond = np.maximum(xs - grid[-1], 0.0)
    CE[:, n] += np.exp(-grid[-1]) * -np.expm1(-beyond)
    C1[:, n] += beyond
    return CE, C1


# ---------------------------------------------------------------- tables

def _check_grid(grid: np.ndarray):
    if grid.ndim != 1 or grid.size < 2 or grid[0] != 0.0:
        raise PotentialError("grid must be 1-d, start at 0 and have at least two points")
    h = grid[1] - grid[0]
    if h <= 0 or np.max(np.abs(np.diff(grid) - h)) > 1e-9 * max(1.0, grid[-1]):
        raise PotentialError("grid must be uniform and increasing")


@dataclass(frozen=True, eq=False)
class PotentialTable:
    grid: np.ndarray
    values: np.ndarray
    gamma: float
    kind: str

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        _check_grid(grid)
        if values.shape != grid.shape:
            raise PotentialError("grid and values differ in length")
        if values.min() < 0 or values.max() > 1:
            raise PotentialError("f values must lie in [0, 1]")
        if np.any(np.diff(values) < -1e-12):
            i = int(np.argmin(np.diff(values)))
            raise PotentialError(f"f must be non-decreasing; drops at x={grid[i + 1]:.6g}")
        if self.gamma != 1.0 - values[0]:
            raise PotentialError(f"gamma {self.gamma} differs from 1 - f(0) = {1 - values[0]}")
        if not self.kind.startswith(("constant", "tabulated")) and abs(values[-1] - ONE_MINUS_INV_E) > 1e-9:
            raise PotentialError(f"f(L_max) = {values[-1]!r}, expected 1 - 1/e")

    @classmethod
    def from_values(cls, grid, values, kind: str) -> "PotentialTable":
        values = np.asarray(values, dtype=float)
        return cls(np.asarray(grid, dtype=float), values, float(1.0 - values[0]), kind)

    @property
    def n(self) -> int:
        return self.grid.size - 1

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def l_max(self) -> float:
        return float(self.grid[-1])

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)

    @cached_property
    def _cum_f(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.h * (self.values[:-1] + self.values[1:]) / 2)])

    @cached_property
    def _cum_one_minus_f(self) -> np.ndarray:
        q = 1.0 - self.values
        return np.concatenate([[0.0], np.cumsum(self.h * (q[:-1] + q[1:]) / 2)])

    @cached_property
    def _cum_exp_f(self) -> np.ndarray:
        lo, hi = _exp_moments(self.grid[:-1], self.h, self.h)
        return np.concatenate([[0.0], np.cumsum(lo * self.values[:-1] + hi * self.values[1:])])

    def _partial(self, cum, vals, x):
        k, t, h = _cells(self.grid, x)
        s = t / h
        inside = cum[k] + h * (vals[k] * (s - s * s / 2) + vals[k + 1] * s * s / 2)
        return inside + np.maximum(np.asarray(x, dtype=float) - self.l_max, 0.0) * vals[-1]

    def F(self, x):
        """int_0^x f."""
        return self._partial(self._cum_f, self.values, x)

    def C(self, x):
        """int_0^x (1 - f)."""
        return self._partial(self._cum_one_minus_f, 1.0 - self.values, x)

    def E(self, x):
        """int_0^x e^{-y} f(y) dy."""
        k, t, h = _cells(self.grid, x)
        lo, hi = _exp_moments(self.grid[k], t, h)
        inside = self._cum_exp_f[k] + lo * self.values[k] + hi * self.values[k + 1]
        beyond = np.maximum(np.asarray(x, dtype=float) - self.l_max, 0.0)
        return inside + self.values[-1] * math.exp(-self.l_max) * -np.expm1(-beyond)

    def C_inverse(self, c):
        """The y >= 0 with C(y) = c (C is strictly increasing because f < 1)."""
        c = np.asarray(c, dtype=float)
        cum = self._cum_one_minus_f
        q = 1.0 - self.values
        if q.min() <= 0:
            raise PotentialError("C is not invertible when f reaches 1")
        out = np.empty(c.shape)
        flat = c.ravel()
        res = out.ravel()
        over = flat > cum[-1]
        res[over] = self.l_max + (flat[over] - cum[-1]) / q[-1]
        k = np.clip(np.searchsorted(cum, flat[~over], side="right") - 1, 0, self.n - 1)
        a, b = q[k], q[k + 1]
        r = np.maximum(flat[~over] - cum[k], 0.0) / self.h
        # h * (a s + (b - a) s^2 / 2) = r h, solved stably
        qd = (b - a) / 2
        disc = np.sqrt(np.maximum(a * a + 4 * qd * r, 0.0))
        s = np.where(np.abs(qd) < 1e-15, r / a, 2 * r / (a + disc))
        res[~over] = self.grid[k] + np.clip(s, 0.0, 1.0) * self.h
        return out

    def inverse_sup(self, c):
        """sup{y >= 0 : f(y) <= c}; inf when c >= f(L_max), -1 when c < f(0)."""
        c = np.asarray(c, dtype=float)
        v = self.values
        i = np.clip(np.searchsorted(v, c, side="right") - 1, 0, self.n - 1)
        dv = v[i + 1] - v[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            y = self.grid[i] + self.h * np.where(dv > 0, (c - v[i]) / dv, 1.0)
        y = np.where(c >= v[-1], np.inf, y)
        return np.where(c < v[0], -1.0, y)

    def kernel_arrays(self):
        """(h, values, cumulative int f, cumulative int (1-f)) for the compiled kernels."""
        return (self.h, np.ascontiguousarray(self.values), np.ascontiguousarray(self._cum_f),
                np.ascontiguousarray(self._cum_one_minus_f))

    def to_csv(self, path) -> None:
        _write_xy(path, "f", self.grid, self.values)

    @classmethod
    def from_csv(cls, path, kind: str = "tabulated") -> "PotentialTable":
        grid, values = _read_xy(path, "f")
        return cls.from_values(grid, values, kind)


@dataclass(frozen=True, eq=False)
class CutoffTable:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        _check_grid(grid)
        if values.shape != grid.shape:
            raise PotentialError("grid and values differ in length")
        if values.min() < 0 or np.any(values > grid + 1e-12):
            raise PotentialError("cutoff must satisfy 0 <= g(x) <= x")

    def to_csv(self, path) -> None:
        _write_xy(path, "g", self.grid, self.values)

    @classmethod
    def from_csv(cls, path) -> "CutoffTable":
        return cls(*_read_xy(path, "g"))


def _write_xy(path, name, xs, ys):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", name])
        for x, y in zip(xs, ys):
            w.writerow([f"{x:.12g}", f"{y:.12g}"])


def _read_xy(path, name):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["x", name]:
        raise PotentialError(f"{path}: expected header 'x,{name}'")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    except ValueError as e:
        raise PotentialError(f"{path}: {e}") from None
    if data.shape[0] < 2:
        raise PotentialError(f"{path}: need at least two rows")
    return data[:, 0], data[:, 1]


# ---------------------------------------------------------------- closed forms

def _g_equal(x):
    return 1.0 / (2.0 - x - math.exp(-x))


def _H(x):
    return quad(_g_equal, x, 1.0, epsabs=1e-13, epsrel=1e-13)[0]


def f_equal(x: float) -> float:
    """Optimal potential for equal probabilities, by nested adaptive quadrature."""
    if x < 0:
        raise ValueError("load must be non-negative")
    if x >= 1:
        return ONE_MINUS_INV_E
    inner = quad(lambda y: -math.expm1(-y) * _g_equal(y) * math.exp(_H(y)), x, 1.0,
                 epsabs=1e-12, epsrel=1e-12)[0]
    return math.exp(-_H(x)) * (ONE_MINUS_INV_E + inner)


def f_unequal_closed(x: float) -> float:
    if x < 0:
        raise ValueError("load must be non-negative")
    if x >= 1:
        return ONE_MINUS_INV_E
    return 1.0 - math.exp(-x) / 2 - math.exp(x - 2) / 2


def _uniform_grid(n: int, l_max: float) -> np.ndarray:
    if n < 2:
        raise PotentialError("grid needs at least 2 cells")
    return np.linspace(0.0, l_max, n + 1)


@lru_cache(maxsize=8)
def _equal_values(n: int, l_max: float) -> np.ndarray:
    # f' = g (f - (1 - e^{-x})) integrated backwards from f(1) = 1 - 1/e
    grid = _uniform_grid(n, l_max)
    inside = grid[grid <= 1.0]
    sol = solve_ivp(lambda x, f: _g_equal(x) * (f - (1.0 - math.exp(-x))), (1.0, 0.0), [ONE_MINUS_INV_E],
                    method="DOP853", t_eval=inside[::-1], rtol=1e-13, atol=1e-15)
    vals = np.full(grid.size, ONE_MINUS_INV_E)
    vals[: inside.size] = sol.y[0][::-1]
    vals[inside.size - 1] = ONE_MINUS_INV_E if inside[-1] == 1.0 else vals[inside.size - 1]
    return vals


def equal_closed_table(n: int = 2000, l_max: float = 1.0) -> PotentialTable:
    return PotentialTable.from_values(_uniform_grid(n, l_max), _equal_values(n, float(l_max)).copy(), "equal-closed")


def unequal_closed_table(n: int = 2000, l_max: float = 1.0) -> PotentialTable:
    grid = _uniform_grid(n, l_max)
    vals = np.where(grid < 1, 1 - np.exp(-grid) / 2 - np.exp(grid - 2) / 2, ONE_MINUS_INV_E)
    return PotentialTable.from_values(grid, vals, "unequal-closed")


def constant_table(c: float, n: int = 2000, l_max: float = 2.0) -> PotentialTable:
    grid = _uniform_grid(n, l_max)
    return PotentialTable.from_values(grid, np.full(grid.size, float(c)), f"constant({c:g})")


# ---------------------------------------------------------------- grid checks

@dataclass(frozen=True)
class GridSlack:
    """Minimum of LHS - Gamma * p over an (l, p) grid."""

    min_slack: float
    argmin: tuple[float, float]
    n_negative: int
    shape: tuple[int, int]

    def ok(self, tol: float = 1e-6) -> bool:
        return self.min_slack >= -tol


def _grid_report(slack, ls, ps, tol=1e-9) -> GridSlack:
    i, j = np.unravel_index(int(np.argmin(slack)), slack.shape)
    return GridSlack(float(slack[i, j]), (float(ls[i]), float(ps[j])), int(np.sum(slack < -tol)), slack.shape)


def de_equal_lhs(table: PotentialTable, ls, ps):
    """LHS of the equal-probability inequality on the outer product ls x ps.

    int_0^l e^{-t} f(t) dt + (1 - f(l)) int_0^l e^{-t} (p - (l - t))^+ dt + e^{-l} p (1 - f(l)),
    with the kink of (.)^+ at t = l - p handled exactly.
    """
    L = np.asarray(ls, dtype=float)[:, None]
    P = np.asarray(ps, dtype=float)[None, :]
    a = np.maximum(0.0, L - P)
    # int_a^l e^{-t}(p - l + t) dt, plus the e^{-l} p term
    inner = np.exp(-a) * (P - L + a + 1) - np.exp(-L) * (P + 1)
    return table.E(L) + (1 - table(L)) * (inner + np.exp(-L) * P)


def check_de_equal(table: PotentialTable, grid_l: int = 200, grid_p: int = 200, l_max: float = 3.0,
                   gamma: float | None = None) -> GridSlack:
    """Slack of the equal-probability inequality; ``gamma`` overrides the table's own ratio."""
    ls = np.linspace(0, l_max, grid_l)
    ps = np.linspace(0, 1, grid_p)
    G = table.gamma if gamma is None else gamma
    return _grid_report(de_equal_lhs(table, ls, ps) - G * ps[None, :], ls, ps)


def de_unequal_lhs(table: PotentialTable, ls, ps, std_lp: bool = False):
    """LHS of the unequal-probability inequality (online-side integral dropped when ``std_lp``).

    The online-side term is int_0^l (p(1-f(l)) - int_t^l (1-f))^+ e^{-t} dt.  The
    integrand is positive exactly for t > t*, where C(t*) = C(l) - p(1-f(l)).
    """
    L = np.asarray(ls, dtype=float)[:, None] * np.ones((1, np.size(ps)))
    P = np.ones((np.size(ls), 1)) * np.asarray(ps, dtype=float)[None, :]
    q = 1 - table(L)
    base = table.E(L) + np.exp(-L) * P * q
    if std_lp:
        return base
    target = table.C(L) - P * q
    ts = np.where(target > 0, table.C_inverse(np.maximum(target, 0.0)), 0.0)
    ets, el = np.exp(-ts), np.exp(-L)
    # int_{t*}^l (1-f(y))(e^{-t*} - e^{-y}) dy
    tail = ets * (table.C(L) - table.C(ts)) - ((ets - el) - (table.E(L) - table.E(ts)))
    return base + P * q * (ets - el) - tail


def check_de_unequal(table: PotentialTable, grid_l: int = 200, grid_p: int = 200, l_max: float = 3.0,
                     std_lp: bool = False, gamma: float | None = None) -> GridSlack:
    ls = np.linspace(0, l_max, grid_l)
    ps = np.linspace(0, 1, grid_p)
    G = table.gamma if gamma is None else gamma
    return _grid_report(de_unequal_lhs(table, ls, ps, std_lp) - G * ps[None, :], ls, ps)


def check_ode_equal(table: PotentialTable, points=None) -> float:
    """max |int_0^l e^{-t} f + (1 - f(l))(2 - l - e^{-l}) - Gamma| over grid points of [0, 1]."""
    ls = table.grid[table.grid <= 1.0] if points is None else np.asarray(points, dtype=float)
    lhs = table.E(ls) + (1 - table(ls)) * (2 - ls - np.exp(-ls))
    return float(np.max(np.abs(lhs - table.gamma)))


def check_unequal_simplest(points=None) -> float:
    """max |1 - e^{-l} + (1 - f(l)) - int_0^l (1 - f) - Gamma| on [0, 1] for the closed form,
    with the integral taken analytically."""
    ls = np.linspace(0.0, 1.0, 1001) if points is None else np.asarray(points, dtype=float)
    f = 1 - np.exp(-ls) / 2 - np.exp(ls - 2) / 2
    integral = -np.expm1(-ls) / 2 + (np.exp(ls - 2) - math.exp(-2)) / 2
    gamma = (1 + math.exp(-2)) / 2
    return float(np.max(np.abs(-np.expm1(-ls) + (1 - f) - integral - gamma)))


# ---------------------------------------------------------------- f/g iteration

def best_response_g(table: PotentialTable) -> CutoffTable:
    """g(l) with int_{g(l)}^l (1-f) = 1 - f(l), or 0 when 1 - f(l) exceeds int_0^l (1-f)."""
    ls = table.grid
    target = table.C(ls) - (1 - table.values)
    g = np.where(target > 0, table.C_inverse(np.maximum(target, 0.0)), 0.0)
    return CutoffTable(ls, np.minimum(g, ls))


def relaxed_constraint_rows(grid: np.ndarray, g: np.ndarray):
    """Rows (M, c) with M @ f + c = LHS of the relaxed unequal inequality at every grid point.

    With cutoff g = g(l) the left side is
    int_0^g e^{-y} f + e^{-g} (int_g^l f - f(l)) + 2e^{-g} - e^{-g}(l - g) - e^{-l}.
    """
    CEg, C1g = coefficient_rows(grid, g)
    _, C1l = coefficient_rows(grid, grid)
    eg = np.exp(-g)
    M = CEg + eg[:, None] * (C1l - C1g)
    M[np.arange(grid.size), np.arange(grid.size)] -= eg
    c = 2 * eg - eg * (grid - g) - np.exp(-grid)
    return M, c


def optimize_f_given_g(g: CutoffTable, l_max: float = 2.0, grid: int = 2000, iteration: int = 1,
                       right_boundary: float | None = ONE_MINUS_INV_E) -> PotentialTable:
    """Maximize Gamma over non-decreasing piecewise-linear f subject to the relaxed inequality.

    Variables are the increments d_j = f_j - f_{j-1} >= 0 and Gamma, with
    f_0 = 1 - Gamma.  ``right_boundary=None`` drops the f(L_max) row.
    """
    xs = _uniform_grid(grid, l_max)
    if g.grid.size != xs.size or np.max(np.abs(g.grid - xs)) > 1e-12:
        raise PotentialError("cutoff table must live on the optimization grid")
    M, c = relaxed_constraint_rows(xs, g.values)
    # f = (1 - Gamma) 1 + L d with L lower-triangular ones (excluding column 0)
    ML = np.cumsum(M[:, ::-1], axis=1)[:, ::-1][:, 1:]
    M1 = M.sum(axis=1)
    n = grid
    A = np.hstack([-ML, (M1 + 1)[:, None]])
    b = c + M1
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    upper = np.full(n + 1, np.inf)
    upper[-1] = 1.0
    if right_boundary is None:
        A_eq, b_eq = None, None
    else:
        A_eq = np.hstack([np.ones((1, n)), [[-1.0]]])
        b_eq = np.array([right_boundary - 1.0])
    try:
        res = linprog_max(cost, A, b, A_eq, b_eq, lower=np.zeros(n + 1), upper=upper)
    except LpInfeasible as e:
        raise PotentialError(f"infeasible discretization at grid={grid}: {e}") from None
    d, gamma = np.maximum(res.x[:-1], 0.0), float(res.x[-1])
    values = np.concatenate([[1 - gamma], 1 - gamma + np.cumsum(d)])
    if right_boundary is not None:
        values[-1] = right_boundary
    values = np.minimum(values, 1.0)
    kind = f"unequal-iterated({iteration})" if right_boundary is not None else "tabulated"
    return PotentialTable.from_values(xs, values, kind)


def relaxed_slack(table: PotentialTable, g: CutoffTable) -> np.ndarray:
    """Discretized constraint slack LHS - Gamma per grid point."""
    M, c = relaxed_constraint_rows(table.grid, g.values)
    return M @ table.values + c - table.gamma


@dataclass(frozen=True, eq=False)
class FgStep:
    f: PotentialTable
    g: CutoffTable
    gamma: float


def iterate_fg(iters: int = 3, grid: int = 2000, l_max: float = 2.0, f0: float = 0.5) -> list[FgStep]:
    if iters < 1:
        raise ValueError("iters must be >= 1")
    f = constant_table(f0, grid, l_max)
    out = []
    for k in range(1, iters + 1):
        g = best_response_g(f)
        f = optimize_f_given_g(g, l_max, grid, iteration=k)
        out.append(FgStep(f, g, f.gamma))
    return out


def write_fg_trajectory(steps: list[FgStep], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, s in enumerate(steps, 1):
        s.f.to_csv(out / f"f_iter{k}.csv")
        s.g.to_csv(out / f"g_iter{k}.csv")
        paths += [out / f"f_iter{k}.csv", out / f"g_iter{k}.csv"]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "gamma"])
        for k, s in enumerate(steps, 1):
            w.writerow([k, f"{s.gamma:.12g}"])
    paths.append(out / "summary.csv")
    return paths


def load_potential(name_or_path, grid: int = 2000) -> PotentialTable:
    """Named potentials ('equal-closed', 'unequal-closed', 'iterated[k]', 'constant:c') or a CSV path."""
    s = str(name_or_path)
    if s == "equal-closed":
        return equal_closed_table(grid, 1.0)
    if s == "unequal-closed":
        return unequal_closed_table(grid, 1.0)
    if s.startswith("constant:"):
        return constant_table(float(s.split(":", 1)[1]), grid, 2.0)
    if s.startswith("iterated"):
        k = int(s[len("iterated"):] or 3)
        return iterated_table(k, grid)
    return PotentialTable.from_csv(s)


@lru_cache(maxsize=4)
def iterated_table(iters: int = 3, grid: int = 1000) -> PotentialTable:
    return iterate_fg(iters, grid)[-1].f
