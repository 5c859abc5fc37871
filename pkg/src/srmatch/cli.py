"""Command-line entry point: ``srmatch <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import potential as P
from .instance import InstanceError, gen_cascade, gen_random, gen_upper_triangular, read_instance, write_instance
from .svg import write_line_chart

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {s}")
    return v


def _grid(s: str) -> int:
    v = int(s)
    if v < 2:
        raise argparse.ArgumentTypeError(f"grid needs at least 2 cells, got {s}")
    return v


class Run:
    """Output directory, format and manifest for one invocation."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[Path] = []
        self.results: dict = {}

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(p)
        return p

    def table(self, name: str, header, rows) -> Path:
        """Write rows as CSV or JSON depending on --format."""
        if self.args.format == "json":
            p = self.path(name + ".json")
            p.write_text(json.dumps([dict(zip(header, r)) for r in rows], indent=1) + "\n")
        else:
            p = self.path(name + ".csv")
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
        return p

    def manifest(self, status: int) -> None:
        cfg = {k: v for k, v in vars(self.args).items() if k != "func"}
        versions = {"python": platform.python_version()}
        for pkg in ("artifact", "numpy", "scipy", "numba"):
            try:
                versions[pkg] = metadata.version(pkg)
            except metadata.PackageNotFoundError:
                pass
        doc = {
            "command": self.args.command,
            "argv": sys.argv[1:],
            "config": cfg,
            "seed": self.args.seed,
            "exit_status": status,
            "versions": versions,
            "results": self.results,
            "outputs": {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in self.outputs if p.exists()},
        }
        (self.out / f"manifest-{self.args.command}.json").write_text(json.dumps(doc, indent=1, default=str) + "\n")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


# ---------------------------------------------------------------- subcommands

def cmd_solve_potential(run: Run) -> int:
    a = run.args
    if a.case == "equal":
        t = P.equal_closed_table(a.grid, a.l_max)
    else:
        t = P.unequal_closed_table(a.grid, a.l_max)
    out = Path(a.out) if a.out else run.out / f"f_{a.case}.csv"
    t.to_csv(out)
    run.outputs.append(out)
    run.results["gamma"] = t.gamma
    print(f"gamma = {t.gamma:.10f}")
    return EXIT_OK


def _load_table(a) -> P.PotentialTable:
    return P.load_potential(a.potential, a.potential_grid)


def cmd_verify_de(run: Run) -> int:
    a = run.args
    t = _load_table(a)
    if a.check == "ode":
        r = P.check_ode_equal(t)
        run.results["max_residual"] = r
        print(f"max residual = {r:.3e}")
        return EXIT_OK if r <= a.tol else EXIT_FAIL
    fn = {"equal": P.check_de_equal, "unequal": P.check_de_unequal}[a.check]
    kw = {"std_lp": True} if a.std_lp else {}
    rep = fn(t, a.grid_l, a.grid_p, a.l_max, **kw)
    run.results.update(min_slack=rep.min_slack, argmin=list(rep.argmin), n_negative=rep.n_negative)
    run.table(f"verify_{a.check}", ["min_slack", "argmin_l", "argmin_p", "n_negative", "grid_l", "grid_p"],
              [[_fmt(rep.min_slack), _fmt(rep.argmin[0]), _fmt(rep.argmin[1]), rep.n_negative, a.grid_l, a.grid_p]])
    print(f"gamma = {t.gamma:.6f}  min slack = {rep.min_slack:.3e} at (l, p) = ({rep.argmin[0]:.4f}, {rep.argmin[1]:.4f})")
    return EXIT_OK if rep.ok(a.tol) else EXIT_FAIL


def cmd_iterate_fg(run: Run) -> int:
    a = run.args
    steps = P.iterate_fg(a.iters, a.grid, a.l_max)
    run.outputs += P.write_fg_trajectory(steps, run.out)
    svg_f, svg_g = run.path("f_iterates.svg"), run.path("g_iterates.svg")
    write_line_chart(svg_f, [(f"f{k} (G={s.gamma:.7f})", s.f.grid, s.f.values) for k, s in enumerate(steps, 1)],
                     title="potential f per iteration", xlabel="load", ylabel="f")
    write_line_chart(svg_g, [(f"g{k}", s.g.grid, s.g.values) for k, s in enumerate(steps, 1)],
                     title="cutoff g per iteration", xlabel="load", ylabel="g")
    run.results["gamma"] = [s.gamma for s in steps]
    for k, s in enumerate(steps, 1):
        print(f"iter {k}: gamma = {s.gamma:.7f}")
    return EXIT_OK


def _instance(a):
    if a.instance:
        inst = read_instance(a.instance)
        if a.p is not None and inst.p_max > a.p + 1e-15:
            raise InstanceError(f"{a.instance}: p_max {inst.p_max} exceeds --p {a.p}")
        return inst
    p = 0.01 if a.p is None else a.p
    if a.gen == "upper-triangular":
        weights = "uniform" if a.weight_ratio is None else ("geometric", a.weight_ratio)
        return gen_upper_triangular(a.n, p, weights)
    if a.gen == "cascade":
        return gen_cascade(a.depth, p, a.repeat)
    if a.gen == "random":
        return gen_random(a.n, a.n_online, a.density, (p / 10, p), seed=a.seed, copies=a.repeat)
    raise InstanceError("give --instance or --gen")


def cmd_simulate(run: Run) -> int:
    from .benchmark import std_lp_opt
    from .simulate import AlgoConfig, MonteCarloEstimate, map_trials, read_experiment, run_trial

    a = run.args
    if a.config:
        doc = read_experiment(a.config)
        a.instance = str(Path(a.config).parent / doc["instance"])
        a.algo = doc.get("algorithm", a.algo)
        a.potential = doc.get("potential", a.potential)
        a.law = doc.get("law", a.law)
        a.trials = int(doc.get("trials", a.trials))
        a.seed = int(doc.get("seed", a.seed))
        a.delta = doc.get("delta", a.delta)
    inst = _instance(a)
    if a.save_instance:
        write_instance(inst, run.path("instance.json"))
    cfg = AlgoConfig(a.algo, a.model, a.potential, a.law, a.delta)
    f = P.load_potential(a.potential, a.potential_grid)
    opt = std_lp_opt(inst)
    objs = map_trials(lambda t: run_trial(inst, cfg, f, a.seed, t)[0], a.trials, a.workers)
    est = MonteCarloEstimate.from_samples(np.array(objs) / opt, a.seed)
    rows = [[t, _fmt(o), _fmt(opt), _fmt(o / opt)] for t, o in enumerate(objs)]
    rows += [["mean", "", "", _fmt(est.mean)], ["se", "", "", _fmt(est.se)]]
    run.table("simulate", ["trial", "objective", "opt", "ratio"], rows)
    run.results.update(mean=est.mean, se=est.se, opt=opt, trials=a.trials)
    print(f"{a.algo}/{a.model}: ratio mean = {est.mean:.5f}  se = {est.se:.5f}  (opt {opt:.6g}, {a.trials} trials)")
    return EXIT_OK


def cmd_benchmark(run: Run) -> int:
    from .benchmark import config_lp_opt_bruteforce, std_lp_opt

    inst = _instance(run.args)
    std = std_lp_opt(inst)
    rows = [["std_lp", _fmt(std)]]
    run.results["std_lp"] = std
    print(f"StdLP    = {std:.10g}")
    if run.args.config_lp:
        cfg = config_lp_opt_bruteforce(inst)
        rows += [["config_lp", _fmt(cfg)], ["difference", _fmt(std - cfg)]]
        run.results.update(config_lp=cfg, difference=std - cfg)
        print(f"ConfigLP = {cfg:.10g}\ndiff     = {std - cfg:.3e}")
    run.table("benchmark", ["quantity", "value"], rows)
    return EXIT_OK


def cmd_audit(run: Run) -> int:
    from .benchmark import audit_dual_feasibility
    from .simulate import AlgoConfig

    a = run.args
    inst = _instance(a)
    f = _load_table(a)
    cfg = AlgoConfig(a.algo, "budget", a.potential, a.law)
    rep = audit_dual_feasibility(inst, cfg, f, a.pairs, a.trials, a.seed, a.mode, workers=a.workers)
    rows = [[e.u, len(e.S), _fmt(e.p_uS), _fmt(e.est), _fmt(e.se), _fmt(e.ratio)] for e in rep.pairs]
    run.table("audit", ["u", "S_size", "p_uS", "est", "se", "ratio"], rows)
    print(rep.summary())
    ok = rep.passes(a.tol, a.se_mult) and not rep.violations
    threshold = rep.gamma - a.tol - a.se_mult * rep.min_ratio_se
    print(f"threshold       : {threshold:.6f} -> {'PASS' if ok else 'FAIL'}")
    run.results.update(min_ratio=rep.min_ratio, min_ratio_se=rep.min_ratio_se, gamma=rep.gamma, passed=ok)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_plot(run: Run) -> int:
    a = run.args
    series = []
    for path in a.csv:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        xi = header.index(a.x) if a.x else 0
        cols = [a.y] if a.y else [h for i, h in enumerate(header) if i != xi]
        for c in cols:
            yi = header.index(c)
            pts = []
            for r in body:
                try:
                    pts.append((float(r[xi]), float(r[yi])))
                except (ValueError, IndexError):
                    continue  # summary rows
            xs, ys = zip(*pts)
            series.append((f"{Path(path).stem}:{c}", xs, ys))
    out = run.path(a.out)
    write_line_chart(out, series, title=a.title, xlabel=a.x or "x", ylabel=a.y or "value")
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory (default ./out)")
    common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS,
                        help="tabular output format (default csv)")
    common.add_argument("--workers", type=_positive_int, default=argparse.SUPPRESS,
                        help="worker threads for Monte Carlo trials (default 1)")

    ap = argparse.ArgumentParser(prog="srmatch", parents=[common],
                                 description="Online matching with stochastic rewards: potentials, simulations, audits.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=func)
        return p

    def add_potential(p, default):
        p.add_argument("--potential", default=default,
                       help="equal-closed | unequal-closed | iterated[k] | constant:c | path to x,f CSV")
        p.add_argument("--potential-grid", type=_grid, default=2000, help="grid for named potentials")

    def add_instance(p):
        p.add_argument("--instance", help="instance JSON")
        p.add_argument("--gen", choices=("upper-triangular", "random", "cascade"), help="generate instead of reading")
        p.add_argument("--p", type=float, help="edge probability (generators) or cap check (--instance)")
        p.add_argument("--n", type=int, default=50, help="offline vertices (generators)")
        p.add_argument("--n-online", type=int, default=200, help="online vertices (random generator)")
        p.add_argument("--density", type=float, default=0.3)
        p.add_argument("--depth", type=int, default=4, help="cascade depth")
        p.add_argument("--repeat", type=int, default=1, help="cascade rounds / random copies")
        p.add_argument("--weight-ratio", type=float, help="geometric weights r**(j-1) (upper-triangular)")

    p = add("solve-potential", cmd_solve_potential, "tabulate a closed-form potential and print its ratio")
    p.add_argument("--case", choices=("equal", "unequal-closed"), required=True)
    p.add_argument("--grid", type=_grid, default=2000)
    p.add_argument("--l-max", type=float, default=1.0)
    p.add_argument("--out", help="CSV path (default <out-dir>/f_<case>.csv)")

    p = add("verify-de", cmd_verify_de, "check a differential inequality on an (l, p) grid")
    p.add_argument("--check", choices=("equal", "unequal", "ode"), required=True)
    add_potential(p, "equal-closed")
    p.add_argument("--grid-l", type=_grid, default=200)
    p.add_argument("--grid-p", type=_grid, default=200)
    p.add_argument("--l-max", type=float, default=3.0)
    p.add_argument("--std-lp", action="store_true", help="drop the online-side integral (unequal check)")
    p.add_argument("--tol", type=float, default=1e-6)

    p = add("iterate-fg", cmd_iterate_fg, "run the f/g linear-programming iteration")
    p.add_argument("--iters", type=_positive_int, default=3)
    p.add_argument("--grid", type=_grid, default=2000)
    p.add_argument("--l-max", type=float, default=2.0)

    p = add("simulate", cmd_simulate, "Monte Carlo competitive ratio against the standard LP")
    add_instance(p)
    p.add_argument("--config", help="experiment JSON (instance, algorithm, potential, law, trials, seed, delta)")
    p.add_argument("--algo", choices=("sb", "weighted", "greedy", "fractional", "rounded"), default="sb")
    p.add_argument("--model", choices=("budget", "rewards"), default="budget")
    add_potential(p, "equal-closed")
    p.add_argument("--law", default="exponential", help="exponential | geometric(p) | delta-enhanced(d)")
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--delta", type=float, help="rounding slack (default 3 p^(1/3) ln n)")
    p.add_argument("--save-instance", action="store_true")

    p = add("benchmark", cmd_benchmark, "solve the standard LP (and optionally the configuration LP)")
    add_instance(p)
    p.add_argument("--config-lp", action="store_true")

    p = add("audit", cmd_audit, "Monte Carlo audit of approximate dual feasibility")
    add_instance(p)
    p.add_argument("--algo", choices=("sb", "weighted", "greedy", "fractional"), default="sb")
    add_potential(p, "equal-closed")
    p.add_argument("--law", default="exponential")
    p.add_argument("--pairs", type=_positive_int, default=100)
    p.add_argument("--trials", type=_positive_int, default=500)
    p.add_argument("--mode", choices=("unconditional", "conditional"), default="unconditional")
    p.add_argument("--tol", type=float, default=0.02, help="declared tolerance below the potential's ratio")
    p.add_argument("--se-mult", type=float, default=3.0)

    p = add("plot", cmd_plot, "line chart (SVG) of CSV columns")
    p.add_argument("--csv", nargs="+", required=True)
    p.add_argument("--x", help="x column (default first)")
    p.add_argument("--y", help="y column (default all others)")
    p.add_argument("--title", default="")
    p.add_argument("--out", default="plot.svg", help="file name inside --out-dir")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for k, v in (("seed", 0), ("out_dir", "out"), ("format", "csv"), ("workers", 1)):
        if not hasattr(args, k):
            setattr(args, k, v)
    run = Run(args)
    try:
        status = args.func(run)
    except (InstanceError, P.PotentialError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        status = EXIT_ERROR
    run.manifest(status)
    return status


if __name__ == "__main__":
    sys.exit(main())
