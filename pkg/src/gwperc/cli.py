"""Command line front end (``gwperc`` or ``python -m gwperc``).

Offspring laws are given as spec strings: ``det:d``, ``unif:a:b``,
``pmf:p1,p2,...`` (masses on 1, 2, ...), ``geom:q`` and ``poisplus:theta``.

Every command prints a table (or CSV with ``--csv``) and can write a JSON
record with ``--json FILE``.  The record always carries ``command``,
``spec``, ``seeds``, ``params``, ``version``, ``wall_time`` and ``results``.

Exit status: 0 success, 1 acceptance failure (``verify-all``), 2 usage
error, 3 violated precondition or other library error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from . import __version__, acceptance, annealed, iic, martingale, percolation, stats, tree as treemod
from ._backend import BACKEND
from .errors import GWPercError
from .offspring import derive_params, parse_spec

DEFAULT_EXPLICIT = 16


# -- output ----------------------------------------------------------------------
def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def render(rows: list[dict], as_csv: bool) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    if as_csv:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in cols})
        return buf.getvalue()
    cells = [[_fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


class Report:
    def __init__(self, args, spec_name=None):
        self.args = args
        self.spec = spec_name
        self.start = getattr(args, "started", time.perf_counter())
        self.seeds = {}
        self.params = {}
        self.results = {}
        self.chunks: list[str] = []

    def table(self, rows, title=None):
        if title and not self.args.csv:
            self.chunks.append(f"# {title}\n")
        self.chunks.append(render(rows, self.args.csv))

    def note(self, text):
        if not self.args.csv:
            self.chunks.append(f"# {text}\n")

    def finish(self, out=None):
        out = sys.stdout if out is None else out
        out.write("".join(self.chunks))
        if self.args.json:
            record = {
                "command": self.args.command if self.args.command != "annealed" else f"annealed {self.args.what}",
                "spec": self.spec,
                "seeds": self.seeds,
                "params": self.params,
                "version": __version__,
                "backend": BACKEND,
                "wall_time": time.perf_counter() - self.start,
                "results": self.results,
            }
            with open(self.args.json, "w") as fh:
                json.dump(_plain(record), fh, indent=2)
                fh.write("\n")


# -- helpers -----------------------------------------------------------------------
def _load_tree(args, need_depth: int = 0):
    """Tree from ``--tree FILE`` or from ``--dist/--seed`` (explicit to ``--explicit-depth``)."""
    if getattr(args, "tree", None):
        t = treemod.load(args.tree)
    else:
        if not getattr(args, "dist", None):
            raise SystemExit("error: one of --tree or --dist is required")
        spec = parse_spec(args.dist)
        t = treemod.generate(spec, args.tree_seed, min(args.explicit_depth, max(need_depth, 0)))
    return t


def _add_tree_source(p, dist_allowed=True):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--tree", help="tree file written by gen-tree")
    if dist_allowed:
        g.add_argument("--dist", help="offspring spec; the tree is generated from --tree-seed")
    p.add_argument("--tree-seed", type=int, default=0, help="master seed when using --dist")
    p.add_argument("--explicit-depth", type=int, default=DEFAULT_EXPLICIT,
                   help="levels generated explicitly; deeper exact values integrate out the rest")


# -- commands ------------------------------------------------------------------------
def cmd_gen_tree(args):
    spec = parse_spec(args.dist)
    t = treemod.generate(spec, args.seed, args.depth)
    treemod.save(t, args.out)
    r = Report(args, spec.name)
    r.seeds = {"tree": args.seed}
    r.params = {"depth": args.depth, "out": args.out}
    rows = [{"n": n, "Z_n": int(z), "W_n": float(w)} for n, (z, w) in enumerate(zip(t.z, t.w))]
    r.results = {"vertices": t.size, "levels": rows}
    r.table(rows, f"{spec.name} seed {args.seed}: {t.size} vertices written to {args.out}")
    return r


def cmd_survival(args):
    t = _load_tree(args, args.depth)
    spec = t.spec
    lam = derive_params(spec).lam
    r = Report(args, spec.name)
    r.seeds = {"tree": t.master_seed, **({"perc": args.seed} if args.mc else {})}
    r.params = {"depth": args.depth, "explicit_depth": t.generated_depth, "lambda": lam,
                "mode": "mc" if args.mc else "exact"}
    rows = []
    if args.mc:
        for n in range(args.depth + 1):
            f = percolation.survival_frequency(t, n, args.mc, args.seed, args.threads)
            rows.append({"n": n, "freq": f, "se": math.sqrt(f * (1 - f) / args.mc), "n_freq": n * f})
    else:
        q = percolation.survival_exact(t, args.depth, allow_closure=True).q
        w = t.w
        for n in range(args.depth + 1):
            wn = float(w[min(n, t.generated_depth)])
            rows.append({"n": n, "q_n": float(q[n]), "n_q_n": n * float(q[n]), "lambda_W_n": lam * wn})
        if args.depth > t.generated_depth:
            r.note(f"levels below {t.generated_depth} integrated out; W column uses W_{t.generated_depth}")
    r.results = {"rows": rows}
    r.table(rows)
    return r


def cmd_moments(args):
    t = _load_tree(args, args.depth)
    table = percolation.factorial_moments_exact(t, args.depth, args.k, allow_closure=True)
    tr = martingale._corrections(table.table, args.k, derive_params(t.spec, max(args.k, 1)))
    r = Report(args, t.spec.name)
    r.seeds = {"tree": t.master_seed}
    r.params = {"depth": args.depth, "k": args.k, "explicit_depth": t.generated_depth}
    rows = []
    for j in range(args.depth + 1):
        row = {"n": j}
        row.update({f"E_binom_{i}": float(table.table[j, i]) for i in range(1, args.k + 1)})
        row[f"M_{args.k}"] = float(tr[j])
        rows.append(row)
    r.results = {"rows": rows}
    r.table(rows)
    return r


def cmd_martingale(args):
    spec = parse_spec(args.dist)
    s = martingale.increment_study(spec, args.k, args.nmax, args.trees, args.seed, args.threads)
    r = Report(args, spec.name)
    r.seeds = {"study": args.seed}
    r.params = {"k": args.k, "nmax": args.nmax, "trees": args.trees}
    rows = [{"n": n, "mean_increment": float(s.mean_increment[n]), "std_error": float(s.std_error[n]),
             "z": float(s.mean_increment[n] / s.std_error[n]) if s.std_error[n] > 0 else 0.0,
             "l2_increment": float(s.l2_increment[n])} for n in range(args.nmax)]
    fit = s.fit
    r.results = {"rows": rows, "slope": fit.slope if fit else None, "intercept": fit.intercept if fit else None,
                 "max_abs_z": s.max_abs_z}
    r.table(rows)
    r.note(f"log-L2 slope (n >= {martingale.FIT_FROM}): {fit.slope:.6g}" if fit else "increments vanish identically")
    return r


def cmd_yaglom(args):
    t = _load_tree(args, 0)
    lam = derive_params(t.spec).lam
    sample = percolation.conditioned_sizes(t, args.depth, args.accepted, args.seed, args.threads)
    summ = stats.EmpiricalSummary.of(sample.scaled)
    ks = stats.ks_distance(sample.scaled, stats.exp_cdf(lam))
    r = Report(args, t.spec.name)
    r.seeds = {"tree": t.master_seed, "perc": args.seed}
    r.params = {"depth": args.depth, "accepted": args.accepted, "lambda": lam}
    row = {"n": args.depth, "accepted": sample.accepted, "attempts": sample.attempts,
           "acceptance": sample.acceptance_rate, "mean": summ.mean, "target_mean": 1 / lam, "ks_exp": ks}
    r.results = {**row, "sample": sample.scaled}
    r.table([row])
    return r


def cmd_iic(args):
    t = _load_tree(args, 0)
    if args.horizon == "absolute" and t.generated_depth < args.depth + args.lookahead:
        t.deepen(args.depth + args.lookahead)
    e = iic.iic_size_experiment(t, args.depth, args.reps, args.seed, args.lookahead, args.horizon, args.threads)
    r = Report(args, t.spec.name)
    r.seeds = {"tree": t.master_seed, "iic": args.seed}
    r.params = {"depth": args.depth, "reps": args.reps, "lookahead": args.lookahead, "horizon": args.horizon}
    row = {"n": args.depth, "reps": args.reps, "mean": e.summary.mean, "target_mean": 2 / e.lam,
           "ks_gamma2": e.ks, "min_c_n": int(e.c_n.min())}
    r.results = {**e.as_dict(), "sample": e.scaled}
    r.table([row])
    looks = [int(x) for x in args.sensitivity.split(",") if x] if args.sensitivity else []
    if looks and not t.spec.is_deterministic:
        sens = iic.lookahead_sensitivity(t, looks, steps=args.sensitivity_steps, seed=args.seed)
        srows = [{"step": s["step"], "children": s["children"],
                  **{f"tv_m{m}": s["tv_to_reference"][m] for m in sorted(looks)}} for s in sens]
        r.results["sensitivity"] = sens
        r.table(srows, f"lookahead sensitivity (TV to m={max(looks)} along a reference spine)")
    return r


def cmd_annealed(args):
    spec = parse_spec(args.dist)
    lam = derive_params(spec).lam
    r = Report(args, spec.name)
    r.params = {"depth": args.depth, "lambda": lam}
    if args.what == "survival":
        q = annealed.annealed_survival_exact(spec, args.depth)
        step = max(1, args.every)
        rows = [{"n": n, "q_n": float(q[n]), "n_q_n": n * float(q[n]), "ratio": n * float(q[n]) / lam}
                for n in range(0, args.depth + 1, step)]
        if rows[-1]["n"] != args.depth:
            n = args.depth
            rows.append({"n": n, "q_n": float(q[n]), "n_q_n": n * float(q[n]), "ratio": n * float(q[n]) / lam})
        r.results = {"rows": rows}
        r.table(rows)
    elif args.what == "yaglom":
        y = annealed.annealed_yaglom(spec, args.depth, args.accepted, args.seed, args.threads)
        r.seeds = {"annealed": args.seed}
        r.params["accepted"] = args.accepted
        row = {"n": args.depth, "accepted": y.accepted, "attempts": y.attempts, "acceptance": y.acceptance_rate,
               "mean": y.summary.mean, "target_mean": 1 / lam, "ks_exp": y.ks}
        r.results = {**y.as_dict(), "sample": y.sizes / args.depth}
        r.table([row])
    else:
        e = annealed.annealed_iic_sizes(spec, args.depth, args.reps, args.seed, args.lookahead, args.threads)
        r.seeds = {"iic": args.seed}
        r.params.update(reps=args.reps, lookahead=args.lookahead)
        row = {"n": args.depth, "reps": args.reps, "mean": e.summary.mean, "target_mean": 2 / lam,
               "ks_gamma2": e.ks, "min_c_n": int(e.c_n.min())}
        r.results = {**e.as_dict(), "sample": e.scaled}
        r.table([row])
    return r


def cmd_spread(args):
    t = _load_tree(args, 0)
    depths = []
    n = args.depth
    while n >= max(args.start, 1) and len(depths) < args.levels:
        depths.append(n)
        n //= 2
    depths.reverse()
    rows = [percolation.spread_diagnostics(t, n, args.reps, args.seed, args.threads).as_dict() for n in depths]
    r = Report(args, t.spec.name)
    r.seeds = {"tree": t.master_seed, "perc": args.seed}
    r.params = {"depths": depths, "accepted": args.reps}
    r.results = {"rows": rows}
    r.table([{k: row[k] for k in ("n", "m", "p_multi", "p_max", "p_max_raw", "accepted", "mean_size",
                                  "hit_sum", "low_confidence")} for row in rows])
    return r


def cmd_verify_all(args):
    only = {int(x) for x in args.only.split(",")} if args.only else None
    r = Report(args, None)
    r.params = {"budget": args.budget, "only": sorted(only) if only else None}
    results = acceptance.run_all(args.budget, only, report=lambda line: print(line, flush=True))
    r.results = {"criteria": [x.as_dict() for x in results], "all_passed": all(x.passed for x in results)}
    r.exit_code = 0 if r.results["all_passed"] else 1
    return r


# -- parser --------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", metavar="FILE", help="also write a JSON record")
    common.add_argument("--csv", action="store_true", help="print CSV instead of a table")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")

    p = argparse.ArgumentParser(prog="gwperc", description="Critical percolation on Galton-Watson trees.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-tree", parents=[common], help="generate a tree and write it to a file")
    s.add_argument("--dist", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_gen_tree)

    s = sub.add_parser("survival", parents=[common], help="survival probabilities q_n")
    _add_tree_source(s)
    s.add_argument("--depth", type=int, required=True)
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="exact dynamic program (default)")
    mode.add_argument("--mc", type=int, metavar="REPS", help="Monte Carlo with REPS replicates per depth")
    s.add_argument("--seed", type=int, default=0, help="percolation seed for --mc")
    s.set_defaults(fn=cmd_survival)

    s = sub.add_parser("moments", parents=[common], help="factorial moments and the M_n^(k) trace")
    _add_tree_source(s)
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--k", type=int, default=2)
    s.set_defaults(fn=cmd_moments)

    s = sub.add_parser("martingale-decay", parents=[common], help="increment study over random trees")
    s.add_argument("--dist", required=True)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--nmax", type=int, required=True)
    s.add_argument("--trees", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.set_defaults(fn=cmd_martingale)

    s = sub.add_parser("yaglom", parents=[common], help="conditioned cluster sizes vs the exponential law")
    _add_tree_source(s)
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--accepted", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.set_defaults(fn=cmd_yaglom)

    s = sub.add_parser("iic", parents=[common], help="IIC cluster sizes vs the Gamma(2) law")
    _add_tree_source(s)
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--reps", type=int, required=True)
    s.add_argument("--lookahead", type=int, default=iic.DEFAULT_LOOKAHEAD)
    s.add_argument("--horizon", choices=iic.HORIZONS, default="relative")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--sensitivity", default="10,15,20",
                   help="comma-separated lookaheads for the sensitivity report ('' to skip)")
    s.add_argument("--sensitivity-steps", type=int, default=8)
    s.set_defaults(fn=cmd_iic)

    s = sub.add_parser("annealed", parents=[common], help="annealed counterparts")
    s.add_argument("what", choices=("survival", "yaglom", "iic"))
    s.add_argument("--dist", required=True)
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--accepted", type=int, default=5000)
    s.add_argument("--reps", type=int, default=5000)
    s.add_argument("--lookahead", type=int, default=iic.DEFAULT_LOOKAHEAD)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--every", type=int, default=1, help="row stride for survival output")
    s.set_defaults(fn=cmd_annealed)

    s = sub.add_parser("spread", parents=[common], help="spread diagnostics over doubling depths")
    _add_tree_source(s)
    s.add_argument("--depth", type=int, required=True, help="largest depth")
    s.add_argument("--start", type=int, default=1, help="smallest depth to include")
    s.add_argument("--levels", type=int, default=3, help="number of doublings reported")
    s.add_argument("--reps", type=int, required=True, help="accepted runs per depth")
    s.add_argument("--seed", type=int, required=True)
    s.set_defaults(fn=cmd_spread)

    s = sub.add_parser("verify-all", parents=[common], help="run the acceptance suite")
    s.add_argument("--budget", choices=acceptance.BUDGETS, default="smoke")
    s.add_argument("--only", help="comma-separated criterion numbers")
    s.set_defaults(fn=cmd_verify_all)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.started = time.perf_counter()
    try:
        report = args.fn(args)
    except GWPercError as exc:
        print(f"gwperc: error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"gwperc: error: {exc}", file=sys.stderr)
        return 3
    report.finish()
    return getattr(report, "exit_code", 0)


if __name__ == "__main__":
    sys.exit(main())
