"""The ten acceptance criteria as runnable checks.

Each ``criterion_N(budget)`` returns a :class:`CriterionResult`.  The
``"full"`` budget uses the sample sizes and depths of the published
criteria; ``"smoke"`` shrinks them so the whole suite finishes in a few
minutes.  Tolerances never change between budgets.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import annealed, iic, martingale, oracles, percolation, stats
from .offspring import deterministic, derive_params, uniform_range
from .tree import GWTree, generate

BUDGETS = ("smoke", "full")


@dataclass(frozen=True)
class Budget:
    name: str
    kolmogorov_depth: int = 512
    kolmogorov_explicit: int = 20
    kolmogorov_seeds: tuple = (1, 2, 3, 4, 5)
    consistency_explicit: int = 12
    yaglom_depth: int = 256
    yaglom_accepted: int = 5000
    iic_depth: int = 256
    iic_reps: int = 5000
    iic_lookahead: int = 10
    fixed_tree_seed: int = 1
    fixed_tree_explicit: int = 20
    oracle_trees: int = 20
    marginal_trees: int = 10
    marginal_samples: int = 100_000
    marginal_lookahead: int = 10
    martingale_trees: int = 10_000
    martingale_nmax: int = 12
    spread_depths: tuple = (64, 128, 256)
    spread_accepted: int = 10_000
    seed: int = 20240601


FULL = Budget("full")
SMOKE = Budget(
    "smoke",
    kolmogorov_explicit=16,
    kolmogorov_seeds=(1, 2),
    iic_depth=128,
    iic_reps=2000,
    iic_lookahead=8,
    fixed_tree_explicit=14,
    martingale_trees=2000,
    spread_accepted=4000,
)


def budget(name: str) -> Budget:
    if name not in BUDGETS:
        raise ValueError(f"budget must be one of {BUDGETS}")
    return FULL if name == "full" else SMOKE


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0
    limit_seconds: float | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        limit = f" (limit {self.limit_seconds:.0f}s)" if self.limit_seconds else ""
        return f"[{status}] criterion {self.number}: {self.title} [{self.seconds:.1f}s{limit}]"

    def as_dict(self) -> dict:
        return {
            "criterion": self.number, "title": self.title, "passed": self.passed,
            "seconds": self.seconds, "limit_seconds": self.limit_seconds, "details": self.details,
        }


UNIF = uniform_range(1, 3)
DET = deterministic(2)


def _timed(number, title, limit, fn: Callable[[], tuple[bool, dict]]) -> CriterionResult:
    t0 = time.perf_counter()
    passed, details = fn()
    return CriterionResult(number, title, bool(passed), details, time.perf_counter() - t0, limit)


def criterion_1(b: Budget) -> CriterionResult:
    def run():
        n = 10_000
        rows = {}
        for spec, lam_hand in ((DET, 4.0), (UNIF, 3.0)):
            q = annealed.annealed_survival_exact(spec, n)[n]
            rows[spec.name] = {"n_q": n * q, "lambda": lam_hand, "ratio": n * q / lam_hand}
        return all(abs(r["ratio"] - 1) < 0.02 for r in rows.values()), rows

    return _timed(1, "annealed Kolmogorov estimate", 1, run)


def criterion_2(b: Budget) -> CriterionResult:
    def run():
        n = 512
        tree = generate(DET, b.seed, b.consistency_explicit)
        quenched = percolation.survival_exact(tree, n, allow_closure=True).q
        ann = annealed.annealed_survival_exact(DET, n)
        err = float(np.max(np.abs(quenched - ann)))
        return err < 1e-12, {"max_abs_diff": err, "explicit_depth": tree.generated_depth}

    return _timed(2, "deterministic tree: quenched = annealed survival", 1, run)


def _kolmogorov_trees(b: Budget):
    return [generate(UNIF, s, b.kolmogorov_explicit) for s in b.kolmogorov_seeds]


def criterion_3(b: Budget) -> CriterionResult:
    def run():
        lam = derive_params(UNIF).lam
        rows = []
        for tree in _kolmogorov_trees(b):
            n = b.kolmogorov_depth
            q = percolation.survival_probability(tree, n, allow_closure=True)
            w = float(tree.w[-1])
            rows.append({"seed": tree.master_seed, "q_n": q, "W_D": w, "ratio": n * q / (lam * w)})
        return all(0.85 <= r["ratio"] <= 1.15 for r in rows), {"n": b.kolmogorov_depth, "trees": rows}

    return _timed(3, "quenched Kolmogorov estimate", 60, run)


def _fixed_tree(b: Budget) -> GWTree:
    return generate(UNIF, b.fixed_tree_seed, b.fixed_tree_explicit)


def criterion_4(b: Budget) -> CriterionResult:
    def run():
        rows = {}
        for tree in (_fixed_tree(b), generate(DET, b.seed, 0)):
            lam = derive_params(tree.spec).lam
            sample = percolation.conditioned_sizes(tree, b.yaglom_depth, b.yaglom_accepted, b.seed)
            scaled = sample.scaled
            rows[tree.spec.name] = {
                "ks": stats.ks_distance(scaled, stats.exp_cdf(lam)),
                "mean": float(scaled.mean()),
                "target_mean": 1 / lam,
                "acceptance_rate": sample.acceptance_rate,
            }
        return all(r["ks"] < 0.05 for r in rows.values()), {"n": b.yaglom_depth, **rows}

    return _timed(4, "quenched Yaglom law", 600, run)


def criterion_5(b: Budget) -> CriterionResult:
    def run():
        rows = {}
        for tree in (generate(DET, b.seed, 0), _fixed_tree(b)):
            e = iic.iic_size_experiment(tree, b.iic_depth, b.iic_reps, b.seed, lookahead=b.iic_lookahead)
            rows[tree.spec.name] = {"ks": e.ks, "mean_ratio": e.mean_ratio, "min_c_n": int(e.c_n.min())}
        ok = all(r["ks"] < 0.05 and abs(r["mean_ratio"] - 1) < 0.05 for r in rows.values())
        return ok, {"n": b.iic_depth, "lookahead": b.iic_lookahead, **rows}

    return _timed(5, "quenched IIC size law", 600, run)


def oracle_trees(count: int, max_edges: int = 20):
    """Small trees for oracle checks: seed ``s`` generated as deep as the edge budget allows (at most 4)."""
    out = []
    for s in itertools.count():
        if len(out) == count:
            break
        depth = 0
        for d in range(1, 5):
            t = generate(UNIF, s, d)
            if t.num_edges > max_edges:
                break
            depth = d
        if depth:
            out.append(generate(UNIF, s, depth))
    return out


def criterion_6(b: Budget) -> CriterionResult:
    def run():
        worst = 0.0
        checked = 0
        for tree in oracle_trees(b.oracle_trees):
            exact = percolation.factorial_moments_exact(tree, tree.generated_depth, 3).table
            for j in range(1, tree.generated_depth + 1):
                brute = oracles.brute_force_moments(tree, j, 3)
                worst = max(worst, float(np.max(np.abs(exact[j] - brute))))
                checked += 1
        return worst < 1e-12, {"max_abs_error": worst, "depths_checked": checked}

    return _timed(6, "factorial-moment DP vs brute force", 60, run)


def criterion_7(b: Budget) -> CriterionResult:
    def run():
        m = b.marginal_lookahead
        rows = []
        for s in range(b.marginal_trees):
            tree = generate(UNIF, s, 2 + m)
            shapes = iic.enumerate_cluster_shapes(tree, 2)
            exact = {t: iic.iic_marginal_exact(tree, t, 2, lookahead=m) for t in shapes}
            depth1 = {t: iic.iic_marginal_exact(tree, t, 1, horizon_depth=2 + m)
                      for t in iic.enumerate_cluster_shapes(tree, 1)}
            induced: dict = {}
            for t, p in exact.items():
                r = iic.restrict_shape(tree, t, 1)
                induced[r] = induced.get(r, 0.0) + p
            consistency = max(abs(induced.get(t, 0.0) - p) for t, p in depth1.items())
            freqs = iic.sample_shape_frequencies(tree, 2, b.marginal_samples, b.seed + s, lookahead=m,
                                                 horizon="absolute")
            rows.append({
                "seed": s, "shapes": len(shapes), "tv": iic.tv_distance(freqs, exact),
                "sum_error": abs(math.fsum(exact.values()) - 1.0), "consistency_error": consistency,
            })
        ok = all(r["tv"] < 0.02 and r["sum_error"] < 1e-9 and r["consistency_error"] < 1e-9 for r in rows)
        return ok, {"samples": b.marginal_samples, "lookahead": m, "trees": rows}

    return _timed(7, "IIC sampler vs exact marginal", 300, run)


def criterion_8(b: Budget) -> CriterionResult:
    def run():
        study = martingale.increment_study(UNIF, 2, b.martingale_nmax, b.martingale_trees, b.seed)
        z = study.max_abs_z
        slope = study.fit.slope
        return z < 4 and slope < -0.05, {
            "trees": b.martingale_trees, "max_abs_z": z, "slope": slope,
            "mean_increment": study.mean_increment.tolist(), "l2_increment": study.l2_increment.tolist(),
        }

    return _timed(8, "martingale property and increment decay", 300, run)


def sandwich_cases(b: Budget):
    """(tree, depths) pairs touched by criteria 3-5."""
    cases = []
    for tree in _kolmogorov_trees(b):
        cases.append((tree, list(range(0, tree.generated_depth + 1)) + [b.kolmogorov_depth]))
    fixed = _fixed_tree(b)
    cases.append((fixed, list(range(0, fixed.generated_depth + 1)) + [b.yaglom_depth, b.iic_depth]))
    det = generate(DET, b.seed, b.consistency_explicit)
    cases.append((det, list(range(0, det.generated_depth + 1)) + [b.yaglom_depth, b.iic_depth]))
    return cases


def criterion_9(b: Budget) -> CriterionResult:
    def run():
        violations = []
        checked = 0
        tightest = math.inf
        for tree, depths in sandwich_cases(b):
            for n in sorted(set(depths)):
                s = percolation.sandwich_bounds(tree, n, allow_closure=True)
                checked += 1
                if not s.holds:
                    violations.append({"tree": f"{tree.spec.name}/{tree.master_seed}", "n": n,
                                       "lower": s.lower, "value": s.value, "upper": s.upper})
                if n > 0:
                    tightest = min(tightest, s.value - s.lower, s.upper - s.value)
        return not violations, {"checked": checked, "violations": violations, "smallest_gap": tightest}

    return _timed(9, "second-moment / resistance sandwich", None, run)


def criterion_10(b: Budget) -> CriterionResult:
    def run():
        tree = _fixed_tree(b)
        rows = [percolation.spread_diagnostics(tree, n, b.spread_accepted, b.seed).as_dict()
                for n in b.spread_depths]
        multi = [r["p_multi"] for r in rows]
        pmax = [r["p_max"] for r in rows]
        ok = all(x > y for x, y in zip(multi, multi[1:])) and all(x > y for x, y in zip(pmax, pmax[1:]))
        return ok, {"rows": rows}

    return _timed(10, "spread diagnostics decrease", 600, run)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def run_all(budget_name: str = "smoke", only=None, report: Callable[[str], None] | None = None):
    b = budget(budget_name)
    results = []
    for i, fn in enumerate(CRITERIA, start=1):
        if only and i not in only:
            continue
        r = fn(b)
        results.append(r)
        if report:
            report(r.line())
    return results
