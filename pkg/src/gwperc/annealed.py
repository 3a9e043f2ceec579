"""Annealed baselines: the critical branching process with offspring ``Bin(Z, pc)``.

Survival probabilities come from iterating the probability generating
function of the thinned law.  Yaglom samples are drawn by simulating the
population sizes directly, level by level, which does not share code with
the quenched cluster explorer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import iic, rng
from ._parallel import ordered_map
from .errors import AttemptCapError, PreconditionError
from .martingale import replicate_tree_seed
from .offspring import OffspringSpec, annealed_offspring, derive_params
from .stats import EmpiricalSummary, exp_cdf, ks_distance

POPULATION_CAP = 10**9
DEFAULT_ATTEMPT_CAP = 10**9
BATCH = 1 << 14
MIN_ACCEPTED = 1000


def annealed_survival_exact(spec: OffspringSpec, n_max: int) -> np.ndarray:
    """``q~_n`` for ``n = 0..n_max`` from ``q~_n = 1 - f(1 - q~_{n-1})``.

    ``f`` is the generating function of ``Bin(Z, pc)``; each step is
    evaluated as ``sum_j P[Z~ = j] (1 - (1 - q)^j)`` to avoid cancellation.
    """
    if n_max < 1:
        raise PreconditionError("n_max must be at least 1")
    law = annealed_offspring(spec).pmf
    js = np.flatnonzero(law)
    bs = law[js]
    out = np.empty(n_max + 1)
    q = 1.0
    out[0] = q
    for n in range(1, n_max + 1):
        q = math.fsum(bs * -np.expm1(js * math.log1p(-q))) if q < 1.0 else float(bs[js > 0].sum())
        out[n] = q
    return out


def _batch_generator(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=rng.derive_key(seed, "annealed", batch)))


def _simulate_batch(law: np.ndarray, n: int, size: int, gen: np.random.Generator) -> np.ndarray:
    """Population at depth ``n`` of ``size`` independent processes started from one individual."""
    pop = np.ones(size, dtype=np.int64)
    js = np.arange(len(law))
    alive = np.arange(size)
    for _ in range(n):
        if alive.size == 0:
            break
        counts = gen.multinomial(pop[alive], law)
        nxt = counts @ js
        if nxt.max(initial=0) > POPULATION_CAP:
            raise AttemptCapError(f"annealed population exceeded {POPULATION_CAP}")
        pop[alive] = nxt
        alive = alive[nxt > 0]
    return pop


@dataclass(frozen=True)
class AnnealedYaglom:
    n: int
    lam: float
    sizes: np.ndarray = field(repr=False)
    attempts: int
    summary: EmpiricalSummary
    ks: float

    @property
    def accepted(self) -> int:
        return len(self.sizes)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts

    @property
    def acceptance_se(self) -> float:
        p = self.acceptance_rate
        return math.sqrt(p * (1 - p) / self.attempts)

    def as_dict(self) -> dict:
        return {
            "n": self.n, "lambda": self.lam, "accepted": self.accepted, "attempts": self.attempts,
            "acceptance_rate": self.acceptance_rate, "ks_exp": self.ks, **self.summary.as_dict(),
        }


def annealed_yaglom(spec: OffspringSpec, n: int, replicates: int, seed: int, threads: int = 1,
                    attempt_cap: int = DEFAULT_ATTEMPT_CAP) -> AnnealedYaglom:
    """``Z~_n / n`` given ``Z~_n > 0`` for ``replicates`` accepted runs.

    Runs are simulated in fixed batches of ``BATCH``, each with its own
    counter-based generator, and the first survivors in run order are kept.
    """
    if replicates < MIN_ACCEPTED:
        raise PreconditionError(f"need at least {MIN_ACCEPTED} accepted samples, got {replicates}")
    if n < 1:
        raise PreconditionError("n must be positive")
    law = np.ascontiguousarray(annealed_offspring(spec).pmf)
    q = annealed_survival_exact(spec, n)[n]
    per_round = max(threads, math.ceil(1.2 * replicates / (q * BATCH)))
    kept: list[np.ndarray] = []
    total = 0
    batch = 0
    attempts = 0

    def work(b):
        return _simulate_batch(law, n, BATCH, _batch_generator(seed, b))

    while total < replicates:
        if batch * BATCH >= attempt_cap:
            raise AttemptCapError(f"only {total} of {replicates} survived after {attempt_cap} attempts")
        for pop in ordered_map(work, range(batch, batch + per_round), threads):
            pos = np.flatnonzero(pop)
            take = pos[: replicates - total]
            kept.append(pop[take])
            total += len(take)
            if total >= replicates:
                attempts += int(take[-1]) + 1
                break
            attempts += BATCH
        batch += per_round
    sizes = np.concatenate(kept)
    lam = derive_params(spec).lam
    scaled = sizes / n
    return AnnealedYaglom(n, lam, sizes, attempts, EmpiricalSummary.of(scaled), ks_distance(scaled, exp_cdf(lam)))


def annealed_iic_sizes(spec: OffspringSpec, n: int, replicates: int, seed: int,
                       lookahead: int = iic.DEFAULT_LOOKAHEAD, threads: int = 1) -> iic.IICExperiment:
    """IIC size law with a fresh tree per replicate (replicate ``r`` uses tree ``replicate_tree_seed(seed, r)``)."""

    def roots(lo, hi):
        return np.array([rng.derive_key(replicate_tree_seed(seed, r), "tree", 0) for r in range(lo, hi)],
                        dtype=np.uint64)

    return iic._experiment(spec, n, replicates, seed, lookahead, "relative", threads, roots, None)
