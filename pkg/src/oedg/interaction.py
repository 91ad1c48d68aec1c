"""Finite-differences interaction detection.

The detector compares two fitness differences under paired perturbations
from a cached base point (the lower-bound corner): the first set moves to
the box midpoint, the second to the upper bound. A nonzero
``|delta1 - delta2|`` beyond a roundoff-aware threshold marks the two index
sets as interacting.

Two search primitives are built on top of the single check:

* :func:`direct_interactors` - one bisection pass locating every candidate
  variable that interacts with a fixed seed set (no transitive growth);
* :func:`interact_closure` - repeated passes that also absorb variables
  reachable through the growing set (transitive closure).

:func:`interact_ov` runs the bisection in the opposite direction: it splits
a formed group against the fixed remainder to recover its shared variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StructuralError
from .problem import EvaluationCounter, OverlappingProblem, evaluate

#: unit roundoff of IEEE double fitness values
UNIT_ROUNDOFF = 2.0 ** -53


def adaptive_threshold(f_values, n: int, gamma: float | None = None) -> float:
    """Roundoff-aware interaction threshold.

    ``eps = gamma(k) * sum(|f|)`` over the four fitness values of one check,
    with ``gamma(k) = k*mu / (1 - k*mu)``, ``k = ceil(sqrt(n)) + 2`` and
    ``mu`` the unit roundoff. ``gamma`` overrides the computed coefficient.
    """
    vals = [float(v) for v in f_values]
    if any(not math.isfinite(v) for v in vals):
        raise StructuralError("threshold needs finite fitness values")
    if gamma is None:
        k = math.ceil(math.sqrt(n)) + 2
        kmu = k * UNIT_ROUNDOFF
        if kmu >= 1.0:
            raise StructuralError("dimension too large for the roundoff model")
        gamma = kmu / (1.0 - kmu)
    return gamma * sum(abs(v) for v in vals)


@dataclass(frozen=True)
class InteractionVerdict:
    interacting: bool
    delta1: float
    delta2: float
    threshold_used: float


class DetectionContext:
    """Per-run state for interaction checks.

    Owns the base point (lower bounds) and its fitness, the FE counter, and
    two value caches: the mid-perturbation of a fixed first set and the
    upper-perturbation of a fixed second set. Both points recur across the
    bisection passes, so caching them is what keeps the FE cost near the
    n*log(n) budget. Single-owner: do not share across threads.
    """

    def __init__(self, problem: OverlappingProblem,
                 counter: EvaluationCounter | None = None,
                 gamma: float | None = None, cache: bool = True):
        self.problem = problem
        self.counter = counter if counter is not None else EvaluationCounter()
        self.gamma = gamma
        self.n = problem.dimension
        self.lower = problem.lower_bound.copy()
        self.upper = problem.upper_bound.copy()
        self.mid = 0.5 * (self.lower + self.upper)
        self.base_point = self.lower.copy()
        self.base_fitness = evaluate(problem, self.base_point, self.counter)
        self._cache: dict | None = {} if cache else None

    def _point(self, mid_idx, ub_idx) -> np.ndarray:
        x = self.base_point.copy()
        if mid_idx:
            ii = np.fromiter(mid_idx, dtype=np.intp)
            x[ii] = self.mid[ii]
        if ub_idx:
            ii = np.fromiter(ub_idx, dtype=np.intp)
            x[ii] = self.upper[ii]
        return x

    def _cached(self, key, mid_idx, ub_idx) -> float:
        if self._cache is not None:
            hit = self._cache.get(key)
            if hit is not None:
                return hit
        val = evaluate(self.problem, self._point(mid_idx, ub_idx), self.counter)
        if self._cache is not None:
            self._cache[key] = val
        return val


def set_interacts(x1, x2, ctx: DetectionContext) -> InteractionVerdict:
    """Set-to-set interaction check; three FEs on first sight of the sets.

    ``x1`` moves from the base to the midpoint, ``x2`` to the upper bound.
    Exact ties at the threshold count as non-interacting.
    """
    s1 = tuple(sorted(x1))
    s2 = tuple(sorted(x2))
    if not s1 or not s2:
        raise StructuralError("both index sets must be nonempty")
    if set(s1) & set(s2):
        raise StructuralError("index sets must be disjoint")
    f_base = ctx.base_fitness
    f1 = ctx._cached(("m", s1), s1, ())
    f2 = ctx._cached(("u", s2), (), s2)
    f12 = evaluate(ctx.problem, ctx._point(s1, s2), ctx.counter)
    delta1 = f12 - f2
    delta2 = f1 - f_base
    eps = adaptive_threshold((f_base, f1, f2, f12), ctx.n, ctx.gamma)
    return InteractionVerdict(abs(delta1 - delta2) > eps, delta1, delta2, eps)


def direct_interactors(seed, candidates, ctx: DetectionContext) -> set[int]:
    """Variables among ``candidates`` that interact with the fixed ``seed`` set.

    One recursive-bisection pass: test the whole candidate block, descend
    into interacting halves down to singletons. Candidates are visited in
    the order given; the result is order-independent.
    """
    seed = tuple(sorted(seed))
    if not seed:
        raise StructuralError("seed set must be nonempty")
    cand = [int(v) for v in candidates]
    found: set[int] = set()

    def descend(lo: int, hi: int) -> None:
        block = cand[lo:hi]
        if not set_interacts(seed, block, ctx).interacting:
            return
        if hi - lo == 1:
            found.add(block[0])
            return
        mid = (lo + hi) // 2
        descend(lo, mid)
        descend(mid, hi)

    if cand:
        descend(0, len(cand))
    return found


def interact_closure(seed, variables, ctx: DetectionContext) -> set[int]:
    """Transitive closure of ``seed`` under direct set interaction.

    Grows the seed set by full bisection passes over the remainder until a
    pass finds nothing; every returned variable interacts with the grown
    set. The visit order of the remainder does not change the result.
    """
    pool = [int(v) for v in variables]
    if not pool:
        raise StructuralError("variable pool must be nonempty")
    x1 = set(int(v) for v in seed)
    if not x1 <= set(pool):
        raise StructuralError("seed must be contained in the variable pool")
    while True:
        remainder = [v for v in pool if v not in x1]
        if not remainder:
            break
        found = direct_interactors(x1, remainder, ctx)
        if not found:
            break
        x1 |= found
    return x1


def interact_ov(x1, x2, ctx: DetectionContext) -> set[int]:
    """Members of ``x1`` that interact with the fixed set ``x2``.

    Bisects ``x1`` against ``x2``; the upper-bound perturbation of ``x2`` is
    cached once, so each visited block costs two FEs. Returns an empty set
    when ``x2`` is empty.
    """
    parts = sorted(int(v) for v in x1)
    if not parts:
        raise StructuralError("x1 must be nonempty")
    other = tuple(sorted(int(v) for v in x2))
    if set(parts) & set(other):
        raise StructuralError("index sets must be disjoint")
    if not other:
        return set()
    found: set[int] = set()

    def descend(lo: int, hi: int) -> None:
        block = parts[lo:hi]
        if not set_interacts(block, other, ctx).interacting:
            return
        if hi - lo == 1:
            found.add(block[0])
            return
        mid = (lo + hi) // 2
        descend(lo, mid)
        descend(mid, hi)

    descend(0, len(parts))
    return found
