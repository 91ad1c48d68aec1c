"""Desk-scale cooperative coevolution over a decomposition.

Shared variables are owned by whichever containing subcomponent contributed
the most fitness improvement lately, turning the overlapping decomposition
into a partition. Groups are then optimized round-robin by a small
evolution strategy against the context vector (the incumbent full
solution); ownership is re-decided between cycles.

The subsolver is a (mu/mu_w, lambda) evolution strategy with cumulative
step-size adaptation and a single global step size - a deliberately small
stand-in for a full covariance-adapting optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .benchmark import make_rng
from .decomposers import DecompositionResult
from .errors import StructuralError
from .problem import EvaluationCounter, OverlappingProblem


@dataclass
class ContextVector:
    """Incumbent full solution; fitness always equals f(x) exactly."""

    x: np.ndarray
    fitness: float


@dataclass
class ContributionLedger:
    """Last observed fitness improvement per subcomponent."""

    contributions: np.ndarray

    @classmethod
    def bootstrap(cls, n_groups: int) -> "ContributionLedger":
        return cls(np.ones(n_groups))

    def update(self, index: int, improvement: float) -> None:
        if improvement < 0:
            raise StructuralError("contributions are nonnegative")
        self.contributions[index] = improvement


@dataclass
class AllocationPlan:
    """Disjoint optimization groups, aligned with the source subcomponents."""

    groups: list[tuple[int, ...]]
    source: DecompositionResult
    owner: dict[int, int] = field(default_factory=dict)

    def validate(self, n: int) -> None:
        seen: set[int] = set()
        for gi, group in enumerate(self.groups):
            gset = set(group)
            if gset & seen:
                raise StructuralError("allocation groups must be disjoint")
            if not gset <= self.source.subcomponents[gi]:
                raise StructuralError("allocated variables left their subcomponent")
            seen |= gset
        if seen != set(range(n)):
            raise StructuralError("allocation must partition the variable set")


def allocate_shared(decomp: DecompositionResult,
                    ledger: ContributionLedger | None = None) -> AllocationPlan:
    """Assign every shared variable to its highest-contributing subcomponent.

    Ties (including the bootstrap all-equal ledger) go to the lowest
    subcomponent index; non-shared variables stay with their unique owner.
    """
    k = len(decomp.subcomponents)
    if ledger is None:
        ledger = ContributionLedger.bootstrap(k)
    if len(ledger.contributions) != k:
        raise StructuralError("ledger does not match the decomposition")
    containers: dict[int, list[int]] = {}
    for gi, sub in enumerate(decomp.subcomponents):
        for v in sub:
            containers.setdefault(v, []).append(gi)
    if set(containers) != set(range(decomp.dimension)):
        raise StructuralError("decomposition does not cover every variable")
    owner: dict[int, int] = {}
    for v, cs in containers.items():
        if len(cs) == 1:
            owner[v] = cs[0]
        else:
            best = max(cs, key=lambda gi: (ledger.contributions[gi], -gi))
            owner[v] = best
    groups: list[list[int]] = [[] for _ in range(k)]
    for v in sorted(owner):
        groups[owner[v]].append(v)
    plan = AllocationPlan([tuple(g) for g in groups], decomp, owner)
    plan.validate(decomp.dimension)
    return plan


def single_group_plan(problem: OverlappingProblem) -> AllocationPlan:
    """Baseline plan: optimize all variables as one group."""
    n = problem.dimension
    decomp = DecompositionResult(
        subcomponents=[frozenset(range(n))],
        shared_groups=[frozenset()],
        fes_used=0, algorithm="single", seed=None, dimension=n)
    return allocate_shared(decomp)


def population_size(d: int) -> int:
    return 4 + int(3 * math.log(d))


def subsolver_phase(problem: OverlappingProblem, group, ctx: ContextVector,
                    phase_fes: int, seed,
                    counter: EvaluationCounter | None = None,
                    sigma0: float = 0.3) -> tuple[np.ndarray, float]:
    """Optimize one group's slice against the frozen context.

    Runs a weighted-recombination evolution strategy with cumulative
    step-size adaptation for ``phase_fes // lambda`` generations, clamping
    samples to the box. Returns the best slice found and the nonnegative
    improvement over the phase start; the context itself is not modified.
    """
    best_slice, best_f = _es_phase(problem, group, ctx, phase_fes, seed,
                                   counter, sigma0)
    return best_slice, max(0.0, ctx.fitness - best_f)


def _es_phase(problem: OverlappingProblem, group, ctx: ContextVector,
              phase_fes: int, seed, counter: EvaluationCounter | None,
              sigma0: float) -> tuple[np.ndarray, float]:
    group = tuple(int(v) for v in group)
    if not group:
        raise StructuralError("group must be nonempty")
    d = len(group)
    lam = population_size(d)
    rng = make_rng(seed)
    idx = np.asarray(group, dtype=np.intp)
    lb = problem.lower_bound[idx]
    ub = problem.upper_bound[idx]
    span = ub - lb

    mu = lam // 2
    raw_w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw_w / raw_w.sum()
    mu_eff = 1.0 / np.sum(weights ** 2)
    c_sigma = (mu_eff + 2.0) / (d + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (d + 1.0)) - 1.0) \
        + c_sigma
    chi_n = math.sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d))

    mean = ctx.x[idx].copy()
    sigma = sigma0
    path = np.zeros(d)

    best_f = ctx.fitness
    best_slice = ctx.x[idx].copy()

    generations = int(phase_fes) // lam
    full = np.repeat(ctx.x[None, :], lam, axis=0)
    for _ in range(generations):
        steps = rng.standard_normal((lam, d))
        cand = mean + sigma * span * steps
        np.clip(cand, lb, ub, out=cand)
        full[:, idx] = cand
        vals = problem.evaluate_batch(full, counter)
        order = np.argsort(vals, kind="stable")
        gen_best = int(order[0])
        if vals[gen_best] < best_f:
            best_f = float(vals[gen_best])
            best_slice = cand[gen_best].copy()
        elite = cand[order[:mu]]
        new_mean = weights @ elite
        # CSA on the realized mean shift, measured in step units
        shift = (new_mean - mean) / (sigma * span)
        path = (1.0 - c_sigma) * path \
            + math.sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * shift
        sigma *= math.exp((c_sigma / d_sigma)
                          * (np.linalg.norm(path) / chi_n - 1.0))
        sigma = float(min(max(sigma, 1e-12), 10.0))
        mean = new_mean
    return best_slice, best_f


def cc_optimize(problem: OverlappingProblem, plan: AllocationPlan,
                budget_fes: int, seed, phase_generations: int = 20,
                dynamic_reallocation: bool = True, sigma0: float = 0.3
                ) -> tuple[np.ndarray, float, list[tuple[int, float]]]:
    """Round-robin cooperative coevolution under an FE budget.

    Each non-empty group gets a phase of ``phase_generations`` generations
    per cycle; improvements are accepted into the context vector and logged
    as that subcomponent's contribution. With dynamic reallocation the
    shared-variable ownership is recomputed from the ledger after every
    cycle. Returns the best solution, its fitness, and the (fes, best)
    trajectory. Stops before any phase that cannot fit a single generation.
    """
    if budget_fes < 1:
        raise StructuralError("budget must allow at least the initial evaluation")
    plan.validate(problem.dimension)
    counter = EvaluationCounter()
    counter.set_phase("optimization")
    seq = make_rng(seed)
    lb, ub = problem.lower_bound, problem.upper_bound
    x0 = lb + seq.uniform(size=problem.dimension) * (ub - lb)
    f0 = problem.evaluate(x0, counter)
    ctx = ContextVector(x0.copy(), f0)
    trajectory: list[tuple[int, float]] = [(counter.total_fes, ctx.fitness)]
    ledger = ContributionLedger.bootstrap(len(plan.groups))

    exhausted = False
    while not exhausted:
        for gi, group in enumerate(plan.groups):
            if not group:
                continue
            lam = population_size(len(group))
            remaining = budget_fes - counter.total_fes
            if remaining < lam:
                exhausted = True
                break
            phase = min(lam * phase_generations, remaining)
            phase_seed = int(seq.integers(2 ** 63))
            best_slice, best_f = _es_phase(
                problem, group, ctx, phase, phase_seed, counter, sigma0)
            improvement = max(0.0, ctx.fitness - best_f)
            if best_f < ctx.fitness:
                ctx.x[np.asarray(group, dtype=np.intp)] = best_slice
                ctx.fitness = best_f
            ledger.update(gi, improvement)
            trajectory.append((counter.total_fes, ctx.fitness))
        else:
            if dynamic_reallocation:
                plan = allocate_shared(plan.source, ledger)
            continue
    return ctx.x.copy(), ctx.fitness, trajectory
