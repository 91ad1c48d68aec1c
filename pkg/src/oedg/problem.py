"""Evaluatable problem abstraction, FE accounting, and ground-truth structure.

Decision variables are 0-based everywhere inside the library; the report
writers convert to 1-based labels on the way out.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, StructuralError


class EvaluationCounter:
    """Counts objective calls, optionally split into named phases.

    Increment is lock-protected so one run may share the counter across
    worker threads. The count never decreases.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._total = 0
        self._phases: dict[str, int] = {}
        self._phase = None
        self.out_of_bounds = 0

    @property
    def total_fes(self) -> int:
        return self._total

    @property
    def per_phase(self) -> dict[str, int]:
        return dict(self._phases)

    def set_phase(self, name: str | None) -> None:
        self._phase = name

    def add(self, k: int = 1) -> None:
        if k < 0:
            raise StructuralError("counter can only move forward")
        with self._lock:
            self._total += k
            if self._phase is not None:
                self._phases[self._phase] = self._phases.get(self._phase, 0) + k

    def flag_out_of_bounds(self, k: int = 1) -> None:
        with self._lock:
            self.out_of_bounds += k


@dataclass(frozen=True)
class GroundTruth:
    """True subcomponent index sets and the shared variables of each."""

    subcomponents: tuple[frozenset[int], ...]
    shared_variables: tuple[frozenset[int], ...]

    @classmethod
    def from_subcomponents(cls, subcomponents) -> "GroundTruth":
        subs = tuple(frozenset(s) for s in subcomponents)
        counts: dict[int, int] = {}
        for s in subs:
            for v in s:
                counts[v] = counts.get(v, 0) + 1
        shared = tuple(frozenset(v for v in s if counts[v] >= 2) for s in subs)
        return cls(subs, shared)

    def validate(self, n: int) -> None:
        cover = set()
        for s in self.subcomponents:
            if not s:
                raise StructuralError("empty subcomponent in ground truth")
            cover |= s
        if cover != set(range(n)):
            raise StructuralError("subcomponents do not cover the variable set")
        if len(self.shared_variables) != len(self.subcomponents):
            raise StructuralError("shared groups not aligned with subcomponents")
        counts: dict[int, int] = {}
        for s in self.subcomponents:
            for v in s:
                counts[v] = counts.get(v, 0) + 1
        for sub, sh in zip(self.subcomponents, self.shared_variables):
            if not sh <= sub:
                raise StructuralError("shared variables leak outside their subcomponent")
            expect = frozenset(v for v in sub if counts[v] >= 2)
            if sh != expect:
                raise StructuralError("shared set disagrees with membership counts")

    def shared_count(self) -> int:
        counts: dict[int, int] = {}
        for s in self.subcomponents:
            for v in s:
                counts[v] = counts.get(v, 0) + 1
        return sum(1 for c in counts.values() if c >= 2)


@dataclass(frozen=True)
class ProblemInfo:
    name: str = "custom"
    topology: str = "custom"
    conflict: str = "conforming"
    overlapping_degree: float = 0.0
    extra: dict = field(default_factory=dict)


class OverlappingProblem:
    """Black-box objective with box bounds and hidden subcomponent structure.

    ``evaluator`` must be pure: identical inputs give bit-identical outputs
    within a process. Decomposers only see ``evaluate``/bounds; the ground
    truth is reserved for scoring.
    """

    def __init__(self, dimension, lower_bound, upper_bound, evaluator,
                 ground_truth=None, info: ProblemInfo | None = None):
        if dimension <= 0:
            raise StructuralError("dimension must be positive")
        lb = np.asarray(lower_bound, dtype=float)
        ub = np.asarray(upper_bound, dtype=float)
        if lb.shape != (dimension,) or ub.shape != (dimension,):
            raise StructuralError("bounds must be vectors of length n")
        if not np.all(lb < ub):
            raise StructuralError("need lower_bound[i] < upper_bound[i] for all i")
        self.dimension = int(dimension)
        self.lower_bound = lb
        self.upper_bound = ub
        self._evaluator = evaluator
        self.ground_truth = ground_truth
        self.info = info or ProblemInfo()
        if ground_truth is not None:
            ground_truth.validate(self.dimension)

    def evaluate(self, x, counter: EvaluationCounter | None = None) -> float:
        return evaluate(self, x, counter)

    def evaluate_batch(self, xs, counter: EvaluationCounter | None = None) -> np.ndarray:
        """Evaluate a (k, n) batch; counts k FEs. Rows match single calls."""
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.dimension:
            raise StructuralError(
                f"expected batch of shape (k, {self.dimension}), got {xs.shape}")
        batch = getattr(self._evaluator, "batch", None)
        if batch is not None:
            vals = np.asarray(batch(xs), dtype=float)
        else:
            vals = np.array([float(self._evaluator(row)) for row in xs])
        if counter is not None:
            counter.add(xs.shape[0])
            oob = np.count_nonzero(
                np.any((xs < self.lower_bound) | (xs > self.upper_bound), axis=1))
            if oob:
                counter.flag_out_of_bounds(int(oob))
        if np.any(np.isnan(vals)):
            bad = int(np.flatnonzero(np.isnan(vals))[0])
            raise EvaluationError("objective returned NaN", x=xs[bad].copy())
        return vals


def evaluate(problem: OverlappingProblem, x, counter: EvaluationCounter | None = None) -> float:
    """Evaluate ``problem`` at ``x`` and charge one FE to ``counter``.

    Out-of-bounds points are evaluated but tallied on the counter.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dimension,):
        raise StructuralError(
            f"expected point of length {problem.dimension}, got shape {x.shape}")
    value = float(problem._evaluator(x))
    if counter is not None:
        counter.add(1)
        if np.any(x < problem.lower_bound) or np.any(x > problem.upper_bound):
            counter.flag_out_of_bounds()
    if np.isnan(value):
        raise EvaluationError("objective returned NaN", x=x.copy())
    return value


def overlapping_degree(truth: GroundTruth, n: int) -> float:
    """Fraction of variables appearing in two or more true subcomponents."""
    if n <= 0:
        raise StructuralError("n must be positive")
    cover = set()
    for s in truth.subcomponents:
        cover |= s
    if cover != set(range(n)):
        raise StructuralError("ground truth does not cover {0..n-1}")
    return truth.shared_count() / n
