"""Decomposition accuracy, multi-run aggregation, and rank-sum comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import StructuralError
from .problem import GroundTruth


@dataclass(frozen=True)
class GroupingScore:
    da: float
    fes: int
    run_seed: int | None = None


@dataclass(frozen=True)
class ComparisonCell:
    verdict: str            # W | T | L, from the first sample's point of view
    p_value: float
    median_a: float
    median_b: float


def decomposition_accuracy(truth: GroundTruth, formed) -> float:
    """Recovery score of formed groups against the true subcomponents.

    Sums, over true subcomponents, the largest intersection with any formed
    group, normalized by the total true membership (shared variables count
    once per containing subcomponent). Formed groups that merge several true
    subcomponents are not penalized; splitting them is.
    """
    if not truth.subcomponents:
        raise StructuralError("ground truth is empty")
    groups = getattr(formed, "subcomponents", formed)
    groups = [frozenset(g) for g in groups]
    if not groups:
        raise StructuralError("formed decomposition has no groups")
    num = 0
    den = 0
    for g_true in truth.subcomponents:
        den += len(g_true)
        num += max(len(g_true & g) for g in groups)
    return num / den


def aggregate(scores) -> tuple[float, float, float]:
    """Mean DA, mean FEs, and sample standard deviation of DA."""
    scores = list(scores)
    if not scores:
        raise StructuralError("need at least one score")
    das = np.array([s.da for s in scores], dtype=float)
    fes = np.array([s.fes for s in scores], dtype=float)
    std = float(np.std(das, ddof=1)) if len(scores) > 1 else 0.0
    return float(np.mean(das)), float(np.mean(fes)), std


def rank_sum(a, b, alpha: float = 0.05) -> ComparisonCell:
    """Two-sided Mann-Whitney comparison for minimization results.

    ``W`` means the first sample is significantly better (lower median),
    ``L`` significantly worse, ``T`` otherwise. Uses the normal
    approximation with tie correction; fully tied samples compare as T with
    p = 1.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 5 or b.size < 5:
        raise StructuralError("rank-sum comparison needs at least 5 points per side")
    if np.ptp(np.concatenate([a, b])) == 0.0:
        return ComparisonCell("T", 1.0, float(np.median(a)), float(np.median(b)))
    res = stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic")
    p = float(res.pvalue)
    if math.isnan(p):
        p = 1.0
    med_a = float(np.median(a))
    med_b = float(np.median(b))
    verdict = "T"
    if p < alpha:
        if med_a < med_b:
            verdict = "W"
        elif med_a > med_b:
            verdict = "L"
    return ComparisonCell(verdict, p, med_a, med_b)


def grid_rows(records, algorithms) -> list[list[str]]:
    """Rows of a problems-by-algorithms grid of mean DA and mean FEs.

    ``records`` maps ``(problem, algorithm)`` to a list of
    :class:`GroupingScore`. Row order follows first appearance of problems.
    """
    problems: list[str] = []
    for prob, _ in records:
        if prob not in problems:
            problems.append(prob)
    header = ["problem"]
    for alg in algorithms:
        header += [f"{alg}_mean_da", f"{alg}_mean_fes"]
    rows = [header]
    for prob in problems:
        row = [prob]
        for alg in algorithms:
            scores = records.get((prob, alg))
            if not scores:
                row += ["", ""]
                continue
            mean_da, mean_fes, _ = aggregate(scores)
            row += [repr(mean_da), repr(mean_fes)]
        rows.append(row)
    return rows


def format_csv(rows) -> str:
    """Comma-separated, '.' decimals, LF endings, header row included."""
    return "".join(",".join(str(c) for c in row) + "\n" for row in rows)
