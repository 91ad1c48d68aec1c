"""Post-processing of run directories: re-aggregated CSV plus figures.

The delimited files written by the runner are the contract; the figures
rendered here are companions saved next to them (PNG, Agg backend).
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from . import metrics  # noqa: E402
from .errors import StructuralError  # noqa: E402
from .metrics import GroupingScore  # noqa: E402


def load_runs(run_dir) -> tuple[dict, list[dict]]:
    path = Path(run_dir) / "runs.jsonl"
    if not path.exists():
        raise StructuralError(f"no runs.jsonl under {run_dir}")
    meta = None
    records = []
    for line in path.read_text(encoding="utf8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj.get("type") == "meta":
            meta = obj
        else:
            records.append(obj)
    if meta is None:
        raise StructuralError("runs.jsonl is missing its meta record")
    return meta, records


def render_report(run_dir) -> list[Path]:
    """Aggregate a run directory and render its figures; returns new files."""
    meta, records = load_runs(run_dir)
    mode = meta["config"]["mode"]
    if mode == "grouping":
        return _render_grouping(Path(run_dir), meta, records)
    return _render_optimization(Path(run_dir), meta, records)


def _render_grouping(out: Path, meta: dict, records: list[dict]) -> list[Path]:
    algorithms = meta["config"]["algorithms"]
    scores: dict[tuple[str, str], list[GroupingScore]] = defaultdict(list)
    for rec in records:
        scores[(rec["problem"], rec["algorithm"])].append(
            GroupingScore(rec["da"], rec["fes"], rec["run"]))
    grid = metrics.grid_rows(scores, algorithms)
    grid_path = out / "report_grid.csv"
    grid_path.write_text(metrics.format_csv(grid), encoding="utf8")

    problems = [row[0] for row in grid[1:]]
    created = [grid_path]
    for metric_name, col_offset, ylabel, logy in (
            ("da", 1, "mean decomposition accuracy", False),
            ("fes", 2, "mean function evaluations", True)):
        fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(problems) + 2), 3.2))
        width = 0.8 / max(1, len(algorithms))
        xs = np.arange(len(problems))
        for ai, alg in enumerate(algorithms):
            vals = [float(row[2 * ai + col_offset]) if row[2 * ai + col_offset]
                    else np.nan for row in grid[1:]]
            ax.bar(xs + ai * width, vals, width, label=alg)
        ax.set_xticks(xs + 0.4 - width / 2)
        ax.set_xticklabels(problems, rotation=60, ha="right", fontsize=7)
        ax.set_ylabel(ylabel)
        if logy:
            ax.set_yscale("log")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out / f"report_{metric_name}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        created.append(path)
    return created


def _render_optimization(out: Path, meta: dict, records: list[dict]) -> list[Path]:
    plans = meta["config"]["plans"]
    by_cell: dict[tuple[str, str], list[dict]] = defaultdict(list)
    for rec in records:
        by_cell[(rec["problem"], rec["plan"])].append(rec)
    problems = []
    for rec in records:
        if rec["problem"] not in problems:
            problems.append(rec["problem"])

    created = []
    for problem in problems:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for plan in plans:
            cells = by_cell.get((problem, plan), [])
            curves = []
            for rec in cells:
                traj_path = out / f"traj_{problem}_{plan}_{rec['run']}.csv"
                if not traj_path.exists():
                    continue
                rows = traj_path.read_text(encoding="utf8").splitlines()[1:]
                pts = np.array([[float(a), float(b)]
                                for a, b in (r.split(",") for r in rows)])
                curves.append(pts)
            if not curves:
                continue
            grid_fes = np.unique(np.concatenate([c[:, 0] for c in curves]))
            stacked = np.vstack([
                np.interp(grid_fes, c[:, 0], c[:, 1]) for c in curves])
            ax.plot(grid_fes, np.median(stacked, axis=0), label=plan)
        ax.set_xlabel("function evaluations")
        ax.set_ylabel("median best fitness")
        ax.set_yscale("log")
        ax.set_title(problem, fontsize=9)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out / f"report_convergence_{problem}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        created.append(path)

    summary_path = out / "report_best.csv"
    rows = [["problem", "plan", "median_best", "mean_best", "runs"]]
    for problem in problems:
        for plan in plans:
            cells = by_cell.get((problem, plan), [])
            if not cells:
                continue
            vals = np.array([c["best_f"] for c in cells])
            rows.append([problem, plan, repr(float(np.median(vals))),
                         repr(float(np.mean(vals))), len(vals)])
    summary_path.write_text(metrics.format_csv(rows), encoding="utf8")
    created.append(summary_path)
    return created
