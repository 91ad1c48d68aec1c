"""Declarative experiment runner behind the CLI.

A run fans (problem x algorithm x run) cells over a thread pool; every cell
derives its own seed from the master seed and the cell key, so reports are
byte-identical no matter how many workers execute them. Reports are
machine-readable: a JSONL file of per-run records (first line echoes the
resolved configuration), CSV grids, and a manifest with per-cell status.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .benchmark import hash_part, suite
from .ccopt import allocate_shared, cc_optimize, single_group_plan
from .decomposers import dg2, oedg, ordg, rdg3
from .errors import StructuralError
from .metrics import GroupingScore

ENV_OUTPUT_DIR = "OEDG_OUT"

ALGORITHMS = ("oedg", "rdg3", "ordg", "dg2")
PLAN_SOURCES = ("oedg", "rdg3", "ordg", "dg2", "single", "truth")


class ConfigError(StructuralError):
    def __init__(self, message, key=None):
        super().__init__(message if key is None
                         else f"{message} (config key: {key})")
        self.key = key


@dataclass
class ExperimentConfig:
    mode: str = "grouping"
    suite: str = "LTO"
    scale: str = "desk"
    algorithms: list[str] = field(default_factory=lambda: ["oedg"])
    plans: list[str] = field(default_factory=lambda: ["oedg", "single"])
    runs: int = 30
    seed: int = 0
    output: str = ""
    threads: int = 1
    budget: int = 100_000
    problems: list[str] = field(default_factory=list)  # empty = whole suite
    desk_factor: int = 5
    phase_generations: int = 20
    params: dict = field(default_factory=dict)  # per-algorithm sections

    def resolved_output(self) -> Path:
        if self.output:
            return Path(self.output)
        return Path(os.environ.get(ENV_OUTPUT_DIR, "oedg-runs"))

    def validate(self) -> None:
        if self.mode not in ("grouping", "optimization"):
            raise ConfigError(f"unknown mode {self.mode!r}", "mode")
        from .benchmark import SUITE_NAMES
        if self.suite.upper() not in SUITE_NAMES:
            raise ConfigError(f"unknown suite {self.suite!r}", "suite")
        if self.scale not in ("paper", "desk"):
            raise ConfigError(f"unknown scale {self.scale!r}", "scale")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1", "runs")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1", "threads")
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {alg!r}", "algorithms")
        if self.mode == "optimization":
            if self.budget <= 0:
                raise ConfigError("budget must exceed one subsolver phase",
                                  "budget")
            if len(self.plans) < 2:
                raise ConfigError("optimization compares at least two plans",
                                  "plans")
            for plan in self.plans:
                if plan not in PLAN_SOURCES:
                    raise ConfigError(f"unknown plan source {plan!r}", "plans")

    def as_dict(self) -> dict:
        return asdict(self)


def _coerce(value: str):
    text = value.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if "," in text:
        return [part.strip() for part in text.split(",") if part.strip()]
    return text


def load_config(path) -> ExperimentConfig:
    """Read a sectioned key=value config file ([experiment] plus per-algorithm
    sections for parameters such as rdg3 eps_n)."""
    import configparser

    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found or unreadable")
    cfg = ExperimentConfig()
    if parser.has_section("experiment"):
        for key, raw in parser.items("experiment"):
            value = _coerce(raw)
            if key in ("algorithms", "plans", "problems"):
                if isinstance(value, str):
                    value = [value] if value else []
                elif not isinstance(value, list):
                    raise ConfigError(f"expected a name list for {key}", key)
                setattr(cfg, key, value)
            elif key in ("runs", "seed", "threads", "budget", "desk_factor",
                         "phase_generations"):
                setattr(cfg, key, int(value))
            elif key in ("mode", "suite", "scale", "output"):
                setattr(cfg, key, str(value))
            else:
                raise ConfigError(f"unknown setting {key!r}", key)
    for section in parser.sections():
        if section == "experiment":
            continue
        cfg.params[section] = {k: _coerce(v) for k, v in parser.items(section)}
    return cfg


def cell_seed(master_seed, *parts) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        [abs(hash_part(master_seed))] + [abs(hash_part(p)) for p in parts])


def decompose_with(algorithm: str, problem, seed, params: dict | None = None):
    params = dict(params or {})
    if algorithm == "oedg":
        return oedg(problem, seed, gamma=params.get("gamma"))
    if algorithm == "rdg3":
        return rdg3(problem, eps_n=int(params.get("eps_n", 50)), seed=seed,
                    gamma=params.get("gamma"))
    if algorithm == "ordg":
        return ordg(problem, seed, gamma=params.get("gamma"))
    if algorithm == "dg2":
        return dg2(problem,
                   threshold_mode=params.get("threshold_mode", "pairwise"))[1]
    raise ConfigError(f"unknown algorithm {algorithm!r}", "algorithms")


def _suite_problems(cfg: ExperimentConfig):
    problems = suite(cfg.suite, cfg.scale, cfg.seed, cfg.desk_factor)
    if cfg.problems:
        wanted = set(cfg.problems)
        problems = [p for p in problems if p.info.name in wanted
                    or p.info.name.split("_")[-1] in wanted]
        missing = wanted - {p.info.name for p in problems} \
            - {p.info.name.split("_")[-1] for p in problems}
        if missing:
            raise ConfigError(f"problems not in suite: {sorted(missing)}",
                              "problems")
    return problems


def _run_cells(cells, worker, threads: int) -> dict:
    results = {}
    if threads <= 1:
        for key in cells:
            results[key] = worker(key)
        return results
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {key: pool.submit(worker, key) for key in cells}
        for key, fut in futures.items():
            results[key] = fut.result()
    return results


def _meta_record(cfg: ExperimentConfig) -> str:
    return json.dumps({"type": "meta", "config": cfg.as_dict()}, sort_keys=True)


def _write_manifest(out: Path, cfg: ExperimentConfig, statuses) -> bool:
    all_ok = all(s == "ok" for _, s in statuses)
    manifest = {
        "config": cfg.as_dict(),
        "cells": [{"key": list(key), "status": status}
                  for key, status in statuses],
        "all_ok": all_ok,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf8")
    return all_ok


def run_grouping(cfg: ExperimentConfig) -> bool:
    """Decompose every (problem, algorithm, run) cell and write reports.

    Emits ``runs.jsonl``, ``grid.csv`` (mean DA / mean FEs per problem and
    algorithm), and ``manifest.json``. Returns True when every cell
    completed.
    """
    cfg.validate()
    problems = _suite_problems(cfg)
    out = cfg.resolved_output()
    out.mkdir(parents=True, exist_ok=True)
    by_name = {p.info.name: p for p in problems}
    cells = [(p.info.name, alg, run)
             for p in problems for alg in cfg.algorithms
             for run in range(cfg.runs)]

    def worker(key):
        name, alg, run = key
        problem = by_name[name]
        seed = cell_seed(cfg.seed, name, alg, run)
        try:
            result = decompose_with(alg, problem, seed, cfg.params.get(alg))
            da = metrics.decomposition_accuracy(problem.ground_truth, result)
            return ("ok", {
                "type": "grouping-run",
                "problem": name,
                "algorithm": alg,
                "run": run,
                "seed_path": [name, alg, run],
                "da": da,
                "fes": result.fes_used,
                "groups": len(result.subcomponents),
                "refined": result.refined,
            })
        except Exception as exc:  # noqa: BLE001 - reported in the manifest
            return (f"error: {exc}", None)

    results = _run_cells(cells, worker, cfg.threads)

    lines = [_meta_record(cfg)]
    scores: dict[tuple[str, str], list[GroupingScore]] = {}
    statuses = []
    for key in cells:
        status, record = results[key]
        statuses.append((key, status))
        if record is None:
            continue
        lines.append(json.dumps(record, sort_keys=True))
        scores.setdefault((record["problem"], record["algorithm"]), []).append(
            GroupingScore(record["da"], record["fes"], record["run"]))
    (out / "runs.jsonl").write_text("".join(line + "\n" for line in lines),
                                    encoding="utf8")
    grid = metrics.grid_rows(scores, cfg.algorithms)
    (out / "grid.csv").write_text(metrics.format_csv(grid), encoding="utf8")
    return _write_manifest(out, cfg, statuses)


def plan_for(source: str, problem, seed, params: dict | None = None):
    if source == "single":
        return single_group_plan(problem)
    if source == "truth":
        from .decomposers import DecompositionResult
        truth = problem.ground_truth
        decomp = DecompositionResult(
            subcomponents=list(truth.subcomponents),
            shared_groups=list(truth.shared_variables),
            fes_used=0, algorithm="truth", seed=None,
            dimension=problem.dimension)
        return allocate_shared(decomp)
    decomp = decompose_with(source, problem, seed, params)
    return allocate_shared(decomp)


def run_optimization(cfg: ExperimentConfig) -> bool:
    """Optimize every (problem, plan, run) cell and write reports.

    Emits ``runs.jsonl``, per-cell trajectory CSVs, a rank-sum grid of the
    first plan against the others (``wtl.csv`` / ``wtl_summary.csv``), and
    ``manifest.json``.
    """
    cfg.validate()
    problems = _suite_problems(cfg)
    out = cfg.resolved_output()
    out.mkdir(parents=True, exist_ok=True)
    by_name = {p.info.name: p for p in problems}
    cells = [(p.info.name, plan, run)
             for p in problems for plan in cfg.plans
             for run in range(cfg.runs)]

    def worker(key):
        name, source, run = key
        problem = by_name[name]
        seed = cell_seed(cfg.seed, name, source, run)
        try:
            plan_seed, opt_seed = seed.spawn(2)
            plan = plan_for(source, problem, plan_seed, cfg.params.get(source))
            best_x, best_f, trajectory = cc_optimize(
                problem, plan, cfg.budget, opt_seed,
                phase_generations=cfg.phase_generations)
            return ("ok", {
                "type": "optimization-run",
                "problem": name,
                "plan": source,
                "run": run,
                "seed_path": [name, source, run],
                "best_f": best_f,
                "fes": trajectory[-1][0],
            }, trajectory)
        except Exception as exc:  # noqa: BLE001 - reported in the manifest
            return (f"error: {exc}", None, None)

    results = _run_cells(cells, worker, cfg.threads)

    lines = [_meta_record(cfg)]
    best: dict[tuple[str, str], list[float]] = {}
    statuses = []
    for key in cells:
        status, record, trajectory = results[key]
        statuses.append((key, status))
        if record is None:
            continue
        lines.append(json.dumps(record, sort_keys=True))
        best.setdefault((record["problem"], record["plan"]), []).append(
            record["best_f"])
        traj_rows = [["fes", "best_f"]] + [[fes, repr(val)]
                                           for fes, val in trajectory]
        traj_name = f"traj_{record['problem']}_{record['plan']}_{record['run']}.csv"
        (out / traj_name).write_text(metrics.format_csv(traj_rows),
                                     encoding="utf8")
    (out / "runs.jsonl").write_text("".join(line + "\n" for line in lines),
                                    encoding="utf8")

    first = cfg.plans[0]
    wtl_rows = [["problem", "first_plan", "other_plan", "verdict", "p_value",
                 "median_first", "median_other"]]
    tally: dict[str, dict[str, int]] = {}
    for problem in [p.info.name for p in problems]:
        sample_a = best.get((problem, first))
        for other in cfg.plans[1:]:
            sample_b = best.get((problem, other))
            if not sample_a or not sample_b:
                continue
            if len(sample_a) < 5 or len(sample_b) < 5:
                wtl_rows.append([problem, first, other, "NA", "",
                                 repr(float(np.median(sample_a))),
                                 repr(float(np.median(sample_b)))])
                continue
            cell = metrics.rank_sum(sample_a, sample_b)
            wtl_rows.append([problem, first, other, cell.verdict,
                             repr(cell.p_value), repr(cell.median_a),
                             repr(cell.median_b)])
            counts = tally.setdefault(other, {"W": 0, "T": 0, "L": 0})
            counts[cell.verdict] += 1
    (out / "wtl.csv").write_text(metrics.format_csv(wtl_rows), encoding="utf8")
    summary_rows = [["other_plan", "W", "T", "L"]]
    for other in cfg.plans[1:]:
        counts = tally.get(other, {"W": 0, "T": 0, "L": 0})
        summary_rows.append([other, counts["W"], counts["T"], counts["L"]])
    (out / "wtl_summary.csv").write_text(metrics.format_csv(summary_rows),
                                         encoding="utf8")
    return _write_manifest(out, cfg, statuses)
