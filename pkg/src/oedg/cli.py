"""Command-line interface.

Subcommands: ``gen`` writes a benchmark instance descriptor, ``group`` and
``optimize`` run experiment configs (file plus flag overrides, flags win),
``report`` re-aggregates a run directory and renders figures next to the
CSV output. The default output directory comes from $OEDG_OUT.
"""

from __future__ import annotations

import argparse
import sys

from .benchmark import (TopologyConfig, build_complex, build_line, build_ring,
                        load_descriptor, parse_sizes, save_descriptor,
                        verify_instance)
from .errors import StructuralError
from .experiments import (ExperimentConfig, load_config, run_grouping,
                          run_optimization)


def _add_common_overrides(sub):
    sub.add_argument("--config", help="experiment config file")
    sub.add_argument("--suite", help="benchmark family (LTO, RTO, CTO, MDO)")
    sub.add_argument("--scale", choices=["paper", "desk"])
    sub.add_argument("--runs", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--threads", type=int)
    sub.add_argument("--problems", help="comma list restricting the suite")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oedg",
        description="Grouping and optimization experiments on overlapping problems")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="generate a benchmark instance file")
    gen.add_argument("--topology", required=True,
                     choices=["line", "ring", "complex"])
    gen.add_argument("--sizes", help="subcomponent sizes, e.g. 12x5 or 100x5+50x5")
    gen.add_argument("--subs", type=int, help="subcomponent count (with --size)")
    gen.add_argument("--size", type=int, help="uniform subcomponent size")
    gen.add_argument("--overlap", "--m", dest="overlap", type=int, default=0)
    gen.add_argument("--nsub", type=int, help="complex: subcomponent count")
    gen.add_argument("--s", type=int, help="complex: subcomponent size")
    gen.add_argument("--p", type=float, default=0.0,
                     help="complex: extra-link probability")
    gen.add_argument("--conflict", choices=["conforming", "conflicting"],
                     default="conforming")
    gen.add_argument("--base", default="elliptic",
                     choices=["elliptic", "rastrigin", "schwefel_1_2"])
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="instance.json")
    gen.add_argument("--verify", action="store_true",
                     help="reload the file and re-check its invariants")

    group = commands.add_parser("group", help="run a grouping experiment")
    _add_common_overrides(group)
    group.add_argument("--algs", help="comma list of algorithms")

    opt = commands.add_parser("optimize", help="run an optimization experiment")
    _add_common_overrides(opt)
    opt.add_argument("--plans", help="comma list of plan sources")
    opt.add_argument("--budget", type=int)

    report = commands.add_parser("report",
                                 help="aggregate a run directory and render figures")
    report.add_argument("run_dir")
    return parser


def _gen(args) -> int:
    if args.topology in ("line", "ring"):
        if args.sizes:
            sizes = parse_sizes(args.sizes)
        elif args.subs and args.size:
            sizes = (args.size,) * args.subs
        else:
            raise StructuralError("line/ring need --sizes or --subs with --size")
        cfg = TopologyConfig(topology=args.topology, sizes=sizes,
                             overlap=args.overlap, conflict=args.conflict,
                             base=args.base, seed=args.seed,
                             name=f"{args.topology}_n{len(sizes)}")
        problem = build_line(cfg) if args.topology == "line" else build_ring(cfg)
    else:
        if not args.nsub or not args.s:
            raise StructuralError("complex topology needs --nsub and --s")
        cfg = TopologyConfig(topology="complex", overlap=args.overlap or 1,
                             conflict=args.conflict, base=args.base,
                             seed=args.seed, n_sub=args.nsub, size=args.s,
                             p=args.p, name=f"complex_n{args.nsub}")
        problem = build_complex(cfg)
    save_descriptor(problem, args.out)
    print(f"wrote {args.out}: n={problem.dimension}, "
          f"OD={problem.info.overlapping_degree:.4f}")
    if args.verify:
        verify_instance(load_descriptor(args.out))
        print("verification passed")
    return 0


def _experiment_config(args, mode: str) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg.mode = mode
    for attr, flag in (("suite", "suite"), ("scale", "scale"),
                       ("runs", "runs"), ("seed", "seed"),
                       ("output", "out"), ("threads", "threads")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(args, "problems", None):
        cfg.problems = [p.strip() for p in args.problems.split(",") if p.strip()]
    if mode == "grouping" and getattr(args, "algs", None):
        cfg.algorithms = [a.strip() for a in args.algs.split(",") if a.strip()]
    if mode == "optimization":
        if getattr(args, "plans", None):
            cfg.plans = [p.strip() for p in args.plans.split(",") if p.strip()]
        if getattr(args, "budget", None) is not None:
            cfg.budget = args.budget
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _gen(args)
        if args.command == "group":
            cfg = _experiment_config(args, "grouping")
            ok = run_grouping(cfg)
            print(f"grouping reports in {cfg.resolved_output()}")
            return 0 if ok else 1
        if args.command == "optimize":
            cfg = _experiment_config(args, "optimization")
            ok = run_optimization(cfg)
            print(f"optimization reports in {cfg.resolved_output()}")
            return 0 if ok else 1
        if args.command == "report":
            from .reporting import render_report
            created = render_report(args.run_dir)
            for path in created:
                print(f"wrote {path}")
            return 0
    except StructuralError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
