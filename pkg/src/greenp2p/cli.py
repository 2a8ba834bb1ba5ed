"""Command-line entry point: experiments and parameter planning."""

from __future__ import annotations

import argparse
import json
import sys

from .filtering import Infeasible, group_reliability, min_group_size
from .harness.config import PRESETS, STRATEGIES, coerce, load_config
from .harness.runner import compare_strategies, final_fractions, run_experiment
from .socialgraph import label_population, load_trace, summary, synth_graph
from .verification import plan_verification


def _overrides(pairs: list[str]) -> dict:
    out = {}
    for item in pairs:
        name, sep, text = item.partition("=")
        if not sep:
            raise ValueError(f"expected name=value, got {item!r}")
        out[name.strip()] = coerce(name.strip(), text.strip())
    return out


def _config(args):
    over = _overrides(args.set)
    if args.seed is not None:
        over["seed"] = args.seed
    if getattr(args, "strategy", None):
        over["strategy"] = args.strategy
    return load_config(args.config, over, base=args.preset)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", default="desk", choices=sorted(PRESETS))
    p.add_argument("--config", help="JSON config file; its values override the preset")
    p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                   help="override one config field (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="directory for the CSV and JSON outputs")


def cmd_run(args) -> int:
    cfg = _config(args)

    def progress(m):
        frac = "n/a" if m.fraction_authentic is None else f"{m.fraction_authentic:.4f}"
        print(f"cycle {m.experimental_cycle:3d}  authentic {frac}  downloads {m.total_downloads}",
              file=sys.stderr)

    res = run_experiment(cfg, args.out, progress=None if args.quiet else progress)
    if args.out is None:
        sys.stdout.write(res.csv_text())
    else:
        print(json.dumps({"final_fraction_authentic": res.final_fraction,
                          "out": args.out}))
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    seeds = args.seeds or [cfg.seed]
    rows = compare_strategies(cfg, args.strategies, seeds, args.out)
    finals = final_fractions(rows)
    print(json.dumps({f"{s}/{seed}": v for (s, seed), v in finals.items()}, indent=2))
    return 0


def cmd_plan_verify(args) -> int:
    plan = plan_verification(args.blocks, args.r, args.efpr)
    print(json.dumps({"b": plan.b, "r": plan.r, "efpr": plan.efpr,
                      "v_min": plan.v_min, "achieved_fpr": plan.achieved_fpr}))
    return 0


def cmd_plan_group(args) -> int:
    try:
        m = min_group_size(args.beta, args.target)
    except Infeasible as exc:
        print(json.dumps({"feasible": False, "reason": str(exc)}))
        return 1
    print(json.dumps({"feasible": True, "m": m, "reliability": group_reliability(m, args.beta)}))
    return 0


def cmd_graph_stats(args) -> int:
    import random

    if args.trace:
        sg = load_trace(args.trace)
    else:
        sg = synth_graph(args.users, args.degree, random.Random(args.seed))
    if args.groups:
        sg = label_population(sg, args.groups, 1.0 - args.beta, random.Random(args.seed))
    print(json.dumps(summary(sg), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="greenp2p", description="Pollution-defense simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    _add_config_args(p)
    p.add_argument("--strategy", choices=sorted(STRATEGIES))
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several strategies on identical worlds")
    _add_config_args(p)
    p.add_argument("--strategies", nargs="+", default=sorted(STRATEGIES))
    p.add_argument("--seeds", type=int, nargs="+")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plan-verify", help="blocks to verify for a target false-positive rate")
    p.add_argument("--blocks", "-b", type=int, required=True)
    p.add_argument("--r", "-r", type=int, required=True, help="blocks an attacker must corrupt")
    p.add_argument("--efpr", type=float, required=True)
    p.set_defaults(func=cmd_plan_verify)

    p = sub.add_parser("plan-group", help="smallest maintainer group for a target reliability")
    p.add_argument("--beta", type=float, required=True, help="worst-case malicious fraction")
    p.add_argument("--target", type=float, required=True)
    p.set_defaults(func=cmd_plan_group)

    p = sub.add_parser("graph-stats", help="summarize a social graph as JSON")
    p.add_argument("--trace", help="edge-list file; a synthetic graph is built otherwise")
    p.add_argument("--users", type=int, default=2000)
    p.add_argument("--degree", type=float, default=8.0)
    p.add_argument("--groups", type=int, default=0, help="label into this many genuine groups")
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_graph_stats)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        ap.error(str(exc))
    return 2


if __name__ == "__main__":
    sys.exit(main())
