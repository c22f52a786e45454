"""Command line entry point: ``dynmatch <command> [options]``.

Exit codes: 0 on success, 1 when a verification suite fails, 2 on bad
configuration or input (message on standard error).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from ..dp import evaluate_policy_exact, lattice_size, solve_exact
from ..errors import ConfigError, MatchingError
from ..monge import build_dominance_graph, perfect_pairs, priority_tiers
from ..policies import compute_protection_levels_2x2
from .config import build_policies, load_config
from .simulate import simulate
from .suites import SUITES, verify_suite


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="experiment config (JSON)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the config seed")
    p.add_argument("--out", default=argparse.SUPPRESS, help="write output here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="dynmatch", description="Dynamic two-sided matching toolkit.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="exact DP; print the expected optimal value")
    sub.add_parser("analyze", parents=[common], help="dominance graph, priority tiers and perfect pairs")
    sim = sub.add_parser("simulate", parents=[common], help="evaluate the configured policies")
    sim.add_argument("--replications", type=int)
    sim.add_argument("--workers", type=int)
    ver = sub.add_parser("verify", parents=[common], help="run a property suite against the DP oracle")
    ver.add_argument("--suite", required=True, help=f"one of {', '.join(SUITES)}, or all")
    ver.add_argument("--trials", type=int, default=20)
    ver.add_argument("--workers", type=int, default=1)
    sub.add_parser("protect", parents=[common], help="protection levels of a 2x2 horizontal instance")
    return parser


def _rows_to_csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _config(args):
    path = getattr(args, "config", None)
    if path is None:
        raise ConfigError(f"{args.command} needs --config")
    cfg = load_config(path)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is None and cfg.output:
        args.out = cfg.output
    return cfg


def _solve(args, fmt):
    cfg = _config(args)
    vt = solve_exact(cfg.instance)
    if fmt == "json":
        return json.dumps({"expected_value": vt.expected_value, "states": lattice_size(cfg.instance)}) + "\n"
    return _rows_to_csv([["expected_value"], [repr(vt.expected_value)]])


def _pair(p) -> str:
    return f"({p[0]} {p[1]})"


def _analyze(args, fmt):
    inst = _config(args).instance
    graph = build_dominance_graph(inst)
    tiers = priority_tiers(graph) if graph.strong_valid else None
    perfect = perfect_pairs(inst, graph) if graph.strong_valid else []
    if fmt == "json":
        doc = {
            "strong_valid": graph.strong_valid,
            "edges": graph.to_edge_list(),
            "tiers": tiers.to_lists() if tiers else None,
            "perfect_pairs": [list(p) for p in perfect],
        }
        return json.dumps(doc) + "\n"
    rows = [["section", "index", "value"], ["strong_valid", "", str(graph.strong_valid).lower()]]
    for k, e in enumerate(graph.to_edge_list()):
        rows.append(["edge", k, f"{_pair(e['dominant'])} > {_pair(e['dominated'])}"])
    if tiers:
        for k, tier in enumerate(tiers.to_lists()):
            rows.append(["tier", k + 1, " ".join(_pair(p) for p in tier)])
    for k, p in enumerate(perfect):
        rows.append(["perfect_pair", k, _pair(p)])
    return _rows_to_csv(rows)


def _simulate(args, fmt):
    cfg = _config(args)
    policies = build_policies(cfg.instance, cfg.policies, cfg.policy_options)
    if cfg.evaluation == "exact":
        values = {name: evaluate_policy_exact(cfg.instance, pol) for name, pol in policies.items()}
        if fmt == "json":
            return json.dumps({"evaluation": "exact", "values": values}) + "\n"
        return _rows_to_csv([["policy", "value"]] + [[k, repr(v)] for k, v in values.items()])
    reps = args.replications if args.replications is not None else cfg.replications
    workers = args.workers if args.workers is not None else cfg.workers
    report = simulate(cfg.instance, policies, reps, cfg.seed, workers)
    if fmt == "json":
        return json.dumps(report.to_dict()) + "\n"
    return report.to_csv()


def _verify(args, fmt):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    seed = getattr(args, "seed", 0)
    reports = [verify_suite(n, args.trials, seed, args.workers) for n in names]
    if fmt == "json":
        text = json.dumps([r.to_dict() for r in reports]) + "\n"
    else:
        text = "".join(r.summary_line() + "\n" for r in reports)
        for r in reports:
            for f in r.failures:
                text += f"  {r.name} trial {f.trial}: {f.message}\n  instance: {f.instance}\n"
    return text, all(r.passed for r in reports)


def _protect(args, fmt):
    inst = _config(args).instance
    table = compute_protection_levels_2x2(inst)
    if fmt == "json":
        return table.to_json() + "\n"
    cols = ["p_d_plus", "p_s_plus", "p_d_minus", "p_s_minus"]
    rows = [["t", "ib"] + cols]
    for (t, ib), e in sorted(table.entries.items()):
        rows.append([t, ib] + ["" if getattr(e, c) is None else getattr(e, c) for c in cols])
    return _rows_to_csv(rows)


_COMMANDS = {"solve": _solve, "analyze": _analyze, "simulate": _simulate, "protect": _protect}


def cli_run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"dynmatch: {exc}", file=sys.stderr)
        return 2
    fmt = getattr(args, "format", "csv")
    ok = True
    try:
        if args.command == "verify":
            text, ok = _verify(args, fmt)
        else:
            text = _COMMANDS[args.command](args, fmt)
    except (ConfigError, MatchingError) as exc:
        print(f"dynmatch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


def main() -> None:
    sys.exit(cli_run())


if __name__ == "__main__":
    main()
