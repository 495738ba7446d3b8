"""Command-line front end.

Subcommands: ``run`` (self-play experiment), ``equivalence`` (pair-space vs
tree-space comparison), ``trees`` (arborescence enumeration), ``stationary``
(stationary distribution of a matrix file), ``diagnose`` (run + diagnostic
report), ``gen`` (random game file).

Exit codes: 0 ok, 1 usage error, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .diagnostics import DEFAULT_VARIANCE_BUDGET_CONSTANT, smoothness_report
from .errors import StationaryResidualError, ValidationError
from .games import load_game, random_game, save_game
from .internal_dynamics import verify_equivalence
from .markov_tree import (
    check_transition_matrix,
    enumerate_arborescences,
    log_tree_theorem_stationary,
    solve_stationary,
    tree_theorem_stationary,
)
from .runner import RunConfig, emit_outputs, run_dynamics

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_game_source(p):
    p.add_argument("--game", help="game JSON file")
    p.add_argument("--players", type=int, help="number of players for a generated game")
    p.add_argument("--actions", help="comma-separated action counts, e.g. 3,3")
    p.add_argument("--game-seed", type=int, default=0, help="seed for the generated game")


def _add_run_options(p):
    p.add_argument("--dynamics", default="sl-omwu")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--eta", type=float, help="fixed learning rate")
    p.add_argument(
        "--eta-rule",
        choices=("fixed", "theorem-internal", "theorem-swap", "adaptive"),
        help="learning-rate rule; defaults to fixed when --eta is given",
    )
    p.add_argument("--schedule-constant", type=float, default=1.0)
    p.add_argument("--log-base", choices=("e", "2"), default="e")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--smoothness-order", type=int)
    p.add_argument("--smoothness-alpha", type=float)
    p.add_argument("--rvu-constant", type=float)
    p.add_argument("--variance-budget", type=float)
    p.add_argument("--adaptive-budget", type=float, default=DEFAULT_VARIANCE_BUDGET_CONSTANT)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ce-dynamics", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a self-play experiment")
    _add_game_source(p_run)
    _add_run_options(p_run)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--format", choices=("csv", "json"), default="csv")
    p_run.add_argument("--save-trace", action="store_true")

    p_eq = sub.add_parser("equivalence", help="compare the two internal-regret dynamics")
    p_eq.add_argument("--game", required=True)
    p_eq.add_argument("--eta", type=float, required=True)
    p_eq.add_argument("--horizon", type=int, required=True)
    p_eq.add_argument("--tol", type=float, default=1e-8)

    p_trees = sub.add_parser("trees", help="enumerate rooted directed trees")
    p_trees.add_argument("--n", type=int, required=True)
    p_trees.add_argument("--root", type=int, required=True)

    p_st = sub.add_parser("stationary", help="stationary distribution of a matrix")
    p_st.add_argument("--matrix", required=True, help="JSON file with a row-major matrix")
    p_st.add_argument("--method", choices=("linear", "tree", "log-tree"), default="linear")

    p_diag = sub.add_parser("diagnose", help="run dynamics and emit a diagnostic report")
    _add_game_source(p_diag)
    _add_run_options(p_diag)
    p_diag.add_argument("--out", help="write the JSON report here instead of stdout")
    p_diag.add_argument("--table", help="write the per-(order, round) smoothness CSV here")

    p_gen = sub.add_parser("gen", help="generate a random game file")
    p_gen.add_argument("--players", type=int, required=True)
    p_gen.add_argument("--actions", required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", help="output file; stdout when omitted")

    return parser


def _parse_actions(text):
    return tuple(int(part) for part in text.split(",") if part)


def _config_from_args(args) -> RunConfig:
    eta_rule = args.eta_rule or ("fixed" if args.eta is not None else None)
    if eta_rule is None:
        raise ValidationError("need --eta or --eta-rule")
    return RunConfig(
        dynamics=args.dynamics,
        horizon=args.horizon,
        eta_rule=eta_rule,
        eta=args.eta,
        schedule_constant=args.schedule_constant,
        log_base=args.log_base,
        game_file=args.game,
        players=args.players,
        action_counts=_parse_actions(args.actions) if args.actions else None,
        game_seed=args.game_seed,
        seed=args.seed,
        out_format=getattr(args, "format", "csv"),
        save_trace=getattr(args, "save_trace", False),
        smoothness_order=args.smoothness_order,
        smoothness_alpha=args.smoothness_alpha,
        rvu_constant=args.rvu_constant,
        variance_budget=args.variance_budget,
        adaptive_budget=args.adaptive_budget,
    )


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    result = run_dynamics(config)
    paths = emit_outputs(result, config, args.out)
    print(json.dumps(paths, sort_keys=True))
    return EXIT_OK


def _cmd_equivalence(args) -> int:
    game = load_game(Path(args.game).read_bytes())
    report = verify_equivalence(game, args.eta, args.horizon, tol=args.tol)
    doc = report.to_dict()
    doc["passes"] = report.passes(args.tol)
    doc["tol"] = args.tol
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def _cmd_trees(args) -> int:
    trees = enumerate_arborescences(args.n, args.root)
    doc = {
        "n": args.n,
        "root": args.root,
        "count": len(trees),
        "parents": [list(tree.parents) for tree in trees],
    }
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def _cmd_stationary(args) -> int:
    raw = json.loads(Path(args.matrix).read_text())
    Q = check_transition_matrix(np.asarray(raw, dtype=float))
    solver = {
        "linear": solve_stationary,
        "tree": tree_theorem_stationary,
        "log-tree": log_tree_theorem_stationary,
    }[args.method]
    pi = solver(Q)
    print(json.dumps({"stationary": [float(v) for v in pi]}, sort_keys=True))
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    config = _config_from_args(args)
    if config.smoothness_order is None:
        config.smoothness_order = 3
    if config.rvu_constant is None:
        config.rvu_constant = 64.0
    if config.variance_budget is None:
        config.variance_budget = DEFAULT_VARIANCE_BUDGET_CONSTANT
    result = run_dynamics(config)
    report = json.dumps(result.summary, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(report)
    else:
        sys.stdout.write(report)
    if args.table:
        _write_smoothness_table(result, config, Path(args.table))
    return EXIT_OK


def _write_smoothness_table(result, config, path) -> None:
    lines = ["player,order,t,observed,bound"]
    alpha = config.smoothness_alpha or 1.0 / (config.smoothness_order + 3)
    for i in range(result.trace.num_players):
        rep = smoothness_report(result.trace, i, config.smoothness_order, alpha)
        for h, observed in enumerate(rep.observed):
            for t, value in enumerate(observed):
                lines.append(f"{i},{h},{t + 1},{float(value)!r},{float(rep.bounds[h])!r}")
    path.write_text("\n".join(lines) + "\n")


def _cmd_gen(args) -> int:
    game = random_game(args.players, _parse_actions(args.actions), args.seed)
    data = save_game(game)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data + b"\n")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "equivalence": _cmd_equivalence,
    "trees": _cmd_trees,
    "stationary": _cmd_stationary,
    "diagnose": _cmd_diagnose,
    "gen": _cmd_gen,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StationaryResidualError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
