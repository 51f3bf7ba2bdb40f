"""Command-line entry point: ``towerbench train|eval|sweep|generalize|suite``.

Exit codes: 0 success, 2 invalid input, 1 runtime failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .agents import make_agent, run_episode
from .errors import SchemaError, TowerbenchError, UnknownUnit, ValidationError
from .harness import (DEFAULT_DIFFICULTIES, difficulty_sweep, evaluate, generalization_experiment,
                      write_curve, write_generalization, write_histogram, write_report, write_sweep)
from .levels import MAX_DIFFICULTY, SUITE_IDS, builtin_suite, resolve_levels
from .ppo import TrainConfig, save_checkpoint, train

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2

# large-scale settings, available but far beyond desk budgets
EXPERIMENT_SCALE = {"total_episodes": 10_000, "hidden": 1024}


class UsageError(Exception):
    pass


def _ids(text: str) -> list[str]:
    return [t for t in (s.strip() for s in text.split(",")) if t]


def _difficulty(text: str) -> int:
    d = int(text)
    if not 0 <= d <= MAX_DIFFICULTY:
        raise argparse.ArgumentTypeError(f"difficulty must be in 0..{MAX_DIFFICULTY}")
    return d


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig(total_episodes=args.episodes, hidden=args.hidden, difficulty=args.difficulty)
    if args.experiment_scale:
        cfg = replace(cfg, **EXPERIMENT_SCALE)
    return cfg


def _levels_arg(args) -> list:
    ids = []
    if getattr(args, "level", None):
        ids.append(args.level)
    if getattr(args, "levels", None):
        ids += _ids(args.levels)
    if not ids:
        raise UsageError("give --level or --levels")
    return resolve_levels(ids)


def cmd_train(args) -> int:
    levels = _levels_arg(args)
    cfg = _train_config(args)

    def progress(done, stats):
        if not args.quiet:
            print(f"episodes={done} policy_loss={stats['policy_loss']:.4f} "
                  f"value_loss={stats['value_loss']:.4f} entropy={stats['entropy']:.3f}", file=sys.stderr)

    res = train(levels, cfg, args.seed, progress=progress)
    save_checkpoint(args.out, res.actor, res.critic, cfg, args.seed,
                    meta={"levels": [lvl.id for lvl in levels]})
    if args.curve:
        write_curve(res.curve, args.curve)
    final = res.curve[-1][1] if res.curve else float("nan")
    print(f"saved {args.out} (episodes={cfg.total_episodes}, final success={final:.3f})")
    return EXIT_OK


def _agent(args, kind=None):
    kind = kind or args.agent
    if kind == "hrl" and not args.model:
        raise UsageError("--agent hrl needs --model")
    return make_agent(kind, args.model if kind == "hrl" else None, args.seed, args.stochastic_eval)


def cmd_eval(args) -> int:
    levels = _levels_arg(args)
    agent = _agent(args)
    rep = evaluate(agent, levels, args.difficulty, args.episodes, args.seeds, args.seed)
    for r in rep.rows:
        print(f"{r.level:>6}  success {r.success_mean:6.2f} ± {r.success_std:5.2f}  "
              f"reward {r.reward_mean:8.2f} ± {r.reward_std:6.2f}  steps {r.steps_mean:7.1f} ± {r.steps_std:5.1f}")
    if args.report:
        out = Path(args.report)
        write_report(rep, out / "eval.csv")
        write_histogram(rep, out / "actions.csv")
    if args.trace:
        run_episode(agent, levels[0], args.difficulty, args.seed, trace_path=args.trace)
    return EXIT_OK


def cmd_sweep(args) -> int:
    level = resolve_levels([args.level])[0]
    agents = {k: _agent(args, k) for k in _ids(args.agent)}
    rows = difficulty_sweep(agents, level, args.difficulties, args.episodes, args.seeds, args.seed)
    for r in rows:
        print(f"{r.agent:>7} d={r.difficulty:>6}  success {r.success_mean:6.2f} ± {r.success_std:5.2f}")
    if args.report:
        write_sweep(rows, Path(args.report) / "sweep.csv")
    return EXIT_OK


def cmd_generalize(args) -> int:
    cfg = _train_config(args)
    rep = generalization_experiment(args.n, cfg, args.seeds, builtin_suite(), episodes=args.eval_episodes,
                                    eval_seeds=args.eval_seeds, master_seed=args.seed)
    print(f"{'level':>6} {'hrl':>8} {'hai':>8} {'hrl-N' + str(args.n):>8}")
    for lid in rep.levels:
        print(f"{lid:>6} {rep.per_level[lid]:8.2f} {rep.hai[lid]:8.2f} {rep.subset[lid]:8.2f}")
    print(f"{'Total':>6} " + " ".join(f"{m:8.2f}" for m in rep.means()))
    if args.report:
        write_generalization(rep, Path(args.report) / f"generalize_n{args.n}.csv")
    return EXIT_OK


def cmd_suite(args) -> int:
    if args.action != "list":
        raise UsageError(f"unknown suite action {args.action!r}")
    for lvl in builtin_suite():
        print(f"{lvl.id}  rows={lvl.rows} spawns={lvl.total_spawns()} loadout={','.join(lvl.loadout)}  {lvl.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="towerbench", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common_train(sp):
        sp.add_argument("--episodes", type=_positive, default=2000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--difficulty", type=_difficulty, default=100_000)
        sp.add_argument("--hidden", type=_positive, default=64)
        sp.add_argument("--experiment-scale", action="store_true",
                        help="10k episodes and 1024-unit hidden layers")

    def common_eval(sp):
        sp.add_argument("--agent", default="hai")
        sp.add_argument("--model", help="checkpoint for --agent hrl")
        sp.add_argument("--episodes", type=_positive, default=100)
        sp.add_argument("--seeds", type=_positive, default=5)
        sp.add_argument("--seed", type=int, default=0, help="master evaluation seed")
        sp.add_argument("--stochastic-eval", action="store_true", help="sample HRL actions instead of argmax")
        sp.add_argument("--report", help="directory for CSV output")

    t = sub.add_parser("train", help="train an HRL model")
    t.add_argument("--level")
    t.add_argument("--levels")
    common_train(t)
    t.add_argument("--out", required=True)
    t.add_argument("--curve", help="write the training curve CSV here")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate an agent")
    e.add_argument("--levels", default=",".join(SUITE_IDS))
    common_eval(e)
    e.add_argument("--difficulty", type=_difficulty, default=100_000)
    e.add_argument("--trace", help="also write a JSON-lines trace of one episode")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="success rate across difficulties")
    s.add_argument("--level", required=True)
    common_eval(s)
    s.add_argument("--difficulties", type=lambda t: [_difficulty(x) for x in _ids(t)],
                   default=list(DEFAULT_DIFFICULTIES))
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("generalize", help="train on level subsets, evaluate on the suite")
    g.add_argument("--n", type=_positive, required=True)
    common_train(g)
    g.add_argument("--seeds", type=_positive, default=3, help="training seeds (subsets)")
    g.add_argument("--eval-episodes", type=_positive, default=100)
    g.add_argument("--eval-seeds", type=_positive, default=5)
    g.add_argument("--report")
    g.set_defaults(func=cmd_generalize)

    su = sub.add_parser("suite", help="bundled levels")
    su.add_argument("action", choices=["list"])
    su.set_defaults(func=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    try:
        return args.func(args)
    except (UsageError, SchemaError, ValidationError, UnknownUnit, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TowerbenchError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
