"""Command-line entry points.

Subcommands:

* ``gen-scenarios``  write synthetic scenario files
* ``train``          run PPO over a scenario directory, emit checkpoint + curve
* ``eval``           evaluate a checkpoint (or the evidence oracle) on scenarios
* ``judge-bench``    score slot matchers on the synthetic overlap benchmark

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime failure.
Every reported number is written to CSV alongside the raw episode logs it
was computed from, so reports can be recomputed offline.
"""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .env import DialogueEnv, EvidenceOracleAgent, rollout, write_episodes
from .errors import CheckpointError, ConfigError, DialignError, ProtocolError, SchemaError
from .metrics import (
    alignment_curve,
    alignment_matrix,
    longterm_profile_curve,
    summarize_alignment,
)
from .profiles import SlotMatcher, build_overlap_bench, eval_matcher
from .rl import (
    CURVE_COLUMNS,
    PPOConfig,
    PolicyAgent,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .scenarios import (
    default_conflict,
    generate_profile,
    generate_scenarios,
    load_scenarios,
    save_scenarios,
    _schema_for,
)
from .user_sim import ConflictSpec

LONGTERM_DEFAULT_HORIZON = 70


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage problems; this project reserves 2 for
    validation errors, so usage problems exit 1 instead."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_weights(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"--weights expects 'wp,wr', got {text!r}")
    try:
        wp, wr = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"--weights expects numbers, got {text!r}") from exc
    if wp < 0 or wr < 0:
        raise ConfigError("reward weights must be non-negative")
    return wp, wr


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _load_ppo_config(args: argparse.Namespace) -> PPOConfig:
    overrides: dict = {}
    if args.config:
        with open(args.config) as fh:
            payload = json.load(fh)
        known = set(PPOConfig.__dataclass_fields__)
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        overrides.update(payload)
    for field, flag in (
        ("total_rounds", "rounds"),
        ("epochs", "epochs"),
        ("samples_per_scenario", "samples"),
        ("actor_lr", "actor_lr"),
        ("critic_lr", "critic_lr"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    return PPOConfig(**overrides)


# --- subcommands ----------------------------------------------------------------


def cmd_gen_scenarios(args: argparse.Namespace) -> int:
    scenarios = generate_scenarios(
        count=args.count,
        seed=args.seed if args.seed is not None else 0,
        horizon=args.horizon,
        conflict=args.conflict,
        extended=args.extended,
    )
    paths = save_scenarios(scenarios, args.out)
    print(f"wrote {len(paths)} scenario files to {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    scenario_list = load_scenarios(args.scenarios)
    weights = _parse_weights(args.weights)
    matcher = SlotMatcher.parse(args.matcher)
    cfg = _load_ppo_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    policy = value_fn = None
    start_step = 0
    if args.resume:
        checkpoint = load_checkpoint(args.resume)
        schema = scenario_list[0].profile.schema
        if checkpoint.schema.slots != tuple(schema.slots):
            raise SchemaError(
                f"checkpoint schema {checkpoint.schema.name!r} does not match scenarios"
            )
        policy, value_fn = checkpoint.policy(), checkpoint.value_fn()
        start_step = checkpoint.step

    pairs = [(s.scenario_id, s.user_config()) for s in scenario_list]
    result = train(
        pairs,
        cfg,
        weights=weights,
        matcher=matcher,
        policy=policy,
        value_fn=value_fn,
        start_step=start_step,
    )

    schema = scenario_list[0].profile.schema
    save_checkpoint(
        out / "checkpoint.json", result.policy, result.value_fn, cfg, weights, schema,
        step=result.final_step,
    )
    curve_path = out / "curve.csv"
    mode = "a" if (args.resume and curve_path.exists()) else "w"
    with open(curve_path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(CURVE_COLUMNS)
        for row in result.curve:
            writer.writerow(
                [
                    row.step,
                    f"{row.mean_total_reward:.6f}",
                    f"{row.mean_profile_reward:.6f}",
                    f"{row.mean_response_reward:.6f}",
                    f"{row.clip_fraction:.6f}",
                    f"{row.value_loss:.6f}",
                ]
            )
    with open(out / "run_config.json", "w") as fh:
        json.dump(
            {
                "ppo": asdict(cfg),
                "weights": list(weights),
                "matcher": matcher.label,
                "scenarios": str(args.scenarios),
                "resumed_from": args.resume,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    last = result.curve[-1]
    print(
        f"trained {cfg.total_rounds} rounds -> step {result.final_step}; "
        f"mean total reward {last.mean_total_reward:.3f} "
        f"(profile {last.mean_profile_reward:.3f}, response {last.mean_response_reward:.3f})"
    )
    print(f"checkpoint: {out / 'checkpoint.json'}")
    return 0


def _eval_records(args: argparse.Namespace, scenario_list, matcher, mode: str):
    seed = args.seed if args.seed is not None else 0
    horizon_override = args.horizon
    if mode == "longterm" and horizon_override is None:
        horizon_override = LONGTERM_DEFAULT_HORIZON

    if args.agent == "oracle":
        checkpoint = None
    else:
        if not args.checkpoint:
            raise ConfigError("eval with --agent policy needs --checkpoint")
        checkpoint = load_checkpoint(args.checkpoint)
        schema = scenario_list[0].profile.schema
        if (
            checkpoint.schema.name != schema.name
            or checkpoint.schema.slots != tuple(schema.slots)
        ):
            raise SchemaError(
                f"checkpoint schema {checkpoint.schema.name!r} incompatible with scenarios"
            )

    records = []
    conflict_rng = random.Random(seed)
    for index, scenario in enumerate(scenario_list):
        conflict = scenario.conflict
        if mode == "conflict" and conflict is None:
            conflict = default_conflict(scenario.profile, scenario.style_seed, conflict_rng)
        elif mode != "conflict":
            conflict = scenario.conflict
        config = scenario.user_config(horizon=horizon_override, conflict=conflict)
        env = DialogueEnv(config, matcher=matcher)
        for episode in range(args.episodes):
            if checkpoint is None:
                agent = EvidenceOracleAgent()
            else:
                rng = np.random.default_rng([seed, index, episode])
                agent = PolicyAgent(checkpoint.policy(), None, rng)
            records.append(rollout(env, agent, scenario_id=scenario.scenario_id))
    return records


def cmd_eval(args: argparse.Namespace) -> int:
    scenario_list = load_scenarios(args.scenarios)
    matcher = SlotMatcher.parse(args.matcher)
    records = _eval_records(args, scenario_list, matcher, args.mode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_episodes(records, out / "episodes.jsonl")

    horizon = len(records[0].turns)
    matrix = alignment_matrix(records)
    curve = alignment_curve(matrix)
    summary = summarize_alignment(curve)

    turn_rows = []
    for k in range(1, horizon + 1):
        profile_r = float(np.mean([r.turns[k - 1].profile_reward for r in records]))
        response_r = float(np.mean([r.turns[k - 1].response_reward for r in records]))
        total_r = float(np.mean([r.turns[k - 1].total_reward for r in records]))
        ceiling = float(np.mean([r.turns[k - 1].theoretical_max for r in records]))
        turn_rows.append(
            [
                k,
                f"{curve[k - 1]:.4f}",
                f"{profile_r:.6f}",
                f"{response_r:.6f}",
                f"{total_r:.6f}",
                f"{ceiling:.6f}",
            ]
        )
    _write_csv(
        out / "turncurve.csv",
        ["turn", "alignment_level", "mean_profile_reward", "mean_response_reward",
         "mean_total_reward", "theoretical_max"],
        turn_rows,
    )

    # Wide per-turn alignment row plus the headline summary numbers.
    _write_csv(
        out / "altable.csv",
        [f"turn_{k}" for k in range(1, horizon + 1)] + ["avg", "n_ir", "n_r2"],
        [
            [f"{v:.2f}" for v in curve]
            + [f"{summary.average:.2f}", f"{summary.n_ir:.4f}", f"{summary.n_r2:.4f}"]
        ],
    )
    mean_total = float(np.mean([sum(t.total_reward for t in r.turns) for r in records]))
    mean_profile = float(np.mean([sum(t.profile_reward for t in r.turns) for r in records]))
    mean_response = float(np.mean([sum(t.response_reward for t in r.turns) for r in records]))
    _write_csv(
        out / "summary.csv",
        ["mode", "episodes", "avg_alignment", "n_ir", "n_r2",
         "mean_total_reward", "mean_profile_reward", "mean_response_reward"],
        [[
            args.mode,
            len(records),
            f"{summary.average:.4f}",
            f"{summary.n_ir:.6f}",
            f"{summary.n_r2:.6f}",
            f"{mean_total:.6f}",
            f"{mean_profile:.6f}",
            f"{mean_response:.6f}",
        ]],
    )

    if args.mode == "longterm":
        checkpoints = [1] + list(range(10, horizon + 1, 10))
        longterm = longterm_profile_curve(records, checkpoints, matcher)
        rows = [
            [p.turn, f"{p.profile_score:.6f}", f"{p.theoretical_max:.6f}"]
            for p in longterm.points
        ]
        rows.append(["avg", f"{longterm.average:.6f}", ""])
        _write_csv(out / "longterm.csv", ["turn", "profile_score", "theoretical_max"], rows)

    print(
        f"evaluated {len(records)} episodes ({args.mode}); "
        f"avg alignment {summary.average:.2f}, N-IR {summary.n_ir:.4f}, "
        f"N-R2 {summary.n_r2:.4f}"
    )
    print(f"reports in {out}")
    return 0


def cmd_judge_bench(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 0
    rng = random.Random(seed)
    schema = _schema_for(False)
    cases = []
    for index in range(args.count):
        profile = generate_profile(rng, schema)
        if args.ab:
            parts = args.ab.split(",")
            if len(parts) != 2:
                raise ConfigError(f"--ab expects 'a,b', got {args.ab!r}")
            a, b = int(parts[0]), int(parts[1])
        else:
            a = rng.randint(1, len(profile) - 1)
            b = rng.randint(0, len(profile) - a)
        cases.append(
            build_overlap_bench(profile, a, b, seed=rng.randrange(2**31),
                                paraphrase=not args.no_paraphrase)
        )
    matcher_specs = args.matcher or ["exact", "token:0.5"]
    rows = []
    for spec in matcher_specs:
        matcher = SlotMatcher.parse(spec)
        stats = eval_matcher(cases, matcher)
        rows.append(
            [
                matcher.label,
                f"{100.0 * stats['exact_acc']:.2f}",
                f"{100.0 * stats['fuzzy_acc']:.2f}",
                f"{stats['mse']:.4f}",
                f"{stats['rmse']:.4f}",
            ]
        )
        print(
            f"{matcher.label}: exact {100.0 * stats['exact_acc']:.1f}% "
            f"fuzzy {100.0 * stats['fuzzy_acc']:.1f}% mse {stats['mse']:.3f} "
            f"rmse {stats['rmse']:.3f}"
        )
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        _write_csv(out, ["matcher", "exact_acc", "fuzzy_acc", "mse", "rmse"], rows)
        print(f"wrote {out}")
    return 0


# --- parser wiring ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dialign", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-scenarios", help="write synthetic scenario files")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--count", type=int, default=32)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--horizon", type=int, default=10)
    gen.add_argument("--conflict", action="store_true", help="inject default turn-6 swaps")
    gen.add_argument("--extended", action="store_true", help="open-schema profiles")
    gen.set_defaults(func=cmd_gen_scenarios)

    tr = sub.add_parser("train", help="PPO training over a scenario directory")
    tr.add_argument("--scenarios", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--config", help="JSON file with PPO config overrides")
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--weights", default="1,1", help="profile,response reward weights")
    tr.add_argument("--matcher", default="exact", help="exact or token[:threshold]")
    tr.add_argument("--rounds", type=int, default=None)
    tr.add_argument("--epochs", type=int, default=None)
    tr.add_argument("--samples", type=int, default=None)
    tr.add_argument("--actor-lr", type=float, default=None)
    tr.add_argument("--critic-lr", type=float, default=None)
    tr.add_argument("--resume", help="checkpoint to continue from")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on scenarios")
    ev.add_argument("--scenarios", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--checkpoint")
    ev.add_argument("--agent", choices=["policy", "oracle"], default="policy")
    ev.add_argument("--mode", choices=["standard", "conflict", "longterm"], default="standard")
    ev.add_argument("--seed", type=int, default=None)
    ev.add_argument("--matcher", default="exact")
    ev.add_argument("--horizon", type=int, default=None)
    ev.add_argument("--episodes", type=int, default=1, help="episodes per scenario")
    ev.set_defaults(func=cmd_eval)

    jb = sub.add_parser("judge-bench", help="score matchers on the overlap benchmark")
    jb.add_argument("--count", type=int, default=300)
    jb.add_argument("--seed", type=int, default=None)
    jb.add_argument("--matcher", action="append", help="repeatable matcher spec")
    jb.add_argument("--ab", help="fixed 'a,b' rewrite split (default: random per case)")
    jb.add_argument("--no-paraphrase", action="store_true",
                    help="copy kept entries verbatim instead of paraphrasing")
    jb.add_argument("--out", help="CSV report path")
    jb.set_defaults(func=cmd_judge_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, SchemaError, CheckpointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DialignError, ProtocolError, OSError, FloatingPointError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
