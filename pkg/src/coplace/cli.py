"""Command line entry points: gen, selfplay, analyze, export-sft, serve."""

from __future__ import annotations

import argparse
import csv
import json
import sys

from .domain import Player
from .engine import ActionSpace
from .harness import (
    EpisodeRecord,
    compute_metrics,
    error_table,
    export_sft,
    read_episodes,
    run_episode,
    write_episodes,
)
from .planning import NoisyPlannerAgent, PlannerAgent, Trajectory
from .puzzles import generate_puzzle, read_jsonl, write_jsonl

CONFIG_ALIASES = {
    "both": ActionSpace.PROVIDE_AND_SEEK,
    "provide": ActionSpace.PROVIDE_ONLY,
    "seek": ActionSpace.SEEK_ONLY,
    "none": ActionSpace.NONE,
}

METRICS_COLUMNS = (
    "config",
    "verifier",
    "episodes",
    "sr",
    "sr_se",
    "sub_r",
    "sub_r_se",
    "step_r",
    "step_r_se",
    "corr_r",
    "corr_r_se",
)

ERROR_COLUMNS = ("label", "count", "pct_total", "pct_relevant")


def _cmd_gen(args: argparse.Namespace) -> int:
    puzzles = [
        generate_puzzle(args.objects, args.seed + i) for i in range(args.count)
    ]
    write_jsonl(puzzles, args.out)
    print(f"wrote {len(puzzles)} puzzles to {args.out}")
    return 0


def _cmd_selfplay(args: argparse.Namespace) -> int:
    puzzles = read_jsonl(args.puzzles)
    config = CONFIG_ALIASES[args.config]
    configs = {p: config for p in Player}
    episodes = []
    for i, puzzle in enumerate(puzzles):
        if args.noise > 0:
            agents = {
                p: NoisyPlannerAgent(
                    config, args.noise, args.seed + i * 2 + j, args.samples
                )
                for j, p in enumerate(Player)
            }
        else:
            agents = {p: PlannerAgent(config) for p in Player}
        episodes.append(
            run_episode(
                puzzle,
                agents,
                configs,
                verifier_stack=args.verifier,
                step_limit=args.step_limit,
            )
        )
    write_episodes(episodes, args.out)
    report = compute_metrics(episodes)
    print(f"wrote {len(episodes)} episodes to {args.out}")
    stepr = f"{report.stepr:.3f}" if report.stepr is not None else "n/a"
    print(f"SR {report.sr:.1f}%  Sub.R {report.subr:.1f}%  StepR {stepr}")
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    episodes = read_episodes(args.episodes)
    report = compute_metrics(episodes)
    with open(args.report, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
        writer.writeheader()
        configs = sorted({c.value for e in episodes for c in e.configs.values()})
        writer.writerow(
            {
                "config": "+".join(configs),
                "verifier": episodes[0].verifier_stack,
                "episodes": len(episodes),
                "sr": f"{report.sr:.2f}",
                "sr_se": f"{report.sr_se:.2f}",
                "sub_r": f"{report.subr:.2f}",
                "sub_r_se": f"{report.subr_se:.2f}",
                "step_r": f"{report.stepr:.4f}" if report.stepr is not None else "",
                "step_r_se": f"{report.stepr_se:.4f}" if report.stepr_se is not None else "",
                "corr_r": f"{report.corr:.4f}" if report.corr is not None else "",
                "corr_r_se": f"{report.corr_se:.4f}" if report.corr_se is not None else "",
            }
        )
    print(f"wrote metrics to {args.report}")
    if args.errors:
        table = error_table(episodes)
        with open(args.errors, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=ERROR_COLUMNS)
            writer.writeheader()
            for label, row in table["rows"].items():
                writer.writerow(
                    {
                        "label": label,
                        "count": row["count"],
                        "pct_total": f"{row['pct_total']:.2f}",
                        "pct_relevant": (
                            f"{row['pct_relevant']:.2f}"
                            if row["pct_relevant"] is not None
                            else ""
                        ),
                    }
                )
        print(f"wrote error table to {args.errors}")
    return 0


def _cmd_export_sft(args: argparse.Namespace) -> int:
    with open(args.trajectories) as fh:
        trajectories = [Trajectory.from_json(json.loads(line)) for line in fh]
    samples = export_sft(trajectories, with_rationale=args.rationale)
    with open(args.out, "w") as fh:
        for sample in samples:
            fh.write(json.dumps(sample, sort_keys=True) + "\n")
    print(f"wrote {len(samples)} chat samples to {args.out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coplace")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate unique-solution puzzles")
    gen.add_argument("--objects", type=int, default=4)
    gen.add_argument("--count", type=int, default=100)
    gen.add_argument("--seed", type=int, default=7)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_gen)

    selfplay = sub.add_parser("selfplay", help="run verified agent self-play")
    selfplay.add_argument("--puzzles", required=True)
    selfplay.add_argument("--config", choices=sorted(CONFIG_ALIASES), default="both")
    selfplay.add_argument(
        "--verifier",
        choices=("none", "affordance", "communication", "reasoning"),
        default="reasoning",
    )
    selfplay.add_argument("--samples", type=int, default=4)
    selfplay.add_argument("--noise", type=float, default=0.0)
    selfplay.add_argument("--step-limit", type=int, default=30)
    selfplay.add_argument("--seed", type=int, default=0)
    selfplay.add_argument("--out", required=True)
    selfplay.set_defaults(func=_cmd_selfplay)

    analyze = sub.add_parser("analyze", help="aggregate metrics from episodes")
    analyze.add_argument("episodes")
    analyze.add_argument("--report", required=True)
    analyze.add_argument("--errors")
    analyze.set_defaults(func=_cmd_analyze)

    export = sub.add_parser("export-sft", help="convert trajectories to chat samples")
    export.add_argument("--trajectories", required=True)
    export.add_argument("--rationale", action="store_true")
    export.add_argument("--out", required=True)
    export.set_defaults(func=_cmd_export_sft)

    serve = sub.add_parser("serve", help="run the human-study session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--data-dir", default="coplace_data")
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
