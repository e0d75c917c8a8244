"""Command line: ``genwar run`` and ``genwar scenario``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from .harness import POLICIES, PROFILES, UPSTREAMS, ConfigError, ExperimentConfig, run_experiment
from .memory import DEFAULT_DECAY, DEFAULT_K, RetrievalWeights
from .planning import DEFAULT_MAX_ROUNDS
from .reflection import ReflectionConfig
from .scenario import DEFAULT_SCENARIO, ScenarioError, load_scenario


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genwar", description="Generative wargame agents on a hex grid.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded batch of episodes")
    run.add_argument("--scenario", default=DEFAULT_SCENARIO, help="scenario JSON file, or 'default'")
    run.add_argument("--red", choices=POLICIES, default="gwa")
    run.add_argument("--blue", choices=POLICIES, default="rule")
    run.add_argument("--episodes", type=int, default=10)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--backend", choices=PROFILES, default="scripted")
    run.add_argument("--upstream", choices=UPSTREAMS, default="remote",
                     help="where cache misses go when --backend cached")
    run.add_argument("--cache-file", default=None, help="default: <out>/cache.jsonl")
    run.add_argument("--strategic-model", default="gpt-4")
    run.add_argument("--tactical-model", default="gpt-3.5-turbo")
    run.add_argument("--alpha-recency", type=float, default=1.0)
    run.add_argument("--alpha-importance", type=float, default=1.0)
    run.add_argument("--alpha-relevance", type=float, default=1.0)
    run.add_argument("--decay", type=float, default=DEFAULT_DECAY)
    run.add_argument("--top-k", type=int, default=DEFAULT_K)
    run.add_argument("--reflect-threshold", type=float, default=20.0)
    run.add_argument("--reflect-window", type=int, default=20)
    run.add_argument("--reflect-questions", type=int, default=2)
    run.add_argument("--max-rounds", type=int, default=DEFAULT_MAX_ROUNDS)
    run.add_argument("--expert-doc", default=None, help="expert knowledge text file (required for gwae)")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", required=True, help="output directory")

    show = sub.add_parser("scenario", help="print a scenario as JSON")
    show.add_argument("path", nargs="?", default=DEFAULT_SCENARIO)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        scenario=args.scenario,
        red=args.red,
        blue=args.blue,
        episodes=args.episodes,
        seed=args.seed,
        weights=RetrievalWeights(args.alpha_recency, args.alpha_importance, args.alpha_relevance, args.decay, args.top_k),
        reflection=ReflectionConfig(args.reflect_threshold, args.reflect_window, args.reflect_questions),
        max_rounds=args.max_rounds,
        backend=args.backend,
        expert_doc=args.expert_doc,
        out=args.out,
        cache_file=args.cache_file,
        upstream=args.upstream,
        strategic_model=args.strategic_model,
        tactical_model=args.tactical_model,
        workers=args.workers,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "scenario":
        try:
            print(json.dumps(load_scenario(args.path).to_dict()))
        except ScenarioError as exc:
            print(f"genwar: {exc}", file=sys.stderr)
            return 2
        return 0

    try:
        cfg = config_from_args(args)
        report = run_experiment(cfg)
    except (ConfigError, ScenarioError, ValueError) as exc:
        print(f"genwar: {exc}", file=sys.stderr)
        return 2
    summary = report.to_dict()
    rates = summary["win_rate"]
    print(f"{summary['episodes']} episodes ({len(report.failures)} failed): "
          f"red[{cfg.red}] {rates['red']:.3f}  blue[{cfg.blue}] {rates['blue']:.3f}  draw {rates['draw']:.3f}")
    print(f"outputs written to {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
