"""Command-line entry point.

    veriflow <subcommand> --config <path> [--seed N] [--out DIR]

Exit codes: 0 success, 1 usage/config error, 2 data validation failure,
3 training failure.
"""

from __future__ import annotations

import argparse
import sys

from . import runner
from .errors import ConfigError, DataError, TrainingError

SUBCOMMANDS = (
    "validate",
    "featurize-text",
    "train",
    "evaluate",
    "cv-tune",
    "ablate",
    "ensemble",
    "synth",
    "report",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors -> exit code 1, not argparse's 2
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="veriflow", description="Claim-veracity fusion experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config file (INI sections)")
        p.add_argument("--seed", type=int, default=None, help="override [train] seed")
        p.add_argument("--out", default=None, help="override [run] out directory")
    return parser


def _dispatch(args) -> int:
    config = runner.load_config(args.config, overrides={"seed": args.seed, "out": args.out})
    cmd = args.command
    if cmd == "validate":
        report = runner.run_validate(config)
        print(report.summary())
        return 0 if report.ok() else 2
    if cmd == "featurize-text":
        for path in runner.run_featurize_text(config):
            print(f"wrote {path}")
        return 0
    if cmd == "train":
        for path in runner.run_train(config):
            print(f"wrote {path}")
        return 0
    if cmd == "evaluate":
        bundle = runner.run(config)
        print(runner.metrics_table(bundle.rows), end="")
        return 0
    if cmd == "cv-tune":
        for path in runner.run_cv_tune(config):
            print(f"wrote {path}")
        return 0
    if cmd == "ablate":
        if config.family != "fusion_net":
            raise ConfigError("ablate requires model family fusion_net")
        if config.ablation == "none":
            config.ablation = "both"
        bundle = runner.run(config)
        print(runner.metrics_table(bundle.rows), end="")
        return 0
    if cmd == "ensemble":
        rows = []
        dataset = runner._load_dataset(config)
        for family in ("concat_lr", "prob_avg", "stacked"):
            cfg = runner.load_config(args.config, overrides={"seed": args.seed, "out": args.out})
            cfg.family = family
            cfg.out_dir = config.out_dir / family
            rows += runner.run(cfg, dataset=dataset).rows
        print(runner.metrics_table(rows), end="")
        return 0
    if cmd == "synth":
        for path in runner.run_synth(config):
            print(f"wrote {path}")
        return 0
    if cmd == "report":
        path = runner.run_report(config)
        print(f"wrote {path}")
        return 0
    raise ConfigError(f"unknown subcommand {cmd!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _dispatch(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except TrainingError as e:
        print(f"training error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
