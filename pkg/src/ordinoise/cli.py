"""Command-line front end: gen-data, run, plot, validate-config.

Exit codes: 0 success, 1 configuration error, 2 runtime failure in every cell
(or a fatal runtime error), 3 partial cell failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import config as cfg
from . import harness
from .errors import ConfigError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ordinoise",
        description="Train ordinal classifiers under label noise and report the results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write the dataset CSV and noise sidecar")
    gen.add_argument("--config", required=True, help="experiment config JSON")
    gen.add_argument("--out", help="output directory (overrides config output_dir)")
    gen.add_argument("--seed", type=int, help="override the noise seed")

    run = sub.add_parser("run", help="execute the (method x fold x seed) grid")
    run.add_argument("--config", required=True, help="experiment config JSON")
    run.add_argument("--out", help="output directory (overrides config output_dir)")
    run.add_argument("--jobs", type=int, help="worker pool size (default: CPU count)")
    run.add_argument("--seed", type=int, help="replace the config seeds list with this seed")

    plot = sub.add_parser("plot", help="render SVG curves from a results directory")
    plot.add_argument("--out", required=True, help="results directory written by 'run'")

    val = sub.add_parser("validate-config", help="check a config and print it resolved")
    val.add_argument("--config", required=True, help="experiment config JSON")
    return parser


def _load(args) -> cfg.ExperimentConfig:
    experiment = cfg.load_config(args.config)
    overrides = {}
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    if getattr(args, "jobs", None):
        overrides["jobs"] = args.jobs
    if args.command == "run" and getattr(args, "seed", None) is not None:
        overrides["seeds"] = [args.seed]
    if overrides:
        experiment = dataclasses.replace(experiment, **overrides)
    return experiment


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate-config":
            experiment = cfg.load_config(args.config)
            print(json.dumps(experiment.to_dict(), indent=2, sort_keys=True))
            print(f"config ok (hash {experiment.hash()})", file=sys.stderr)
            return 0

        if args.command == "gen-data":
            experiment = _load(args)
            outcome = harness.gen_data(experiment, seed_override=args.seed)
            print(f"wrote {outcome.dataset_csv} ({outcome.sample_count} samples)")
            print(f"wrote {outcome.sidecar_csv}")
            if outcome.matrix_csv is not None:
                print(f"wrote {outcome.matrix_csv}")
            print(f"realized noise rate: {outcome.realized_rate:.4f}")
            return 0

        if args.command == "run":
            experiment = _load(args)
            outcome = harness.run_experiment(experiment, jobs=args.jobs)
            ok = sum(1 for r in outcome.rows if not r["error"])
            print(f"{ok}/{len(outcome.rows)} cells succeeded")
            for row in outcome.rows:
                if row["error"]:
                    print(
                        f"cell {row['method']} fold={row['fold']} seed={row['seed']} "
                        f"failed: {row['error']}",
                        file=sys.stderr,
                    )
            print(f"grid summary: {outcome.grid_csv}")
            print(f"resolved config: {outcome.config_json}")
            return outcome.exit_code

        if args.command == "plot":
            from . import plotting  # defer the matplotlib import to the one command using it

            paths = plotting.plot_results(args.out)
            for path in paths:
                print(f"wrote {path}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
