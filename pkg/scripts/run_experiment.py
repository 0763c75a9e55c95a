#!/usr/bin/env python3
"""Run a full benchmark experiment from a config file.

Unlike `softirl reproduce`, which uses the packaged configurations, this
script runs any experiment described by a sectioned config (see README for
the format) and writes raw.csv / summary.csv / table.md.
"""

import argparse

from softirl.harness import format_markdown_table, parse_config, run_experiment


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default="results/custom")
    parser.add_argument("--reruns", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args()

    cfg = parse_config(args.config)
    if args.reruns is not None:
        cfg.reruns = args.reruns
    if args.seed is not None:
        cfg.base_seed = args.seed
    _, summary = run_experiment(cfg, out_dir=args.out, quiet=args.quiet)
    print(format_markdown_table(cfg.name, summary))
    print(f"files written to {args.out}")


if __name__ == "__main__":
    main()
