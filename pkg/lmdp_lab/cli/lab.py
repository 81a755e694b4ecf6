# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

import sys
import argparse

from rich.markup import escape

from lmdp_lab.core.config import init_global_config
from lmdp_lab.core.exceptions import LabException
from lmdp_lab.core.validation import SchemaError, ValidationError
from lmdp_lab._version import __version__

FAMILIES = ["prop1", "two_state", "jao_tree", "prop5_bandit", "random_comm", "mab"]


def build_parser():
    parser = argparse.ArgumentParser(
        description="lmdp-lab, exact planning and sim-to-real gap experiments on latent MDPs."
    )
    parser.add_argument("--version", action="version", version=__version__)

    subparsers = parser.add_subparsers(help="sub-command help", dest="command")
    parent_parser = argparse.ArgumentParser(add_help=False)
    parent_parser.add_argument("--json", action="store_true", help="print JSON only")
    parent_parser.add_argument("--quiet", action="store_true")
    parent_parser.add_argument("--debug", action="store_true")
    parent_parser.add_argument(
        "--workers",
        type=int,
        help="parallel workers (default: $LMDP_LAB_WORKERS or 1)",
    )

    gen_parser = subparsers.add_parser(
        "gen", parents=[parent_parser], help="generate an instance family as lmdp-v1 JSON"
    )
    gen_parser.add_argument("--family", required=True, choices=FAMILIES)
    gen_parser.add_argument("--m", type=int)
    gen_parser.add_argument("--s", type=int)
    gen_parser.add_argument("--a", type=int)
    gen_parser.add_argument("--horizon", type=int, default=100)
    gen_parser.add_argument("--delta", type=float)
    gen_parser.add_argument("--eps", type=float)
    gen_parser.add_argument("--d-target", type=float, dest="d_target")
    gen_parser.add_argument("--seed", type=int, default=0)
    gen_parser.add_argument("--out", required=True)

    solve_parser = subparsers.add_parser(
        "solve", parents=[parent_parser], help="solve an mdp-v1 document (or every lmdp-v1 member)"
    )
    solve_parser.add_argument("target", type=str)
    mode = solve_parser.add_mutually_exclusive_group()
    mode.add_argument("--avg", action="store_true", help="average-reward view (default)")
    mode.add_argument("--finite", action="store_true", help="finite-horizon view")

    run_parser = argparse.ArgumentParser(add_help=False)
    run_parser.add_argument("--config", required=True)
    run_parser.add_argument("--out", help="result CSV (overrides the config's output)")
    subparsers.add_parser(
        "run", parents=[parent_parser, run_parser], help="run an experiment config and print its gaps"
    )
    subparsers.add_parser(
        "sweep", parents=[parent_parser, run_parser], help="run an experiment config and write CSV"
    )

    analyze_parser = subparsers.add_parser(
        "analyze", parents=[parent_parser], help="separation, diameter and class complexity"
    )
    analyze_parser.add_argument("target", type=str)
    analyze_parser.add_argument("--eps", type=float, help="eluder / cover scale (default 1/H)")

    report_parser = subparsers.add_parser(
        "report", parents=[parent_parser], help="fit scaling laws on sweep CSVs"
    )
    report_parser.add_argument("results", nargs="+")
    report_parser.add_argument("--out", help="summary JSON path")
    report_parser.add_argument("--curve", help="plot-ready CSV path")
    report_parser.add_argument("--thresholds", help="threshold config (yaml, toml or json)")
    report_parser.add_argument(
        "--enforce", action="store_true", help="exit with code 3 when a threshold fails"
    )

    validate_parser = subparsers.add_parser(
        "validate", parents=[parent_parser], help="validate an mdp-v1 or lmdp-v1 document"
    )
    validate_parser.add_argument("target", type=str)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command

    if not command:
        parser.print_help(sys.stdout)
        return

    try:
        config = init_global_config(args)
    except LabException as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)

    from lmdp_lab.cli import analyze, gen, report, run, solve, validate

    commands = {
        "gen": gen.main,
        "solve": solve.main,
        "run": run.main,
        "sweep": run.main,
        "analyze": analyze.main,
        "report": report.main,
        "validate": validate.main,
    }
    try:
        commands[command](args)
    except (ValidationError, SchemaError):
        # the schema validator already printed the message
        sys.exit(2)
    except LabException as e:
        config.console.quiet = False
        config.console.print(f"[bold red]error:[/bold red] {escape(str(e))}", highlight=False)
        sys.exit(e.exit_code)
    except Exception:
        if config.debug:
            config.console.quiet = False
            config.console.print_exception()
            sys.exit(1)
        raise


if __name__ == "__main__":
    main()
