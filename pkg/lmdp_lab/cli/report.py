# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

import json

from rich.table import Table

from lmdp_lab.core.config import lab_config
from lmdp_lab.core.report import enforce, gap_curve, load_results, load_thresholds, summarize


def _fmt(value, spec=".3f"):
    return "-" if value is None else format(value, spec)


def main(args):
    console = lab_config.console
    results = load_results(args.results)
    summary = summarize(results, load_thresholds(args.thresholds))
    text = json.dumps(summary, sort_keys=True, indent=2)

    if args.out:
        with open(args.out, "w") as fo:
            fo.write(text + "\n")
    if args.curve:
        gap_curve(results).to_csv(args.curve, index=False, float_format="%.12g")

    if lab_config.json or not args.out:
        print(text)
    else:
        table = Table(title="gap scaling")
        for column in ("policy", "slope", "stderr", "flatness", "survival", "pass"):
            table.add_column(column, justify="right")
        for rep in summary["policies"]:
            passed = {True: "[green]yes", False: "[red]no", None: "-"}[rep["pass"]]
            table.add_row(
                rep["policy"],
                _fmt(rep["slope"]),
                _fmt(rep["stderr"]),
                _fmt(rep["flatness"]),
                _fmt(rep["survival"]),
                passed,
            )
        console.print(table)

    if args.enforce:
        enforce(summary)
