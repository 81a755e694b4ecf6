# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

"""``run`` prints the gap table of a config, ``sweep`` also writes the CSV."""

from pathlib import Path

from rich.table import Table

from lmdp_lab.core.config import lab_config
from lmdp_lab.core.exceptions import ConfigError
from lmdp_lab.core.harness import load_experiment_config, run_sweep


def _gap_table(result):
    frame = result.frame
    worst = frame[frame["member"] == "worst"]
    table = Table(title="worst-member gap")
    for column in ("H", "seed", "policy", "gap_mean", "ci", "vstar", "switches", "mstar_survived"):
        table.add_column(column, justify="right")
    for row in worst.itertuples(index=False):
        table.add_row(
            str(row.H),
            str(row.seed),
            row.policy,
            f"{row.gap_mean:.4f}",
            f"{row.ci:.4f}",
            f"{row.vstar:.4f}",
            f"{row.switches:.2f}",
            f"{row.mstar_survived:.3f}",
        )
    return table


def main(args):
    console = lab_config.console
    config = load_experiment_config(args.config)
    output = args.out or config.output
    if args.command == "sweep" and output is None:
        raise ConfigError("sweep needs an output path (--out or 'output' in the config)")

    console.print(
        f"Running [bold]{config.policy}[/bold] over H={config.horizons}, "
        f"{config.seeds} seed(s), {config.episodes} episodes, "
        f"{lab_config.workers} worker(s)"
    )
    result = run_sweep(config, workers=lab_config.workers)

    if output is not None:
        result.write_csv(output)
        console.print(f"[green]Wrote[/green] {len(result.rows)} rows -> [bold]{output}")
        if config.trace:
            trace_path = Path(output).with_suffix(".trace.jsonl")
            result.write_trace(trace_path)
            console.print(f"[green]Wrote[/green] trace -> [bold]{trace_path}")

    if lab_config.json:
        print(result.frame.to_json(orient="records"))
    elif args.command == "run":
        console.print(_gap_table(result))
