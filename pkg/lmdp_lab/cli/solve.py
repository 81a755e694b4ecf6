# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

import json
import math

from rich.table import Table

from lmdp_lab.cli.validate import load_document
from lmdp_lab.core.config import lab_config
from lmdp_lab.core.lmdp import lmdp_from_document
from lmdp_lab.core.mdp import backward_induction, mdp_from_document, relative_value_iteration
from lmdp_lab.core.validation import MDP_FORMAT


def _finite(mdp):
    sol = backward_induction(mdp)
    return {
        "value": float(sol.values[0, mdp.start_state]),
        "policy": sol.policy.tolist(),
    }


def _average(mdp):
    sol = relative_value_iteration(mdp)
    return {
        "gain": sol.gain,
        "bias": sol.bias.tolist(),
        "policy": sol.policy.tolist(),
        "diameter": sol.diameter if math.isfinite(sol.diameter) else None,
        "iterations": sol.iterations,
    }


def main(args):
    console = lab_config.console
    doc_format, doc = load_document(args.target)
    if doc_format == MDP_FORMAT:
        mdps = [mdp_from_document(doc)]
    else:
        mdps = list(lmdp_from_document(doc).mdps)

    solve = _finite if args.finite else _average
    results = [solve(m) for m in mdps]

    if lab_config.json:
        print(json.dumps({"mode": "finite" if args.finite else "avg", "members": results},
                         sort_keys=True))
        return

    table = Table(title=f"{args.target} ({'finite horizon' if args.finite else 'average reward'})")
    table.add_column("member", justify="right")
    if args.finite:
        table.add_column("V*_1(s1)", justify="right")
        table.add_column("policy at step 1")
        for i, res in enumerate(results):
            table.add_row(str(i), f"{res['value']:.6f}", str(res["policy"][0]))
    else:
        table.add_column("gain", justify="right")
        table.add_column("diameter", justify="right")
        table.add_column("policy")
        for i, res in enumerate(results):
            D = res["diameter"]
            table.add_row(str(i), f"{res['gain']:.8f}", "inf" if D is None else f"{D:.3f}",
                          str(res["policy"]))
    console.print(table)
