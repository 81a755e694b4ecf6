# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

import json
import logging
import math

from lmdp_lab.core.analysis import (
    build_function_class,
    covering_number_greedy,
    eluder_dimension_greedy,
    function_class_sup_distance,
)
from lmdp_lab.core.exceptions import UnboundedSpanError
from lmdp_lab.core.lmdp import load_lmdp
from lmdp_lab.core.mdp import diameter
from lmdp_lab.core.policies import separation_delta, solve_class

logger = logging.getLogger(__name__)


def analyze(lmdp, eps=None):
    eps = eps or 1.0 / lmdp.horizon
    D = max(diameter(m) for m in lmdp.mdps)
    summary = {
        "family": lmdp.family,
        "M": len(lmdp),
        "S": lmdp.num_states,
        "A": lmdp.num_actions,
        "H": lmdp.horizon,
        "diameter_max": D if math.isfinite(D) else None,
        "delta": separation_delta(lmdp.mdps) if len(lmdp) > 1 else None,
        "eps": eps,
        "gains": None,
        "eluder_greedy": None,
        "cover_size": None,
        "log_cover": None,
        "sup_distance": None,
    }
    if not math.isfinite(D):
        logger.warning("class is not communicating, skipping the function class measures")
        return summary
    try:
        solved = solve_class(lmdp.mdps)
    except UnboundedSpanError as e:
        logger.warning("%s", e)
        return summary
    F = build_function_class(lmdp.mdps, solved.solutions)
    cover = covering_number_greedy(F, eps)
    summary.update(
        gains=[sol.gain for sol in solved.solutions],
        eluder_greedy=eluder_dimension_greedy(F, eps),
        cover_size=cover,
        log_cover=math.log(cover),
        sup_distance=function_class_sup_distance(F),
    )
    return summary


def main(args):
    summary = analyze(load_lmdp(args.target), args.eps)
    print(json.dumps(summary, sort_keys=True))
