# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

import json

from pydantic import ValidationError

from lmdp_lab.core.config import lab_config
from lmdp_lab.core.exceptions import ConfigError
from lmdp_lab.core.instances import build_instance
from lmdp_lab.core.lmdp import save_lmdp
from lmdp_lab.schemas.model import InstanceSpec

_params = ("family", "m", "s", "a", "horizon", "delta", "eps", "d_target", "seed")


def main(args):
    console = lab_config.console
    given = {k: getattr(args, k) for k in _params if getattr(args, k) is not None}
    try:
        spec = InstanceSpec(**given)
    except ValidationError as e:
        problems = "; ".join(err["msg"] for err in e.errors())
        raise ConfigError(f"invalid {args.family} parameters: {problems}")

    lmdp = build_instance(spec)
    save_lmdp(lmdp, args.out)

    if lab_config.json:
        print(json.dumps({"out": args.out, "family": lmdp.family, "M": len(lmdp),
                          "S": lmdp.num_states, "A": lmdp.num_actions}, sort_keys=True))
        return
    console.print(
        f"[green]Wrote[/green] {lmdp.family}: M={len(lmdp)}, S={lmdp.num_states}, "
        f"A={lmdp.num_actions}, H={lmdp.horizon} -> [bold]{args.out}"
    )
