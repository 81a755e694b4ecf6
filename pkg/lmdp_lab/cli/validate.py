# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

import json5

from lmdp_lab.core.config import lab_config
from lmdp_lab.core.exceptions import ConfigError
from lmdp_lab.core.lmdp import lmdp_from_document
from lmdp_lab.core.mdp import mdp_from_document
from lmdp_lab.core.validation import LMDP_FORMAT, MDP_FORMAT, detect_format


def load_document(target):
    try:
        with open(target) as fi:
            doc = json5.load(fi)
    except OSError as e:
        raise ConfigError(f"cannot read {target}: {e.strerror}")
    except ValueError as e:
        raise ConfigError(f"{target}: {e}")
    doc_format = detect_format(doc)
    if doc_format is None:
        raise ConfigError(
            f"{target}: 'format' must be {MDP_FORMAT!r} or {LMDP_FORMAT!r}"
        )
    return doc_format, doc


def main(args):
    console = lab_config.console
    doc_format, doc = load_document(args.target)
    if doc_format == MDP_FORMAT:
        mdp_from_document(doc)
    else:
        lmdp_from_document(doc)
    console.print(f"\n[green]{doc_format} validation OK[/green]")
