# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

import logging
import os

from rich.console import Console
from rich.logging import RichHandler

from lmdp_lab.core.exceptions import ConfigError

WORKERS_ENV = "LMDP_LAB_WORKERS"

lab_config = None


def workers_from_env(default=1):
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {workers}")
    return workers


class LabConfig:
    console = Console()
    json: bool = False
    debug: bool = False
    quiet: bool = False
    workers: int = 1

    def __init__(self, args=None):
        self.configure(args)

    def configure(self, args=None):
        self.console.quiet = False
        self.json = self.debug = self.quiet = False

        if args and getattr(args, "json", False):
            self.console.quiet = True
            self.json = True

        if args and getattr(args, "quiet", False):
            self.console.quiet = True
            self.quiet = True

        if args and getattr(args, "debug", False):
            self.debug = args.debug

        cli_workers = getattr(args, "workers", None) if args else None
        self.workers = cli_workers or workers_from_env()


def setup_logging(config):
    level = logging.DEBUG if config.debug else logging.WARNING
    root = logging.getLogger("lmdp_lab")
    root.handlers.clear()
    root.addHandler(
        RichHandler(console=config.console, show_path=config.debug, markup=False)
    )
    root.setLevel(level)


def init_global_config(args=None):
    global lab_config
    # modules hold on to the instance, so reconfigure it in place
    if lab_config is None:
        lab_config = LabConfig(args)
    else:
        lab_config.configure(args)
    if args is not None:
        setup_logging(lab_config)
    return lab_config


if not lab_config:
    init_global_config()
