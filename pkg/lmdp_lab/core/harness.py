# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

"""Experiment configs and the (H, seed, member) sweep.

Cells are independent and fanned out with joblib. Cell (H, i) draws all of its
randomness from ``SeedSequence([master_seed, H, i])``, so results do not depend
on the number of workers.
"""

import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import json5
import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import ValidationError
from ruamel.yaml import YAML
from ruamel.yaml.error import MarkedYAMLError, YAMLError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from lmdp_lab.core.agents import MarkovPolicy, UniformRandomPolicy
from lmdp_lab.core.analysis import build_function_class, covering_number_greedy
from lmdp_lab.core.exceptions import ConfigError
from lmdp_lab.core.instances import build_instance
from lmdp_lab.core.lmdp import LatentMdp, gap_monte_carlo, load_lmdp, solve_dr_optimal
from lmdp_lab.core.mdp import backward_induction, diameter
from lmdp_lab.core.policies import (
    SeparatedEliminationConfig,
    make_general_optimistic,
    make_optimistic_elimination,
    make_separated_elimination,
    separation_delta,
    solve_class,
)
from lmdp_lab.schemas.model import ExperimentConfig

logger = logging.getLogger(__name__)

RESULT_SCHEMA = "v1"
COLUMNS = [
    "schema",
    "family",
    "M",
    "S",
    "A",
    "D",
    "delta",
    "H",
    "policy",
    "seed",
    "member",
    "gap_mean",
    "ci",
    "vstar",
    "eliminations",
    "switches",
    "mstar_survived",
]
AGGREGATES = ("worst", "mean")


def _format_errors(path, err: ValidationError) -> str:
    lines = [f"{path}: invalid experiment config"]
    for item in err.errors():
        loc = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"  {loc}: {item['msg']}")
    return "\n".join(lines)


def read_config_document(path) -> dict:
    """Parse a YAML, TOML, JSON or JSON5 file into a plain dict."""
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}")
    try:
        if suffix in (".yaml", ".yml"):
            doc = YAML(typ="safe").load(text)
        elif suffix == ".toml":
            doc = tomllib.loads(text)
        elif suffix in (".json", ".json5"):
            doc = json5.loads(text)
        else:
            raise ConfigError(f"{path}: unknown config format {suffix!r}")
    except MarkedYAMLError as e:
        mark = e.problem_mark
        raise ConfigError(f"{path}:{mark.line + 1}:{mark.column + 1}: {e.problem}")
    except YAMLError as e:
        raise ConfigError(f"{path}: {e}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}")
    except ValueError as e:
        raise ConfigError(f"{path}: {e}")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return doc


def load_experiment_config(path) -> ExperimentConfig:
    doc = read_config_document(path)
    try:
        config = ExperimentConfig(**doc)
    except ValidationError as e:
        raise ConfigError(_format_errors(path, e))
    if config.instance_file is not None:
        resolved = (Path(path).parent / config.instance_file).resolve()
        config = config.model_copy(update={"instance_file": str(resolved)})
    return config


def instance_for_horizon(config: ExperimentConfig, horizon: int) -> LatentMdp:
    if config.instance is not None:
        spec = config.instance.model_copy(update={"horizon": horizon})
        return build_instance(spec)
    return load_lmdp(config.instance_file).with_horizon(horizon)


@dataclass
class ClassStats:
    D: float
    delta: float


def class_stats(lmdp: LatentMdp) -> ClassStats:
    D = max(diameter(m) for m in lmdp.mdps)
    delta = separation_delta(lmdp.mdps) if len(lmdp) > 1 else math.nan
    return ClassStats(D, delta)


def prepare_policies(config: ExperimentConfig, lmdp: LatentMdp, solved=None):
    """Prototype policy per real member; the learning agents share one prototype."""
    M, A = len(lmdp), lmdp.num_actions
    tag = config.policy
    if tag == "markov_opt":
        return [MarkovPolicy(backward_induction(m).policy, A) for m in lmdp.mdps]
    if tag == "uniform_random":
        proto = UniformRandomPolicy(A)
    elif tag == "dr_exact":
        proto = solve_dr_optimal(lmdp, config.node_limit).policy
    else:
        solved = solved or solve_class(lmdp.mdps)
        if tag == "alg1":
            sep = SeparatedEliminationConfig(lmdp.mdps, c0=config.c0, n0=config.n0, solved=solved)
            budget = sep.sample_budget(lmdp.horizon)
            if budget * (M - 1) >= lmdp.horizon:
                logger.warning(
                    "alg1 at H=%d needs n0=%d samples per test and will not leave the "
                    "sampling stage; set n0 or lower c0 in the config",
                    lmdp.horizon, budget,
                )
            proto = make_separated_elimination(sep)
        elif tag == "alg3":
            proto = make_optimistic_elimination(lmdp.mdps, solved=solved)
        else:
            cover = None
            if config.cover == "greedy":
                F = build_function_class(lmdp.mdps, solved.solutions)
                cover = covering_number_greedy(F, 1.0 / lmdp.horizon)
            proto = make_general_optimistic(
                lmdp.mdps, c=config.c, covering_number=cover, solved=solved
            )
    proto.tracing = config.trace
    return [proto] * M


def run_cell(lmdp, prototypes, config, stats, horizon, seed_index, members):
    """Gap rows of one (H, seed) cell plus the trace of its first episodes."""
    seq = np.random.SeedSequence([config.master_seed, horizon, seed_index])
    rows, traces = [], []
    for member, member_seq in zip(members, seq.spawn(len(members))):
        policy = prototypes[member].clone()
        policy.tracing = config.trace
        summaries = []

        def record(traj, pol):
            summaries.append(pol.summary())
            if config.trace and len(summaries) == 1:
                run = {"H": horizon, "seed": seed_index, "member": member}
                traces.extend({"run": run, **step} for step in pol.trace)

        est = gap_monte_carlo(lmdp.mdps[member], policy, config.episodes, member_seq, record)
        survived = [member in s["surviving"] for s in summaries if s["surviving"] is not None]
        rows.append(
            {
                "schema": RESULT_SCHEMA,
                "family": lmdp.family,
                "M": len(lmdp),
                "S": lmdp.num_states,
                "A": lmdp.num_actions,
                "D": stats.D,
                "delta": stats.delta,
                "H": horizon,
                "policy": config.policy,
                "seed": seed_index,
                "member": str(member),
                "gap_mean": est.gap_mean,
                "ci": est.ci_halfwidth,
                "vstar": est.vstar,
                "eliminations": float(np.mean([s["eliminations"] for s in summaries])),
                "switches": float(np.mean([s["switches"] for s in summaries])),
                "mstar_survived": float(np.mean(survived)) if survived else math.nan,
            }
        )
    rows.extend(_aggregate_rows(rows))
    return rows, traces


def _aggregate_rows(rows):
    worst = dict(max(rows, key=lambda r: r["gap_mean"]), member="worst")
    gaps = np.array([r["gap_mean"] for r in rows])
    cis = np.array([r["ci"] for r in rows])
    mean = dict(
        rows[0],
        member="mean",
        gap_mean=float(gaps.mean()),
        ci=float(np.sqrt(np.sum(cis**2)) / len(rows)),
        vstar=float(np.mean([r["vstar"] for r in rows])),
        eliminations=float(np.mean([r["eliminations"] for r in rows])),
        switches=float(np.mean([r["switches"] for r in rows])),
        mstar_survived=float(np.nanmean([r["mstar_survived"] for r in rows]))
        if any(not math.isnan(r["mstar_survived"]) for r in rows)
        else math.nan,
    )
    return [worst, mean]


def _member_order(member: str):
    if member in AGGREGATES:
        return (1, AGGREGATES.index(member))
    return (0, int(member))


@dataclass
class SweepResult:
    rows: List[dict]
    traces: List[dict] = field(default_factory=list)

    @property
    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=COLUMNS)

    def member_rows(self) -> pd.DataFrame:
        frame = self.frame
        return frame[~frame["member"].isin(AGGREGATES)]

    def write_csv(self, path) -> None:
        self.frame.to_csv(path, index=False, float_format="%.12g")

    def write_trace(self, path) -> None:
        with open(path, "w") as fo:
            for record in self.traces:
                fo.write(json.dumps(record, default=_jsonable))
                fo.write("\n")


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def run_sweep(config: ExperimentConfig, workers: int = 1) -> SweepResult:
    rows, traces = [], []
    previous = None
    for horizon in config.horizons:
        lmdp = instance_for_horizon(config, horizon)
        members = config.members if config.members is not None else list(range(len(lmdp)))
        bad = [m for m in members if not 0 <= m < len(lmdp)]
        if bad:
            raise ConfigError(f"members {bad} outside [0, {len(lmdp)})")
        # the class only changes with H for families sized by the horizon
        if previous is not None and np.array_equal(previous[0].kernels, lmdp.kernels):
            stats, solved = previous[1], previous[2]
        else:
            stats = class_stats(lmdp)
            solved = solve_class(lmdp.mdps) if config.policy in ("alg1", "alg3", "alg4") else None
        previous = (lmdp, stats, solved)
        prototypes = prepare_policies(config, lmdp, solved)
        logger.info("H=%d: %d seeds x %d members, %d episodes each",
                    horizon, config.seeds, len(members), config.episodes)
        results = Parallel(n_jobs=workers)(
            delayed(run_cell)(lmdp, prototypes, config, stats, horizon, i, members)
            for i in range(config.seeds)
        )
        for cell_rows, cell_traces in results:
            rows.extend(cell_rows)
            traces.extend(cell_traces)
    rows.sort(key=lambda r: (r["H"], r["seed"], r["policy"], _member_order(r["member"])))
    return SweepResult(rows, traces)


def run_single(lmdp: LatentMdp, config: ExperimentConfig, member: Optional[int] = None):
    """One cell at the instance's own horizon; handy for scripts and tests."""
    members = [member] if member is not None else list(range(len(lmdp)))
    stats = class_stats(lmdp)
    prototypes = prepare_policies(config, lmdp)
    rows, traces = run_cell(lmdp, prototypes, config, stats, lmdp.horizon, 0, members)
    return SweepResult(rows, traces)
