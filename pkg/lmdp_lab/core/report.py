# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

"""Scaling summaries of sweep CSVs and the pass/fail gate."""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

import pandas as pd
from pydantic import ValidationError

from lmdp_lab.core.analysis import fit_loglog_slope
from lmdp_lab.core.exceptions import AcceptanceFailure, ConfigError, SchemaMismatchError
from lmdp_lab.core.harness import AGGREGATES, COLUMNS, RESULT_SCHEMA, read_config_document
from lmdp_lab.schemas.model import ReportThresholds

logger = logging.getLogger(__name__)

FLATNESS_SPAN = 8


def load_results(paths) -> pd.DataFrame:
    frames = []
    for path in paths:
        frame = pd.read_csv(path, dtype={"member": str})
        missing = [c for c in COLUMNS if c not in frame.columns]
        if missing:
            raise SchemaMismatchError(f"{path}: missing columns {', '.join(missing)}")
        versions = set(frame["schema"].astype(str))
        if versions - {RESULT_SCHEMA}:
            raise SchemaMismatchError(
                f"{path}: result schema {sorted(versions)} is not {RESULT_SCHEMA}"
            )
        frames.append(frame)
    if not frames or sum(len(f) for f in frames) == 0:
        raise SchemaMismatchError("no result rows to report on")
    return pd.concat(frames, ignore_index=True)


def load_thresholds(path=None) -> ReportThresholds:
    if path is None:
        return ReportThresholds()
    try:
        return ReportThresholds(**read_config_document(path))
    except ValidationError as e:
        raise ConfigError(f"{path}: invalid thresholds\n{e}")


def gap_curve(results: pd.DataFrame) -> pd.DataFrame:
    """Mean worst-member gap per (policy, H), averaged over seeds."""
    worst = results[results["member"] == "worst"]
    return (
        worst.groupby(["policy", "H"], as_index=False)
        .agg(gap_mean=("gap_mean", "mean"), ci=("ci", "mean"), seeds=("seed", "nunique"))
        .sort_values(["policy", "H"], ignore_index=True)
    )


@dataclass
class PolicyReport:
    policy: str
    horizons: List[int]
    slope: Optional[float] = None
    stderr: Optional[float] = None
    flatness: Optional[float] = None
    survival: Optional[float] = None
    passed: Optional[bool] = None
    failures: Optional[List[str]] = None


def _flatness(curve: pd.DataFrame) -> Optional[float]:
    gaps = dict(zip(curve["H"], curve["gap_mean"]))
    top = max(gaps)
    low = top // FLATNESS_SPAN if top // FLATNESS_SPAN in gaps else min(gaps)
    if low == top or gaps[low] <= 0:
        return None
    return float(gaps[top] / gaps[low])


def summarize(results: pd.DataFrame, thresholds: ReportThresholds) -> Dict:
    curves = gap_curve(results)
    members = results[~results["member"].isin(AGGREGATES)]
    reports = []
    for policy, curve in curves.groupby("policy", sort=True):
        rep = PolicyReport(policy=policy, horizons=[int(h) for h in curve["H"]])
        positive = curve[curve["gap_mean"] > 0]
        if len(positive) >= 3:
            fit = fit_loglog_slope(zip(positive["H"], positive["gap_mean"]))
            rep.slope, rep.stderr = fit.slope, fit.stderr
        else:
            logger.info("%s: fewer than 3 positive gaps, no slope fitted", policy)
        rep.flatness = _flatness(curve)
        survived = members.loc[members["policy"] == policy, "mstar_survived"].dropna()
        if len(survived):
            rep.survival = float(survived.mean())

        failures = []
        limit = thresholds.slope_max.get(policy)
        if limit is not None and (rep.slope is None or rep.slope > limit):
            failures.append(f"slope {rep.slope} above {limit}")
        limit = thresholds.flatness_max.get(policy)
        if limit is not None and (rep.flatness is None or rep.flatness > limit):
            failures.append(f"flatness {rep.flatness} above {limit}")
        if rep.survival is not None and rep.survival < thresholds.survival_min:
            failures.append(f"survival {rep.survival:.3f} below {thresholds.survival_min}")
        checked = (
            policy in thresholds.slope_max
            or policy in thresholds.flatness_max
            or rep.survival is not None
        )
        rep.passed = not failures if checked else None
        rep.failures = failures
        reports.append(rep)
    return {
        "schema": RESULT_SCHEMA,
        "policies": [_record(r) for r in reports],
    }


def _record(rep: PolicyReport) -> dict:
    record = asdict(rep)
    # "pass" is a keyword, so the field carries another name
    record["pass"] = record.pop("passed")
    return {
        k: (None if isinstance(v, float) and not math.isfinite(v) else v)
        for k, v in record.items()
    }


def enforce(summary: Dict) -> None:
    failed = [p for p in summary["policies"] if p["pass"] is False]
    if failed:
        detail = "; ".join(f"{p['policy']}: {', '.join(p['failures'])}" for p in failed)
        raise AcceptanceFailure(f"acceptance thresholds not met ({detail})")
