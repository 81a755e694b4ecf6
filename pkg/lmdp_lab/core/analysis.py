# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

"""Complexity measures of the finite class F = {f_M(s, a, lam) = P_M lam(s, a)}.

The eluder estimate is a lower bound and the cover size an upper bound; both
are made monotone in their tolerance by scanning the finitely many tolerances
at which their value can change.
"""

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from lmdp_lab.core.exceptions import ConfigError
from lmdp_lab.core.mdp import AvgSolution, TabularMdp, relative_value_iteration

EXHAUSTIVE_MAX_POINTS = 12


@dataclass(frozen=True, eq=False)
class FunctionClassF:
    """Table of f_M over the domain X = S x A x Lambda.

    Column ``(s * A + a) * L + l`` holds P_M(.|s, a) . lambda_l, where
    ``lambda_l`` is the optimal bias of member ``l``.
    """

    table: np.ndarray
    biases: np.ndarray
    num_states: int
    num_actions: int
    value_bound: float

    @property
    def size(self) -> int:
        return self.table.shape[0]

    @property
    def num_points(self) -> int:
        return self.table.shape[1]

    @property
    def num_biases(self) -> int:
        return self.biases.shape[0]

    def index(self, state: int, action: int, bias: int) -> int:
        return (state * self.num_actions + action) * self.num_biases + bias

    @property
    def domain(self) -> List[tuple]:
        return list(
            itertools.product(
                range(self.num_states), range(self.num_actions), range(self.num_biases)
            )
        )

    def pair_differences(self) -> np.ndarray:
        """Rows f_i - f_j for every pair i < j, shape (pairs, |X|)."""
        pairs = list(itertools.combinations(range(self.size), 2))
        if not pairs:
            return np.zeros((0, self.num_points))
        i, j = np.array(pairs).T
        return self.table[i] - self.table[j]


def build_function_class(
    mdps: Sequence[TabularMdp], solutions: Optional[Sequence[AvgSolution]] = None
) -> FunctionClassF:
    if solutions is None:
        solutions = [relative_value_iteration(m) for m in mdps]
    biases = np.stack([sol.bias for sol in solutions])
    kernels = np.stack([m.transitions for m in mdps])
    table = np.einsum("msat,lt->msal", kernels, biases).reshape(len(mdps), -1)
    D = max(sol.diameter for sol in solutions)
    return FunctionClassF(
        table=table,
        biases=biases,
        num_states=mdps[0].num_states,
        num_actions=mdps[0].num_actions,
        value_bound=2.0 * D,
    )


def function_class_sup_distance(f: FunctionClassF) -> float:
    diffs = f.pair_differences()
    if diffs.size == 0:
        return 0.0
    return float(np.abs(diffs).max())


def _greedy_eluder_run(diffs: np.ndarray, eps: float) -> int:
    # a point is eps-independent when some pair is still eps-close on the
    # sequence so far (including the empty one) but differs by more than eps there
    acc = np.zeros(len(diffs))
    length = 0
    while True:
        active = acc <= eps * eps
        witness = active[:, None] & (np.abs(diffs) > eps)
        points = np.flatnonzero(witness.any(axis=0))
        if len(points) == 0:
            return length
        acc += diffs[:, points[0]] ** 2
        length += 1


def _eluder_candidates(diffs: np.ndarray, eps: float) -> np.ndarray:
    magnitudes = np.unique(np.abs(diffs))
    candidates = magnitudes[magnitudes > 0] * (1.0 - 1e-9)
    return candidates[candidates >= eps]


def eluder_dimension_greedy(f: FunctionClassF, eps: float) -> int:
    """Greedy lower bound on dim_E(F, eps).

    Each run appends the first eps'-independent point in scan order until none
    is left; the estimate is the longest run over the tolerances eps' >= eps
    just below a pointwise difference of the class.
    """
    if eps <= 0:
        raise ConfigError(f"eluder tolerance must be positive, got {eps}")
    diffs = f.pair_differences()
    return max(
        (_greedy_eluder_run(diffs, c) for c in _eluder_candidates(diffs, eps)),
        default=0,
    )


def eluder_dimension_exhaustive(f: FunctionClassF, eps: float) -> int:
    """Longest eps'-independent sequence by depth-first search, eps' >= eps.

    Only for tiny domains (at most 12 points).
    """
    if eps <= 0:
        raise ConfigError(f"eluder tolerance must be positive, got {eps}")
    if f.num_points > EXHAUSTIVE_MAX_POINTS:
        raise ConfigError(
            f"exhaustive eluder search is limited to {EXHAUSTIVE_MAX_POINTS} "
            f"domain points, class has {f.num_points}"
        )
    diffs = f.pair_differences()

    def longest(acc, bound, memo):
        key = tuple(np.round(acc, 12))
        if key in memo:
            return memo[key]
        active = acc <= bound * bound
        best = 0
        for x in range(diffs.shape[1]):
            if np.any(active & (np.abs(diffs[:, x]) > bound)):
                best = max(best, 1 + longest(acc + diffs[:, x] ** 2, bound, memo))
        memo[key] = best
        return best

    return max(
        (longest(np.zeros(len(diffs)), c, {}) for c in _eluder_candidates(diffs, eps)),
        default=0,
    )


def _greedy_cover_run(dist: np.ndarray, alpha: float) -> int:
    inside = dist <= alpha
    uncovered = np.ones(len(dist), dtype=bool)
    centers = 0
    while uncovered.any():
        gains = (inside & uncovered[None, :]).sum(axis=1)
        best = int(np.argmax(gains))
        uncovered &= ~inside[best]
        centers += 1
    return centers


def covering_number_greedy(f: FunctionClassF, alpha: float) -> int:
    """Greedy upper bound on the sup-norm covering number N(F, alpha).

    Centers are members of the class. A cover at radius alpha' <= alpha is also
    an alpha cover, so the smallest greedy cover over the radii at which ball
    membership changes is reported.
    """
    if alpha <= 0:
        raise ConfigError(f"cover radius must be positive, got {alpha}")
    table = f.table
    dist = np.abs(table[:, None, :] - table[None, :, :]).max(axis=2)
    radii = np.unique(dist)
    return min(_greedy_cover_run(dist, r) for r in radii[radii <= alpha])


def log_covering_number(f: FunctionClassF, alpha: float) -> float:
    return math.log(covering_number_greedy(f, alpha))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    points: int


def fit_loglog_slope(points) -> SlopeFit:
    """Ordinary least squares of log(gap) on log(H)."""
    points = sorted((float(h), float(g)) for h, g in points)
    if len(points) < 3:
        raise ValueError(f"need at least 3 (H, gap) points, got {len(points)}")
    for h, g in points:
        if h <= 0 or g <= 0 or not math.isfinite(g):
            raise ValueError(f"log-log fit needs positive values, got H={h}, gap={g}")
    x = np.log([h for h, _ in points])
    y = np.log([g for _, g in points])
    fit = stats.linregress(x, y)
    return SlopeFit(
        slope=float(fit.slope),
        stderr=float(fit.stderr),
        intercept=float(fit.intercept),
        points=len(points),
    )
