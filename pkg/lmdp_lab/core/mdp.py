# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

"""Exact planning and evaluation for a single tabular MDP.

Two views of the same environment live here: the finite-horizon one (backward
induction, exact policy evaluation) and the infinite-horizon average-reward one
(relative value iteration, hitting times and the diameter).
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import json5
import numpy as np

from lmdp_lab.core.exceptions import (
    InvalidActionError,
    MdpValidationError,
    UnboundedSpanError,
)
from lmdp_lab.core.validation import MDP_FORMAT, validate as schema_validate

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
DEFAULT_TOL = 1e-10
MAX_SWEEPS = 10**7
# relative value iteration works on 1/2 (P + I), which keeps the gain and the
# optimal policy and makes every communicating chain aperiodic
APERIODICITY = 0.5
STALL_WINDOW = 1000


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TabularMdp:
    transitions: np.ndarray
    rewards: np.ndarray
    horizon: int
    start_state: int = 0

    def __post_init__(self):
        transitions = _frozen(self.transitions, float)
        rewards = _frozen(self.rewards, float)
        if transitions.ndim != 3 or transitions.shape[0] != transitions.shape[2]:
            raise MdpValidationError(
                f"transitions must have shape (S, A, S), got {transitions.shape}"
            )
        if rewards.shape != transitions.shape[:2]:
            raise MdpValidationError(
                f"rewards must have shape {transitions.shape[:2]}, got {rewards.shape}"
            )
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "start_state", int(self.start_state))

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]

    def with_horizon(self, horizon: int) -> "TabularMdp":
        return TabularMdp(self.transitions, self.rewards, horizon, self.start_state)

    def permuted(self, perm) -> "TabularMdp":
        """Relabel states: new state i is old state perm[i]."""
        perm = np.asarray(perm)
        inverse = np.argsort(perm)
        transitions = self.transitions[perm][:, :, perm]
        return TabularMdp(
            transitions,
            self.rewards[perm],
            self.horizon,
            int(inverse[self.start_state]),
        )


@dataclass(frozen=True, eq=False)
class PlanSolution:
    values: np.ndarray
    q_values: np.ndarray
    policy: np.ndarray

    @property
    def value(self) -> np.ndarray:
        return self.values[0]


@dataclass(frozen=True, eq=False)
class AvgSolution:
    gain: float
    bias: np.ndarray
    policy: np.ndarray
    diameter: float = math.inf
    residual: float = 0.0
    iterations: int = field(default=0, compare=False)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.diameter)


def validate(mdp: TabularMdp) -> None:
    P, R = mdp.transitions, mdp.rewards
    if mdp.horizon < 1:
        raise MdpValidationError(f"horizon must be >= 1, got {mdp.horizon}")
    if not 0 <= mdp.start_state < mdp.num_states:
        raise MdpValidationError(
            f"start_state {mdp.start_state} outside [0, {mdp.num_states})",
            (mdp.start_state,),
        )
    bad = np.argwhere(~np.isfinite(P) | (P < 0.0) | (P > 1.0))
    if len(bad):
        s, a, t = bad[0]
        raise MdpValidationError(
            f"transition probability P[{s}][{a}][{t}] = {P[s, a, t]} outside [0, 1]",
            (s, a, t),
        )
    sums = P.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if len(bad):
        s, a = bad[0]
        raise MdpValidationError(
            f"transition row P[{s}][{a}] sums to {sums[s, a]!r}, not 1", (s, a)
        )
    bad = np.argwhere(~np.isfinite(R) | (R < 0.0) | (R > 1.0))
    if len(bad):
        s, a = bad[0]
        raise MdpValidationError(
            f"reward R[{s}][{a}] = {R[s, a]} outside [0, 1]", (s, a)
        )


def backward_induction(mdp: TabularMdp) -> PlanSolution:
    S, A, H = mdp.num_states, mdp.num_actions, mdp.horizon
    values = np.zeros((H + 1, S))
    q_values = np.zeros((H, S, A))
    policy = np.zeros((H, S), dtype=int)
    for h in reversed(range(H)):
        q = mdp.rewards + mdp.transitions @ values[h + 1]
        q_values[h] = q
        # argmax returns the first maximizer: lowest action index
        policy[h] = np.argmax(q, axis=1)
        values[h] = q[np.arange(S), policy[h]]
    return PlanSolution(
        _frozen(values, float), _frozen(q_values, float), _frozen(policy, int)
    )


def _as_markov_table(mdp: TabularMdp, policy) -> np.ndarray:
    table = np.asarray(policy)
    if table.ndim == 1:
        table = np.broadcast_to(table, (mdp.horizon, mdp.num_states))
    if table.shape != (mdp.horizon, mdp.num_states):
        raise InvalidActionError(
            f"policy table must have shape (H, S) = {(mdp.horizon, mdp.num_states)}"
            f" or (S,), got {table.shape}"
        )
    if table.min() < 0 or table.max() >= mdp.num_actions:
        h, s = np.argwhere((table < 0) | (table >= mdp.num_actions))[0]
        raise InvalidActionError(
            f"action {table[h, s]} at step {h + 1}, state {s} outside [0, {mdp.num_actions})"
        )
    return table.astype(int)


def evaluate_markov_policy(mdp: TabularMdp, policy) -> float:
    """Exact V^pi_1(s1) by pushing the state distribution forward.

    ``policy`` is an (H, S) table of actions or a stationary (S,) array.
    """
    table = _as_markov_table(mdp, policy)
    states = np.arange(mdp.num_states)
    dist = np.zeros(mdp.num_states)
    dist[mdp.start_state] = 1.0
    value = 0.0
    for h in range(mdp.horizon):
        actions = table[h]
        value += float(dist @ mdp.rewards[states, actions])
        dist = dist @ mdp.transitions[states, actions]
    return value


def _almost_sure_reach_set(mdp: TabularMdp, target: int):
    """States that reach ``target`` with probability one under some policy."""
    support = mdp.transitions > 0.0
    inside = np.ones(mdp.num_states, dtype=bool)
    while True:
        # actions whose every successor stays inside the candidate set
        safe = ~np.any(support & ~inside[None, None, :], axis=2)
        reach = np.zeros(mdp.num_states, dtype=bool)
        reach[target] = True
        frontier = True
        while frontier:
            step = np.any(safe & np.any(support & reach[None, None, :], axis=2), axis=1)
            new = step & inside & ~reach
            frontier = bool(new.any())
            reach |= new
        if np.array_equal(reach, inside):
            return inside, safe
        inside = reach


def hitting_time_policy(
    mdp: TabularMdp,
    target: int,
    tol: float = DEFAULT_TOL,
    max_iterations: int = MAX_SWEEPS,
):
    """Minimum expected hitting times of ``target`` and a policy attaining them.

    Stochastic shortest path with the target absorbing and cost 1 per step,
    solved by value iteration from zero. States that cannot reach the target
    almost surely get ``inf``.
    """
    S = mdp.num_states
    inside, safe = _almost_sure_reach_set(mdp, target)
    times = np.zeros(S)
    penalty = np.where(safe, 0.0, np.inf)
    for iteration in range(max_iterations):
        q = 1.0 + mdp.transitions @ times + penalty
        new = q.min(axis=1)
        new[target] = 0.0
        new[~inside] = 0.0
        change = np.max(np.abs(new - times))
        times = new
        if change <= tol * max(1.0, times.max()):
            break
    else:
        logger.debug("hitting time iteration for target %d hit the sweep cap", target)
        inside = np.arange(S) == target
    q = 1.0 + mdp.transitions @ times + penalty
    policy = np.argmin(q, axis=1)
    policy[~inside] = 0
    policy[target] = 0
    times = np.where(inside, times, np.inf)
    return times, policy


def diameter(mdp: TabularMdp, tol: float = DEFAULT_TOL) -> float:
    """Max over ordered pairs s != s' of the min expected travel time; inf if unbounded."""
    D = 0.0
    for target in range(mdp.num_states):
        times, _ = hitting_time_policy(mdp, target, tol=tol)
        worst = float(times.max())
        if not math.isfinite(worst):
            return math.inf
        D = max(D, worst)
    return D


def relative_value_iteration(
    mdp: TabularMdp,
    tol: float = DEFAULT_TOL,
    max_iterations: int = MAX_SWEEPS,
    with_diameter: bool = True,
) -> AvgSolution:
    S = mdp.num_states
    eye = np.eye(S)[:, None, :]
    P = APERIODICITY * mdp.transitions + (1.0 - APERIODICITY) * eye
    R = mdp.rewards

    h = np.zeros(S)
    checkpoint = math.inf
    for iteration in range(1, max_iterations + 1):
        th = (R + P @ h).max(axis=1)
        diff = th - h
        span = float(diff.max() - diff.min())
        if span <= tol:
            break
        if iteration % STALL_WINDOW == 0:
            if span >= checkpoint * (1.0 - 1e-9):
                raise UnboundedSpanError(
                    f"span of successive differences stuck at {span:.6g} after "
                    f"{iteration} sweeps; the MDP is not communicating",
                    iteration,
                    span,
                )
            checkpoint = span
        h = th - th[0]
    else:
        raise UnboundedSpanError(
            f"relative value iteration did not converge in {max_iterations} sweeps "
            f"(span {span:.6g})",
            max_iterations,
            span,
        )

    gain = 0.5 * float(diff.max() + diff.min())
    bias = APERIODICITY * h
    policy = np.argmax(R + mdp.transitions @ bias, axis=1)
    bias = bias - bias.min()
    logger.debug("rvi converged in %d sweeps, gain %.10f", iteration, gain)
    return AvgSolution(
        gain=gain,
        bias=_frozen(bias, float),
        policy=_frozen(policy, int),
        diameter=diameter(mdp) if with_diameter else math.inf,
        residual=span,
        iterations=iteration,
    )


def bellman_residual(mdp: TabularMdp, solution: AvgSolution) -> float:
    lam = solution.bias
    backup = (mdp.rewards + mdp.transitions @ lam).max(axis=1)
    return float(np.max(np.abs(backup - lam - solution.gain)))


def policy_gain(mdp: TabularMdp, policy, tol: float = DEFAULT_TOL) -> float:
    """Long-run average reward rho^pi of a stationary deterministic policy."""
    policy = np.asarray(policy, dtype=int)
    if policy.shape != (mdp.num_states,) or policy.min() < 0 or policy.max() >= mdp.num_actions:
        raise InvalidActionError(f"not a stationary policy for this MDP: {policy}")
    states = np.arange(mdp.num_states)
    chain = TabularMdp(
        mdp.transitions[states, policy][:, None, :],
        mdp.rewards[states, policy][:, None],
        mdp.horizon,
        mdp.start_state,
    )
    return relative_value_iteration(chain, tol=tol, with_diameter=False).gain


def mdp_to_document(mdp: TabularMdp) -> dict:
    return {
        "format": MDP_FORMAT,
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "horizon": mdp.horizon,
        "start_state": mdp.start_state,
        "transitions": mdp.transitions.tolist(),
        "rewards": mdp.rewards.tolist(),
    }


def mdp_from_document(doc: dict, horizon: Optional[int] = None) -> TabularMdp:
    schema_validate(doc, MDP_FORMAT)
    transitions = np.array(doc["transitions"], dtype=float)
    expected = (doc["num_states"], doc["num_actions"], doc["num_states"])
    if transitions.shape != expected:
        raise MdpValidationError(
            f"transitions have shape {transitions.shape}, header says {expected}"
        )
    mdp = TabularMdp(
        transitions,
        doc["rewards"],
        horizon if horizon is not None else doc["horizon"],
        doc["start_state"],
    )
    validate(mdp)
    return mdp


def save_mdp(mdp: TabularMdp, path) -> None:
    with open(path, "w") as fo:
        json.dump(mdp_to_document(mdp), fo, indent=2)
        fo.write("\n")


def load_mdp(path) -> TabularMdp:
    with open(path) as fi:
        return mdp_from_document(json5.load(fi))
