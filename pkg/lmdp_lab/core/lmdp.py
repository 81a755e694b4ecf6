# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

"""Latent MDPs: episode sampling, posteriors, the exact DR oracle and gap estimates."""

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence

import json5
import numpy as np
import pandas as pd

from lmdp_lab.core.agents import HistoryPolicy
from lmdp_lab.core.exceptions import (
    BeliefLimitExceeded,
    ImpossibleHistoryError,
    InvalidActionError,
    MdpValidationError,
)
from lmdp_lab.core.mdp import (
    TabularMdp,
    backward_induction,
    mdp_from_document,
    mdp_to_document,
    validate as validate_mdp,
)
from lmdp_lab.core.validation import LMDP_FORMAT, validate as schema_validate

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12
BELIEF_DECIMALS = 9
DEFAULT_NODE_LIMIT = 10**6
Z95 = 1.959963984540054


@dataclass(frozen=True, eq=False)
class LatentMdp:
    mdps: Sequence[TabularMdp]
    weights: Optional[np.ndarray] = None
    family: str = "custom"

    def __post_init__(self):
        mdps = tuple(self.mdps)
        if not mdps:
            raise MdpValidationError("a latent MDP needs at least one member")
        if self.weights is None:
            weights = np.full(len(mdps), 1.0 / len(mdps))
        else:
            weights = np.array(self.weights, dtype=float)
        weights.setflags(write=False)
        object.__setattr__(self, "mdps", mdps)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return len(self.mdps)

    @property
    def base(self) -> TabularMdp:
        return self.mdps[0]

    @property
    def num_states(self) -> int:
        return self.base.num_states

    @property
    def num_actions(self) -> int:
        return self.base.num_actions

    @property
    def horizon(self) -> int:
        return self.base.horizon

    @property
    def start_state(self) -> int:
        return self.base.start_state

    @property
    def rewards(self) -> np.ndarray:
        return self.base.rewards

    @cached_property
    def kernels(self) -> np.ndarray:
        """Stacked transition tensors, shape (M, S, A, S)."""
        stack = np.stack([m.transitions for m in self.mdps])
        stack.setflags(write=False)
        return stack

    def with_horizon(self, horizon: int) -> "LatentMdp":
        return LatentMdp(
            [m.with_horizon(horizon) for m in self.mdps], self.weights, self.family
        )


def validate(lmdp: LatentMdp) -> None:
    base = lmdp.base
    for i, mdp in enumerate(lmdp.mdps):
        validate_mdp(mdp)
        if (mdp.num_states, mdp.num_actions) != (base.num_states, base.num_actions):
            raise MdpValidationError(
                f"member {i} has spaces {(mdp.num_states, mdp.num_actions)}, "
                f"member 0 has {(base.num_states, base.num_actions)}",
                (i,),
            )
        if (mdp.horizon, mdp.start_state) != (base.horizon, base.start_state):
            raise MdpValidationError(
                f"member {i} disagrees with member 0 on horizon or start state", (i,)
            )
        if not np.array_equal(mdp.rewards, base.rewards):
            raise MdpValidationError(
                f"member {i} does not share the reward table of member 0", (i,)
            )
    w = lmdp.weights
    if w.shape != (len(lmdp),):
        raise MdpValidationError(
            f"{len(w)} weights for {len(lmdp)} members", (len(w), len(lmdp))
        )
    if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise MdpValidationError(f"weights {w.tolist()} are not a distribution")


@dataclass
class Trajectory:
    states: List[int] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    latent_index: int = 0

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True)
class GapEstimate:
    gap_mean: float
    ci_halfwidth: float
    episodes: int
    vstar: float

    @property
    def mean_return(self) -> float:
        return self.vstar - self.gap_mean


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _policy_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


def _cumulative(mdp: TabularMdp) -> np.ndarray:
    cdf = np.cumsum(mdp.transitions, axis=2)
    cdf[..., -1] = 1.0
    return cdf


def _rollout(mdp, policy, rng, policy_seed, latent_index, cdf=None) -> Trajectory:
    if cdf is None:
        cdf = _cumulative(mdp)
    S, A = mdp.num_states, mdp.num_actions
    draws = rng.random(mdp.horizon)
    policy.reset(policy_seed)
    state = mdp.start_state
    traj = Trajectory(states=[state], latent_index=latent_index)
    reward = None
    for u in draws:
        policy.observe(state, reward)
        action = policy.act(state)
        if not 0 <= action < A:
            raise InvalidActionError(f"policy emitted action {action} outside [0, {A})")
        reward = float(mdp.rewards[state, action])
        state = min(int(np.searchsorted(cdf[state, action], u, side="right")), S - 1)
        traj.actions.append(action)
        traj.rewards.append(reward)
        traj.states.append(state)
    return traj


def sample_episode(lmdp: LatentMdp, policy: HistoryPolicy, seed) -> Trajectory:
    """Draw a member from the weights, then roll the policy out for H steps.

    The policy never sees which member was drawn.
    """
    env_seq, policy_seq = _seed_sequence(seed).spawn(2)
    rng = np.random.default_rng(env_seq)
    latent = int(rng.choice(len(lmdp), p=lmdp.weights))
    policy_seed = int(policy_seq.generate_state(1, np.uint64)[0])
    return _rollout(lmdp.mdps[latent], policy, rng, policy_seed, latent)


def rollout_real(
    mdp: TabularMdp, policy: HistoryPolicy, seed, latent_index: int = 0
) -> Trajectory:
    env_seq, policy_seq = _seed_sequence(seed).spawn(2)
    rng = np.random.default_rng(env_seq)
    policy_seed = int(policy_seq.generate_state(1, np.uint64)[0])
    return _rollout(mdp, policy, rng, policy_seed, latent_index)


def update_belief(kernels, belief, state, action, next_state) -> np.ndarray:
    posterior = belief * kernels[:, state, action, next_state]
    total = posterior.sum()
    if total <= 0.0:
        raise ImpossibleHistoryError(
            f"transition {state} -[{action}]-> {next_state} has probability zero "
            "under every member still in the posterior"
        )
    return posterior / total


def bayes_posterior(lmdp: LatentMdp, prefix) -> np.ndarray:
    """Posterior over members given a trajectory prefix.

    ``prefix`` is a Trajectory or a ``(states, actions)`` pair.
    """
    if isinstance(prefix, Trajectory):
        states, actions = prefix.states, prefix.actions
    else:
        states, actions = prefix
    belief = np.array(lmdp.weights, dtype=float)
    S, A = lmdp.num_states, lmdp.num_actions
    for t, action in enumerate(actions[: max(len(states) - 1, 0)]):
        s, s_next = states[t], states[t + 1]
        if not (0 <= s < S and 0 <= s_next < S and 0 <= action < A):
            raise ImpossibleHistoryError(
                f"step {t + 1}: ({s}, {action}, {s_next}) outside the shared spaces"
            )
        belief = update_belief(lmdp.kernels, belief, s, action, s_next)
    return belief


def belief_key(state: int, belief: np.ndarray):
    return (state, tuple(np.round(belief, BELIEF_DECIMALS) + 0.0))


class BeliefPolicy(HistoryPolicy):
    """Walks the solved belief tree of ``solve_dr_optimal``."""

    tag = "dr_exact"

    def __init__(self, actions, follow, num_actions, seed=0, tracing=False):
        self.actions = actions
        self.follow = follow
        super().__init__(num_actions, seed, tracing)

    def reset_memory(self):
        self.node = 0

    def on_transition(self, state, action, next_state):
        try:
            self.node = self.follow[self.node][next_state]
        except KeyError:
            raise ImpossibleHistoryError(
                f"step {self.step}: next state {next_state} has probability zero "
                "under the posterior"
            )

    def choose(self, state):
        self.log_step(phase="belief", surviving_count=None, chosen_member=None,
                      statistic=None, threshold=None, switched=False)
        return self.actions[self.node]


@dataclass
class DrSolution:
    policy: BeliefPolicy
    value: float
    nodes: int


def solve_dr_optimal(lmdp: LatentMdp, max_nodes: int = DEFAULT_NODE_LIMIT) -> DrSolution:
    """Exact backward induction over the belief MDP of ``lmdp``.

    The returned value is E_nu V^pi_1(s1) of the returned policy, which is the
    maximum over history-dependent policies. Beliefs are merged after rounding
    every coordinate to 1e-9.
    """
    K, R, H = lmdp.kernels, lmdp.rewards, lmdp.horizon
    A = lmdp.num_actions

    node_state = [lmdp.start_state]
    node_belief = [np.array(lmdp.weights, dtype=float)]
    # per node: predictive next-state probabilities (A, S) and child ids per (a, s')
    predictive = []
    children = []
    level_start = [0]
    frontier = [0]
    for h in range(H):
        next_level = {}
        for node in frontier:
            s, b = node_state[node], node_belief[node]
            mix = np.einsum("m,mas->as", b, K[:, s])
            predictive.append(mix)
            kids = {}
            if h < H - 1:
                for a, s_next in zip(*np.nonzero(mix > 0.0)):
                    posterior = b * K[:, s, a, s_next] / mix[a, s_next]
                    key = belief_key(int(s_next), posterior)
                    child = next_level.get(key)
                    if child is None:
                        child = len(node_state)
                        if child >= max_nodes:
                            raise BeliefLimitExceeded(child + 1, max_nodes)
                        next_level[key] = child
                        node_state.append(int(s_next))
                        node_belief.append(posterior)
                    kids[(int(a), int(s_next))] = child
            children.append(kids)
        frontier = list(next_level.values())
        level_start.append(len(node_state))
        logger.debug("belief level %d: %d nodes", h + 2, len(frontier))

    num_nodes = len(node_state)
    values = np.zeros(num_nodes)
    best = np.zeros(num_nodes, dtype=int)
    for node in reversed(range(num_nodes)):
        s = node_state[node]
        q = np.array(R[s], dtype=float)
        for (a, s_next), child in children[node].items():
            q[a] += predictive[node][a, s_next] * values[child]
        best[node] = int(np.argmax(q))
        values[node] = q[best[node]]

    follow = [
        {s_next: child for (a, s_next), child in kids.items() if a == best[node]}
        for node, kids in enumerate(children)
    ]
    policy = BeliefPolicy(best, follow, A)
    return DrSolution(policy=policy, value=float(values[0]), nodes=num_nodes)


def _mean_ci(samples) -> tuple:
    samples = np.asarray(samples, dtype=float)
    mean = float(samples.mean())
    if len(samples) < 2:
        return mean, 0.0
    return mean, float(Z95 * samples.std(ddof=1) / math.sqrt(len(samples)))


def episode_returns(
    mdp: TabularMdp, policy: HistoryPolicy, episodes: int, seed, on_episode=None
) -> np.ndarray:
    """Returns of ``episodes`` independent rollouts.

    ``on_episode(trajectory, policy)`` runs after each episode, before the
    policy is reset for the next one.
    """
    rng = np.random.default_rng(_seed_sequence(seed))
    cdf = _cumulative(mdp)
    returns = np.zeros(episodes)
    for k in range(episodes):
        traj = _rollout(mdp, policy, rng, _policy_seed(rng), 0, cdf)
        if on_episode is not None:
            on_episode(traj, policy)
        returns[k] = traj.total_reward
    return returns


def gap_monte_carlo(
    mdp_star: TabularMdp, policy: HistoryPolicy, episodes: int, seed, on_episode=None
) -> GapEstimate:
    if episodes < 1:
        raise ValueError("gap_monte_carlo needs at least one episode")
    vstar = float(backward_induction(mdp_star).values[0, mdp_star.start_state])
    returns = episode_returns(mdp_star, policy, episodes, seed, on_episode)
    mean, ci = _mean_ci(returns)
    return GapEstimate(
        gap_mean=vstar - mean, ci_halfwidth=ci, episodes=episodes, vstar=vstar
    )


def latent_value_monte_carlo(lmdp: LatentMdp, policy: HistoryPolicy, episodes: int, seed):
    """Monte Carlo estimate of E_nu V^pi_1(s1) with its 95% half width."""
    if episodes < 1:
        raise ValueError("latent_value_monte_carlo needs at least one episode")
    rng = np.random.default_rng(_seed_sequence(seed))
    cdfs = [_cumulative(m) for m in lmdp.mdps]
    returns = []
    for _ in range(episodes):
        latent = int(rng.choice(len(lmdp), p=lmdp.weights))
        traj = _rollout(lmdp.mdps[latent], policy, rng, _policy_seed(rng), latent, cdfs[latent])
        returns.append(traj.total_reward)
    return _mean_ci(returns)


def trajectories_frame(trajectories) -> pd.DataFrame:
    rows = []
    for traj in trajectories:
        for step, state in enumerate(traj.states):
            acted = step < len(traj.actions)
            rows.append(
                {
                    "step": step + 1,
                    "state": state,
                    "action": traj.actions[step] if acted else None,
                    "reward": traj.rewards[step] if acted else None,
                    "latent_index": traj.latent_index,
                }
            )
    frame = pd.DataFrame(rows, columns=["step", "state", "action", "reward", "latent_index"])
    return frame.astype({"action": "Int64"})


def write_trajectories_csv(trajectories, path) -> None:
    trajectories_frame(trajectories).to_csv(path, index=False)


def lmdp_to_document(lmdp: LatentMdp) -> dict:
    return {
        "format": LMDP_FORMAT,
        "family": lmdp.family,
        "weights": lmdp.weights.tolist(),
        "mdps": [mdp_to_document(m) for m in lmdp.mdps],
    }


def lmdp_from_document(doc: dict) -> LatentMdp:
    schema_validate(doc, LMDP_FORMAT)
    lmdp = LatentMdp(
        [mdp_from_document(m) for m in doc["mdps"]],
        doc["weights"],
        doc.get("family", "custom"),
    )
    validate(lmdp)
    return lmdp


def save_lmdp(lmdp: LatentMdp, path) -> None:
    with open(path, "w") as fo:
        json.dump(lmdp_to_document(lmdp), fo, indent=2)
        fo.write("\n")


def load_lmdp(path) -> LatentMdp:
    with open(path) as fi:
        return lmdp_from_document(json5.load(fi))
