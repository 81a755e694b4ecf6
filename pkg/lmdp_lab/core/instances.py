# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

"""Generators for the lower-bound families and random communicating classes.

Every generator returns members that share states, actions, rewards, horizon
and start state; only the transition kernels differ.
"""

import logging
import math

import numpy as np

from lmdp_lab.core.exceptions import ConfigError, InstanceVerificationError
from lmdp_lab.core.lmdp import LatentMdp, validate
from lmdp_lab.core.mdp import TabularMdp, diameter
from lmdp_lab.core.policies import separation_delta

logger = logging.getLogger(__name__)

UNIFORM_MIX = 0.05
MAX_DRAWS = 100
SEPARATION_SLACK = 0.1


def make_prop1(M: int, H: int) -> LatentMdp:
    """Commit-then-observe arms: s0 = 0, arm i owns states 1+3i, 2+3i, 3+3i.

    Action i at s0 enters arm i; from 1+3i the arm resolves to the rewarding
    absorbing state 2+3i with probability p_i, otherwise to 3+3i. Member j has
    p_j = 1 and every other p_i = 0.
    """
    if M < 2:
        raise ConfigError(f"prop1 needs M >= 2, got {M}")
    S = 3 * M + 1
    rewards = np.zeros((S, M))
    base = np.zeros((S, M, S))
    for i in range(M):
        entry, good, bad = 1 + 3 * i, 2 + 3 * i, 3 + 3 * i
        base[0, i, entry] = 1.0
        base[good, :, good] = 1.0
        base[bad, :, bad] = 1.0
        rewards[good, :] = 1.0
    members = []
    for j in range(M):
        P = base.copy()
        for i in range(M):
            entry = 1 + 3 * i
            P[entry, :, 2 + 3 * i if i == j else 3 + 3 * i] = 1.0
        members.append(TabularMdp(P, rewards, H, 0))
    return _checked(LatentMdp(members, family="prop1"))


def make_two_state(delta: float, eps: float, H: int = 1000) -> TabularMdp:
    """State 1 pays 1. Action 0 leaves state 0 with delta + eps, action 1 with delta."""
    if not (0.0 < delta <= 0.5 and 0.0 <= eps <= delta):
        raise ConfigError(f"two_state needs 0 <= eps <= delta <= 1/2, delta > 0; got {delta}, {eps}")
    P = np.zeros((2, 2, 2))
    P[0, 0] = [1.0 - delta - eps, delta + eps]
    P[0, 1] = [1.0 - delta, delta]
    P[1, :] = [delta, 1.0 - delta]
    R = np.array([[0.0, 0.0], [1.0, 1.0]])
    return TabularMdp(P, R, H, 0)


def jao_tree_layout(S: int, A: int):
    """(gadgets, core nodes, depth) of the tree family.

    The core is a complete A-ary heap deep enough to hang ``max(1, S // 2)``
    gadget zero-states off its children; depth is that of the deepest node.
    """
    G = max(1, S // 2)
    C = 0
    while C + G - 2 >= A * C and not (G == 1 and C == 0):
        C += 1
    node, depth = C + G - 1, 0
    while node > 0:
        node = (node - 1) // A
        depth += 1
    return G, C, depth


def jao_tree_diameter_bound(S: int, A: int, delta: float) -> float:
    _, _, depth = jao_tree_layout(S, A)
    return 2.0 / delta + 2.0 / (1.0 - delta) + 2.0 * depth


def make_jao_tree(S: int, A: int, M: int, delta: float, eps: float, H: int = 1000) -> LatentMdp:
    """Two-state gadgets hung on an A-ary tree of deterministic core states.

    In gadget j the zero-state's action 0 exits to the root on failure; actions
    1..A-1 stay put on failure and reach the one-state with probability delta,
    except at member i's slot, where it is delta + eps. Slots (j, a) are
    numbered gadget-major.
    """
    if A < 2:
        raise ConfigError("jao_tree needs at least two actions")
    if not (0.0 < delta <= 0.5 and 0.0 <= eps <= delta):
        raise ConfigError(f"jao_tree needs 0 <= eps <= delta <= 1/2, delta > 0; got {delta}, {eps}")
    G, C, depth = jao_tree_layout(S, A)
    slots = [(j, a) for j in range(G) for a in range(1, A)]
    if not 1 <= M <= len(slots):
        raise ConfigError(f"jao_tree with S={S}, A={A} has {len(slots)} slots, asked for M={M}")
    N = C + G
    num_states = N + G
    P = np.zeros((num_states, A, num_states))
    R = np.zeros((num_states, A))
    for k in range(C):
        for a in range(A):
            child = A * k + 1 + a
            P[k, a, child if child < N else A * k + 1] = 1.0
    for j in range(G):
        zero, one = C + j, N + j
        P[zero, 0, one] = delta
        P[zero, 0, 0] += 1.0 - delta
        P[zero, 1:, one] = delta
        P[zero, 1:, zero] = 1.0 - delta
        P[one, :, zero] = delta
        P[one, :, one] = 1.0 - delta
        R[one, :] = 1.0
    members = []
    for j, a in slots[:M]:
        Pi = P.copy()
        zero, one = C + j, N + j
        Pi[zero, a, one] = delta + eps
        Pi[zero, a, zero] = 1.0 - delta - eps
        members.append(TabularMdp(Pi, R, H, 0))
    logger.debug("jao tree: %d gadgets, %d core nodes, depth %d", G, C, depth)
    return _checked(LatentMdp(members, family="jao_tree"))


def _carrier(means: np.ndarray, H: int) -> TabularMdp:
    """Bandit arms carried by a lo/hi state pair: arm k moves to hi with its mean."""
    A = len(means)
    P = np.zeros((2, A, 2))
    P[:, :, 1] = means
    P[:, :, 0] = 1.0 - means
    R = np.zeros((2, A))
    R[1, :] = 1.0
    return TabularMdp(P, R, H, 0)


def make_prop5_bandit(H: int) -> LatentMdp:
    """M = 4H + 5 two-armed bandits; arm 0 pays 1/2 everywhere.

    Arm 1 pays 1/2 - p_i with p_i evenly inside (1/4, 1/2), except the last
    member, where it pays 1.
    """
    if H < 1:
        raise ConfigError(f"horizon must be >= 1, got {H}")
    M = 4 * H + 5
    p = 0.25 + 0.25 * np.arange(1, M) / M
    members = [_carrier(np.array([0.5, 0.5 - pi]), H) for pi in p]
    members.append(_carrier(np.array([0.5, 1.0]), H))
    return _checked(LatentMdp(members, family="prop5_bandit"))


def make_mab(M: int, H: int, eps: float = 0.1) -> LatentMdp:
    """M-armed bandits where member i lifts arm i to 1/2 + eps."""
    if M < 1 or not 0.0 < eps <= 0.5:
        raise ConfigError(f"mab needs M >= 1 and 0 < eps <= 1/2, got M={M}, eps={eps}")
    members = []
    for i in range(M):
        means = np.full(M, 0.5)
        means[i] += eps
        members.append(_carrier(means, H))
    return _checked(LatentMdp(members, family="mab"))


def _random_class(rng, S, A, M, delta_target, H) -> LatentMdp:
    base = rng.dirichlet(np.ones(S), size=(S, A))
    base = (1.0 - UNIFORM_MIX) * base + UNIFORM_MIX / S
    rewards = rng.random((S, A))
    rows = np.resize(rng.permutation(S * A), M)
    members = []
    for row in rows:
        s, a = divmod(int(row), A)
        P = base.copy()
        current = P[s, a]
        allowed = np.flatnonzero(current <= 1.0 - delta_target / 2.0 - 1e-9)
        if len(allowed):
            u = int(rng.choice(allowed))
            # mixing toward e_u moves total variation delta_target / 2
            weight = (delta_target / 2.0) / (1.0 - current[u])
            P[s, a] = (1.0 - weight) * current
            P[s, a, u] += weight
            P[s, a] /= P[s, a].sum()
        members.append(TabularMdp(P, rewards, H, 0))
    return LatentMdp(members, family="random_comm")


def make_random_comm(S: int, A: int, M: int, delta_target: float, H: int = 1000, seed: int = 0) -> LatentMdp:
    if min(S, A, M) < 1:
        raise ConfigError(f"random_comm needs S, A, M >= 1, got {(S, A, M)}")
    if M > 1 and S < 2:
        raise ConfigError("random_comm needs at least two states to separate members")
    if not 0.0 < delta_target <= 2.0:
        raise ConfigError(f"delta_target must lie in (0, 2], got {delta_target}")
    rng = np.random.default_rng(seed)
    for draw in range(1, MAX_DRAWS + 1):
        lmdp = _random_class(rng, S, A, M, delta_target, H)
        if any(not math.isfinite(diameter(m)) for m in lmdp.mdps):
            continue
        if M > 1 and separation_delta(lmdp.mdps) < delta_target * (1.0 - SEPARATION_SLACK):
            continue
        logger.debug("random_comm accepted draw %d", draw)
        return _checked(lmdp)
    raise InstanceVerificationError(
        f"no {delta_target}-separated communicating class with S={S}, A={A}, M={M} "
        f"in {MAX_DRAWS} draws"
    )


def _checked(lmdp: LatentMdp) -> LatentMdp:
    validate(lmdp)
    return lmdp


def build_instance(spec) -> LatentMdp:
    """Dispatch an InstanceSpec to its generator."""
    family = spec.family
    if family == "prop1":
        return make_prop1(spec.m, spec.horizon)
    if family == "two_state":
        return LatentMdp([make_two_state(spec.delta, spec.eps, spec.horizon)], family="two_state")
    if family == "jao_tree":
        return make_jao_tree(spec.s, spec.a, spec.m, spec.delta, spec.eps, spec.horizon)
    if family == "prop5_bandit":
        return make_prop5_bandit(spec.horizon)
    if family == "mab":
        return make_mab(spec.m, spec.horizon, spec.eps)
    if family == "random_comm":
        return make_random_comm(spec.s, spec.a, spec.m, spec.delta, spec.horizon, spec.seed)
    raise ConfigError(f"unknown instance family {family!r}")
