# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

"""History-dependent policies that identify the real member online.

* ``SeparatedElimination``: pairwise likelihood-ratio tests on the most
  informative (state, action) of a random pair, reached by round-robin travel.
* ``OptimisticElimination``: plays the max-gain survivor and drops it once the
  bias martingale drifts past its confidence radius.
* ``GeneralOptimistic``: least-squares confidence sets over the class F,
  recomputed only when the fresh batch is important enough.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from lmdp_lab.core.agents import HistoryPolicy
from lmdp_lab.core.analysis import FunctionClassF, build_function_class
from lmdp_lab.core.exceptions import ConfigError
from lmdp_lab.core.mdp import AvgSolution, TabularMdp, hitting_time_policy, relative_value_iteration

logger = logging.getLogger(__name__)

GAIN_TIE_TOL = 1e-9


def _kernels(mdps) -> np.ndarray:
    return np.stack([m.transitions for m in mdps])


def l1_row_distances(m1: TabularMdp, m2: TabularMdp) -> np.ndarray:
    """||(P1 - P2)(.|s, a)||_1 for every (s, a)."""
    return np.abs(m1.transitions - m2.transitions).sum(axis=2)


def separation_delta(mdps: Sequence[TabularMdp]) -> float:
    if len(mdps) < 2:
        raise ConfigError("separation needs at least two members")
    return float(
        min(l1_row_distances(a, b).max() for a, b in itertools.combinations(mdps, 2))
    )


def most_informative_pair(m1: TabularMdp, m2: TabularMdp):
    dist = l1_row_distances(m1, m2)
    # argmax over the flattened (s, a) grid: lowest lexicographic on ties
    s, a = np.unravel_index(int(np.argmax(dist)), dist.shape)
    return int(s), int(a)


def deviation_statistic(avg: AvgSolution, window, kernel) -> float:
    """Signed sum of P lam(s, a) - lam(s') over ``(s, a, s')`` records."""
    P = kernel.transitions if isinstance(kernel, TabularMdp) else np.asarray(kernel)
    lam = np.asarray(avg.bias)
    return float(sum(P[s, a] @ lam - lam[s_next] for s, a, s_next in window))


def elimination_threshold(diameter: float, samples: int, horizon: int, members: int) -> float:
    return diameter * math.sqrt(2.0 * samples * math.log(2.0 * horizon * members))


def importance_score(f: FunctionClassF, z_counts, z_new_counts, alpha: float) -> float:
    """sup over member pairs of ||f1 - f2||^2 on Z_new over (||f1 - f2||^2 on Z + alpha).

    ``z_counts`` and ``z_new_counts`` are visit counts over the domain of ``f``.
    """
    diffs = f.pair_differences() ** 2
    if len(diffs) == 0:
        return 0.0
    num = diffs @ np.asarray(z_new_counts, dtype=float)
    den = diffs @ np.asarray(z_counts, dtype=float) + alpha
    return float(np.max(num / den))


def _best_gain(solutions, candidates) -> int:
    top = max(solutions[m].gain for m in candidates)
    return min(m for m in candidates if solutions[m].gain >= top - GAIN_TIE_TOL)


@dataclass(frozen=True)
class ClassSolution:
    """Average-reward solutions of every member plus travel times between states."""

    solutions: List[AvgSolution]
    travel_times: np.ndarray
    travel_policies: np.ndarray

    @property
    def diameter(self) -> float:
        return max(sol.diameter for sol in self.solutions)


def solve_class(mdps: Sequence[TabularMdp]) -> ClassSolution:
    """Gain, bias, greedy policy and the (M, S, S) hitting-time tables of a class."""
    M, S = len(mdps), mdps[0].num_states
    times = np.zeros((M, S, S))
    travel = np.zeros((M, S, S), dtype=int)
    solutions = []
    for i, mdp in enumerate(mdps):
        for target in range(S):
            times[i, target], travel[i, target] = hitting_time_policy(mdp, target)
        sol = relative_value_iteration(mdp, with_diameter=False)
        D = float(times[i].max())
        solutions.append(replace(sol, diameter=D))
        logger.debug("member %d: gain %.6f, diameter %.3f", i, sol.gain, D)
    return ClassSolution(solutions, times, travel)


@dataclass
class SeparatedEliminationConfig:
    mdps: Sequence[TabularMdp]
    c0: float = 1.0
    n0: Optional[int] = None
    solved: Optional[ClassSolution] = None
    delta: Optional[float] = None

    def __post_init__(self):
        self.mdps = list(self.mdps)
        if self.c0 <= 0:
            raise ConfigError(f"c0 must be positive, got {self.c0}")
        if self.n0 is not None and self.n0 < 1:
            raise ConfigError(f"n0 must be >= 1, got {self.n0}")
        if self.solved is None:
            self.solved = solve_class(self.mdps)
        if len(self.mdps) > 1:
            self.delta = separation_delta(self.mdps)
            if self.delta <= 0.0:
                raise ConfigError("the class is not separated: two members share a kernel")

    @property
    def diameter(self) -> float:
        return self.solved.diameter

    @property
    def travel_steps(self) -> int:
        return max(1, math.ceil(2.0 * self.diameter))

    def sample_budget(self, horizon: int) -> int:
        if self.n0 is not None:
            return self.n0
        if len(self.mdps) < 2:
            return 0
        S, M = self.mdps[0].num_states, len(self.mdps)
        n0 = self.c0 * math.log(S * M * horizon) ** 2 * math.log(M * horizon) / self.delta**4
        return max(1, math.ceil(n0))


class SeparatedElimination(HistoryPolicy):
    tag = "alg1"

    def __init__(self, config: SeparatedEliminationConfig, seed=0, tracing=False):
        self.config = config
        self.kernels = _kernels(config.mdps)
        self.n0 = config.sample_budget(config.mdps[0].horizon)
        if not math.isfinite(config.diameter):
            raise ConfigError("separated elimination needs communicating members")
        super().__init__(config.mdps[0].num_actions, seed, tracing)

    def reset_memory(self):
        self.alive = list(range(len(self.config.mdps)))
        self.eliminations = 0
        self.pending = False
        self.just_eliminated = False
        if len(self.alive) > 1:
            self._draw_pair()

    @property
    def exploring(self) -> bool:
        return len(self.alive) > 1

    def _draw_pair(self):
        i, j = self.rng.choice(len(self.alive), size=2, replace=False)
        self.pair = (self.alive[i], self.alive[j])
        m1, m2 = (self.config.mdps[m] for m in self.pair)
        self.target = most_informative_pair(m1, m2)
        self.samples = []
        self._restart_travel()

    def _restart_travel(self):
        self.leg = 0
        self.leg_steps = 0

    def _log_likelihood_ratio(self) -> float:
        (m1, m2), (s0, a0) = self.pair, self.target
        p1 = self.kernels[m1, s0, a0, self.samples]
        p2 = self.kernels[m2, s0, a0, self.samples]
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(p1) - np.log(p2)))

    def _eliminate(self):
        (m1, m2), (s0, a0) = self.pair, self.target
        p1 = self.kernels[m1, s0, a0, self.samples]
        p2 = self.kernels[m2, s0, a0, self.samples]
        if np.any(p2 == 0.0):
            loser = m2
        elif np.any(p1 == 0.0):
            loser = m1
        else:
            loser = m2 if self._log_likelihood_ratio() >= 0.0 else m1
        self.alive.remove(loser)
        self.eliminations += 1
        self.just_eliminated = True
        logger.debug("step %d: eliminated member %d, %d left", self.step, loser, len(self.alive))
        if self.exploring:
            self._draw_pair()

    def on_transition(self, state, action, next_state):
        if not self.pending:
            return
        self.pending = False
        self.samples.append(next_state)
        self._restart_travel()
        if len(self.samples) >= self.n0:
            self._eliminate()

    def choose(self, state):
        switched, self.just_eliminated = self.just_eliminated, False
        if not self.exploring:
            survivor = self.alive[0]
            self.log_step(phase="exploit", surviving_count=1, chosen_member=survivor,
                          statistic=None, threshold=None, switched=switched)
            return self.config.solved.solutions[survivor].policy[state]

        s0, a0 = self.target
        if state == s0:
            self.pending = True
            self.log_step(phase="sample", surviving_count=len(self.alive), chosen_member=None,
                          statistic=len(self.samples), threshold=self.n0, switched=switched)
            return a0
        if self.leg_steps >= self.config.travel_steps:
            self.leg = (self.leg + 1) % len(self.alive)
            self.leg_steps = 0
        self.leg_steps += 1
        member = self.alive[self.leg]
        self.log_step(phase="travel", surviving_count=len(self.alive), chosen_member=member,
                      statistic=len(self.samples), threshold=self.n0, switched=switched)
        return self.config.solved.travel_policies[member, s0, state]

    def summary(self):
        return {
            "eliminations": self.eliminations,
            "switches": self.eliminations,
            "surviving": list(self.alive),
            "flags": list(self.flags),
        }


def make_separated_elimination(config: SeparatedEliminationConfig, seed=0, tracing=False):
    return SeparatedElimination(config, seed=seed, tracing=tracing)


@dataclass
class OptimisticEliminationState:
    surviving: List[int]
    current: int
    statistic: float = 0.0
    window: int = 0
    eliminations: int = 0


class OptimisticElimination(HistoryPolicy):
    tag = "alg3"

    def __init__(self, mdps, solved: Optional[ClassSolution] = None, seed=0, tracing=False):
        self.mdps = list(mdps)
        self.solved = solved or solve_class(self.mdps)
        self.D = self.solved.diameter
        if not math.isfinite(self.D):
            raise ConfigError("optimistic elimination needs communicating members")
        self.horizon = self.mdps[0].horizon
        super().__init__(self.mdps[0].num_actions, seed, tracing)

    def reset_memory(self):
        everyone = list(range(len(self.mdps)))
        self.state = OptimisticEliminationState(everyone, _best_gain(self.solved.solutions, everyone))
        self.just_switched = False

    @property
    def threshold(self) -> float:
        return elimination_threshold(self.D, self.state.window, self.horizon, len(self.mdps))

    def on_transition(self, state, action, next_state):
        st = self.state
        avg = self.solved.solutions[st.current]
        st.statistic += deviation_statistic(avg, [(state, action, next_state)], self.mdps[st.current])
        st.window += 1
        if abs(st.statistic) <= self.threshold:
            return
        if len(st.surviving) == 1:
            if "all_eliminated" not in self.flags:
                logger.warning("every member failed the deviation test, keeping member %d", st.current)
                self.flags.append("all_eliminated")
            return
        st.surviving.remove(st.current)
        st.eliminations += 1
        st.current = _best_gain(self.solved.solutions, st.surviving)
        st.statistic, st.window = 0.0, 0
        self.just_switched = True

    def choose(self, state):
        st = self.state
        switched, self.just_switched = self.just_switched, False
        self.log_step(phase="optimistic", surviving_count=len(st.surviving), chosen_member=st.current,
                      statistic=st.statistic, threshold=self.threshold, switched=switched)
        return self.solved.solutions[st.current].policy[state]

    def summary(self):
        return {
            "eliminations": self.state.eliminations,
            "switches": self.state.eliminations,
            "surviving": list(self.state.surviving),
            "flags": list(self.flags),
        }


def make_optimistic_elimination(mdps, solved=None, seed=0, tracing=False):
    return OptimisticElimination(mdps, solved=solved, seed=seed, tracing=tracing)


@dataclass
class GeneralOptimisticState:
    confidence: List[int]
    current: int
    alpha: float
    beta: float
    z_counts: np.ndarray
    z_new_counts: np.ndarray
    fitted: Optional[int] = None
    switches: int = 0
    history: List[float] = field(default_factory=list)


class GeneralOptimistic(HistoryPolicy):
    tag = "alg4"

    def __init__(
        self,
        mdps,
        c: float = 1.0,
        covering_number: Optional[int] = None,
        solved: Optional[ClassSolution] = None,
        seed=0,
        tracing=False,
    ):
        if c <= 0:
            raise ConfigError(f"c must be positive, got {c}")
        self.mdps = list(mdps)
        self.solved = solved or solve_class(self.mdps)
        self.D = self.solved.diameter
        if not math.isfinite(self.D):
            raise ConfigError("general optimistic needs communicating members")
        self.F = build_function_class(self.mdps, self.solved.solutions)
        M = len(self.mdps)
        horizon = self.mdps[0].horizon
        self.cover = covering_number or M * M
        self.alpha = 4.0 * self.D**2 + 1.0
        self.beta = c * self.D**2 * math.log(horizon * self.cover)
        self.pair_sq = self.F.pair_differences() ** 2
        super().__init__(self.mdps[0].num_actions, seed, tracing)

    def reset_memory(self):
        everyone = list(range(len(self.mdps)))
        X = self.F.num_points
        self.state = GeneralOptimisticState(
            confidence=everyone,
            current=_best_gain(self.solved.solutions, everyone),
            alpha=self.alpha,
            beta=self.beta,
            z_counts=np.zeros(X),
            z_new_counts=np.zeros(X),
        )
        M = len(self.mdps)
        self.numerator = np.zeros(len(self.pair_sq))
        self.denominator = np.zeros(len(self.pair_sq))
        self.sse = np.zeros(M)
        self.sse_new = np.zeros(M)
        self.score = 0.0
        self.just_switched = False

    def on_transition(self, state, action, next_state):
        st = self.state
        x = self.F.index(state, action, st.current)
        target = self.F.biases[st.current, next_state]
        st.z_new_counts[x] += 1
        self.numerator += self.pair_sq[:, x]
        self.sse_new += (self.F.table[:, x] - target) ** 2
        if len(self.pair_sq):
            self.score = float(np.max(self.numerator / (self.denominator + st.alpha)))
        if self.score >= 1.0:
            self._refit()

    def _refit(self):
        st = self.state
        st.z_counts += st.z_new_counts
        st.z_new_counts[:] = 0
        self.denominator += self.numerator
        self.numerator[:] = 0
        self.sse += self.sse_new
        self.sse_new[:] = 0
        st.history.append(self.score)
        self.score = 0.0

        st.fitted = int(np.flatnonzero(self.sse <= self.sse.min() + 1e-12)[0])
        spread = ((self.F.table - self.F.table[st.fitted]) ** 2) @ st.z_counts
        confidence = [int(m) for m in np.flatnonzero(spread <= st.beta)]
        if not confidence:
            confidence = [st.fitted]
            if "empty_confidence_set" not in self.flags:
                self.flags.append("empty_confidence_set")
        st.confidence = confidence
        st.current = _best_gain(self.solved.solutions, confidence)
        st.switches += 1
        self.just_switched = True
        logger.debug(
            "step %d: refit to member %d, %d members in the confidence set",
            self.step, st.fitted, len(confidence),
        )

    def choose(self, state):
        st = self.state
        switched, self.just_switched = self.just_switched, False
        self.log_step(phase="optimistic", surviving_count=len(st.confidence), chosen_member=st.current,
                      statistic=self.score, threshold=1.0, switched=switched)
        return self.solved.solutions[st.current].policy[state]

    def summary(self):
        return {
            "eliminations": len(self.mdps) - len(self.state.confidence),
            "switches": self.state.switches,
            "surviving": list(self.state.confidence),
            "flags": list(self.flags),
        }


def make_general_optimistic(mdps, c=1.0, covering_number=None, solved=None, seed=0, tracing=False):
    return GeneralOptimistic(
        mdps, c=c, covering_number=covering_number, solved=solved, seed=seed, tracing=tracing
    )
