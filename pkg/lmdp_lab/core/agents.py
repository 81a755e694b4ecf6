# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

"""The history-dependent policy contract and the simple Markov agents."""

import abc
import copy
from typing import Optional

import numpy as np

from lmdp_lab.core.exceptions import InvalidActionError


class HistoryPolicy(abc.ABC):
    """An agent that consumes observations and emits actions.

    Per step the environment calls ``observe(state, reward)`` (reward of the
    previous step, ``None`` on the first step) and then ``act(state)``. All
    memory lives on the instance; ``reset()`` restores it to the state right
    after construction, ``reset(seed)`` does the same with a different internal
    RNG seed. Instances are not thread safe, use ``clone()`` per worker.
    """

    tag = "history"

    def __init__(self, num_actions: int, seed: int = 0, tracing: bool = False):
        self.num_actions = int(num_actions)
        self.seed = seed
        self.tracing = tracing
        self.reset()

    def reset(self, seed: Optional[int] = None) -> None:
        self.rng = np.random.default_rng(self.seed if seed is None else seed)
        self.step = 0
        self.last_state = None
        self.last_action = None
        self.trace = []
        self.flags = []
        self.reset_memory()

    def reset_memory(self) -> None:
        pass

    def observe(self, state: int, reward: Optional[float] = None) -> None:
        if self.last_action is not None:
            self.on_transition(self.last_state, self.last_action, state)

    def on_transition(self, state: int, action: int, next_state: int) -> None:
        pass

    @abc.abstractmethod
    def choose(self, state: int) -> int:
        ...

    def act(self, state: int) -> int:
        action = int(self.choose(state))
        if not 0 <= action < self.num_actions:
            raise InvalidActionError(
                f"{self.tag} emitted action {action} outside [0, {self.num_actions})"
            )
        self.step += 1
        self.last_state = state
        self.last_action = action
        return action

    def log_step(self, **record) -> None:
        if self.tracing:
            record.setdefault("step", self.step)
            self.trace.append(record)

    def clone(self) -> "HistoryPolicy":
        fresh = copy.deepcopy(self)
        fresh.reset()
        return fresh

    def summary(self) -> dict:
        return {
            "eliminations": 0,
            "switches": 0,
            "surviving": None,
            "flags": list(self.flags),
        }


class MarkovPolicy(HistoryPolicy):
    """Plays an (H, S) table of actions indexed by the step counter."""

    tag = "markov"

    def __init__(self, table, num_actions: int, seed: int = 0, tracing: bool = False):
        self.table = np.asarray(table, dtype=int)
        super().__init__(num_actions, seed, tracing)

    def choose(self, state):
        row = min(self.step, len(self.table) - 1)
        return self.table[row, state]


class StationaryPolicy(HistoryPolicy):
    tag = "stationary"

    def __init__(self, actions, num_actions: int, seed: int = 0, tracing: bool = False):
        self.actions = np.asarray(actions, dtype=int)
        super().__init__(num_actions, seed, tracing)

    def choose(self, state):
        return self.actions[state]


class UniformRandomPolicy(HistoryPolicy):
    tag = "uniform_random"

    def choose(self, state):
        return self.rng.integers(self.num_actions)
