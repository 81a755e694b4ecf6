import os
from collections import defaultdict

import hypothesis
import numpy as np
import pytest
from hypothesis import strategies as st

from lmdp_lab.core.mdp import TabularMdp

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run Monte Carlo acceptance tests"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo runs, need --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def random_mdp(rng, S, A, H, floor=0.0):
    """Dense random MDP; ``floor`` > 0 mixes in a uniform kernel so it communicates."""
    P = rng.dirichlet(np.ones(S), size=(S, A))
    if floor:
        P = (1.0 - floor) * P + floor / S
    R = rng.random((S, A))
    return TabularMdp(P, R, H, 0)


@st.composite
def mdps(draw, max_states=5, max_actions=3, max_horizon=8, floor=0.0):
    S = draw(st.integers(1, max_states))
    A = draw(st.integers(1, max_actions))
    H = draw(st.integers(1, max_horizon))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_mdp(np.random.default_rng(seed), S, A, H, floor)


@pytest.fixture
def rng():
    return np.random.default_rng(20260101)


def belief_policy_value(policy, mdp):
    """Exact expected return of a solved belief policy on one member.

    Walks the ``follow`` table forward, so a transition the member can take but
    the table lacks raises ``KeyError``.
    """
    dist = {(0, mdp.start_state): 1.0}
    total = 0.0
    for step in range(mdp.horizon):
        last = step == mdp.horizon - 1
        reached = defaultdict(float)
        for (node, state), p in dist.items():
            action = int(policy.actions[node])
            total += p * mdp.rewards[state, action]
            if last:
                continue
            for s_next in np.flatnonzero(mdp.transitions[state, action]):
                child = policy.follow[node][int(s_next)]
                reached[(child, int(s_next))] += p * mdp.transitions[state, action, s_next]
        dist = reached
    return float(total)
