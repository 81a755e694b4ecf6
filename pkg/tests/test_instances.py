import math

import numpy as np
import pytest
from pydantic import ValidationError

from lmdp_lab.core.exceptions import ConfigError, InstanceVerificationError
from lmdp_lab.core.instances import (
    build_instance,
    jao_tree_diameter_bound,
    jao_tree_layout,
    make_jao_tree,
    make_mab,
    make_prop1,
    make_prop5_bandit,
    make_random_comm,
    make_two_state,
)
from lmdp_lab.core.lmdp import solve_dr_optimal, validate
from lmdp_lab.core.mdp import backward_induction, diameter, evaluate_markov_policy, relative_value_iteration
from lmdp_lab.core.policies import separation_delta
from lmdp_lab.schemas.model import InstanceSpec


def test_prop1_shape():
    lmdp = make_prop1(2, 6)
    assert len(lmdp) == 2
    assert (lmdp.num_states, lmdp.num_actions) == (7, 2)
    assert lmdp.family == "prop1"
    # only the rewarding absorbing states pay
    assert lmdp.rewards[:, 0].tolist() == [0, 0, 1, 0, 0, 1, 0]
    with pytest.raises(ConfigError):
        make_prop1(1, 6)


def test_two_state_parameters():
    mdp = make_two_state(0.25, 0.0)
    np.testing.assert_array_equal(mdp.transitions[0, 0], mdp.transitions[0, 1])
    assert relative_value_iteration(mdp).gain == pytest.approx(0.5, abs=1e-8)
    for delta, eps in [(0.0, 0.0), (0.6, 0.1), (0.2, 0.3), (0.2, -0.1)]:
        with pytest.raises(ConfigError):
            make_two_state(delta, eps)


@pytest.mark.parametrize("S, expected", [(2, (1, 0, 0)), (4, (2, 1, 1)), (10, (5, 2, 2))])
def test_jao_tree_layout(S, expected):
    assert jao_tree_layout(S, 3) == expected


@pytest.mark.parametrize("S, A, M", [(2, 2, 1), (6, 3, 4), (10, 3, 8)])
def test_jao_tree_family(S, A, M):
    delta, eps = 0.2, 0.1
    lmdp = make_jao_tree(S, A, M, delta, eps, H=100)
    validate(lmdp)
    bound = jao_tree_diameter_bound(S, A, delta)
    rho = (delta + eps) / (2 * delta + eps)
    for member in lmdp.mdps:
        assert diameter(member) <= bound + 1e-8
        assert relative_value_iteration(member).gain == pytest.approx(rho, abs=1e-8)
    if M > 1:
        assert separation_delta(lmdp.mdps) == pytest.approx(2 * eps)


def test_jao_tree_cost_of_ignoring_the_good_action():
    delta, eps = 0.2, 0.1
    member = make_jao_tree(6, 3, 1, delta, eps).mdps[0]
    plain = make_jao_tree(6, 3, 1, delta, 0.0).mdps[0]
    gap = relative_value_iteration(member).gain - relative_value_iteration(plain).gain
    assert gap == pytest.approx(eps / (2 * (2 * delta + eps)), abs=1e-8)


def test_jao_tree_errors():
    with pytest.raises(ConfigError):
        make_jao_tree(4, 1, 1, 0.2, 0.1)
    with pytest.raises(ConfigError):
        make_jao_tree(4, 3, 5, 0.2, 0.1)
    with pytest.raises(ConfigError):
        make_jao_tree(4, 3, 2, 0.2, 0.3)


def test_prop5_members_and_means():
    lmdp = make_prop5_bandit(3)
    assert len(lmdp) == 17
    means = lmdp.kernels[:, 0, :, 1]
    assert np.all(means[:, 0] == 0.5)
    assert np.all((means[:-1, 1] > 0.0) & (means[:-1, 1] < 0.25))
    assert means[-1, 1] == 1.0


def _on_policy_actions(policy):
    seen, stack = [], [0]
    while stack:
        node = stack.pop()
        seen.append(int(policy.actions[node]))
        stack.extend(policy.follow[node].values())
    return seen


def test_prop5_dr_never_tries_the_second_arm():
    H = 12
    lmdp = make_prop5_bandit(H)
    sol = solve_dr_optimal(lmdp)
    assert set(_on_policy_actions(sol.policy)) == {0}
    last = lmdp.mdps[-1]
    vstar = backward_induction(last).values[0, 0]
    gap = vstar - evaluate_markov_policy(last, np.zeros(2, dtype=int))
    assert gap == pytest.approx((H - 1) / 2)


def test_mab_family():
    lmdp = make_mab(4, 20, 0.1)
    assert (len(lmdp), lmdp.num_actions) == (4, 4)
    assert separation_delta(lmdp.mdps) == pytest.approx(0.2)
    for i, member in enumerate(lmdp.mdps):
        assert relative_value_iteration(member).policy[0] == i


def test_random_comm_separation_and_diameter():
    lmdp = make_random_comm(5, 2, 5, 0.4, H=50, seed=11)
    assert 0.36 <= separation_delta(lmdp.mdps) <= 2.0
    assert all(math.isfinite(diameter(m)) for m in lmdp.mdps)
    assert lmdp.family == "random_comm"


def test_random_comm_is_deterministic():
    a = make_random_comm(4, 3, 3, 0.3, H=20, seed=42)
    b = make_random_comm(4, 3, 3, 0.3, H=20, seed=42)
    assert a.kernels.tobytes() == b.kernels.tobytes()
    assert a.rewards.tobytes() == b.rewards.tobytes()
    c = make_random_comm(4, 3, 3, 0.3, H=20, seed=43)
    assert a.kernels.tobytes() != c.kernels.tobytes()


def test_random_comm_gives_up():
    with pytest.raises(InstanceVerificationError):
        make_random_comm(2, 1, 5, 0.4, H=10, seed=0)
    with pytest.raises(ConfigError):
        make_random_comm(1, 2, 2, 0.4)


def test_build_instance_dispatch():
    lmdp = build_instance(InstanceSpec(family="jao_tree", s=6, a=3, m=2, d_target=5, eps=0.1))
    assert lmdp.family == "jao_tree" and len(lmdp) == 2
    two = build_instance(InstanceSpec(family="two_state", delta=0.3, eps=0.1, horizon=9))
    assert len(two) == 1 and two.horizon == 9
    assert len(build_instance(InstanceSpec(family="prop5_bandit", horizon=2))) == 13


def test_instance_spec_ranges():
    with pytest.raises(ValidationError):
        InstanceSpec(family="jao_tree", s=6, a=3, m=2, delta=0.1, eps=0.2)
    with pytest.raises(ValidationError):
        InstanceSpec(family="prop1")
    with pytest.raises(ValidationError):
        InstanceSpec(family="prop1", m=3, colour="red")
