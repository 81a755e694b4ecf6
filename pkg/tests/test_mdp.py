import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lmdp_lab.core.exceptions import InvalidActionError, MdpValidationError, UnboundedSpanError
from lmdp_lab.core.instances import make_prop1, make_two_state
from lmdp_lab.core.mdp import (
    TabularMdp,
    backward_induction,
    bellman_residual,
    diameter,
    evaluate_markov_policy,
    hitting_time_policy,
    load_mdp,
    policy_gain,
    relative_value_iteration,
    save_mdp,
    validate,
)
from lmdp_lab.core.validation import ValidationError

from conftest import mdps, random_mdp


def swap_chain(H=10):
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = P[1, 0, 0] = 1.0
    return TabularMdp(P, [[0.0], [1.0]], H)


def test_backward_induction_single_state():
    mdp = TabularMdp(np.ones((1, 2, 1)), [[0.25, 0.75]], 4)
    sol = backward_induction(mdp)
    assert sol.values[0, 0] == pytest.approx(3.0)
    assert sol.policy.tolist() == [[1]] * 4
    assert np.all(sol.values[-1] == 0.0)


def test_backward_induction_ties_pick_lowest_action():
    mdp = TabularMdp(np.ones((1, 3, 1)), [[0.5, 0.5, 0.5]], 3)
    assert backward_induction(mdp).policy.tolist() == [[0]] * 3


def test_backward_induction_horizon_one_is_greedy_reward():
    rng = np.random.default_rng(3)
    mdp = random_mdp(rng, 4, 3, 1)
    sol = backward_induction(mdp)
    np.testing.assert_allclose(sol.values[0], mdp.rewards.max(axis=1))


@given(mdps())
def test_optimal_table_evaluates_to_optimal_value(mdp):
    sol = backward_induction(mdp)
    value = evaluate_markov_policy(mdp, sol.policy)
    assert value == pytest.approx(sol.values[0, mdp.start_state], abs=1e-9)


@given(mdps(), st.randoms(use_true_random=False))
def test_value_is_invariant_under_state_relabelling(mdp, rnd):
    perm = list(range(mdp.num_states))
    rnd.shuffle(perm)
    relabelled = mdp.permuted(perm)
    v = backward_induction(mdp).values[0, mdp.start_state]
    w = backward_induction(relabelled).values[0, relabelled.start_state]
    assert w == pytest.approx(v, abs=1e-9)


@given(mdps())
def test_any_markov_table_is_dominated(mdp):
    rng = np.random.default_rng(mdp.num_states * 31 + mdp.horizon)
    table = rng.integers(mdp.num_actions, size=(mdp.horizon, mdp.num_states))
    best = backward_induction(mdp).values[0, mdp.start_state]
    assert evaluate_markov_policy(mdp, table) <= best + 1e-9


def test_evaluate_accepts_stationary_array():
    mdp = make_two_state(0.2, 0.1, H=5)
    assert evaluate_markov_policy(mdp, [0, 0]) == pytest.approx(
        evaluate_markov_policy(mdp, np.zeros((5, 2), dtype=int))
    )


def test_evaluate_rejects_out_of_range_action():
    mdp = make_two_state(0.2, 0.1, H=5)
    with pytest.raises(InvalidActionError):
        evaluate_markov_policy(mdp, [0, 2])
    with pytest.raises(InvalidActionError):
        evaluate_markov_policy(mdp, np.zeros((4, 2), dtype=int))


@pytest.mark.parametrize("delta", [0.1, 0.2, 0.3, 0.4, 0.5])
@pytest.mark.parametrize("fraction", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_two_state_gain_formula(delta, fraction):
    eps = fraction * delta
    sol = relative_value_iteration(make_two_state(delta, eps))
    assert sol.gain == pytest.approx((delta + eps) / (2 * delta + eps), abs=1e-8)
    if eps > 0:
        assert sol.policy[0] == 0


def test_two_state_diameter_is_return_time():
    assert diameter(make_two_state(0.25, 0.1)) == pytest.approx(4.0, rel=1e-8)


def test_periodic_cycle_converges():
    sol = relative_value_iteration(swap_chain())
    assert sol.gain == pytest.approx(0.5, abs=1e-9)
    assert sol.diameter == pytest.approx(1.0)
    assert bellman_residual(swap_chain(), sol) < 1e-8


def test_bias_is_normalised_and_bounded_by_diameter():
    rng = np.random.default_rng(11)
    for _ in range(10):
        mdp = random_mdp(rng, 5, 2, 50, floor=0.1)
        sol = relative_value_iteration(mdp)
        assert sol.bias.min() == 0.0
        assert sol.bias.max() <= sol.diameter + 1e-8
        assert bellman_residual(mdp, sol) < 1e-7


def test_sandwich_between_gain_and_finite_horizon_value():
    rng = np.random.default_rng(7)
    for _ in range(20):
        S, A = rng.integers(2, 7), rng.integers(1, 4)
        mdp = random_mdp(rng, S, A, 500, floor=0.05)
        sol = relative_value_iteration(mdp)
        v = backward_induction(mdp).values[0, mdp.start_state]
        H = mdp.horizon
        assert H * sol.gain - sol.diameter - 1e-8 <= v <= H * sol.gain + sol.diameter + 1e-8


def test_policy_gain_matches_optimal_gain():
    mdp = make_two_state(0.3, 0.2)
    sol = relative_value_iteration(mdp)
    assert policy_gain(mdp, sol.policy) == pytest.approx(sol.gain, abs=1e-8)
    assert policy_gain(mdp, [1, 1]) == pytest.approx(0.5, abs=1e-8)


def test_disconnected_absorbing_states_are_unbounded():
    P = np.zeros((2, 1, 2))
    P[0, 0, 0] = P[1, 0, 1] = 1.0
    mdp = TabularMdp(P, [[0.0], [1.0]], 10)
    assert diameter(mdp) == math.inf
    with pytest.raises(UnboundedSpanError) as exc:
        relative_value_iteration(mdp)
    assert exc.value.span == pytest.approx(1.0)


def test_prop1_members_have_no_finite_diameter():
    lmdp = make_prop1(2, 5)
    assert all(diameter(m) == math.inf for m in lmdp.mdps)


def test_hitting_times_on_a_line():
    # 0 -> 1 -> 2 with action 0, action 1 stays
    P = np.zeros((3, 2, 3))
    for s in range(3):
        P[s, 0, min(s + 1, 2)] = 1.0
        P[s, 1, s] = 1.0
    mdp = TabularMdp(P, np.zeros((3, 2)), 5)
    times, policy = hitting_time_policy(mdp, 2)
    assert times.tolist() == [2.0, 1.0, 0.0]
    assert policy.tolist()[:2] == [0, 0]
    back, _ = hitting_time_policy(mdp, 0)
    assert back[0] == 0.0 and np.all(np.isinf(back[1:]))


def test_validate_reports_first_bad_row():
    P = np.full((2, 1, 2), 0.5)
    P[1, 0] = [0.5, 0.6]
    with pytest.raises(MdpValidationError) as exc:
        validate(TabularMdp(P, np.zeros((2, 1)), 3))
    assert exc.value.indices == (1, 0)


def test_validate_rejects_negative_probability_and_bad_reward():
    P = np.full((2, 1, 2), 0.5)
    P[0, 0] = [1.5, -0.5]
    with pytest.raises(MdpValidationError) as exc:
        validate(TabularMdp(P, np.zeros((2, 1)), 3))
    assert exc.value.indices == (0, 0, 0)

    P = np.full((2, 1, 2), 0.5)
    with pytest.raises(MdpValidationError):
        validate(TabularMdp(P, [[0.0], [1.5]], 3))
    with pytest.raises(MdpValidationError):
        validate(TabularMdp(P, np.zeros((2, 1)), 0))
    with pytest.raises(MdpValidationError):
        TabularMdp(np.ones((2, 1, 3)), np.zeros((2, 1)), 3)


def test_save_and_load(tmp_path):
    mdp = make_two_state(0.2, 0.05, H=12)
    path = tmp_path / "two.json"
    save_mdp(mdp, path)
    loaded = load_mdp(path)
    np.testing.assert_array_equal(loaded.transitions, mdp.transitions)
    np.testing.assert_array_equal(loaded.rewards, mdp.rewards)
    assert (loaded.horizon, loaded.start_state) == (12, 0)


def test_load_rejects_foreign_documents(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "lmdp-lab/mdp-v1", "num_states": 1}')
    with pytest.raises(ValidationError):
        load_mdp(path)


@given(mdps(floor=0.1), st.randoms(use_true_random=False))
def test_diameter_is_invariant_under_state_relabelling(mdp, rnd):
    perm = list(range(mdp.num_states))
    rnd.shuffle(perm)
    assert diameter(mdp.permuted(perm)) == pytest.approx(diameter(mdp), rel=1e-6, abs=1e-9)


@given(mdps())
def test_optimal_values_shrink_with_fewer_steps_left(mdp):
    values = backward_induction(mdp).values
    assert np.all(values[:-1] >= values[1:] - 1e-12)


def test_backward_induction_matches_enumeration():
    mdp = random_mdp(np.random.default_rng(5), 4, 2, 3)
    best = max(
        evaluate_markov_policy(mdp, np.reshape(table, (3, 4)))
        for table in itertools.product(range(2), repeat=3 * 4)
    )
    assert backward_induction(mdp).values[0, 0] == pytest.approx(best, abs=1e-9)


def test_deterministic_cycle_diameter():
    P = np.zeros((5, 1, 5))
    for s in range(5):
        P[s, 0, (s + 1) % 5] = 1.0
    mdp = TabularMdp(P, np.zeros((5, 1)), 10)
    assert diameter(mdp) == pytest.approx(4.0)
    times, _ = hitting_time_policy(mdp, 0)
    np.testing.assert_allclose(times, [0.0, 4.0, 3.0, 2.0, 1.0])
