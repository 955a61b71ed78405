import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ridepool.demand import UBER_SENSITIVITY, acceptance_probability, sample_acceptance
from ridepool.network import grid_network
from ridepool.pricing import (DEFAULT_ACTION_FACTORS, FixedPricer, MeanFieldQTable,
                              ObservationEncoder, ObservationSpec, PlainQTable,
                              PricingTransition, boltzmann_probabilities,
                              candidate_price, load_pricer, mean_action)

OBS = (0, 1, 0, 2)
NEXT_OBS = (1, 1, 0, 2)
UNIFORM = np.full(5, 0.2)


# ---------------------------------------------------------------------------
# mean action


def test_mean_action_two_neighbors():
    # factors 0.8 and 1.2 are indices 0 and 4 of the default set
    got = mean_action([0, 4], 5)
    assert np.allclose(got, [0.5, 0, 0, 0, 0.5])


def test_mean_action_unanimous():
    assert np.allclose(mean_action([2, 2, 2], 5), [0, 0, 1, 0, 0])


def test_mean_action_empty_neighborhood_uniform():
    assert np.allclose(mean_action([], 5), [0.2] * 5)


def test_mean_action_validates_indices():
    with pytest.raises(ValueError):
        mean_action([5], 5)


def test_mean_action_sums_to_one():
    rng = np.random.default_rng(0)
    for _ in range(50):
        acts = list(rng.integers(0, 5, size=rng.integers(1, 9)))
        v = mean_action(acts, 5)
        assert v.sum() == pytest.approx(1.0)
        assert (v >= 0).all()


# ---------------------------------------------------------------------------
# Boltzmann selection


def test_beta_zero_gives_uniform():
    q = MeanFieldQTable(5, beta=0.0)
    probs = q.policy(OBS, q.discretize_mean(UNIFORM))
    assert np.allclose(probs, 0.2)


def test_equal_values_give_uniform_for_any_beta():
    q = MeanFieldQTable(5, beta=7.3)
    mk = q.discretize_mean(UNIFORM)
    for a in range(5):
        q.table[(OBS, a, mk)] = 4.2
    assert np.allclose(q.policy(OBS, mk), 0.2)


def test_strong_peak_dominates_selection():
    q = MeanFieldQTable(5, beta=10.0)
    mk = q.discretize_mean(UNIFORM)
    q.table[(OBS, 2, mk)] = 10.0
    assert q.policy(OBS, mk)[2] > 0.999
    rng = np.random.default_rng(0)
    picks = [q.select_action(OBS, UNIFORM, rng) for _ in range(200)]
    assert picks.count(2) >= 199


def test_selection_reproducible_under_seed():
    q = MeanFieldQTable(5, beta=1.0)
    a = [q.select_action(OBS, UNIFORM, np.random.default_rng(3)) for _ in range(20)]
    b = [q.select_action(OBS, UNIFORM, np.random.default_rng(3)) for _ in range(20)]
    assert a == b


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8),
       st.floats(0, 20), st.floats(-100, 100))
def test_softmax_invariant_to_constant_shift(values, beta, shift):
    base = boltzmann_probabilities(np.array(values), beta)
    shifted = boltzmann_probabilities(np.array(values) + shift, beta)
    assert np.abs(base - shifted).max() < 1e-9


def test_softmax_overflow_guarded():
    probs = boltzmann_probabilities(np.array([1e4, 0.0]), 1.0)
    assert probs[0] == pytest.approx(1.0)
    assert math.isfinite(probs.sum())


# ---------------------------------------------------------------------------
# candidate price


def test_candidate_price_examples():
    assert candidate_price(10.0, 1.0) == 10.0
    assert candidate_price(10.0, 1.2) == pytest.approx(12.0)
    assert candidate_price(8.5, 0.8) == pytest.approx(6.8)


# ---------------------------------------------------------------------------
# Q updates


def test_update_simple_average():
    q = MeanFieldQTable(5, alpha=0.5, gamma=0.0)
    q.update(PricingTransition(OBS, 1, UNIFORM, 10.0, NEXT_OBS, UNIFORM))
    assert q.q(OBS, 1, q.discretize_mean(UNIFORM)) == pytest.approx(5.0)


def test_update_full_alpha_copies_reward():
    q = MeanFieldQTable(5, alpha=1.0, gamma=0.0)
    q.update(PricingTransition(OBS, 3, UNIFORM, 7.5, NEXT_OBS, UNIFORM))
    assert q.q(OBS, 3, q.discretize_mean(UNIFORM)) == pytest.approx(7.5)


def test_update_uses_mean_field_value_of_next_state():
    q = MeanFieldQTable(5, alpha=0.5, gamma=0.9, beta=1.7)
    mk = q.discretize_mean(UNIFORM)
    for a in range(5):
        q.table[(NEXT_OBS, a, mk)] = 2.0
    q.table[(OBS, 0, mk)] = 1.0
    q.update(PricingTransition(OBS, 0, UNIFORM, 10.0, NEXT_OBS, UNIFORM))
    # with equal next values, V_mf = 2 for any beta
    assert q.q(OBS, 0, mk) == pytest.approx(0.5 * 1.0 + 0.5 * (10.0 + 0.9 * 2.0))


def test_mean_field_value_of_equal_values_is_that_value():
    for beta in (0.0, 0.5, 3.0, 50.0):
        q = MeanFieldQTable(5, beta=beta)
        mk = q.discretize_mean(np.array([0.1, 0.2, 0.3, 0.2, 0.2]))
        for a in range(5):
            q.table[(OBS, a, mk)] = -3.7
        assert q.mean_field_value(OBS, mk) == pytest.approx(-3.7, abs=1e-12)


def test_terminal_transition_targets_reward_alone():
    q = MeanFieldQTable(5, alpha=1.0, gamma=0.9)
    q.update(PricingTransition(OBS, 2, UNIFORM, 4.0))
    assert q.q(OBS, 2, q.discretize_mean(UNIFORM)) == pytest.approx(4.0)


def test_plain_q_uses_max_target():
    q = PlainQTable(5, alpha=1.0, gamma=0.5)
    q.table[(NEXT_OBS, 0)] = 1.0
    q.table[(NEXT_OBS, 4)] = 3.0
    q.update(PricingTransition(OBS, 1, UNIFORM, 2.0, NEXT_OBS, UNIFORM))
    assert q.table[(OBS, 1)] == pytest.approx(2.0 + 0.5 * 3.0)


def test_hyperparameter_validation():
    with pytest.raises(ValueError):
        MeanFieldQTable(5, alpha=0.0)
    with pytest.raises(ValueError):
        MeanFieldQTable(5, gamma=1.0)
    with pytest.raises(ValueError):
        PlainQTable(5, beta=-1.0)
    with pytest.raises(ValueError):
        FixedPricer(5, 5)


# ---------------------------------------------------------------------------
# bandit sanity (the full-scale convergence run lives in the acceptance suite)


def expected_factor_revenue(base, factor):
    quoted = candidate_price(base, factor)
    return quoted * acceptance_probability(quoted, base, UBER_SENSITIVITY)


def test_bandit_greedy_matches_analytic_argmax_quick():
    base = 10.0
    factors = DEFAULT_ACTION_FACTORS
    analytic = max(range(5), key=lambda a: expected_factor_revenue(base, factors[a]))
    q = MeanFieldQTable(5, alpha=0.002, gamma=0.0, beta=0.0)
    rng = np.random.default_rng(12)
    mk = q.discretize_mean(UNIFORM)
    for _ in range(20_000):
        a = q.select_action(OBS, UNIFORM, rng)
        quoted = candidate_price(base, factors[a])
        p = acceptance_probability(quoted, base, UBER_SENSITIVITY)
        reward = quoted if sample_acceptance(p, rng) else 0.0
        q.update(PricingTransition(OBS, a, UNIFORM, reward, OBS, UNIFORM))
    greedy = int(np.argmax(q.action_values(OBS, mk)))
    assert greedy == analytic


# ---------------------------------------------------------------------------
# observations


def test_observation_encoding_fixed_length_and_bins():
    net = grid_network(4, spacing_m=100.0)
    enc = ObservationEncoder(net, ObservationSpec(zones_per_side=2))
    a = enc.encode("0", 0, 0)
    b = enc.encode("15", 10, 3)
    assert len(a) == len(b) == 4
    assert a != b
    # more neighbors can only move the count bin up
    assert enc.encode("0", 9, 0)[1] >= enc.encode("0", 1, 0)[1]


# ---------------------------------------------------------------------------
# checkpoints


def test_mean_field_checkpoint_round_trip(tmp_path):
    q = MeanFieldQTable(5, alpha=0.25, gamma=0.85, beta=1.5, mean_levels=4)
    rng = np.random.default_rng(8)
    for _ in range(200):
        obs = tuple(int(x) for x in rng.integers(0, 4, size=4))
        tr = PricingTransition(obs, int(rng.integers(0, 5)),
                               mean_action(list(rng.integers(0, 5, size=3)), 5),
                               float(rng.normal()), obs, UNIFORM)
        q.update(tr)
    path = tmp_path / "q.json"
    q.save(path)
    loaded = load_pricer(path)
    assert isinstance(loaded, MeanFieldQTable)
    assert loaded.table == q.table
    assert (loaded.alpha, loaded.gamma, loaded.beta, loaded.mean_levels) == \
           (q.alpha, q.gamma, q.beta, q.mean_levels)


def test_plain_and_fixed_checkpoint_round_trip(tmp_path):
    q = PlainQTable(5, alpha=0.5, gamma=0.0, beta=2.0)
    q.update(PricingTransition(OBS, 1, UNIFORM, 3.25, NEXT_OBS, UNIFORM))
    q.save(tmp_path / "plain.json")
    loaded = load_pricer(tmp_path / "plain.json")
    assert isinstance(loaded, PlainQTable)
    assert loaded.table == q.table

    f = FixedPricer(5, 2)
    f.save(tmp_path / "fixed.json")
    loaded_f = load_pricer(tmp_path / "fixed.json")
    assert isinstance(loaded_f, FixedPricer)
    assert loaded_f.action_index == 2


def test_load_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": "something-else"}')
    with pytest.raises(ValueError, match="not a pricer"):
        load_pricer(bad)
