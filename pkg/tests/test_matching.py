import numpy as np
import pytest

from ridepool.demand import Request, UBER_SENSITIVITY, acceptance_probability
from ridepool.matching import (MODE_EXPECTED, MODE_IMMEDIATE, MODE_NOMINAL,
                               MatchObjective, ValueFunction, post_decision_state,
                               score_trip, trip_revenue)
from ridepool.network import grid_network
from ridepool.trips import Vehicle, feasible_insertion

NET = grid_network(3, arc_seconds=30.0)


def objective(mode, **kw):
    return MatchObjective(mode, UBER_SENSITIVITY, **kw)


def make_trip(vehicle, requests, now=0.0):
    trip = feasible_insertion(vehicle, requests, NET, 600, 600, now=now)
    assert trip is not None
    return trip


def request(rid, origin, dest, base):
    return Request(rid, origin, dest, 0, base_price=base, arrival_time=0.0)


# ---------------------------------------------------------------------------
# revenue objectives


def test_empty_trip_revenue_zero_all_modes():
    v = Vehicle("v0", "0", 2)
    empty = make_trip(v, ())
    for mode in (MODE_EXPECTED, MODE_NOMINAL, MODE_IMMEDIATE):
        assert trip_revenue(empty, {}, objective(mode)) == 0.0


def test_single_request_nominal_vs_expected():
    v = Vehicle("v0", "0", 2)
    r = request("r1", "0", "2", base=10.0)
    trip = make_trip(v, (r,))
    prices = {"r1": 10.0}
    assert trip_revenue(trip, prices, objective(MODE_NOMINAL)) == pytest.approx(10.0)
    expected = trip_revenue(trip, prices, objective(MODE_EXPECTED))
    assert expected == pytest.approx(10.0 * 0.7350, abs=2e-3)
    assert expected == pytest.approx(
        10.0 * acceptance_probability(10.0, 10.0, UBER_SENSITIVITY), abs=1e-12)


def test_two_request_nominal_sum():
    v = Vehicle("v0", "0", 2)
    r1 = request("r1", "0", "2", base=10.0)
    r2 = request("r2", "0", "6", base=10.0)
    trip = make_trip(v, (r1, r2))
    assert trip_revenue(trip, {"r1": 10.0, "r2": 12.0},
                        objective(MODE_NOMINAL)) == pytest.approx(22.0)


def test_missing_price_rejected():
    v = Vehicle("v0", "0", 2)
    r = request("r1", "0", "2", base=10.0)
    trip = make_trip(v, (r,))
    with pytest.raises(ValueError, match="missing price"):
        trip_revenue(trip, {}, objective(MODE_NOMINAL))


def test_linear_constants_apply():
    v = Vehicle("v0", "0", 2)
    r = request("r1", "0", "2", base=10.0)
    trip = make_trip(v, (r,))
    # profit-style: weight 1, offset = -cost; history-style: offset = +hist
    got = trip_revenue(trip, {"r1": 10.0},
                       objective(MODE_NOMINAL, revenue_weight=2.0, offset=-3.0))
    assert got == pytest.approx(2.0 * 10.0 - 3.0)


def test_unknown_mode_rejected():
    with pytest.raises(ValueError, match="unknown matching mode"):
        MatchObjective("XX", UBER_SENSITIVITY)


# ---------------------------------------------------------------------------
# scoring


def test_immediate_mode_empty_trip_scores_zero():
    v = Vehicle("v0", "0", 2)
    vf = ValueFunction(NET)
    empty = make_trip(v, ())
    assert score_trip(v, empty, {}, vf, objective(MODE_IMMEDIATE), now=0.0) == 0.0


def test_zero_value_function_reduces_to_revenue():
    v = Vehicle("v0", "0", 2)
    vf = ValueFunction(NET, gamma=0.9)
    r = request("r1", "0", "2", base=10.0)
    trip = make_trip(v, (r,))
    prices = {"r1": 10.0}
    for mode in (MODE_EXPECTED, MODE_NOMINAL, MODE_IMMEDIATE):
        assert score_trip(v, trip, prices, vf, objective(mode), now=0.0) == \
            pytest.approx(trip_revenue(trip, prices, objective(mode)))


def test_future_term_added():
    v = Vehicle("v0", "0", 2)
    vf = ValueFunction(NET, gamma=0.9)
    r = request("r1", "0", "2", base=10.0)
    trip = make_trip(v, (r,))
    post = post_decision_state(v, trip, 0.0, vf.time_bucket_s)
    vf.table[vf.features(post)] = 3.0
    got = score_trip(v, trip, {"r1": 10.0}, vf, objective(MODE_NOMINAL), now=0.0)
    assert got == pytest.approx(10.0 + 0.9 * 3.0)


def test_immediate_mode_ignores_learned_values():
    v = Vehicle("v0", "0", 2)
    vf = ValueFunction(NET, gamma=0.9)
    r = request("r1", "0", "2", base=10.0)
    trip = make_trip(v, (r,))
    post = post_decision_state(v, trip, 0.0, vf.time_bucket_s)
    vf.table[vf.features(post)] = 100.0
    ir = score_trip(v, trip, {"r1": 10.0}, vf, objective(MODE_IMMEDIATE), now=0.0)
    assert ir == pytest.approx(trip_revenue(trip, {"r1": 10.0}, objective(MODE_IMMEDIATE)))


# ---------------------------------------------------------------------------
# post-decision state


def test_post_decision_state_deterministic():
    v = Vehicle("v0", "0", 2)
    r = request("r1", "0", "2", base=10.0)
    trip = make_trip(v, (r,))
    a = post_decision_state(v, trip, 60.0, 3600.0)
    b = post_decision_state(v, trip, 60.0, 3600.0)
    assert a == b


def test_post_decision_state_tracks_final_stop_and_seats():
    v = Vehicle("v0", "0", 2)
    r = request("r1", "0", "8", base=10.0)
    trip = make_trip(v, (r,))
    post = post_decision_state(v, trip, 0.0, 3600.0)
    assert post.final_location == "8"
    assert post.seats_committed == 1
    empty = make_trip(v, ())
    post0 = post_decision_state(v, empty, 0.0, 3600.0)
    assert post0.final_location == "0"
    assert post0.seats_committed == 0


def test_time_bucket_discretization():
    v = Vehicle("v0", "0", 2)
    empty = make_trip(v, ())
    assert post_decision_state(v, empty, 0.0, 3600.0).time_bucket == 0
    assert post_decision_state(v, empty, 3599.0, 3600.0).time_bucket == 0
    assert post_decision_state(v, empty, 3600.0, 3600.0).time_bucket == 1


# ---------------------------------------------------------------------------
# TD updates


def post_at(loc, seats=0, bucket=0):
    v = Vehicle("vX", loc, 2)
    trip = feasible_insertion(v, (), NET, 1, 1)
    return post_decision_state(v, trip, bucket * 3600.0, 3600.0)


def test_td_full_rate_copies_target():
    vf = ValueFunction(NET, gamma=0.0, learning_rate=1.0)
    p = post_at("0")
    vf.td_update(p, 5.0, post_at("8"))
    assert vf.value(p) == pytest.approx(5.0)


def test_zero_reward_keeps_values_at_zero():
    vf = ValueFunction(NET, gamma=0.9, learning_rate=0.3)
    p0, p1 = post_at("0"), post_at("8")
    for _ in range(100):
        vf.td_update(p0, 0.0, p1)
        vf.td_update(p1, 0.0, None)
    assert vf.value(p0) == 0.0
    assert vf.value(p1) == 0.0


def test_two_epoch_chain_converges_to_analytic_fixed_point():
    # rewards 0 then 10: the fixed point of the TD recursion puts the first
    # post-state at 10 once the terminal state has settled at 0
    vf = ValueFunction(NET, gamma=1.0, learning_rate=0.5)
    p0 = post_at("0", bucket=0)
    p1 = post_at("8", bucket=1)
    for _ in range(200):
        vf.td_update(p0, 10.0, p1)   # transition carrying the epoch-1 reward
        vf.td_update(p1, 0.0, None)  # terminal flush
    assert abs(vf.value(p1)) < 1e-6
    assert abs(vf.value(p0) - 10.0) < 1e-6


def test_terminal_target_is_reward_alone():
    vf = ValueFunction(NET, gamma=0.9, learning_rate=1.0)
    p = post_at("0")
    other = post_at("8")
    vf.table[vf.features(other)] = 50.0
    vf.td_update(p, 2.0, None)
    assert vf.value(p) == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# checkpoints


def test_value_checkpoint_round_trip(tmp_path):
    vf = ValueFunction(NET, gamma=0.8, learning_rate=0.2, zones_per_side=2,
                       time_bucket_s=1800.0)
    rng = np.random.default_rng(4)
    for _ in range(100):
        key = (int(rng.integers(0, 4)), int(rng.integers(0, 3)), int(rng.integers(0, 5)))
        vf.table[key] = float(rng.normal())
    path = tmp_path / "v.json"
    vf.save(path)
    loaded = ValueFunction.load(path, NET)
    assert loaded.table == vf.table
    assert (loaded.gamma, loaded.learning_rate, loaded.zones_per_side,
            loaded.time_bucket_s) == (0.8, 0.2, 2, 1800.0)
