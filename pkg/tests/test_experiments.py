import numpy as np
import pytest

from ridepool.experiments import (ExperimentSpec, compare, distance_report,
                                  load_experiment_spec, minimal_fleet,
                                  train_policy, evaluate_policy)
from ridepool.sim import EpochMetrics


def metrics_row(epoch, revenue=0.0, distance_m=0.0):
    return EpochMetrics(epoch=epoch, revenue=revenue, offers=0, accepts=0,
                        served=0, dropped=0, distance_m=distance_m)


# ---------------------------------------------------------------------------
# fleet search on a mocked revenue curve


def test_minimal_fleet_linear_revenue():
    calls = []

    def revenue(n):
        calls.append(n)
        return 10.0 * n

    assert minimal_fleet(revenue, 1, 64, target=95.0) == 10


def test_minimal_fleet_target_zero_returns_lower_bound():
    assert minimal_fleet(lambda n: 10.0 * n, 1, 64, target=0.0) == 1


def test_minimal_fleet_unreachable_target():
    with pytest.raises(ValueError, match="unreachable"):
        minimal_fleet(lambda n: 10.0 * n, 1, 8, target=1000.0)


def test_minimal_fleet_monotonicity_probe():
    with pytest.raises(ValueError, match="monotone"):
        minimal_fleet(lambda n: -10.0 * n, 1, 8, target=5.0)


def test_minimal_fleet_exact_boundary():
    assert minimal_fleet(lambda n: 10.0 * n, 1, 64, target=100.0) == 10
    assert minimal_fleet(lambda n: 10.0 * n, 1, 64, target=101.0) == 11


# ---------------------------------------------------------------------------
# distance report


def test_distance_zero_movement():
    stream = [metrics_row(e) for e in range(60)]
    assert distance_report([stream], fleet_size=3, epoch_seconds=60.0) == 0.0


def test_distance_single_vehicle_one_hour():
    stream = [metrics_row(e, distance_m=11_270.0 / 60) for e in range(60)]
    km = distance_report([stream], fleet_size=1, epoch_seconds=60.0)
    assert km == pytest.approx(11.27)


def test_distance_two_vehicles_mean():
    # fleet of two traveling 10 km and 12 km within the hour
    stream = [metrics_row(e, distance_m=22_000.0 / 60) for e in range(60)]
    km = distance_report([stream], fleet_size=2, epoch_seconds=60.0)
    assert km == pytest.approx(11.0)


def test_distance_requires_an_hour():
    stream = [metrics_row(e) for e in range(10)]
    with pytest.raises(ValueError, match="hour"):
        distance_report([stream], fleet_size=1, epoch_seconds=60.0)


def test_distance_rejects_empty_stream():
    with pytest.raises(ValueError, match="empty"):
        distance_report([[]], fleet_size=1)


# ---------------------------------------------------------------------------
# experiment specs and comparison on a tiny scenario


SCENARIO = """
grid_side = 3
grid_arc_seconds = 30
grid_spacing_m = 400
fleet_size = 2
capacity = 2
epoch_seconds = 60
max_pickup_delay_s = 300
max_detour_delay_s = 240
policy = F&N-E
horizon_epochs = 25
demand_rates = 0:0.6,4:0.6
tariff_flag = 2
tariff_per_second = 0.01
seed = 0
"""


@pytest.fixture()
def tiny_spec(tmp_path):
    (tmp_path / "scenario.cfg").write_text(SCENARIO)
    (tmp_path / "exp.cfg").write_text(
        "config = scenario.cfg\n"
        "policies = M&N-E,F&N-E,F&IR\n"
        "seeds = 1,2\n"
        "train_epochs = 50\n"
        "train_seed = 7\n")
    return tmp_path / "exp.cfg"


def test_load_experiment_spec(tiny_spec):
    spec = load_experiment_spec(tiny_spec)
    assert spec.policies == ["M&N-E", "F&N-E", "F&IR"]
    assert spec.seeds == [1, 2]
    assert spec.train_epochs == 50
    assert spec.scenario_path.name == "scenario.cfg"


def test_spec_rejects_unknown_keys(tmp_path):
    (tmp_path / "exp.cfg").write_text("config = x.cfg\nbogus = 1\n")
    with pytest.raises(ValueError, match="bogus"):
        load_experiment_spec(tmp_path / "exp.cfg")


def test_compare_baseline_delta_zero_and_outputs(tiny_spec, tmp_path):
    spec = load_experiment_spec(tiny_spec)
    out = tmp_path / "report"
    results = compare(spec, out_dir=out, figures=True)
    by_policy = {r.policy: r for r in results}
    assert by_policy["F&N-E"].delta_pct == pytest.approx(0.0)
    for r in results:
        recompute = (r.mean_revenue - by_policy["F&N-E"].mean_revenue) \
            / by_policy["F&N-E"].mean_revenue * 100.0
        assert r.delta_pct == pytest.approx(recompute, abs=1e-9)
        assert len(r.per_seed) == 2
    assert (out / "comparison.csv").exists()
    assert (out / "comparison.png").exists()
    assert (out / "revenue_curves.png").exists()
    assert (out / "M_NE_seed1.csv").exists()


def test_compare_requires_baseline(tiny_spec):
    spec = load_experiment_spec(tiny_spec)
    spec.policies = ["M&N-E"]
    with pytest.raises(ValueError, match="baseline"):
        compare(spec)


def test_compare_deterministic(tiny_spec):
    spec = load_experiment_spec(tiny_spec)
    r1 = compare(spec)
    r2 = compare(spec)
    assert [(r.policy, r.mean_revenue, r.std_revenue) for r in r1] == \
           [(r.policy, r.mean_revenue, r.std_revenue) for r in r2]


def test_compare_without_training_needs_checkpoints(tiny_spec):
    spec = load_experiment_spec(tiny_spec)
    spec.train_epochs = 0
    with pytest.raises(ValueError, match="checkpoint"):
        compare(spec)
    spec.checkpoint_dir = spec.scenario_path.parent / "missing"
    with pytest.raises(FileNotFoundError, match="missing checkpoint"):
        compare(spec)


def test_mocked_delta_formula():
    # two policies with fixed revenues 110 and 100 differ by +10%
    assert (110.0 - 100.0) / 100.0 * 100.0 == pytest.approx(10.0)
