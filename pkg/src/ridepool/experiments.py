"""Experiment harness: policy comparisons, fleet-size search, and distance
accounting over metrics streams.

Training mirrors a train-days/eval-days protocol: each policy trains over
repeated episodes of the scenario horizon (fresh world per episode, shared
learners), then evaluates with frozen learners once per evaluation seed.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .config import Scenario, load_scenario, parse_kv_file, scenario_with
from .matching import ValueFunction
from .pricing import load_pricer
from .sim import EpochMetrics, run, write_metrics_csv

BASELINE_POLICY = "F&N-E"


@dataclass
class ExperimentSpec:
    scenario_path: Path
    policies: list[str]
    seeds: list[int]
    train_epochs: int = 0
    train_seed: int = 9000
    checkpoint_dir: Path | None = None
    min_fleet: int = 1
    max_fleet: int = 64

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("experiment needs at least one seed")
        if not self.policies:
            raise ValueError("experiment needs at least one policy")


def load_experiment_spec(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    kv = parse_kv_file(path)
    known = {"config", "policies", "seeds", "train_epochs", "train_seed",
             "checkpoint_dir", "min_fleet", "max_fleet"}
    unknown = set(kv) - known
    if unknown:
        raise ValueError(f"{path}: unknown experiment keys: {sorted(unknown)}")
    if "config" not in kv:
        raise ValueError(f"{path}: experiment spec needs a 'config' key")
    ckpt = kv.get("checkpoint_dir")
    return ExperimentSpec(
        scenario_path=path.parent / kv["config"],
        policies=[p.strip() for p in kv.get("policies", BASELINE_POLICY).split(",")],
        seeds=[int(s) for s in kv.get("seeds", "0").split(",")],
        train_epochs=int(kv.get("train_epochs", 0)),
        train_seed=int(kv.get("train_seed", 9000)),
        checkpoint_dir=(path.parent / ckpt) if ckpt else None,
        min_fleet=int(kv.get("min_fleet", 1)),
        max_fleet=int(kv.get("max_fleet", 64)),
    )


def policy_slug(policy: str) -> str:
    return policy.replace("&", "_").replace("-", "")


def checkpoint_paths(directory: Path, policy: str) -> tuple[Path, Path]:
    slug = policy_slug(policy)
    return directory / f"{slug}.pricer.json", directory / f"{slug}.value.json"


def train_policy(scenario: Scenario, policy: str, train_epochs: int, train_seed: int):
    """Train a policy over repeated episodes of the scenario horizon.

    Returns the trained (pricer, value function); with a zero budget the
    learners come back untrained.
    """
    base = scenario_with(scenario, policy=policy)
    horizon = max(base.config.horizon_epochs, 1)
    episodes = max(math.ceil(train_epochs / horizon), 0)
    pricer = None
    vf = None
    for ep in range(episodes):
        cfg = scenario_with(base, seed=train_seed + ep).config
        _, world = run(cfg, base.demand, base.net, mode="train",
                       pricer=pricer, value_function=vf)
        pricer, vf = world.pricer, world.value_function
    if pricer is None:
        from .sim import build_pricer, build_value_function
        cfg = base.config
        pricer, vf = build_pricer(cfg), build_value_function(cfg, base.net)
    return pricer, vf


def load_policy_checkpoints(scenario: Scenario, policy: str, directory: Path):
    pricer_path, value_path = checkpoint_paths(directory, policy)
    for p in (pricer_path, value_path):
        if not p.exists():
            raise FileNotFoundError(
                f"missing checkpoint {p} for policy {policy} (training is disabled)")
    return load_pricer(pricer_path), ValueFunction.load(value_path, scenario.net)


def evaluate_policy(scenario: Scenario, policy: str, seeds: list[int],
                    pricer, vf) -> tuple[list[float], list[list[EpochMetrics]]]:
    """Frozen-learner evaluation runs, one per seed; returns total revenue
    per seed plus the raw metric streams."""
    revenues = []
    streams = []
    for seed in seeds:
        cfg = scenario_with(scenario, policy=policy, seed=seed).config
        metrics, _ = run(cfg, scenario.demand, scenario.net, mode="eval",
                         pricer=pricer, value_function=vf)
        revenues.append(sum(m.revenue for m in metrics))
        streams.append(metrics)
    return revenues, streams


@dataclass
class PolicyResult:
    policy: str
    mean_revenue: float
    std_revenue: float
    delta_pct: float
    per_seed: list[float] = field(default_factory=list)
    streams: list[list[EpochMetrics]] = field(default_factory=list, repr=False)


def compare(spec: ExperimentSpec, out_dir: Path | None = None,
            figures: bool = True) -> list[PolicyResult]:
    """Mean revenue per policy over the evaluation seeds, with the
    percentage delta against the fixed-price future-aware baseline.

    When an output directory is given, writes comparison.csv plus rendered
    figures next to it.
    """
    if BASELINE_POLICY not in spec.policies:
        raise ValueError(f"comparison needs the baseline policy {BASELINE_POLICY}")
    scenario = load_scenario(spec.scenario_path)

    raw: dict[str, tuple[list[float], list]] = {}
    for policy in spec.policies:
        if spec.train_epochs > 0:
            pricer, vf = train_policy(scenario, policy, spec.train_epochs, spec.train_seed)
        elif spec.checkpoint_dir is not None:
            pricer, vf = load_policy_checkpoints(scenario, policy, spec.checkpoint_dir)
        else:
            raise ValueError("no training budget and no checkpoint_dir given")
        raw[policy] = evaluate_policy(scenario, policy, spec.seeds, pricer, vf)

    base_mean = statistics.fmean(raw[BASELINE_POLICY][0])
    results = []
    for policy in spec.policies:
        revenues, streams = raw[policy]
        mean = statistics.fmean(revenues)
        std = statistics.pstdev(revenues)
        delta = (mean - base_mean) / base_mean * 100.0 if base_mean else float("nan")
        results.append(PolicyResult(policy, mean, std, delta, revenues, streams))

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_comparison_csv(results, out_dir / "comparison.csv")
        for policy in spec.policies:
            for seed, stream in zip(spec.seeds, raw[policy][1]):
                write_metrics_csv(stream, out_dir / f"{policy_slug(policy)}_seed{seed}.csv")
        if figures:
            from . import plots
            plots.save_policy_comparison(results, out_dir / "comparison.png")
            plots.save_revenue_curves(
                {r.policy: r.streams for r in results},
                scenario.config.epoch_seconds, out_dir / "revenue_curves.png")
    return results


def write_comparison_csv(results: list[PolicyResult], path: Path) -> None:
    lines = ["policy,mean_revenue,std_revenue,delta_pct_vs_baseline"]
    for r in results:
        lines.append(f"{r.policy},{r.mean_revenue!r},{r.std_revenue!r},{r.delta_pct:.2f}")
    Path(path).write_text("\n".join(lines) + "\n")


def minimal_fleet(revenue_fn, lo: int, hi: int, target: float) -> int:
    """Smallest fleet size in [lo, hi] whose revenue reaches the target,
    by bisection; assumes (and probes) revenue monotone in fleet size."""
    if lo < 1 or hi < lo:
        raise ValueError("need 1 <= min_fleet <= max_fleet")
    rev_lo = revenue_fn(lo)
    if target <= rev_lo:
        return lo
    rev_hi = revenue_fn(hi)
    if rev_lo > rev_hi:
        raise ValueError(f"revenue not monotone on probe: fleet {lo} earns {rev_lo:.2f} "
                         f"but fleet {hi} earns {rev_hi:.2f}")
    if rev_hi < target:
        raise ValueError(f"target revenue {target:.2f} unreachable at max fleet {hi} "
                         f"(got {rev_hi:.2f})")
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if revenue_fn(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def fleet_search(spec: ExperimentSpec, target_revenue: float, policy: str | None = None,
                 frozen: bool = False) -> int:
    """Minimal fleet size reaching the target mean revenue for one policy.

    Each probed size retrains from scratch by default; ``frozen`` reuses
    the learners trained at the scenario's own fleet size for every probe
    (faster, but the values were learned for a different fleet).
    """
    scenario = load_scenario(spec.scenario_path)
    policy = policy or spec.policies[0]

    frozen_learners = None
    if frozen:
        frozen_learners = train_policy(scenario, policy, spec.train_epochs, spec.train_seed)

    cache: dict[int, float] = {}

    def revenue_fn(fleet: int) -> float:
        if fleet not in cache:
            sized = scenario_with(scenario, fleet_size=fleet)
            if frozen_learners is not None:
                pricer, vf = frozen_learners
            else:
                pricer, vf = train_policy(sized, policy, spec.train_epochs, spec.train_seed)
            revenues, _ = evaluate_policy(sized, policy, spec.seeds, pricer, vf)
            cache[fleet] = statistics.fmean(revenues)
        return cache[fleet]

    return minimal_fleet(revenue_fn, spec.min_fleet, spec.max_fleet, target_revenue)


def distance_report(streams: list[list[EpochMetrics]], fleet_size: int,
                    epoch_seconds: float = 60.0) -> float:
    """Mean kilometers traveled per vehicle per hour across the streams."""
    if fleet_size < 1:
        raise ValueError("fleet_size must be >= 1")
    if not streams:
        raise ValueError("no metrics streams given")
    total_km = 0.0
    total_hours = 0.0
    for stream in streams:
        if not stream:
            raise ValueError("empty metrics stream")
        total_km += sum(m.distance_m for m in stream) / 1000.0
        total_hours += len(stream) * epoch_seconds / 3600.0
    if total_hours < 1.0:
        raise ValueError(f"streams cover {total_hours:.2f} h; at least one hour required")
    return total_km / (fleet_size * total_hours)
