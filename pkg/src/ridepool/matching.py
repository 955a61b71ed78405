"""Post-decision value function and trip scoring for the central assignment.

Each candidate trip gets a score of (linear objective on the trip's revenue)
plus a discounted value of the vehicle's post-decision state, i.e. the state
it commits to by accepting the trip, before new demand arrives. The value
function is a single table shared by all vehicles over discretized features
(final-stop zone, committed seats, time-of-day bucket), updated by one-step
temporal differences against realized rewards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .demand import SensitivityParams, acceptance_probability
from .network import RoadNetwork, coarse_zone
from .trips import Trip, Vehicle

MODE_EXPECTED = "N-E"    # expected revenue + discounted future value
MODE_NOMINAL = "N-N"     # nominal (sum of quotes) revenue + discounted future value
MODE_IMMEDIATE = "IR"    # expected revenue only, no future term

MATCH_MODES = (MODE_EXPECTED, MODE_NOMINAL, MODE_IMMEDIATE)

VALUE_CHECKPOINT_FORMAT = "ridepool-valuefn"
VALUE_CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MatchObjective:
    """Linear objective on a trip's revenue: weight * revenue + offset.

    The offset carries the per-vehicle constants of the profit variant
    (negative marginal cost) or the historical-earnings variant (positive
    driver history bonus).
    """

    mode: str
    sensitivity: SensitivityParams
    revenue_weight: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.mode not in MATCH_MODES:
            raise ValueError(f"unknown matching mode {self.mode!r}; expected one of {MATCH_MODES}")


@dataclass(frozen=True)
class PostDecisionState:
    """Vehicle state right after committing to a trip, before new demand.

    A deterministic function of (vehicle, trip): same inputs, same state.
    """

    vehicle_id: str
    final_location: str
    route: tuple[tuple[str, float], ...]
    seats_committed: int
    time_bucket: int
    decision_time: float


def post_decision_state(vehicle: Vehicle, trip: Trip, now: float,
                        time_bucket_s: float) -> PostDecisionState:
    plan = trip.route_plan
    final_loc = plan[-1].location if plan else vehicle.location
    return PostDecisionState(
        vehicle_id=vehicle.id,
        final_location=final_loc,
        route=tuple((s.location, s.time) for s in plan),
        seats_committed=vehicle.seats_taken + len(trip.requests),
        time_bucket=int(now // time_bucket_s),
        decision_time=now,
    )


def trip_revenue(trip: Trip, prices: dict[str, float], objective: MatchObjective) -> float:
    """Objective value of a trip's revenue under the given mode.

    ``prices`` maps request id to quoted price and must cover every request
    in the trip. Nominal mode sums the quotes; expected and immediate modes
    weight each quote by its acceptance probability.
    """
    core = 0.0
    for r in trip.requests:
        if r.id not in prices:
            raise ValueError(f"missing price for request {r.id} in trip {trip.key}")
        quoted = prices[r.id]
        if objective.mode == MODE_NOMINAL:
            core += quoted
        else:
            core += quoted * acceptance_probability(quoted, r.base_price, objective.sensitivity)
    return objective.revenue_weight * core + objective.offset


def score_trip(vehicle: Vehicle, trip: Trip, prices: dict[str, float],
               vf: "ValueFunction", objective: MatchObjective, now: float) -> float:
    """Revenue objective plus the discounted post-decision value; the
    immediate mode drops the future term."""
    revenue = trip_revenue(trip, prices, objective)
    if objective.mode == MODE_IMMEDIATE:
        return revenue
    post = post_decision_state(vehicle, trip, now, vf.time_bucket_s)
    return revenue + vf.gamma * vf.value(post)


class ValueFunction:
    """Shared per-vehicle value table over discretized post-decision features.

    One-step TD: V(features) moves toward reward + gamma * V(next features)
    by the learning rate; a terminal transition's target is the reward alone.
    Missing entries read as 0, so the terminal epoch's value is 0 until
    taught otherwise.
    """

    def __init__(self, net: RoadNetwork, gamma: float = 0.9, learning_rate: float = 0.1,
                 zones_per_side: int = 3, time_bucket_s: float = 3600.0):
        # gamma = 1 is safe here: runs are episodic and terminal targets drop
        # the future term
        if not 0 <= gamma <= 1:
            raise ValueError("gamma must be in [0, 1]")
        if not 0 < learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if time_bucket_s <= 0:
            raise ValueError("time_bucket_s must be positive")
        self.net = net
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.zones_per_side = zones_per_side
        self.time_bucket_s = time_bucket_s
        self.table: dict[tuple, float] = {}

    def features(self, post: PostDecisionState) -> tuple[int, int, int]:
        return (coarse_zone(self.net, post.final_location, self.zones_per_side),
                post.seats_committed, post.time_bucket)

    def value(self, post: PostDecisionState) -> float:
        return self.table.get(self.features(post), 0.0)

    def td_update(self, post: PostDecisionState, reward: float,
                  next_post: PostDecisionState | None) -> "ValueFunction":
        target = reward
        if next_post is not None:
            target += self.gamma * self.value(next_post)
        key = self.features(post)
        old = self.table.get(key, 0.0)
        self.table[key] = old + self.learning_rate * (target - old)
        return self

    def save(self, path: str | Path) -> None:
        entries = sorted([list(k), v] for k, v in self.table.items())
        payload = {
            "format": VALUE_CHECKPOINT_FORMAT,
            "version": VALUE_CHECKPOINT_VERSION,
            "gamma": self.gamma,
            "learning_rate": self.learning_rate,
            "zones_per_side": self.zones_per_side,
            "time_bucket_s": self.time_bucket_s,
            "entries": entries,
        }
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path: str | Path, net: RoadNetwork) -> "ValueFunction":
        payload = json.loads(Path(path).read_text())
        if payload.get("format") != VALUE_CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a value-function checkpoint")
        if payload.get("version") != VALUE_CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
        vf = cls(net, payload["gamma"], payload["learning_rate"],
                 payload["zones_per_side"], payload["time_bucket_s"])
        for key, value in payload["entries"]:
            vf.table[tuple(key)] = value
        return vf
