"""Discrete-epoch simulator binding all decision layers.

Each epoch: advance vehicles along their plans, batch new requests, let
every vehicle pick a price factor, enumerate feasible trips, score them,
solve the central assignment, offer the assigned vehicle's price to each
request, sample acceptance, shrink trips to the accepted subsets, route
rewards to both learners, and emit metrics. All randomness flows from one
seeded root generator with named substreams (demand, acceptance, pricing,
matching), so runs are bit-reproducible under (seed, config, demand).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .assignment import AssignmentProblem, AssignmentSolution, ScoredTrip, solve
from .demand import (Request, SensitivityParams, Tariff, UBER_SENSITIVITY,
                     acceptance_probability, sample_acceptance)
from .matching import (MatchObjective, ValueFunction, post_decision_state,
                       score_trip)
from .network import RoadNetwork, neighbors_within
from .pricing import (DEFAULT_ACTION_FACTORS, FixedPricer, MeanFieldQTable,
                      ObservationEncoder, ObservationSpec, PlainQTable,
                      PricingTransition, candidate_price, mean_action)
from .trips import (DROPOFF, PICKUP, OnboardPassenger, Trip, Vehicle,
                    feasible_insertion, generate_feasible_trips)

POLICIES = ("M&N-E", "M&N-N", "M&IR", "Q&N-E", "Q&N-N", "F&N-E", "F&IR")

RNG_STREAMS = ("demand", "acceptance", "pricing", "matching")

METRICS_HEADER = "epoch,revenue,offers,accepts,served,dropped,distance_m"


@dataclass
class SimConfig:
    fleet_size: int = 10
    capacity: int = 2
    epoch_seconds: float = 60.0
    max_pickup_delay_s: float = 300.0
    max_detour_delay_s: float = 240.0
    policy: str = "M&N-E"
    sensitivity: SensitivityParams = UBER_SENSITIVITY
    action_factors: tuple[float, ...] = DEFAULT_ACTION_FACTORS
    pricing_alpha: float = 0.1
    pricing_gamma: float = 0.9
    pricing_beta: float = 1.0
    neighborhood_radius_s: float = 300.0
    mean_action_levels: int = 4
    obs_zones_per_side: int = 3
    value_gamma: float = 0.9
    value_learning_rate: float = 0.1
    value_zones_per_side: int = 3
    time_bucket_s: float = 3600.0
    tariff: Tariff = Tariff(flag=2.5, per_second=0.01)
    max_trip_requests: int | None = None
    seed: int = 0
    horizon_epochs: int = 60

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if self.fleet_size < 1:
            raise ValueError("fleet_size must be >= 1")
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.epoch_seconds <= 0:
            raise ValueError("epoch_seconds must be positive")
        if self.max_pickup_delay_s < 0 or self.max_detour_delay_s < 0:
            raise ValueError("delay limits must be >= 0")
        if self.horizon_epochs < 0:
            raise ValueError("horizon_epochs must be >= 0")
        if self.pricing_kind == "F" and 1.0 not in self.action_factors:
            raise ValueError("fixed-price policies need 1.0 in the action set")

    @property
    def pricing_kind(self) -> str:
        return self.policy.split("&")[0]

    @property
    def matching_mode(self) -> str:
        return self.policy.split("&", 1)[1]

    @property
    def trip_size_cap(self) -> int:
        return self.capacity if self.max_trip_requests is None else self.max_trip_requests


@dataclass
class EpochMetrics:
    epoch: int
    revenue: float
    offers: int
    accepts: int
    served: int
    dropped: int
    distance_m: float
    # kept in memory only; the CSV schema is fixed by METRICS_HEADER
    vehicle_utilization: dict[str, float] = field(default_factory=dict, repr=False)


def format_metrics_row(m: EpochMetrics) -> str:
    return (f"{m.epoch},{m.revenue!r},{m.offers},{m.accepts},"
            f"{m.served},{m.dropped},{m.distance_m!r}")


def write_metrics_csv(metrics: list[EpochMetrics], path: str | Path) -> None:
    lines = [METRICS_HEADER] + [format_metrics_row(m) for m in metrics]
    Path(path).write_text("\n".join(lines) + "\n")


def read_metrics_csv(path: str | Path) -> list[EpochMetrics]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRICS_HEADER.split(","):
            raise ValueError(f"{path}: unexpected metrics header {reader.fieldnames}")
        for row in reader:
            out.append(EpochMetrics(
                epoch=int(row["epoch"]), revenue=float(row["revenue"]),
                offers=int(row["offers"]), accepts=int(row["accepts"]),
                served=int(row["served"]), dropped=int(row["dropped"]),
                distance_m=float(row["distance_m"])))
    return out


@dataclass
class RequestRecord:
    id: str
    arrival_time: float
    direct_travel_time: float
    base_price: float


@dataclass
class OfferRecord:
    epoch: int
    request_id: str
    vehicle_id: str
    quoted: float
    base: float
    accepted: bool


@dataclass
class AssignmentRecord:
    epoch: int
    vehicle_id: str
    request_ids: tuple[str, ...]


@dataclass
class ServiceEvent:
    time: float
    request_id: str
    vehicle_id: str
    kind: str     # PICKUP or DROPOFF


class ServiceLog:
    """Append-only record of everything needed to audit a run after the
    fact: requests, price offers, accepted assignments, and the executed
    pickup/dropoff events in execution order."""

    def __init__(self):
        self.requests: dict[str, RequestRecord] = {}
        self.offers: list[OfferRecord] = []
        self.assignments: list[AssignmentRecord] = []
        self.events: list[ServiceEvent] = []

    def register_request(self, req: Request, direct_tt: float) -> None:
        self.requests[req.id] = RequestRecord(req.id, req.arrival_time, direct_tt,
                                              req.base_price)

    def record_offer(self, epoch, request_id, vehicle_id, quoted, base, accepted) -> None:
        self.offers.append(OfferRecord(epoch, request_id, vehicle_id, quoted, base, accepted))

    def record_assignment(self, epoch, vehicle_id, request_ids) -> None:
        self.assignments.append(AssignmentRecord(epoch, vehicle_id, tuple(request_ids)))

    def record_event(self, time, request_id, vehicle_id, kind) -> None:
        self.events.append(ServiceEvent(time, request_id, vehicle_id, kind))


def verify_service_log(log: ServiceLog, capacities: dict[str, int],
                       max_pickup_delay: float, max_detour_delay: float,
                       tol: float = 1e-6) -> list[str]:
    """Independent audit of a run from its log alone.

    Checks request uniqueness, pickup delay at actual service times, detour
    delay, and physical seat occupancy. Returns a list of violation
    descriptions; an empty list means a clean run.
    """
    violations: list[str] = []

    assigned_once: set[str] = set()
    for rec in log.assignments:
        for rid in rec.request_ids:
            if rid in assigned_once:
                violations.append(f"request {rid} assigned more than once")
            assigned_once.add(rid)

    picked: dict[str, ServiceEvent] = {}
    dropped: set[str] = set()
    occupancy: dict[str, int] = {}
    last_time: dict[str, float] = {}
    for ev in log.events:
        if ev.request_id not in log.requests:
            violations.append(f"event for unknown request {ev.request_id}")
            continue
        if ev.time < last_time.get(ev.vehicle_id, float("-inf")) - tol:
            violations.append(f"vehicle {ev.vehicle_id}: events out of time order at {ev.time}")
        last_time[ev.vehicle_id] = ev.time
        rec = log.requests[ev.request_id]
        if ev.kind == PICKUP:
            if ev.request_id in picked:
                violations.append(f"request {ev.request_id} picked up twice")
            picked[ev.request_id] = ev
            if ev.time - rec.arrival_time > max_pickup_delay + tol:
                violations.append(
                    f"request {ev.request_id}: pickup delay {ev.time - rec.arrival_time:.1f}s "
                    f"exceeds {max_pickup_delay}s")
            occupancy[ev.vehicle_id] = occupancy.get(ev.vehicle_id, 0) + 1
            if occupancy[ev.vehicle_id] > capacities[ev.vehicle_id]:
                violations.append(f"vehicle {ev.vehicle_id}: occupancy "
                                  f"{occupancy[ev.vehicle_id]} exceeds capacity")
        elif ev.kind == DROPOFF:
            if ev.request_id in dropped:
                violations.append(f"request {ev.request_id} dropped off twice")
            dropped.add(ev.request_id)
            pick = picked.get(ev.request_id)
            if pick is None:
                violations.append(f"request {ev.request_id} dropped off before pickup")
                continue
            if pick.vehicle_id != ev.vehicle_id:
                violations.append(f"request {ev.request_id} served by two vehicles")
            detour = (ev.time - pick.time) - rec.direct_travel_time
            if detour > max_detour_delay + tol:
                violations.append(
                    f"request {ev.request_id}: detour {detour:.1f}s exceeds {max_detour_delay}s")
            occupancy[ev.vehicle_id] = occupancy.get(ev.vehicle_id, 0) - 1
        else:
            violations.append(f"unknown event kind {ev.kind!r}")
    return violations


def build_pricer(config: SimConfig):
    n = len(config.action_factors)
    kind = config.pricing_kind
    if kind == "M":
        return MeanFieldQTable(n, config.pricing_alpha, config.pricing_gamma,
                               config.pricing_beta, config.mean_action_levels)
    if kind == "Q":
        return PlainQTable(n, config.pricing_alpha, config.pricing_gamma,
                           config.pricing_beta)
    return FixedPricer(n, config.action_factors.index(1.0))


def build_value_function(config: SimConfig, net: RoadNetwork) -> ValueFunction:
    return ValueFunction(net, config.value_gamma, config.value_learning_rate,
                         config.value_zones_per_side, config.time_bucket_s)


class World:
    """Mutable simulation state: vehicles, learners, rng substreams, log."""

    def __init__(self, net: RoadNetwork, config: SimConfig, demand,
                 pricer=None, value_function=None):
        self.net = net
        self.config = config
        self.demand = demand
        self.pricer = pricer if pricer is not None else build_pricer(config)
        self.value_function = (value_function if value_function is not None
                               else build_value_function(config, net))
        self.encoder = ObservationEncoder(net, ObservationSpec(config.obs_zones_per_side))
        self.objective = MatchObjective(config.matching_mode, config.sensitivity)

        children = np.random.SeedSequence(config.seed).spawn(len(RNG_STREAMS))
        self.rng = {name: np.random.default_rng(seq)
                    for name, seq in zip(RNG_STREAMS, children)}

        # deterministic spread of the fleet over the location list
        n_loc = len(net)
        self.vehicles = [
            Vehicle(id=f"v{i:03d}", location=net.ids[(i * n_loc) // config.fleet_size],
                    capacity=config.capacity)
            for i in range(config.fleet_size)
        ]

        self.epoch = 0
        self.log = ServiceLog()
        self.last_problem: AssignmentProblem | None = None
        self.last_solution: AssignmentSolution | None = None
        self._last_action: dict[str, int | None] = {v.id: None for v in self.vehicles}
        self._pending_pricing: dict[str, tuple] = {}
        self._last_post: dict[str, object] = {}

    @property
    def time(self) -> float:
        return self.epoch * self.config.epoch_seconds

    def _advance_vehicle(self, v: Vehicle, until: float) -> None:
        while v.route_plan and v.route_plan[0].time <= until:
            stop = v.route_plan.pop(0)
            v.cumulative_distance_m += self.net.distance_m(v.location, stop.location)
            v.location = stop.location
            v.available_at = stop.time
            if stop.kind == PICKUP:
                for i, r in enumerate(v.committed):
                    if r.id == stop.request_id:
                        v.onboard.append(OnboardPassenger(v.committed.pop(i), stop.time))
                        break
                else:
                    raise RuntimeError(f"vehicle {v.id}: pickup for uncommitted "
                                       f"request {stop.request_id}")
            else:
                for i, p in enumerate(v.onboard):
                    if p.request.id == stop.request_id:
                        v.onboard.pop(i)
                        break
                else:
                    raise RuntimeError(f"vehicle {v.id}: dropoff for absent "
                                       f"request {stop.request_id}")
            self.log.record_event(stop.time, stop.request_id, v.id, stop.kind)

    def step(self, train: bool = True) -> EpochMetrics:
        cfg = self.config
        epoch = self.epoch
        t_start = epoch * cfg.epoch_seconds
        t_now = t_start + cfg.epoch_seconds
        dist_before = {v.id: v.cumulative_distance_m for v in self.vehicles}

        # 1. motion along the committed plans
        for v in self.vehicles:
            self._advance_vehicle(v, t_now)

        # 2. batch this epoch's requests; delays are measured from arrival
        batch = sorted(self.demand.requests_for_epoch(epoch, self.rng["demand"]),
                       key=lambda r: r.id)
        for r in batch:
            r.arrival_time = t_start
            self.log.register_request(r, self.net.travel_time(r.origin, r.destination))

        # 3. pricing: every vehicle reads an epoch snapshot (neighbors' actions
        #    are last epoch's), then selects a factor
        n_actions = len(cfg.action_factors)
        obs: dict[str, tuple] = {}
        means: dict[str, np.ndarray] = {}
        factors: dict[str, float] = {}
        actions: dict[str, int] = {}
        neighborhoods = {
            v.id: neighbors_within(self.net, v, cfg.neighborhood_radius_s, self.vehicles)
            for v in self.vehicles
        }
        for v in self.vehicles:
            local_requests = sum(
                1 for r in batch
                if self.net.travel_time(v.location, r.origin) <= cfg.max_pickup_delay_s)
            obs[v.id] = self.encoder.encode(v.location, len(neighborhoods[v.id]),
                                            local_requests)
            prev = [self._last_action[n.id] for n in neighborhoods[v.id]
                    if self._last_action[n.id] is not None]
            means[v.id] = mean_action(prev, n_actions)
        for v in self.vehicles:
            a = self.pricer.select_action(obs[v.id], means[v.id], self.rng["pricing"])
            actions[v.id] = a
            factors[v.id] = cfg.action_factors[a]

        # 4. feasible trips
        trips_by_vehicle = generate_feasible_trips(
            self.vehicles, batch, self.net, cfg.max_pickup_delay_s,
            cfg.max_detour_delay_s, min(cfg.trip_size_cap, cfg.capacity), now=t_now)

        # 5. scoring with each vehicle's own candidate prices
        candidates: dict[str, list[ScoredTrip]] = {}
        for v in self.vehicles:
            scored = []
            for trip in trips_by_vehicle[v.id]:
                prices = {r.id: candidate_price(r.base_price, factors[v.id])
                          for r in trip.requests}
                s = score_trip(v, trip, prices, self.value_function, self.objective, t_now)
                scored.append(ScoredTrip(v.id, trip.key, s, trip))
            candidates[v.id] = scored
        problem = AssignmentProblem(candidates)
        self.last_problem = problem

        # 6. central assignment
        solution = solve(problem)
        self.last_solution = solution

        # post-decision states are a function of the pre-offer vehicle state
        posts = {
            v.id: post_decision_state(v, solution.chosen[v.id].trip, t_now,
                                      cfg.time_bucket_s)
            for v in self.vehicles
        }

        # 7. offers, acceptance sampling, trip shrinking
        offers = 0
        accepts = 0
        rewards: dict[str, float] = {}
        for v in self.vehicles:
            chosen: Trip = solution.chosen[v.id].trip
            accepted: list[Request] = []
            for r in chosen.requests:
                quoted = candidate_price(r.base_price, factors[v.id])
                r.quoted_price = quoted
                p = acceptance_probability(quoted, r.base_price, cfg.sensitivity)
                ok = sample_acceptance(p, self.rng["acceptance"])
                offers += 1
                accepts += int(ok)
                self.log.record_offer(epoch, r.id, v.id, quoted, r.base_price, ok)
                if ok:
                    accepted.append(r)
            if chosen.requests:
                shrunk = feasible_insertion(v, accepted, self.net,
                                            cfg.max_pickup_delay_s,
                                            cfg.max_detour_delay_s, now=t_now)
                if shrunk is None:
                    raise RuntimeError(
                        f"epoch {epoch}: accepted subset {[r.id for r in accepted]} "
                        f"infeasible for vehicle {v.id}; subset closure violated")
                v.route_plan = list(shrunk.route_plan)
                v.committed.extend(accepted)
                if accepted:
                    self.log.record_assignment(epoch, v.id, [r.id for r in accepted])
            rewards[v.id] = sum(r.quoted_price for r in accepted)

        # 8-9. learning updates at the end-of-epoch barrier
        if train:
            for v in self.vehicles:
                pending = self._pending_pricing.get(v.id)
                if pending is not None:
                    p_obs, p_action, p_mean, p_reward = pending
                    self.pricer.update(PricingTransition(
                        p_obs, p_action, p_mean, p_reward,
                        next_obs=obs[v.id], next_mean=means[v.id]))
                last_post = self._last_post.get(v.id)
                if last_post is not None:
                    self.value_function.td_update(last_post, rewards[v.id], posts[v.id])
        for v in self.vehicles:
            self._pending_pricing[v.id] = (obs[v.id], actions[v.id], means[v.id],
                                           rewards[v.id])
            self._last_post[v.id] = posts[v.id]
            self._last_action[v.id] = actions[v.id]

        # 10. metrics
        revenue = sum(rewards[v.id] for v in self.vehicles)
        distance = sum(v.cumulative_distance_m - dist_before[v.id] for v in self.vehicles)
        utilization = {v.id: v.seats_taken / v.capacity for v in self.vehicles}
        self.epoch += 1
        return EpochMetrics(
            epoch=epoch, revenue=revenue, offers=offers, accepts=accepts,
            served=accepts, dropped=len(batch) - accepts, distance_m=distance,
            vehicle_utilization=utilization)

    def finish_training(self) -> None:
        """Flush terminal transitions: no next state, targets are the
        realized rewards alone."""
        for v in self.vehicles:
            pending = self._pending_pricing.pop(v.id, None)
            if pending is not None:
                p_obs, p_action, p_mean, p_reward = pending
                self.pricer.update(PricingTransition(p_obs, p_action, p_mean, p_reward))
            last_post = self._last_post.pop(v.id, None)
            if last_post is not None:
                self.value_function.td_update(last_post, 0.0, None)


def run(config: SimConfig, demand, net: RoadNetwork, mode: str = "train",
        pricer=None, value_function=None) -> tuple[list[EpochMetrics], World]:
    """Run the epoch loop for the configured horizon.

    Train mode applies learning updates; eval mode freezes the learners.
    Returns the metrics stream and the final world (which carries the
    learners and the service log).
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    world = World(net, config, demand, pricer, value_function)
    train = mode == "train"
    metrics = [world.step(train=train) for _ in range(config.horizon_epochs)]
    if train:
        world.finish_training()
    return metrics, world
