"""Feasible trip enumeration under capacity, pickup-delay, and detour-delay
constraints.

A trip is a combination of new requests for one vehicle together with a
validated stop plan. The plan must also carry every passenger the vehicle
has already committed to: onboard passengers keep their dropoffs, and
accepted-but-not-yet-picked-up passengers keep both stops. Both groups are
re-validated against the delay limits on every insertion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .demand import Request
from .network import RoadNetwork

PICKUP = "pickup"
DROPOFF = "dropoff"


@dataclass(frozen=True)
class Stop:
    location: str
    time: float            # absolute scheduled seconds
    kind: str              # PICKUP or DROPOFF
    request_id: str


@dataclass
class OnboardPassenger:
    request: Request
    pickup_time: float


@dataclass
class Vehicle:
    """Capacity-constrained agent with its current route plan.

    ``onboard`` passengers are physically in the vehicle; ``committed``
    passengers accepted a price and await pickup. Both occupy seats.
    """

    id: str
    location: str
    capacity: int
    available_at: float = 0.0
    onboard: list[OnboardPassenger] = field(default_factory=list)
    committed: list[Request] = field(default_factory=list)
    route_plan: list[Stop] = field(default_factory=list)
    cumulative_distance_m: float = 0.0

    @property
    def seats_taken(self) -> int:
        return len(self.onboard) + len(self.committed)

    @property
    def seats_free(self) -> int:
        return self.capacity - self.seats_taken


@dataclass(frozen=True)
class Trip:
    """A feasible combination of new requests plus the validated plan.

    ``pickup_delays`` and ``detour_delays`` cover the new requests only;
    constraints for passengers already carried are enforced during search.
    The empty-request trip keeps the vehicle's current plan unchanged.
    """

    vehicle_id: str
    requests: tuple[Request, ...]
    route_plan: tuple[Stop, ...]
    pickup_delays: dict[str, float]
    detour_delays: dict[str, float]
    total_route_time: float

    @property
    def key(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.requests)


def feasible_insertion(vehicle: Vehicle, requests: Iterable[Request], net: RoadNetwork,
                       max_pickup_delay: float, max_detour_delay: float,
                       now: float | None = None) -> Trip | None:
    """Minimum-total-route-time feasible plan serving the vehicle's current
    commitments plus the given new requests, or None.

    The search is exhaustive over stop orderings (every pickup precedes its
    dropoff). Pickup delay is measured from each request's arrival time and
    detour delay as in-vehicle time in excess of the direct travel time.
    Ties among minimum-time plans break on lexicographic stop order.
    """
    new_reqs = tuple(sorted(requests, key=lambda r: r.id))
    if now is None:
        now = vehicle.available_at
    start_time = max(now, vehicle.available_at)

    if len(new_reqs) + vehicle.seats_taken > vehicle.capacity:
        raise ValueError(
            f"vehicle {vehicle.id}: {len(new_reqs)} new requests exceed free seats "
            f"({vehicle.seats_free} of {vehicle.capacity})")

    if not new_reqs:
        plan = tuple(vehicle.route_plan)
        total = plan[-1].time - start_time if plan else 0.0
        return Trip(vehicle.id, (), plan, {}, {}, max(total, 0.0))

    # one task per pending stop, in lexicographic (request id, kind) order
    tasks: list[tuple[Request, str]] = []
    boarded_at: dict[str, float] = {}
    for p in vehicle.onboard:
        tasks.append((p.request, DROPOFF))
        boarded_at[p.request.id] = p.pickup_time
    for r in itertools.chain(vehicle.committed, new_reqs):
        tasks.append((r, PICKUP))
        tasks.append((r, DROPOFF))
    tasks.sort(key=lambda t: (t[0].id, 0 if t[1] == PICKUP else 1))

    direct = {}
    for r, _ in tasks:
        if r.id not in direct:
            direct[r.id] = net.travel_time(r.origin, r.destination)
        if r.arrival_time is None and r.id not in boarded_at:
            raise ValueError(f"request {r.id} has no arrival_time; cannot check pickup delay")

    n = len(tasks)
    capacity = vehicle.capacity
    best_total = float("inf")
    best_order: list[int] | None = None
    best_times: list[float] | None = None
    used = [False] * n
    order: list[int] = []
    times: list[float] = []
    picked = dict(boarded_at)

    def search(loc: str, t: float, occupancy: int) -> None:
        nonlocal best_total, best_order, best_times
        if t - start_time >= best_total:
            return
        if len(order) == n:
            best_total = t - start_time
            best_order = list(order)
            best_times = list(times)
            return
        for i in range(n):
            if used[i]:
                continue
            r, kind = tasks[i]
            if kind == DROPOFF and r.id not in picked:
                continue
            if kind == PICKUP:
                stop_loc = r.origin
                t2 = t + net.travel_time(loc, stop_loc)
                if t2 - r.arrival_time > max_pickup_delay:
                    continue
                if occupancy + 1 > capacity:
                    continue
                picked[r.id] = t2
                occ2 = occupancy + 1
            else:
                stop_loc = r.destination
                t2 = t + net.travel_time(loc, stop_loc)
                if (t2 - picked[r.id]) - direct[r.id] > max_detour_delay:
                    continue
                occ2 = occupancy - 1
            used[i] = True
            order.append(i)
            times.append(t2)
            search(stop_loc, t2, occ2)
            used[i] = False
            order.pop()
            times.pop()
            if kind == PICKUP:
                del picked[r.id]

    search(vehicle.location, start_time, len(vehicle.onboard))
    if best_order is None:
        return None

    plan = []
    sched_pick: dict[str, float] = {}
    sched_drop: dict[str, float] = {}
    for i, t in zip(best_order, best_times):
        r, kind = tasks[i]
        loc = r.origin if kind == PICKUP else r.destination
        plan.append(Stop(loc, t, kind, r.id))
        if kind == PICKUP:
            sched_pick[r.id] = t
        else:
            sched_drop[r.id] = t
    pickup_delays = {r.id: sched_pick[r.id] - r.arrival_time for r in new_reqs}
    detour_delays = {r.id: sched_drop[r.id] - sched_pick[r.id] - direct[r.id]
                     for r in new_reqs}
    return Trip(vehicle.id, new_reqs, tuple(plan), pickup_delays, detour_delays, best_total)


def generate_feasible_trips(vehicles: Sequence[Vehicle], requests: Sequence[Request],
                            net: RoadNetwork, max_pickup_delay: float,
                            max_detour_delay: float, size_cap: int | None = None,
                            now: float | None = None) -> dict[str, list[Trip]]:
    """All feasible trips per vehicle: the empty trip, feasible singletons,
    and each size-k combination whose size-(k-1) subsets were all feasible.

    The monotone pruning is exact because feasibility is closed under
    subsets (dropping stops never lengthens any remaining leg).
    """
    if size_cap is None:
        size_cap = max((v.capacity for v in vehicles), default=0)
    elif vehicles and size_cap > max(v.capacity for v in vehicles):
        raise ValueError("size_cap exceeds the maximum vehicle capacity")

    reqs = sorted(requests, key=lambda r: r.id)
    out: dict[str, list[Trip]] = {}
    for v in vehicles:
        trips = [feasible_insertion(v, (), net, max_pickup_delay, max_detour_delay, now)]
        feasible_prev: dict[frozenset[str], Trip] = {}
        by_id = {}
        for r in reqs:
            if v.seats_free < 1:
                break
            t = feasible_insertion(v, (r,), net, max_pickup_delay, max_detour_delay, now)
            if t is not None:
                feasible_prev[frozenset([r.id])] = t
                by_id[r.id] = r
        trips.extend(feasible_prev[k] for k in sorted(feasible_prev, key=sorted))

        pool = sorted(by_id)
        k = 2
        while k <= min(size_cap, v.seats_free) and len(feasible_prev) >= k:
            feasible_k: dict[frozenset[str], Trip] = {}
            for combo in itertools.combinations(pool, k):
                ids = frozenset(combo)
                if any(ids - {rid} not in feasible_prev for rid in combo):
                    continue
                t = feasible_insertion(v, [by_id[rid] for rid in combo], net,
                                       max_pickup_delay, max_detour_delay, now)
                if t is not None:
                    feasible_k[ids] = t
            trips.extend(feasible_k[key] for key in sorted(feasible_k, key=sorted))
            feasible_prev = feasible_k
            k += 1
        out[v.id] = sorted(trips, key=lambda t: t.key)
    return out
