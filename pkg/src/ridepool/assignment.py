"""Exact centralized assignment of vehicles to candidate trips.

One trip per vehicle (the empty trip is always a candidate, so the problem
is never infeasible), each request in at most one chosen trip, total score
maximized. Solved by branch and bound over the set-packing structure with
a conflict-free per-vehicle-best bound; no external solver needed at desk
scale. Tie-breaks are deterministic: lexicographic by vehicle id, then by
trip request ids.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


@dataclass(frozen=True)
class ScoredTrip:
    vehicle_id: str
    request_ids: tuple[str, ...]    # sorted; () is the empty trip
    score: float
    trip: Any = field(default=None, compare=False)


@dataclass(frozen=True)
class AssignmentProblem:
    candidates: dict[str, list[ScoredTrip]]

    def __post_init__(self):
        for vid, cands in self.candidates.items():
            if not cands:
                raise ValueError(f"vehicle {vid}: empty candidate set")
            keys = [c.request_ids for c in cands]
            if () not in keys:
                raise ValueError(f"vehicle {vid}: candidate set lacks the empty trip")
            if len(set(keys)) != len(keys):
                raise ValueError(f"vehicle {vid}: duplicate candidate trips")
            for c in cands:
                if c.vehicle_id != vid:
                    raise ValueError(f"candidate vehicle id {c.vehicle_id} filed under {vid}")
                if tuple(sorted(c.request_ids)) != c.request_ids:
                    raise ValueError(f"candidate request ids not sorted: {c.request_ids}")
                if not math.isfinite(c.score):
                    raise ValueError(f"non-finite score for {vid} {c.request_ids}")

    @property
    def request_ids(self) -> set[str]:
        return {r for cands in self.candidates.values() for c in cands for r in c.request_ids}


@dataclass(frozen=True)
class AssignmentSolution:
    chosen: dict[str, ScoredTrip]
    objective: float


def solve(problem: AssignmentProblem) -> AssignmentSolution:
    """Exact maximum-score assignment.

    Depth-first over vehicles in id order with candidates in trip-key order,
    so the first optimum found is the lexicographically smallest one. Every
    objective (and every bound) is a correctly rounded sum via math.fsum:
    sums depend only on the score multiset, true ties compare bit-identically,
    and pruning on bound <= incumbent can never discard a strictly better
    completion. brute_force_solve uses the same comparison, so both agree
    exactly.

    Two complementary upper bounds are taken jointly: a vehicle-side bound
    (each remaining vehicle gets its best conflict-free candidate; tight when
    requests are scarce per vehicle) and a request-side bound (remaining
    vehicles keep their empty-trip score and each free request contributes at
    most its best single-trip gain; tight when many vehicles compete for the
    same few requests).
    """
    vids = sorted(problem.candidates)
    cands = [sorted(problem.candidates[v], key=lambda c: c.request_ids) for v in vids]
    n = len(vids)

    empty_score = [next(c.score for c in cs if c.request_ids == ()) for cs in cands]
    # best achievable gain over idling for each request, over vehicles j >= i
    all_requests = sorted({r for cs in cands for c in cs for r in c.request_ids})
    gain_suffix: list[dict[str, float]] = [dict() for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row = dict(gain_suffix[i + 1])
        for c in cands[i]:
            g = c.score - empty_score[i]
            for r in c.request_ids:
                if g > row.get(r, 0.0):
                    row[r] = g
        gain_suffix[i] = row

    best_value = -math.inf
    best_choice: list[ScoredTrip] | None = None
    choice: list[ScoredTrip] = []
    scores: list[float] = []
    used: set[str] = set()

    def bound(i: int) -> float:
        by_vehicle = scores[:]
        for j in range(i, n):
            by_vehicle.append(max(c.score for c in cands[j]
                                  if not any(r in used for r in c.request_ids)))
        by_request = scores[:]
        by_request.extend(empty_score[i:])
        row = gain_suffix[i]
        by_request.extend(row[r] for r in row if r not in used)
        return min(math.fsum(by_vehicle), math.fsum(by_request))

    def descend(i: int) -> None:
        nonlocal best_value, best_choice
        if i == n:
            value = math.fsum(scores)
            if value > best_value:
                best_value = value
                best_choice = list(choice)
            return
        if bound(i) <= best_value:
            return
        for cand in cands[i]:
            if any(r in used for r in cand.request_ids):
                continue
            used.update(cand.request_ids)
            choice.append(cand)
            scores.append(cand.score)
            descend(i + 1)
            scores.pop()
            choice.pop()
            used.difference_update(cand.request_ids)

    descend(0)
    assert best_choice is not None
    return AssignmentSolution({v: c for v, c in zip(vids, best_choice)}, best_value)


def brute_force_solve(problem: AssignmentProblem, max_candidates: int = 24) -> AssignmentSolution:
    """Exhaustive enumeration oracle with the same tie-break as solve."""
    total = sum(len(c) for c in problem.candidates.values())
    if total > max_candidates:
        raise ValueError(f"instance too large for enumeration: {total} candidate trips")
    vids = sorted(problem.candidates)
    cands = [sorted(problem.candidates[v], key=lambda c: c.request_ids) for v in vids]

    best_value = -math.inf
    best_combo = None
    for combo in itertools.product(*cands):
        seen: set[str] = set()
        ok = True
        for c in combo:
            for r in c.request_ids:
                if r in seen:
                    ok = False
                    break
                seen.add(r)
            if not ok:
                break
        if not ok:
            continue
        value = math.fsum(c.score for c in combo)
        if value > best_value:
            best_value = value
            best_combo = combo
    assert best_combo is not None
    return AssignmentSolution({v: c for v, c in zip(vids, best_combo)}, best_value)


def dump_problem(problem: AssignmentProblem, path: str | Path) -> None:
    """Write one candidate per line (vehicle, request ids, score) for
    offline debugging."""
    lines = []
    for vid in sorted(problem.candidates):
        for c in sorted(problem.candidates[vid], key=lambda c: c.request_ids):
            ids = ",".join(c.request_ids) if c.request_ids else "-"
            lines.append(f"{vid}\t{ids}\t{c.score!r}")
    Path(path).write_text("\n".join(lines) + "\n")
