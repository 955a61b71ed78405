"""Road network with precomputed shortest-path travel times.

Locations are string ids with planar coordinates in meters. Arcs are
directed and carry a strictly positive travel time in seconds.
Construction keeps only the largest strongly connected component, so
every retained location can reach every other one and all travel-time
matrix entries are finite.

The network is immutable after construction and safe for concurrent
reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra


@dataclass(frozen=True)
class RoadNetwork:
    ids: tuple[str, ...]
    coords: np.ndarray                # (n, 2) planar meters
    travel_time_matrix: np.ndarray    # (n, n) seconds, shortest-path
    distance_matrix: np.ndarray       # (n, n) meters along the min-time path
    index: dict[str, int] = field(repr=False, default_factory=dict)

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, loc: str) -> bool:
        return loc in self.index

    def location_index(self, loc: str) -> int:
        try:
            return self.index[loc]
        except KeyError:
            raise ValueError(f"unknown location id: {loc!r}") from None

    def travel_time(self, origin: str, dest: str) -> float:
        """Shortest travel time in seconds between two locations."""
        return float(self.travel_time_matrix[self.location_index(origin),
                                             self.location_index(dest)])

    def distance_m(self, origin: str, dest: str) -> float:
        """Length in meters of the minimum-time path between two locations."""
        return float(self.distance_matrix[self.location_index(origin),
                                          self.location_index(dest)])

    def coords_of(self, loc: str) -> tuple[float, float]:
        x, y = self.coords[self.location_index(loc)]
        return float(x), float(y)

    def bounding_box(self) -> tuple[float, float, float, float]:
        xs, ys = self.coords[:, 0], self.coords[:, 1]
        return float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())


def load_network(node_records: Iterable[Sequence], arc_records: Iterable[Sequence]) -> RoadNetwork:
    """Build a network from (id, x, y) nodes and (from, to, seconds) arcs.

    The result is restricted to the largest strongly connected component;
    nodes without outgoing arcs therefore never survive. Raises ValueError
    for an empty node set, duplicate node ids, unknown arc endpoints,
    non-positive arc times, or a surviving component of fewer than 2 nodes.
    """
    nodes = [(str(i), float(x), float(y)) for i, x, y in node_records]
    if not nodes:
        raise ValueError("empty node set")
    ids = [i for i, _, _ in nodes]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate node ids")
    index = {node_id: k for k, (node_id, _, _) in enumerate(nodes)}
    coords = np.array([(x, y) for _, x, y in nodes], dtype=float)

    arcs = []
    for u, v, seconds in arc_records:
        u, v, seconds = str(u), str(v), float(seconds)
        if u not in index or v not in index:
            raise ValueError(f"arc endpoint not a known node: {u!r} -> {v!r}")
        if seconds <= 0:
            raise ValueError(f"non-positive arc travel time on {u!r} -> {v!r}: {seconds}")
        arcs.append((index[u], index[v], seconds))

    n = len(nodes)
    weights = np.full((n, n), np.inf)
    for ui, vi, seconds in arcs:
        if ui != vi:
            weights[ui, vi] = min(weights[ui, vi], seconds)

    graph = csr_matrix(np.where(np.isfinite(weights), weights, 0.0))
    n_comp, labels = connected_components(graph, directed=True, connection="strong")
    keep_label = int(np.bincount(labels, minlength=n_comp).argmax())
    keep = [k for k in range(n) if labels[k] == keep_label]
    if len(keep) < 2:
        raise ValueError("largest strongly connected component has fewer than 2 locations")

    sub_ids = tuple(ids[k] for k in keep)
    sub_coords = coords[keep]
    sub_weights = weights[np.ix_(keep, keep)]
    sub_graph = csr_matrix(np.where(np.isfinite(sub_weights), sub_weights, 0.0))
    tt, predecessors = dijkstra(sub_graph, directed=True, return_predecessors=True)
    if not np.all(np.isfinite(tt)):
        raise AssertionError("strong component produced unreachable pairs")

    dist = _path_lengths_m(tt, predecessors, sub_coords)
    return RoadNetwork(
        ids=sub_ids,
        coords=sub_coords,
        travel_time_matrix=tt,
        distance_matrix=dist,
        index={node_id: k for k, node_id in enumerate(sub_ids)},
    )


def _path_lengths_m(tt: np.ndarray, predecessors: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Meters along each minimum-time path, with arc length taken as the
    euclidean separation of its endpoints."""
    n = len(coords)
    arc_len = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2))
    dist = np.zeros((n, n))
    for i in range(n):
        # predecessors lie on shorter paths, so filling in travel-time order
        # guarantees the predecessor's distance is already known
        for j in np.argsort(tt[i]):
            if j == i:
                continue
            p = predecessors[i, j]
            dist[i, j] = dist[i, p] + arc_len[p, j]
    return dist


def parse_network_file(path: str | Path) -> RoadNetwork:
    """Read the plain-text network format.

    Node lines are ``N <id> <x_m> <y_m>``, arc lines ``E <from> <to> <seconds>``;
    text after ``#`` is ignored.
    """
    nodes, arcs = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "N" and len(parts) == 4:
            nodes.append((parts[1], parts[2], parts[3]))
        elif parts[0] == "E" and len(parts) == 4:
            arcs.append((parts[1], parts[2], parts[3]))
        else:
            raise ValueError(f"{path}:{lineno}: unrecognized network line: {raw!r}")
    return load_network(nodes, arcs)


def grid_network(side: int, arc_seconds: float = 30.0, spacing_m: float = 500.0) -> RoadNetwork:
    """Uniform side x side grid with 4-neighbor arcs in both directions.

    Node ids are row-major decimal strings. Handy as a synthetic default:
    shortest times are hop counts times ``arc_seconds``, which makes oracle
    values easy to compute by hand.
    """
    if side < 2:
        raise ValueError("grid needs side >= 2")
    nodes = []
    arcs = []
    for r in range(side):
        for c in range(side):
            nodes.append((str(r * side + c), c * spacing_m, r * spacing_m))
    for r in range(side):
        for c in range(side):
            u = r * side + c
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                r2, c2 = r + dr, c + dc
                if 0 <= r2 < side and 0 <= c2 < side:
                    arcs.append((str(u), str(r2 * side + c2), arc_seconds))
    return load_network(nodes, arcs)


def location_of(entity) -> str:
    """Location id of a located entity; bare location ids pass through."""
    return getattr(entity, "location", entity)


def neighbors_within(net: RoadNetwork, center, radius_seconds: float, candidates: Sequence) -> list:
    """Candidates whose location lies within the travel-time radius of the
    center, excluding the center entity itself (compared by identity)."""
    if radius_seconds < 0:
        raise ValueError("radius_seconds must be >= 0")
    origin = location_of(center)
    out = []
    for cand in candidates:
        if cand is center:
            continue
        if net.travel_time(origin, location_of(cand)) <= radius_seconds:
            out.append(cand)
    return out


def coarse_zone(net: RoadNetwork, loc: str, zones_per_side: int) -> int:
    """Index of the coarse spatial zone containing a location.

    The network bounding box is split into zones_per_side^2 equal cells.
    """
    xmin, ymin, xmax, ymax = net.bounding_box()
    x, y = net.coords_of(loc)
    w = max(xmax - xmin, 1e-9)
    h = max(ymax - ymin, 1e-9)
    zx = min(int((x - xmin) / w * zones_per_side), zones_per_side - 1)
    zy = min(int((y - ymin) / h * zones_per_side), zones_per_side - 1)
    return zy * zones_per_side + zx
