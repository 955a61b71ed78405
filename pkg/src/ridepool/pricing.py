"""Per-vehicle price-factor learners.

Each vehicle picks one discrete multiplier on the base price per epoch.
The mean-field learner conditions its tabular Q function on a discretized
summary of neighboring vehicles' choices; a plain Q-learning table and a
fixed-factor pricer serve as baselines. Action selection is Boltzmann
softmax over Q values.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .network import RoadNetwork, coarse_zone

DEFAULT_ACTION_FACTORS = (0.8, 0.9, 1.0, 1.1, 1.2)

CHECKPOINT_FORMAT = "ridepool-pricer"
CHECKPOINT_VERSION = 1


def mean_action(neighbor_actions: Sequence[int], n_actions: int) -> np.ndarray:
    """Average of the neighbors' one-hot action encodings.

    Falls back to the uniform vector when the neighborhood is empty.
    """
    if n_actions <= 0:
        raise ValueError("n_actions must be positive")
    if len(neighbor_actions) == 0:
        return np.full(n_actions, 1.0 / n_actions)
    v = np.zeros(n_actions)
    for a in neighbor_actions:
        if not 0 <= a < n_actions:
            raise ValueError(f"action index out of range: {a}")
        v[a] += 1.0
    return v / len(neighbor_actions)


def boltzmann_probabilities(values: np.ndarray, beta: float) -> np.ndarray:
    """Softmax over beta-scaled values, guarded against overflow by
    max-subtraction. beta = 0 gives the uniform distribution."""
    z = beta * np.asarray(values, dtype=float)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def candidate_price(base: float, factor: float) -> float:
    """Quoted price for a request: base price times the vehicle's factor."""
    return base * factor


@dataclass(frozen=True)
class PricingTransition:
    """One learning step: observation, chosen action, mean action, realized
    reward, and the next observation/mean (None at the end of a run)."""

    obs: tuple
    action: int
    mean: np.ndarray
    reward: float
    next_obs: tuple | None = None
    next_mean: np.ndarray | None = None


@dataclass(frozen=True)
class ObservationSpec:
    zones_per_side: int = 3
    count_bin_edges: tuple[int, ...] = (1, 2, 3, 5, 8)
    ratio_bin_edges: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)


class ObservationEncoder:
    """Fixed-length discretized features of a vehicle's local situation:
    own zone, binned neighbor count, binned local request count, and a
    binned supply/demand ratio. Bins are fixed per run."""

    def __init__(self, net: RoadNetwork, spec: ObservationSpec | None = None):
        self.net = net
        self.spec = spec or ObservationSpec()

    def encode(self, location: str, neighbor_count: int, request_count: int) -> tuple[int, ...]:
        s = self.spec
        ratio = (neighbor_count + 1.0) / (request_count + 1.0)
        return (
            coarse_zone(self.net, location, s.zones_per_side),
            bisect_right(s.count_bin_edges, neighbor_count),
            bisect_right(s.count_bin_edges, request_count),
            bisect_right(s.ratio_bin_edges, ratio),
        )


class MeanFieldQTable:
    """Tabular Q over (observation, action, discretized mean action).

    Updates follow Q <- (1-alpha) Q + alpha (J + gamma * V_mf(next)), where
    V_mf averages next-state Q values under the Boltzmann policy. Missing
    entries read as 0.
    """

    kind = "mean_field"

    def __init__(self, n_actions: int, alpha: float = 0.1, gamma: float = 0.9,
                 beta: float = 1.0, mean_levels: int = 4):
        if not 0 < alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 <= gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if beta < 0:
            raise ValueError("beta must be >= 0")
        self.n_actions = n_actions
        self.alpha = alpha
        self.gamma = gamma
        self.beta = beta
        self.mean_levels = mean_levels
        self.table: dict[tuple, float] = {}

    def discretize_mean(self, mean: np.ndarray) -> tuple[int, ...]:
        return tuple(int(round(m * self.mean_levels)) for m in mean)

    def q(self, obs: tuple, action: int, mean_key: tuple) -> float:
        return self.table.get((obs, action, mean_key), 0.0)

    def action_values(self, obs: tuple, mean_key: tuple) -> np.ndarray:
        return np.array([self.q(obs, a, mean_key) for a in range(self.n_actions)])

    def policy(self, obs: tuple, mean_key: tuple) -> np.ndarray:
        return boltzmann_probabilities(self.action_values(obs, mean_key), self.beta)

    def select_action(self, obs: tuple, mean: np.ndarray, rng: np.random.Generator) -> int:
        mean_key = self.discretize_mean(mean)
        return int(rng.choice(self.n_actions, p=self.policy(obs, mean_key)))

    def mean_field_value(self, obs: tuple, mean_key: tuple) -> float:
        values = self.action_values(obs, mean_key)
        return float(boltzmann_probabilities(values, self.beta) @ values)

    def update(self, tr: PricingTransition) -> "MeanFieldQTable":
        key = (tr.obs, tr.action, self.discretize_mean(tr.mean))
        if tr.next_obs is None:
            future = 0.0
        else:
            future = self.mean_field_value(tr.next_obs, self.discretize_mean(tr.next_mean))
        old = self.table.get(key, 0.0)
        self.table[key] = (1 - self.alpha) * old + self.alpha * (tr.reward + self.gamma * future)
        return self

    def _payload(self) -> dict:
        entries = sorted(
            ([list(obs), action, list(mean_key), value]
             for (obs, action, mean_key), value in self.table.items()),
            key=lambda e: (e[0], e[1], e[2]))
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "kind": self.kind,
            "n_actions": self.n_actions,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "beta": self.beta,
            "mean_levels": self.mean_levels,
            "entries": entries,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self._payload()))

    @classmethod
    def _from_payload(cls, payload: dict) -> "MeanFieldQTable":
        q = cls(payload["n_actions"], payload["alpha"], payload["gamma"],
                payload["beta"], payload["mean_levels"])
        for obs, action, mean_key, value in payload["entries"]:
            q.table[(tuple(obs), action, tuple(mean_key))] = value
        return q


class PlainQTable:
    """Standard tabular Q-learning baseline: max-target updates over
    (observation, action), ignoring the mean action. Selection stays
    Boltzmann so exploration matches the mean-field learner."""

    kind = "plain"

    def __init__(self, n_actions: int, alpha: float = 0.1, gamma: float = 0.9,
                 beta: float = 1.0):
        if not 0 < alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 <= gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if beta < 0:
            raise ValueError("beta must be >= 0")
        self.n_actions = n_actions
        self.alpha = alpha
        self.gamma = gamma
        self.beta = beta
        self.table: dict[tuple, float] = {}

    def action_values(self, obs: tuple) -> np.ndarray:
        return np.array([self.table.get((obs, a), 0.0) for a in range(self.n_actions)])

    def select_action(self, obs: tuple, mean: np.ndarray, rng: np.random.Generator) -> int:
        probs = boltzmann_probabilities(self.action_values(obs), self.beta)
        return int(rng.choice(self.n_actions, p=probs))

    def update(self, tr: PricingTransition) -> "PlainQTable":
        key = (tr.obs, tr.action)
        future = 0.0 if tr.next_obs is None else float(self.action_values(tr.next_obs).max())
        old = self.table.get(key, 0.0)
        self.table[key] = (1 - self.alpha) * old + self.alpha * (tr.reward + self.gamma * future)
        return self

    def _payload(self) -> dict:
        entries = sorted(([list(obs), action, value]
                          for (obs, action), value in self.table.items()),
                         key=lambda e: (e[0], e[1]))
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "kind": self.kind,
            "n_actions": self.n_actions,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "beta": self.beta,
            "entries": entries,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self._payload()))

    @classmethod
    def _from_payload(cls, payload: dict) -> "PlainQTable":
        q = cls(payload["n_actions"], payload["alpha"], payload["gamma"], payload["beta"])
        for obs, action, value in payload["entries"]:
            q.table[(tuple(obs), action)] = value
        return q


class FixedPricer:
    """Always quotes the same factor (index into the action set)."""

    kind = "fixed"

    def __init__(self, n_actions: int, action_index: int):
        if not 0 <= action_index < n_actions:
            raise ValueError("action_index out of range")
        self.n_actions = n_actions
        self.action_index = action_index

    def select_action(self, obs: tuple, mean: np.ndarray, rng: np.random.Generator) -> int:
        return self.action_index

    def update(self, tr: PricingTransition) -> "FixedPricer":
        return self

    def _payload(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "kind": self.kind,
            "n_actions": self.n_actions,
            "action_index": self.action_index,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self._payload()))

    @classmethod
    def _from_payload(cls, payload: dict) -> "FixedPricer":
        return cls(payload["n_actions"], payload["action_index"])


_PRICER_KINDS = {
    MeanFieldQTable.kind: MeanFieldQTable,
    PlainQTable.kind: PlainQTable,
    FixedPricer.kind: FixedPricer,
}


def load_pricer(path: str | Path):
    """Load any pricer checkpoint; the payload round-trips exactly."""
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a pricer checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    try:
        cls = _PRICER_KINDS[payload["kind"]]
    except KeyError:
        raise ValueError(f"{path}: unknown pricer kind {payload.get('kind')!r}") from None
    return cls._from_payload(payload)
