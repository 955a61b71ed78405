"""Key = value configuration files for scenarios and experiments.

A scenario file describes one simulation setup: the network (a file or a
synthetic grid), the demand source (a requests CSV or per-zone Poisson
rates), and the SimConfig fields. Unknown keys are rejected so typos fail
loudly. Paths are resolved relative to the config file.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .demand import (PoissonDemand, ReplayDemand, SENSITIVITY_PRESETS,
                     SensitivityParams, Tariff, load_requests)
from .network import RoadNetwork, grid_network, parse_network_file
from .sim import SimConfig


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"{path}:{lineno}: empty key")
        if key in out:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def parse_sensitivity(text: str) -> SensitivityParams:
    """Named preset ('uber', 'conscious') or custom 'k1,k2'."""
    name = text.lower()
    if name in SENSITIVITY_PRESETS:
        return SENSITIVITY_PRESETS[name]
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"sensitivity must be a preset name or 'k1,k2', got {text!r}")
    return SensitivityParams(k1=float(parts[0]), k2=float(parts[1]))


def parse_demand_rates(text: str) -> dict[str, float]:
    rates: dict[str, float] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        loc, _, rate = item.partition(":")
        if not rate:
            raise ValueError(f"demand_rates entries must look like 'loc:rate', got {item!r}")
        rates[loc.strip()] = float(rate)
    return rates


_NETWORK_KEYS = {"network_file", "grid_side", "grid_arc_seconds", "grid_spacing_m"}
_DEMAND_KEYS = {"demand_file", "demand_rates"}
_ECONOMY_KEYS = {"tariff_flag", "tariff_per_second", "sensitivity"}

_INT_FIELDS = {"fleet_size", "capacity", "mean_action_levels", "obs_zones_per_side",
               "value_zones_per_side", "max_trip_requests", "seed", "horizon_epochs"}
_FLOAT_FIELDS = {"epoch_seconds", "max_pickup_delay_s", "max_detour_delay_s",
                 "pricing_alpha", "pricing_gamma", "pricing_beta",
                 "neighborhood_radius_s", "value_gamma", "value_learning_rate",
                 "time_bucket_s"}
_SIMCONFIG_KEYS = _INT_FIELDS | _FLOAT_FIELDS | {"policy", "action_factors"}


@dataclass
class Scenario:
    config: SimConfig
    net: RoadNetwork
    demand: PoissonDemand | ReplayDemand
    path: Path | None = None


def scenario_from_mapping(kv: dict[str, str], base_dir: Path,
                          overrides: dict | None = None) -> Scenario:
    known = _SIMCONFIG_KEYS | _NETWORK_KEYS | _DEMAND_KEYS | _ECONOMY_KEYS
    unknown = set(kv) - known
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")

    cfg_kwargs: dict = {}
    for key in _SIMCONFIG_KEYS & set(kv):
        if key in _INT_FIELDS:
            cfg_kwargs[key] = int(kv[key])
        elif key in _FLOAT_FIELDS:
            cfg_kwargs[key] = float(kv[key])
        elif key == "action_factors":
            cfg_kwargs[key] = tuple(float(x) for x in kv[key].split(","))
        else:
            cfg_kwargs[key] = kv[key]
    if "sensitivity" in kv:
        cfg_kwargs["sensitivity"] = parse_sensitivity(kv["sensitivity"])
    if "tariff_flag" in kv or "tariff_per_second" in kv:
        cfg_kwargs["tariff"] = Tariff(flag=float(kv.get("tariff_flag", 2.5)),
                                      per_second=float(kv.get("tariff_per_second", 0.01)))
    if overrides:
        cfg_kwargs.update(overrides)
    config = SimConfig(**cfg_kwargs)

    if "network_file" in kv:
        net = parse_network_file(base_dir / kv["network_file"])
    elif "grid_side" in kv:
        net = grid_network(int(kv["grid_side"]),
                           arc_seconds=float(kv.get("grid_arc_seconds", 30.0)),
                           spacing_m=float(kv.get("grid_spacing_m", 500.0)))
    else:
        raise ValueError("scenario needs either network_file or grid_side")

    if "demand_file" in kv:
        demand = ReplayDemand(load_requests(base_dir / kv["demand_file"], net, config.tariff))
    elif "demand_rates" in kv:
        demand = PoissonDemand(net, parse_demand_rates(kv["demand_rates"]), config.tariff)
    else:
        raise ValueError("scenario needs either demand_file or demand_rates")

    return Scenario(config=config, net=net, demand=demand)


def load_scenario(path: str | Path, overrides: dict | None = None) -> Scenario:
    path = Path(path)
    scenario = scenario_from_mapping(parse_kv_file(path), path.parent, overrides)
    scenario.path = path
    return scenario


def scenario_with(scenario: Scenario, **config_overrides) -> Scenario:
    """Same network and demand, different SimConfig fields."""
    return Scenario(config=replace(scenario.config, **config_overrides),
                    net=scenario.net, demand=scenario.demand, path=scenario.path)
