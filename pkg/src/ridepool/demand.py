"""Request generation and replay, base pricing, and the logistic
price-acceptance model."""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import RoadNetwork


@dataclass
class Request:
    """One customer ride demand.

    ``quoted_price`` stays None until a pricing decision sets it; it is
    always the base price times a factor from the configured action set.
    ``arrival_time`` (seconds) is filled by the simulator when the request
    is batched.
    """

    id: str
    origin: str
    destination: str
    arrival_epoch: int
    base_price: float = 0.0
    quoted_price: float | None = None
    arrival_time: float | None = None


@dataclass(frozen=True)
class SensitivityParams:
    """Coefficients of the logistic acceptance curve: slope k1 on the
    quoted/base ratio and intercept k2."""

    k1: float
    k2: float

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError("k1 must be > 0")


# Logistic fit of acceptance against price ratio; the "conscious" variant
# scales both coefficients by 10, which sharpens the accept/reject cutoff.
UBER_SENSITIVITY = SensitivityParams(k1=0.67, k2=1.69)
CONSCIOUS_SENSITIVITY = SensitivityParams(k1=6.7, k2=16.9)

SENSITIVITY_PRESETS = {
    "uber": UBER_SENSITIVITY,
    "conscious": CONSCIOUS_SENSITIVITY,
}


@dataclass(frozen=True)
class Tariff:
    """Flagfall plus per-second fare used to compute base prices."""

    flag: float
    per_second: float


def base_price(req: Request, net: RoadNetwork, tariff: Tariff) -> float:
    """Base price = flagfall + per-second fare on the shortest-path time.

    Zero-travel-time requests (origin == destination) are rejected.
    """
    tt = net.travel_time(req.origin, req.destination)
    if tt <= 0:
        raise ValueError(f"request {req.id}: zero travel time (origin == destination)")
    return tariff.flag + tariff.per_second * tt


def acceptance_probability(quoted: float, base: float, s: SensitivityParams) -> float:
    """Probability that a customer accepts the quoted price.

    Logistic in the quoted/base ratio: 1 / (1 + exp(k1 * quoted/base - k2)).
    Strictly decreasing in the quote.
    """
    if base <= 0:
        raise ValueError("base price must be > 0")
    if quoted < 0:
        raise ValueError("quoted price must be >= 0")
    x = s.k1 * (quoted / base) - s.k2
    # evaluate the stable branch so large ratios underflow to 0 rather than overflow
    if x >= 0:
        z = math.exp(-x)
        return z / (1.0 + z)
    return 1.0 / (1.0 + math.exp(x))


def sample_acceptance(p: float, rng: np.random.Generator) -> bool:
    """One Bernoulli draw; reproducible under a seeded generator."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    return bool(rng.random() < p)


def generate_requests(epoch: int, zone_rates: dict[str, float], net: RoadNetwork,
                      tariff: Tariff, rng: np.random.Generator) -> list[Request]:
    """Draw a Poisson count per zone and a uniform destination != origin."""
    out: list[Request] = []
    n = len(net)
    for loc in sorted(zone_rates):
        rate = zone_rates[loc]
        if rate < 0:
            raise ValueError(f"negative demand rate for zone {loc!r}")
        if rate == 0:
            continue
        origin_idx = net.location_index(loc)
        for _ in range(int(rng.poisson(rate))):
            j = int(rng.integers(n - 1))
            if j >= origin_idx:
                j += 1
            req = Request(
                id=f"e{epoch}q{len(out):03d}",
                origin=loc,
                destination=net.ids[j],
                arrival_epoch=epoch,
            )
            req.base_price = base_price(req, net, tariff)
            out.append(req)
    return out


class PoissonDemand:
    """Synthetic per-epoch demand from per-zone Poisson rates."""

    def __init__(self, net: RoadNetwork, zone_rates: dict[str, float], tariff: Tariff):
        for loc, rate in zone_rates.items():
            net.location_index(loc)
            if rate < 0:
                raise ValueError(f"negative demand rate for zone {loc!r}")
        self.net = net
        self.zone_rates = dict(zone_rates)
        self.tariff = tariff

    def requests_for_epoch(self, epoch: int, rng: np.random.Generator) -> list[Request]:
        return generate_requests(epoch, self.zone_rates, self.net, self.tariff, rng)


class ReplayDemand:
    """Per-epoch replay of requests loaded from a file.

    Hands out fresh copies so repeated runs never see mutated requests.
    """

    def __init__(self, by_epoch: dict[int, list[Request]]):
        self.by_epoch = by_epoch

    def requests_for_epoch(self, epoch: int, rng: np.random.Generator) -> list[Request]:
        return [dataclasses.replace(r) for r in self.by_epoch.get(epoch, [])]


def load_requests(path: str | Path, net: RoadNetwork, tariff: Tariff) -> dict[int, list[Request]]:
    """Load a requests CSV (header ``epoch,origin,dest``) grouped by epoch.

    Malformed rows are rejected with their row number.
    """
    by_epoch: dict[int, list[Request]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["epoch", "origin", "dest"]:
            raise ValueError(f"{path}: expected header 'epoch,origin,dest', got {header}")
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{rownum}: expected 3 fields, got {len(row)}")
            try:
                epoch = int(row[0])
            except ValueError:
                raise ValueError(f"{path}:{rownum}: bad epoch {row[0]!r}") from None
            if epoch < 0:
                raise ValueError(f"{path}:{rownum}: negative epoch {epoch}")
            origin, dest = row[1].strip(), row[2].strip()
            for loc in (origin, dest):
                if loc not in net:
                    raise ValueError(f"{path}:{rownum}: unknown location {loc!r}")
            if origin == dest:
                raise ValueError(f"{path}:{rownum}: origin equals destination")
            req = Request(id=f"r{rownum:05d}", origin=origin, destination=dest,
                          arrival_epoch=epoch)
            req.base_price = base_price(req, net, tariff)
            by_epoch.setdefault(epoch, []).append(req)
    return by_epoch
