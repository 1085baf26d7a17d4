"""Warehouse scenario definition, default desk-scale instance and variants.

Times are in minutes. A scenario file is YAML with scalar fields plus
``products``, ``halls``, ``storage_classes``, ``resources`` and ``trucks``
tables; see ``configs/wdcp_lite.yaml`` for a complete example.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from adaptmoea.errors import ConfigError


@dataclass
class Product:
    name: str
    width: float
    height: float
    zone: int = 0  # preferred hall


@dataclass
class Hall:
    capacity: int
    base_travel: float  # one-way minutes from the docks to the first slot
    slot_step: float = 0.05  # extra minutes per slot further in


@dataclass
class StorageClass:
    width: float
    height: float


@dataclass
class ResourceType:
    name: str
    cost: float
    speed: float = 1.0
    min_count: int = 1
    max_count: int = 6


@dataclass
class Truck:
    kind: str  # "inbound" | "outbound"
    arrival: float
    manifest: list[int] = field(default_factory=list)


@dataclass
class SimScenario:
    products: list[Product]
    halls: list[Hall]
    storage_classes: list[StorageClass]
    resources: list[ResourceType]
    trucks: list[Truck]
    initial_stock: list[int] = field(default_factory=list)
    horizon_hours: float = 48.0
    warmup_hours: float = 8.0
    n_docks: int = 2
    handling_time: float = 3.0
    handling_jitter: float = 0.2
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def horizon(self) -> float:
        return self.horizon_hours * 60.0

    @property
    def warmup(self) -> float:
        return self.warmup_hours * 60.0

    @property
    def inbound(self) -> list[Truck]:
        return [t for t in self.trucks if t.kind == "inbound"]

    @property
    def outbound(self) -> list[Truck]:
        return [t for t in self.trucks if t.kind == "outbound"]

    def validate(self) -> None:
        if not 0 <= self.warmup_hours < self.horizon_hours:
            raise ConfigError("warm-up must be shorter than the horizon")
        if self.n_docks < 1:
            raise ConfigError("need at least one dock")
        if not self.products or not self.halls or not self.storage_classes or not self.resources:
            raise ConfigError("products, halls, storage classes and resources must be non-empty")
        n = len(self.products)
        for t in self.trucks:
            if t.kind not in ("inbound", "outbound"):
                raise ConfigError(f"unknown truck kind {t.kind!r}")
            if any(not 0 <= p < n for p in t.manifest):
                raise ConfigError("truck manifest references a product outside the catalog")
        if any(not 0 <= p < n for p in self.initial_stock):
            raise ConfigError("initial stock references a product outside the catalog")
        for p in self.products:
            if not 0 <= p.zone < len(self.halls):
                raise ConfigError(f"product {p.name} prefers a hall that does not exist")
        for r in self.resources:
            if not 0 <= r.min_count <= r.max_count:
                raise ConfigError(f"resource {r.name} has an empty count range")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> SimScenario:
        d = dict(d)
        try:
            d["products"] = [Product(**p) for p in d["products"]]
            d["halls"] = [Hall(**h) for h in d["halls"]]
            d["storage_classes"] = [StorageClass(**s) for s in d["storage_classes"]]
            d["resources"] = [ResourceType(**r) for r in d["resources"]]
            d["trucks"] = [Truck(**t) for t in d.get("trucks", [])]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed scenario: {exc}") from exc
        return cls(**d)


def load_scenario(path) -> SimScenario:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return SimScenario.from_dict(data)


def save_scenario(scenario: SimScenario, path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario.to_dict(), sort_keys=False))


# widths in metres of the three width classes and heights of the two height
# classes; products are drawn from these sizes
WIDTHS = (0.8, 1.0, 1.2)
HEIGHTS = (1.0, 1.8)

_BASE_PRODUCTS = [
    ("P1", 0.8, 1.0, 0), ("P2", 0.8, 1.8, 0), ("P3", 1.0, 1.0, 0), ("P4", 1.0, 1.8, 1),
    ("P5", 1.2, 1.0, 1), ("P6", 1.2, 1.8, 1), ("P7", 0.8, 1.0, 1), ("P8", 1.0, 1.0, 0),
]


def _manifest(rng, n_products, size):
    return sorted(int(p) for p in rng.integers(0, n_products, size))


def default_scenario(seed: int = 0, inbound: int = 10, outbound: int = 10) -> SimScenario:
    """Desk-scale instance: 2 halls, 3x2 storage classes, 2 resource types,
    8 products and 20 trucks over 48 hours."""
    rng = np.random.default_rng(seed)
    products = [Product(*p) for p in _BASE_PRODUCTS]
    horizon = 48 * 60.0
    trucks = []
    gap_in = horizon / inbound
    for k in range(inbound):
        trucks.append(Truck("inbound", round(k * gap_in + 30.0, 3),
                            _manifest(rng, len(products), int(rng.integers(12, 19)))))
    gap_out = horizon / outbound
    for k in range(outbound):
        trucks.append(Truck("outbound", round(k * gap_out + gap_out / 2, 3),
                            _manifest(rng, len(products), int(rng.integers(12, 19)))))
    trucks.sort(key=lambda t: t.arrival)
    return SimScenario(
        products=products,
        halls=[Hall(capacity=60, base_travel=2.0), Hall(capacity=40, base_travel=4.0)],
        storage_classes=[StorageClass(w, h) for w in WIDTHS for h in HEIGHTS],
        resources=[ResourceType("forklift", cost=10.0, speed=1.0),
                   ResourceType("reach-truck", cost=20.0, speed=1.6)],
        trucks=trucks,
        initial_stock=_manifest(rng, len(products), 40),
        seed=seed,
    )


def scenario_variant(base: SimScenario, kind: str, rng=None) -> SimScenario:
    """Stress variants of a base scenario.

    heavy_inbound
        50% more inbound trucks, spread over the same window, each carrying
        a manifest 50% larger.
    irregular_arrivals
        Arrival times of each truck stream redrawn from exponential gaps with
        the stream's original mean gap.
    double_portfolio
        Catalog doubled with new, wider size mixes; manifests redrawn over it.
    """
    rng = np.random.default_rng(base.seed + 7919) if rng is None else rng
    sc = copy.deepcopy(base)
    if kind == "heavy_inbound":
        inbound = sorted(sc.inbound, key=lambda t: t.arrival)
        count = math.floor(len(inbound) * 1.5 + 0.5)
        if inbound:
            first, last = inbound[0].arrival, inbound[-1].arrival
            gap = (last - first) / (count - 1) if count > 1 else 0.0
            new = []
            for k in range(count):
                src = inbound[k % len(inbound)]
                size = math.floor(len(src.manifest) * 1.5 + 0.5)
                new.append(Truck("inbound", round(first + k * gap, 3),
                                 _manifest(rng, len(sc.products), size)))
            sc.trucks = sorted(sc.outbound + new, key=lambda t: t.arrival)
    elif kind == "irregular_arrivals":
        new = []
        for stream in (sc.inbound, sc.outbound):
            stream = sorted(stream, key=lambda t: t.arrival)
            if len(stream) < 2:
                new += stream
                continue
            mean_gap = (stream[-1].arrival - stream[0].arrival) / (len(stream) - 1)
            t = stream[0].arrival
            for k, truck in enumerate(stream):
                if k:
                    t += float(rng.exponential(mean_gap))
                new.append(Truck(truck.kind, round(t, 3), list(truck.manifest)))
        sc.trucks = sorted(new, key=lambda t: t.arrival)
    elif kind == "double_portfolio":
        n = len(sc.products)
        for j in range(n):
            # new mixes lean towards wide pallets, which only fit the larger slots
            w = WIDTHS[1 + int(rng.integers(len(WIDTHS) - 1))]
            h = HEIGHTS[int(rng.integers(len(HEIGHTS)))]
            sc.products.append(Product(f"P{n + j + 1}", w, h, int(rng.integers(len(sc.halls)))))
        m = len(sc.products)
        for t in sc.trucks:
            t.manifest = _manifest(rng, m, len(t.manifest))
        sc.initial_stock = _manifest(rng, m, len(sc.initial_stock))
    else:
        raise ConfigError(f"unknown scenario variant {kind!r}")
    sc.validate()
    return sc


VARIANTS = ("heavy_inbound", "irregular_arrivals", "double_portfolio")
