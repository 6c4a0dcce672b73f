"""Synthetic freight networks and load histories.

Terminals sit in Gaussian regional clusters over the continental US. Each
destination receives loads over recurring lanes (origin sort -> destination
sort) that ship on a weekly rhythm, so the same partial-load patterns repeat
week after week. Everything is a deterministic function of the seed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path as FsPath
from typing import Sequence

import numpy as np

from .geo import haversine_miles
from .mining import AbstractPoint, Feasibility
from .model import MINUTES_PER_DAY, Load, Network, Node, Sort, Terminal

LAT_RANGE = (25.0, 49.0)
LON_RANGE = (-124.0, -67.0)


class GenConfigError(ValueError):
    pass


def sub_seed(seed: int, name: str) -> int:
    """Stable per-stage seed derived from the master seed."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    n_terminals: int = 120
    days: int = 182
    n_regions: int = 8
    region_spread_deg: float = 1.6
    # destinations per tier (high / mid / low daily partial volume)
    tier_counts: tuple[int, int, int] = (2, 3, 4)
    # recurring lanes per destination of each tier
    tier_lanes: tuple[int, int, int] = (90, 45, 20)
    partial_fraction: float = 0.39
    # how strongly a lane sticks to being partial (higher = more uniform lanes)
    lane_concentration: float = 4.0
    lane_active_prob: float = 0.85
    weekly_pattern: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0, 0.15, 0.1)
    preferred_regions: int = 3
    preferred_share: float = 0.5
    min_lane_miles: float = 80.0
    miles_per_transit_day: float = 600.0
    capacity_classes: tuple[tuple[str, float], ...] = (("std", 100.0), ("long", 160.0))
    capacity_weights: tuple[float, ...] = (0.7, 0.3)
    departure_jitter_minutes: int = 90

    def validate(self) -> None:
        if not 0.0 <= self.partial_fraction <= 1.0:
            raise GenConfigError(f"partial_fraction must be in [0, 1], got {self.partial_fraction}")
        if self.n_terminals < 2 or self.days < 1:
            raise GenConfigError("need at least two terminals and one day")
        if sum(self.tier_counts) >= self.n_terminals:
            raise GenConfigError("more destinations than terminals")
        if len(self.weekly_pattern) != 7 or any(w < 0 for w in self.weekly_pattern):
            raise GenConfigError("weekly_pattern needs seven nonnegative multipliers")
        if len(self.capacity_classes) != len(self.capacity_weights):
            raise GenConfigError("capacity_classes and capacity_weights differ in length")
        if not 0 <= self.lane_active_prob <= 1:
            raise GenConfigError("lane_active_prob must be a probability")

    @classmethod
    def from_dict(cls, data: dict) -> GenConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise GenConfigError(f"unknown generator keys: {sorted(unknown)}")
        kw = dict(data)
        for key in ("tier_counts", "tier_lanes", "weekly_pattern", "capacity_weights"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "capacity_classes" in kw:
            kw["capacity_classes"] = tuple((str(a), float(b)) for a, b in kw["capacity_classes"])
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Lane:
    origin: Node
    destination: Node
    transit_days: int
    partial_prob: float
    trailer: int  # index into capacity_classes
    active_dows: tuple[int, ...]


@dataclass
class GeneratedData:
    network: Network
    destinations: dict[Node, int] = field(default_factory=dict)  # destination -> tier (1..3)
    lanes: list[Lane] = field(default_factory=list)


def _place_terminals(cfg: GenConfig, rng: np.random.Generator) -> tuple[list[Terminal], np.ndarray]:
    centers = np.column_stack([
        rng.uniform(LAT_RANGE[0] + 2, LAT_RANGE[1] - 2, cfg.n_regions),
        rng.uniform(LON_RANGE[0] + 3, LON_RANGE[1] - 3, cfg.n_regions),
    ])
    region = rng.integers(0, cfg.n_regions, cfg.n_terminals)
    lat = np.clip(centers[region, 0] + rng.normal(0, cfg.region_spread_deg, cfg.n_terminals), *LAT_RANGE)
    lon = np.clip(centers[region, 1] + rng.normal(0, cfg.region_spread_deg * 1.3, cfg.n_terminals), *LON_RANGE)
    width = len(str(cfg.n_terminals - 1))
    return [
        Terminal(f"T{i:0{width}d}", round(float(lat[i]), 4), round(float(lon[i]), 4))
        for i in range(cfg.n_terminals)
    ], region


def _make_sorts(terminals: Sequence[Terminal], rng: np.random.Generator) -> list[Sort]:
    sorts = []
    for t in terminals:
        n = int(rng.integers(3, 5))
        start = int(rng.integers(0, 6)) * 60
        for k in range(n):
            length = int(rng.integers(180, 241))
            arr = (start + k * (MINUTES_PER_DAY // n)) % MINUTES_PER_DAY
            dep = (arr + length) % MINUTES_PER_DAY
            sorts.append(Sort(t.id, f"S{k}", dep, arr))
    return sorts


def _lane_partial_probs(cfg: GenConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    target = cfg.partial_fraction
    if target <= 0.0 or target >= 1.0:
        return np.full(n, target)
    k = cfg.lane_concentration
    p = rng.beta(target * k, (1.0 - target) * k, n)
    # rescale so the expected share hits the target exactly
    for _ in range(50):
        mean = p.mean()
        if abs(mean - target) < 1e-9:
            break
        p = np.clip(p * (target / mean), 0.0, 0.98) if mean > 0 else np.full(n, target)
    return p


def generate(cfg: GenConfig | None = None) -> GeneratedData:
    """Build a network, its recurring lanes and the full load history."""
    cfg = cfg or GenConfig()
    cfg.validate()
    rng_geo = np.random.default_rng(sub_seed(cfg.seed, "geography"))
    rng_lanes = np.random.default_rng(sub_seed(cfg.seed, "lanes"))
    rng_loads = np.random.default_rng(sub_seed(cfg.seed, "loads"))

    terminals, region = _place_terminals(cfg, rng_geo)
    sorts = _make_sorts(terminals, rng_geo)
    sorts_at: dict[str, list[Sort]] = {}
    for s in sorts:
        sorts_at.setdefault(s.terminal, []).append(s)

    n_dest = sum(cfg.tier_counts)
    dest_idx = rng_lanes.choice(len(terminals), n_dest, replace=False)
    tiers = [1] * cfg.tier_counts[0] + [2] * cfg.tier_counts[1] + [3] * cfg.tier_counts[2]
    destinations: dict[Node, int] = {}
    lanes: list[Lane] = []
    cap_w = np.asarray(cfg.capacity_weights, dtype=float)
    cap_w = cap_w / cap_w.sum()
    for di, tier in zip(dest_idx, tiers):
        dterm = terminals[int(di)]
        dsorts = sorts_at[dterm.id]
        dnode = dsorts[int(rng_lanes.integers(len(dsorts)))].node
        destinations[dnode] = tier
        far = [
            i for i, t in enumerate(terminals)
            if i != di and haversine_miles(t.coords, dterm.coords) >= cfg.min_lane_miles
        ]
        preferred = set(rng_lanes.choice(cfg.n_regions, min(cfg.preferred_regions, cfg.n_regions), replace=False).tolist())
        weights = np.array([cfg.preferred_share if region[i] in preferred else 1 - cfg.preferred_share for i in far])
        weights = weights / weights.sum()
        n_lanes = cfg.tier_lanes[tier - 1]
        used: set[Node] = set()
        probs = _lane_partial_probs(cfg, rng_lanes, n_lanes)
        for k in range(n_lanes):
            for _ in range(20):
                oi = far[int(rng_lanes.choice(len(far), p=weights))]
                osorts = sorts_at[terminals[oi].id]
                onode = osorts[int(rng_lanes.integers(len(osorts)))].node
                if onode not in used:
                    break
            used.add(onode)
            miles = haversine_miles(terminals[oi].coords, dterm.coords)
            omega = 1 + int(miles // cfg.miles_per_transit_day)
            dows = tuple(d for d in range(7) if rng_lanes.random() < 0.9 or d >= 5)
            lanes.append(Lane(
                onode, dnode, omega, float(probs[k]),
                int(rng_lanes.choice(len(cap_w), p=cap_w)), dows,
            ))

    sort_by_node = {s.node: s for s in sorts}
    loads: list[Load] = []
    serial = 0
    for due in range(cfg.days):
        dow = due % 7
        for lane in lanes:
            dep_day = due - lane.transit_days
            if dep_day < 0 or dow not in lane.active_dows:
                continue
            if rng_loads.random() >= cfg.lane_active_prob * cfg.weekly_pattern[dow]:
                continue
            ttype, cap = cfg.capacity_classes[lane.trailer]
            if rng_loads.random() < lane.partial_prob:
                util = rng_loads.uniform(0.12, 0.78)
            else:
                util = rng_loads.uniform(0.80, 1.0)
            sort = sort_by_node[lane.origin]
            minute = min(MINUTES_PER_DAY - 1, sort.dep_minutes + int(rng_loads.integers(0, cfg.departure_jitter_minutes + 1)))
            loads.append(Load(
                id=f"L{serial:07d}",
                origin=lane.origin,
                destination=lane.destination,
                departure=dep_day * MINUTES_PER_DAY + minute,
                due_day=due,
                volume=round(float(util * cap), 2),
                capacity=cap,
                trailer_type=ttype,
            ))
            serial += 1
    network = Network(tuple(terminals), tuple(sorts), tuple(loads))
    return GeneratedData(network, destinations, lanes)


def write_generated(data: GeneratedData, out_dir, cfg: GenConfig | None = None) -> None:
    from .model import write_network

    out = FsPath(out_dir)
    write_network(data.network, out)
    with open(out / "destinations.json", "w", encoding="utf-8") as fh:
        rec = {str(n): t for n, t in sorted(data.destinations.items())}
        json.dump({"tiers": rec, "config": None if cfg is None else cfg.to_dict()}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def split_train_test(loads: Sequence[Load], test_weeks: int) -> tuple[list[Load], list[Load]]:
    """Chronological split on due day: the final ``test_weeks`` weeks are held out."""
    if test_weeks < 0:
        raise ValueError("test_weeks must be nonnegative")
    if not loads:
        return [], []
    if test_weeks == 0:
        return list(loads), []
    first = min(l.due_day for l in loads)
    last = max(l.due_day for l in loads)
    span = last - first + 1
    if span <= 7 * test_weeks:
        raise ValueError(f"history of {span} days is too short for {test_weeks} test weeks")
    boundary = last + 1 - 7 * test_weeks
    train = [l for l in loads if l.due_day < boundary]
    test = [l for l in loads if l.due_day >= boundary]
    return train, test


# --- the small worked example ---------------------------------------------------

WORKED_CLUSTERS = (
    (7, 5, 8, 10),
    (10, 8, 5, 2, 9),
    (8, 3, 10, 6, 1, 4),
    (4, 5, 2, 9),
    (7, 6, 3),
    (3, 6, 5, 9),
    (1, 7, 10, 2, 8),
)

WORKED_REACHABLE = {
    1: (3, 4, 6, 7, 8),
    2: (3, 4, 7, 9),
    3: (4, 5, 6),
    4: (7,),
    5: (8, 9, 10),
    6: (9, 10),
    7: (9,),
    8: (),
    9: (),
    10: (),
}


@dataclass
class WorkedExample:
    points: dict[str, AbstractPoint]  # "p1".."p10"
    transactions: list[frozenset[AbstractPoint]]
    sorts: dict[Node, Sort]
    travel: dict[tuple[str, str], float]
    feasibility: Feasibility

    def label(self, p: AbstractPoint) -> str:
        return p.origin.terminal


def make_worked_example() -> WorkedExample:
    """Seven clusters over ten points plus a sort/travel fixture realizing their reachability.

    Point i departs at 100*i and its sort's latest arrival is also 100*i.
    Travel from i to j is one minute short of (or over) the available window,
    so each reachability entry is forced.
    """
    points = {f"p{i}": AbstractPoint(Node(f"p{i}", "s"), 0, 1) for i in range(1, 11)}
    sorts = {p.origin: Sort(p.origin.terminal, "s", 100 * i, 100 * i) for i, p in enumerate(points.values(), 1)}
    travel: dict[tuple[str, str], float] = {}
    for i in range(1, 11):
        for j in range(1, 11):
            if i == j:
                travel[(f"p{i}", f"p{j}")] = 0.0
                continue
            window = 100 * j - 100 * i
            travel[(f"p{i}", f"p{j}")] = float(window - 1 if j in WORKED_REACHABLE[i] else max(0, window + 1))
    transactions = [frozenset(points[f"p{k}"] for k in c) for c in WORKED_CLUSTERS]
    feas = Feasibility(sorts, lambda a, b: travel[(a, b)])
    return WorkedExample(points, transactions, sorts, travel, feas)
