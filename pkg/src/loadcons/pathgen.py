"""Feasible path generation for one destination and due day.

Every load keeps its direct route. Loads that belong to a mined candidate
additionally get one consolidation route per reachable consolidation point,
i.e. per hub node where a later-departing load bound for the same
destination on the same due day can still pick them up.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, asdict
from typing import Callable, Iterable, Mapping, Sequence

from .geo import DEFAULT_SPEED_MPH, haversine_miles
from .mining import AbstractPoint, CandidateSet, abstract_point
from .model import ContractViolation, Load, Network, Node, day_of_week

log = logging.getLogger(__name__)

DIRECT = "direct"
CONSOLIDATION = "consolidation"


@dataclass(frozen=True)
class CostModel:
    """Affine per-mile trailer cost: ``rate(trailer_type) * miles + fixed_dispatch``."""

    rates: Mapping[str, float] = field(default_factory=dict)
    default_rate: float = 1.0
    fixed_dispatch: float = 0.0

    def rate(self, trailer_type: str) -> float:
        r = self.rates.get(trailer_type)
        if r is None:
            if self.rates and trailer_type not in _warned:
                _warned.add(trailer_type)
                log.warning("unknown trailer type %r, using default rate %s", trailer_type, self.default_rate)
            return self.default_rate
        return r

    def cost(self, miles: float, trailer_type: str = "") -> float:
        if miles < 0:
            raise ValueError("negative leg length")
        return self.rate(trailer_type) * miles + self.fixed_dispatch


_warned: set[str] = set()


def cost(miles: float, trailer_type: str, model: CostModel | None = None) -> float:
    return (model or CostModel()).cost(miles, trailer_type)


@dataclass(frozen=True)
class Path:
    load_id: str
    kind: str
    last_leg_origin: Node
    detour_cost: float
    last_leg_cost: float
    detour_miles: float = 0.0
    last_leg_miles: float = 0.0
    hub: Node | None = None
    hub_load_id: str | None = None
    detour_minutes: float = 0.0

    @property
    def is_direct(self) -> bool:
        return self.kind == DIRECT

    def key(self) -> tuple:
        """Ordering key: the direct path first, then hubs by node."""
        return (self.kind != DIRECT, self.hub or self.last_leg_origin)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["last_leg_origin"] = str(self.last_leg_origin)
        rec["hub"] = None if self.hub is None else str(self.hub)
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> Path:
        rec = dict(rec)
        rec["last_leg_origin"] = Node.parse(rec["last_leg_origin"])
        rec["hub"] = None if rec.get("hub") is None else Node.parse(rec["hub"])
        return cls(**rec)


def select_lc(loads: Iterable[Load], candidates: Iterable[CandidateSet]) -> list[Load]:
    """Loads whose abstract point occurs in a candidate of their (destination, dow) group."""
    items: dict[tuple[Node, int], set[AbstractPoint]] = {}
    for c in candidates:
        items.setdefault(c.group, set()).update(c.items)
    out = []
    for l in loads:
        pool = items.get((l.destination, day_of_week(l.due_day)))
        if pool and abstract_point(l) in pool:
            out.append(l)
    return out


def kappa_op(load: Load, hub_load: Load, travel: Callable[[Node, Node], float], dwell_minutes: float = 0.0) -> bool:
    """Can ``load`` reach the hub load's origin before the hub load departs?"""
    if load.destination != hub_load.destination or load.due_day != hub_load.due_day:
        raise ContractViolation(
            f"loads {load.id} and {hub_load.id} differ in destination or due day"
        )
    return load.departure + travel(load.origin, hub_load.origin) + dwell_minutes <= hub_load.departure


class _Legs:
    """Memoized leg lengths and times between terminals of a network."""

    def __init__(self, network: Network, speed_mph: float):
        self.network = network
        self.speed = speed_mph
        self._miles: dict[tuple[str, str], float] = {}

    def miles(self, a: Node, b: Node) -> float:
        key = (a.terminal, b.terminal)
        m = self._miles.get(key)
        if m is None:
            if a.terminal == b.terminal:
                m = 0.0
            else:
                m = haversine_miles(self.network.terminal(a).coords, self.network.terminal(b).coords)
            self._miles[key] = m
        return m

    def minutes(self, a: Node, b: Node) -> float:
        return self.miles(a, b) / self.speed * 60.0


def direct_path(load: Load, legs: _Legs, costs: CostModel) -> Path:
    miles = legs.miles(load.origin, load.destination)
    return Path(
        load_id=load.id,
        kind=DIRECT,
        last_leg_origin=load.origin,
        detour_cost=0.0,
        last_leg_cost=costs.cost(miles, load.trailer_type),
        detour_miles=0.0,
        last_leg_miles=miles,
    )


def generate_paths(
    lc: Sequence[Load],
    hubs: Iterable[Node],
    network: Network,
    costs: CostModel | None = None,
    dwell_minutes: float = 0.0,
    speed_mph: float = DEFAULT_SPEED_MPH,
    comembership: Callable[[Load, Load], bool] | None = None,
) -> dict[str, list[Path]]:
    """Direct plus consolidation paths for each load of ``lc``.

    For each hub node the hub load is the latest-departing eligible load
    there, which leaves the most slack. ``comembership``, when given, must
    also accept the (load, hub load) pair.
    """
    costs = costs or CostModel()
    legs = _Legs(network, speed_mph)
    hub_set = frozenset(hubs)
    at_hub: dict[Node, list[Load]] = {}
    for h in lc:
        if h.origin in hub_set:
            at_hub.setdefault(h.origin, []).append(h)
    for group in at_hub.values():
        group.sort(key=lambda x: (-x.departure, x.id))

    out: dict[str, list[Path]] = {}
    for l in sorted(lc, key=lambda x: x.id):
        paths = [direct_path(l, legs, costs)]
        for node in sorted(at_hub):
            if node == l.origin:
                continue
            hub_load = next(
                (
                    h for h in at_hub[node]
                    if h.id != l.id
                    and h.destination == l.destination
                    and h.due_day == l.due_day
                    and kappa_op(l, h, legs.minutes, dwell_minutes)
                    and (comembership is None or comembership(l, h))
                ),
                None,
            )
            if hub_load is None:
                continue
            detour = legs.miles(l.origin, node)
            last = legs.miles(node, l.destination)
            paths.append(
                Path(
                    load_id=l.id,
                    kind=CONSOLIDATION,
                    last_leg_origin=node,
                    detour_cost=costs.cost(detour, l.trailer_type),
                    last_leg_cost=costs.cost(last, l.trailer_type),
                    detour_miles=detour,
                    last_leg_miles=last,
                    hub=node,
                    hub_load_id=hub_load.id,
                    detour_minutes=legs.minutes(l.origin, node),
                )
            )
        out[l.id] = paths
    return out


def comembership_filter(candidates: Iterable[CandidateSet]) -> Callable[[Load, Load], bool]:
    """Accept (load, hub load) only when both abstract points share a candidate."""
    pairs: set[tuple[AbstractPoint, AbstractPoint]] = set()
    for c in candidates:
        for a in c.items:
            for b in c.items:
                if a != b:
                    pairs.add((a, b))

    def accept(l: Load, h: Load) -> bool:
        return (abstract_point(l), abstract_point(h)) in pairs

    return accept


def build_paths(
    partial: Sequence[Load],
    candidates: Sequence[CandidateSet],
    hubs: Iterable[Node],
    network: Network,
    costs: CostModel | None = None,
    dwell_minutes: float = 0.0,
    speed_mph: float = DEFAULT_SPEED_MPH,
    require_comembership: bool = False,
) -> dict[str, list[Path]]:
    """Paths for every partial load of one destination-day; loads outside L_C go direct only."""
    costs = costs or CostModel()
    lc = select_lc(partial, candidates)
    co = comembership_filter(candidates) if require_comembership else None
    out = generate_paths(lc, hubs, network, costs, dwell_minutes, speed_mph, co)
    legs = _Legs(network, speed_mph)
    for l in partial:
        if l.id not in out:
            out[l.id] = [direct_path(l, legs, costs)]
    return dict(sorted(out.items()))


def count_unfiltered_paths(
    partial: Sequence[Load],
    network: Network,
    dwell_minutes: float = 0.0,
    speed_mph: float = DEFAULT_SPEED_MPH,
) -> int:
    """Consolidation paths that pass the operational time check alone (no hub filter)."""
    hubs = {l.origin for l in partial}
    paths = generate_paths(partial, hubs, network, CostModel(), dwell_minutes, speed_mph)
    return sum(1 for ps in paths.values() for p in ps if not p.is_direct)


def write_paths(records: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
