"""End-to-end run: mine consolidation patterns on history, then plan test days.

The tactical stage clusters the training loads, mines candidate sets per
(destination, day-of-week) and collects their consolidation points. The
operational stage builds one instance per weekday destination-day of the
test window and plans it three ways: exact optimization, the nearest-hub
heuristic and plain truckload shipping.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path as FsPath
from typing import Iterable, Mapping, Sequence

from .baseline import plan_nnch, plan_tl
from .cluster import Cluster, cluster_loads, write_clusters
from .datagen import split_train_test
from .evaluate import DayRecord, compare_report, dumps_report, render_table
from .geo import DEFAULT_SPEED_MPH, travel_minutes
from .mining import (
    AbstractPoint,
    CandidateSet,
    Feasibility,
    GroupKey,
    MiningResult,
    abstract_clusters,
    candidates_by_group,
    mine_groups,
    union_cp,
    write_candidates,
    write_transactions,
)
from .model import Load, Network, Node, day_of_week, is_partial
from .pathgen import CostModel, Path, build_paths, count_unfiltered_paths
from .solver import CAPACITY_SCOPES, Instance, Plan, make_plan, solve_exact, verify_plan

log = logging.getLogger(__name__)

METHODS = ("exact", "nnch", "tl")


class PlanVerificationError(RuntimeError):
    """A produced plan broke a model constraint."""


@dataclass(frozen=True)
class PipelineConfig:
    eps: float = 0.30
    min_pts: int = 2
    min_sup: float = 5
    maximal_only: bool = False
    speed_mph: float = DEFAULT_SPEED_MPH
    dwell_minutes: float = 0.0
    rates: Mapping[str, float] = field(default_factory=dict)
    default_rate: float = 1.0
    fixed_dispatch: float = 0.0
    partial_threshold: float = 0.80
    capacity_scope: str = "all"
    require_comembership: bool = False
    weekdays_only: bool = True
    normalize: str = "within"
    max_nodes: int = 10_000_000
    max_seconds: float = 60.0
    test_weeks: int = 3
    jobs: int = 1
    seed: int = 0

    def validate(self) -> None:
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.capacity_scope not in CAPACITY_SCOPES:
            raise ValueError(f"capacity_scope must be one of {CAPACITY_SCOPES}")
        if self.normalize not in ("within", "cross"):
            raise ValueError("normalize must be 'within' or 'cross'")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @property
    def costs(self) -> CostModel:
        return CostModel(dict(self.rates), self.default_rate, self.fixed_dispatch)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rates"] = dict(self.rates)
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> PipelineConfig:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown pipeline keys: {sorted(unknown)}")
        return cls(**data)


def network_feasibility(network: Network, speed_mph: float = DEFAULT_SPEED_MPH) -> Feasibility:
    terms = network.terminal_by_id
    cache: dict[tuple[str, str], float] = {}

    def travel(a: str, b: str) -> float:
        key = (a, b)
        if key not in cache:
            cache[key] = 0.0 if a == b else travel_minutes(terms[a], terms[b], speed_mph)
        return cache[key]

    return Feasibility(network.sort_by_node, travel)


@dataclass
class TacticalResult:
    clusters: list[Cluster]
    transactions: dict[GroupKey, list[frozenset[AbstractPoint]]]
    mined: dict[GroupKey, MiningResult]
    skipped: list[tuple[str, str]] = field(default_factory=list)

    @property
    def candidates(self) -> list[CandidateSet]:
        return [c for r in self.mined.values() for c in r.candidates]

    def group_candidates(self, key: GroupKey) -> list[CandidateSet]:
        r = self.mined.get(key)
        return [] if r is None else r.candidates

    def hubs(self, key: GroupKey) -> frozenset[Node]:
        return union_cp(self.group_candidates(key))

    @classmethod
    def from_artifacts(
        cls,
        candidates: Iterable[CandidateSet],
        transactions: Mapping[GroupKey, list[frozenset[AbstractPoint]]] | None = None,
    ) -> TacticalResult:
        """Rebuild from saved candidates (and transactions); clusters are not kept."""
        grouped = candidates_by_group(candidates)
        mined = {k: MiningResult(sorted(v, key=CandidateSet.sort_key)) for k, v in sorted(grouped.items())}
        return cls([], dict(transactions or {}), mined)


def run_tactical(
    network: Network,
    train: Sequence[Load],
    cfg: PipelineConfig,
    destinations: Iterable[Node] | None = None,
) -> TacticalResult:
    clusters, _noise, skipped = cluster_loads(
        network, train, cfg.eps, cfg.min_pts, cfg.partial_threshold, destinations
    )
    by_id = {l.id: l for l in train}
    transactions = abstract_clusters(clusters, by_id)
    mined = mine_groups(
        transactions, cfg.min_sup, network_feasibility(network, cfg.speed_mph), cfg.maximal_only
    )
    return TacticalResult(clusters, transactions, mined, skipped)


def destination_days(
    loads: Iterable[Load],
    partial_threshold: float = 0.80,
    weekdays_only: bool = True,
    destinations: Iterable[Node] | None = None,
) -> dict[tuple[Node, int], list[Load]]:
    """Partial loads grouped by (destination, due day), in sorted key order."""
    wanted = None if destinations is None else set(destinations)
    out: dict[tuple[Node, int], list[Load]] = {}
    for l in loads:
        if wanted is not None and l.destination not in wanted:
            continue
        if weekdays_only and day_of_week(l.due_day) >= 5:
            continue
        if is_partial(l, partial_threshold):
            out.setdefault((l.destination, l.due_day), []).append(l)
    return {k: sorted(v, key=lambda l: l.id) for k, v in sorted(out.items())}


def build_instance(
    network: Network,
    destination: Node,
    due_day: int,
    partial: Sequence[Load],
    tactical: TacticalResult,
    cfg: PipelineConfig,
) -> Instance:
    key = (destination, day_of_week(due_day))
    cands = tactical.group_candidates(key)
    hubs = tactical.hubs(key)
    paths = build_paths(
        partial, cands, hubs, network, cfg.costs, cfg.dwell_minutes, cfg.speed_mph,
        cfg.require_comembership,
    )
    return Instance.build(partial, paths, hubs, destination, due_day)


@dataclass
class DayOutcome:
    destination: Node
    due_day: int
    instance: Instance
    plans: dict[str, Plan]
    unfiltered_paths: int
    violations: dict[str, list[str]] = field(default_factory=dict)


def plan_day(instance: Instance, network: Network, cfg: PipelineConfig) -> DayOutcome:
    plans = {
        "exact": solve_exact(instance, cfg.capacity_scope, cfg.max_nodes, cfg.max_seconds),
        "nnch": plan_nnch(instance),
        "tl": plan_tl(instance),
    }
    violations = {}
    for name, plan in plans.items():
        v = verify_plan(instance, plan, cfg.capacity_scope)
        if v:
            violations[name] = v
    unfiltered = count_unfiltered_paths(instance.loads, network, cfg.dwell_minutes, cfg.speed_mph)
    return DayOutcome(instance.destination, instance.due_day, instance, plans, unfiltered, violations)


def plan_from_records(instance: Instance, records: Iterable[Mapping], method: str) -> Plan:
    """Rebuild a saved plan against ``instance`` by matching each record to a path."""
    assignment: dict[str, Path] = {}
    active = []
    optimal = True
    for rec in records:
        optimal &= bool(rec.get("plan_optimal", True))
        lid = rec["load_id"]
        hub = rec.get("hub")
        match = [
            p for p in instance.paths.get(lid, ())
            if p.kind == rec["kind"] and (None if p.hub is None else str(p.hub)) == hub
        ]
        if len(match) != 1:
            raise PlanVerificationError(f"{method}: record for load {lid} matches {len(match)} paths")
        assignment[lid] = match[0]
        if rec["trailer_active"]:
            active.append(lid)
    missing = [l.id for l in instance.loads if l.id not in assignment]
    if missing:
        raise PlanVerificationError(f"{method}: no record for load {missing[0]}")
    return make_plan(instance, assignment, active, optimal, method)


def _plan_day_job(args) -> DayOutcome:
    instance, network, cfg = args
    return plan_day(instance, network, cfg)


def run_operational(
    network: Network,
    test: Sequence[Load],
    tactical: TacticalResult,
    cfg: PipelineConfig,
    destinations: Iterable[Node] | None = None,
) -> list[DayOutcome]:
    days = destination_days(test, cfg.partial_threshold, cfg.weekdays_only, destinations)
    instances = [
        build_instance(network, dest, day, partial, tactical, cfg)
        for (dest, day), partial in days.items()
    ]
    if cfg.jobs > 1 and len(instances) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(_plan_day_job, [(i, network, cfg) for i in instances]))
    else:
        outcomes = [plan_day(i, network, cfg) for i in instances]
    return outcomes


class EventLog:
    """Append-only JSON-lines log of pipeline stages; a no-op without a path."""

    def __init__(self, path=None):
        self.path = None if path is None else FsPath(path)
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def emit(self, stage: str, **fields) -> None:
        log.info("%s %s", stage, fields)
        if self.path is None:
            return
        rec = {"stage": stage, "wall_time": round(time.time(), 3), **fields}
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, sort_keys=True, default=str) + "\n")


class StageError(RuntimeError):
    """A pipeline stage failed; the message names the stage and destination-day."""


@dataclass(frozen=True)
class Provenance:
    """Which split an artifact was computed from, as an inclusive due-day range."""

    split: str
    first_day: int | None
    last_day: int | None

    @classmethod
    def of(cls, split: str, loads: Sequence[Load]) -> Provenance:
        days = [l.due_day for l in loads]
        return cls(split, min(days, default=None), max(days, default=None))


@dataclass
class PipelineResult:
    report: dict
    outcomes: list[DayOutcome]
    tactical: TacticalResult
    train: Provenance
    test: Provenance
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _atomic_write(path: FsPath, write) -> None:
    tmp = path.with_name(path.name + ".tmp")
    write(tmp)
    os.replace(tmp, path)


def _write_text(path: FsPath, text: str) -> None:
    _atomic_write(path, lambda t: t.write_text(text, encoding="utf-8"))


def _check_no_leakage(tactical: TacticalResult, train: Sequence[Load], train_p: Provenance, test_p: Provenance) -> None:
    train_ids = {l.id for l in train}
    for c in tactical.clusters:
        stray = [lid for lid in c.load_ids if lid not in train_ids]
        if stray:
            raise StageError(f"cluster: load {stray[0]} is not in the training split")
    if train_p.last_day is not None and test_p.first_day is not None and test_p.first_day <= train_p.last_day:
        raise StageError(f"split: test day {test_p.first_day} overlaps training days up to {train_p.last_day}")


def run_pipeline(
    network: Network,
    cfg: PipelineConfig,
    out_dir=None,
    tiers: Mapping[Node, object] | None = None,
    events: EventLog | None = None,
) -> PipelineResult:
    """Mine on the training weeks, plan every test destination-day, and report.

    ``tiers`` maps destinations to a tier label for aggregation; without it
    every destination is in tier ``"all"``. Artifacts land in ``out_dir``
    when given, each file written to a temporary name and then renamed.
    The report never depends on ``cfg.jobs`` or on wall-clock time.
    """
    cfg.validate()
    events = events or EventLog()
    dests = None if tiers is None else sorted(tiers)
    t0 = time.monotonic()
    try:
        train, test = split_train_test(sorted(network.loads, key=lambda l: l.id), cfg.test_weeks)
    except ValueError as exc:
        raise StageError(f"split: {exc}") from exc
    train_p, test_p = Provenance.of("train", train), Provenance.of("test", test)
    events.emit("split", train=len(train), test=len(test), seconds=round(time.monotonic() - t0, 3))

    t0 = time.monotonic()
    try:
        tactical = run_tactical(network, train, cfg, dests)
    except Exception as exc:
        raise StageError(f"tactical: {exc}") from exc
    _check_no_leakage(tactical, train, train_p, test_p)
    events.emit("tactical", clusters=len(tactical.clusters), candidates=len(tactical.candidates),
                seconds=round(time.monotonic() - t0, 3))

    t0 = time.monotonic()
    outcomes = run_operational(network, test, tactical, cfg, dests)
    failures = []
    for o in outcomes:
        for method, problems in o.violations.items():
            failures.extend(f"verify {o.destination} day {o.due_day} {method}: {p}" for p in problems)
        events.emit("plan", destination=str(o.destination), due_day=o.due_day, loads=len(o.instance.loads),
                    paths=o.instance.n_paths, optimal=o.plans["exact"].optimal,
                    solve_seconds=o.plans["exact"].stats.get("seconds"))
    events.emit("operational", days=len(outcomes), seconds=round(time.monotonic() - t0, 3))

    echo = cfg.to_dict()
    echo.pop("jobs")
    echo["train_days"] = [train_p.first_day, train_p.last_day]
    echo["test_days"] = [test_p.first_day, test_p.last_day]
    report: dict = {}
    if not failures:
        records = [
            DayRecord(o.destination, o.due_day, "all" if tiers is None else str(tiers[o.destination]),
                      len(o.instance.loads), o.instance.n_paths, o.unfiltered_paths, o.plans, o.instance)
            for o in outcomes
        ]
        try:
            report = compare_report(records, tactical.transactions, cfg.capacity_scope, cfg.normalize, echo)
        except Exception as exc:
            raise StageError(f"evaluate: {exc}") from exc
    result = PipelineResult(report, outcomes, tactical, train_p, test_p, failures)
    if out_dir is not None:
        write_artifacts(result, FsPath(out_dir))
    return result


def write_artifacts(result: PipelineResult, out: FsPath) -> None:
    out.mkdir(parents=True, exist_ok=True)
    tac = result.tactical
    _atomic_write(out / "clusters.jsonl", lambda t: write_clusters(tac.clusters, t))
    _atomic_write(out / "transactions.jsonl", lambda t: write_transactions(tac.transactions, t))
    _atomic_write(out / "candidates.jsonl", lambda t: write_candidates(tac.mined, t))
    lines = []
    for o in result.outcomes:
        for method in METHODS:
            for rec in o.plans[method].to_records():
                lines.append(json.dumps({"destination": str(o.destination), "due_day": o.due_day,
                                         "method": method, **rec}, sort_keys=True))
    _write_text(out / "plans.jsonl", "".join(l + "\n" for l in lines))
    prov = {"tactical": asdict(result.train), "operational": asdict(result.test)}
    _write_text(out / "provenance.json", json.dumps(prov, sort_keys=True, indent=2) + "\n")
    if result.failures:
        _write_text(out / "failures.txt", "".join(f + "\n" for f in result.failures))
    else:
        _write_text(out / "report.json", dumps_report(result.report))
        _write_text(out / "report.txt", render_table(result.report))
