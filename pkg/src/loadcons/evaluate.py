"""Plan metrics and method comparison.

Per destination-day figures are normalized against the truckload plan of the
same instance; tier and overall rows are plain means of the per-day values,
skipping days where a metric is not applicable (``None``).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from statistics import fmean
from typing import Iterable, Mapping, Sequence

from .mining import AbstractPoint, GroupKey, abstract_point
from .model import Node, day_of_week
from .solver import Instance, Plan, verify_plan

LABELS = {"exact": "SPOT", "nnch": "NNCH", "tl": "TL"}
METRICS = (
    "travel_distance_pct",
    "cost_reduction_pct",
    "loads_cut_pct",
    "coverage_pct",
    "cp_ratio_pct",
    "daily_loads_per_cp",
    "path_freq_pct",
    "num_paths_pct",
)
DEFINITIONS = {
    "travel_distance_pct": "miles / miles of the TL plan x 100",
    "cost_reduction_pct": "(TL cost - cost) / TL cost x 100",
    "loads_cut_pct": "loads whose own trailer is eliminated / partial loads x 100",
    "coverage_pct": "loads whose last leg leaves a used hub (riders and hub loads) / partial loads x 100",
    "cp_ratio_pct": "hubs used / distinct partial-load origins x 100",
    "daily_loads_per_cp": "loads whose last leg leaves a used hub, hub loads included / hubs used",
    "path_freq_pct": "mean over chosen consolidation routes of the share of training transactions "
                     "of the route's (destination, weekday) containing both the load's and the hub load's "
                     "abstract points x 100",
    "num_paths_pct": "consolidation paths generated with the hub filter / paths passing the time check alone x 100",
}


class InfeasiblePlanError(ValueError):
    """Metrics were requested for a plan that breaks a constraint."""


class ReportMismatchError(ValueError):
    """Methods were compared on different instance sets."""


def distance_and_cost(plan: Plan, instance: Instance, capacity_scope: str = "all") -> tuple[float, float]:
    problems = verify_plan(instance, plan, capacity_scope)
    if problems:
        raise InfeasiblePlanError("; ".join(problems))
    miles = sum(p.detour_miles for _, p in plan.xi) + sum(p.last_leg_miles for _, p in plan.nu)
    return miles, plan.objective


def _pct(num: float, den: float) -> float | None:
    return None if den == 0 else 100.0 * num / den


def path_frequency(
    plan: Plan,
    instance: Instance,
    transactions: Mapping[GroupKey, Sequence[frozenset[AbstractPoint]]],
) -> float | None:
    loads = {l.id: l for l in instance.loads}
    shares = []
    for lid, p in plan.xi:
        if p.is_direct:
            continue
        l, h = loads[lid], loads[p.hub_load_id]
        group = transactions.get((l.destination, day_of_week(l.due_day)), ())
        if not group:
            shares.append(0.0)
            continue
        a, b = abstract_point(l), abstract_point(h)
        shares.append(sum(1 for t in group if a in t and b in t) / len(group))
    return None if not shares else 100.0 * fmean(shares)


def consolidation_stats(
    plan: Plan,
    instance: Instance,
    transactions: Mapping[GroupKey, Sequence[frozenset[AbstractPoint]]] | None = None,
    unfiltered_paths: int | None = None,
) -> dict[str, float | None]:
    """Consolidation metrics of one plan; ``None`` marks a metric that does not apply."""
    n = len(instance.loads)
    used = {p.last_leg_origin for _, p in plan.xi if not p.is_direct}
    through = sum(1 for _, p in plan.xi if p.last_leg_origin in used)
    cut = sum(1 for pair in plan.xi if pair not in plan.nu)
    filtered = sum(1 for ps in instance.paths.values() for p in ps if not p.is_direct)
    origins = {l.origin for l in instance.loads}
    return {
        "loads_cut_pct": _pct(cut, n),
        "coverage_pct": _pct(through, n),
        "cp_ratio_pct": _pct(len(used), len(origins)),
        "daily_loads_per_cp": through / len(used) if used else None,
        "path_freq_pct": None if transactions is None else path_frequency(plan, instance, transactions),
        "num_paths_pct": None if not unfiltered_paths else _pct(filtered, unfiltered_paths),
    }


@dataclass(frozen=True)
class DayRecord:
    """Everything the report needs about one planned destination-day."""

    destination: Node
    due_day: int
    tier: str
    n_partial: int
    n_paths: int
    unfiltered_paths: int
    plans: Mapping[str, Plan]
    instance: Instance


@dataclass
class MethodMetrics:
    method: str
    miles: float
    cost: float
    optimal: bool
    travel_distance_pct: float | None = None
    cost_reduction_pct: float | None = None
    loads_cut_pct: float | None = None
    coverage_pct: float | None = None
    cp_ratio_pct: float | None = None
    daily_loads_per_cp: float | None = None
    path_freq_pct: float | None = None
    num_paths_pct: float | None = None


def day_metrics(
    rec: DayRecord,
    transactions: Mapping[GroupKey, Sequence[frozenset[AbstractPoint]]] | None = None,
    capacity_scope: str = "all",
    reference_miles: float | None = None,
) -> dict[str, MethodMetrics]:
    """Metrics of every method on one day, normalized by that day's TL plan.

    ``reference_miles`` replaces the TL miles as the distance denominator
    (cross-tier normalization).
    """
    if "tl" not in rec.plans:
        raise ReportMismatchError(f"{rec.destination} day {rec.due_day}: no TL plan to normalize against")
    base_miles, base_cost = distance_and_cost(rec.plans["tl"], rec.instance, capacity_scope)
    denom = base_miles if reference_miles is None else reference_miles
    out = {}
    for name in sorted(rec.plans):
        plan = rec.plans[name]
        miles, cost = distance_and_cost(plan, rec.instance, capacity_scope)
        m = MethodMetrics(LABELS.get(name, name.upper()), miles, cost, plan.optimal)
        m.travel_distance_pct = _pct(miles, denom)
        m.cost_reduction_pct = _pct(base_cost - cost, base_cost)
        for k, v in consolidation_stats(plan, rec.instance, transactions, rec.unfiltered_paths).items():
            setattr(m, k, v)
        out[name] = m
    return out


def _mean(values: Iterable[float | None]) -> float | None:
    vals = [v for v in values if v is not None]
    return fmean(vals) if vals else None


def _round(x, digits: int = 6):
    if isinstance(x, float):
        return round(x, digits)
    if isinstance(x, dict):
        return {k: _round(v, digits) for k, v in x.items()}
    if isinstance(x, list):
        return [_round(v, digits) for v in x]
    return x


def compare_report(
    days: Sequence[DayRecord],
    transactions: Mapping[GroupKey, Sequence[frozenset[AbstractPoint]]] | None = None,
    capacity_scope: str = "all",
    normalize: str = "within",
    config: Mapping | None = None,
) -> dict:
    """Per-day and per-tier comparison of the methods, as a JSON-ready dict.

    Every day must carry the same set of methods. With ``normalize="cross"``
    distances are divided by the mean TL miles of the first tier (in sorted
    order) instead of each day's own TL miles.
    """
    if normalize not in ("within", "cross"):
        raise ValueError("normalize must be 'within' or 'cross'")
    methods = None
    for d in days:
        names = tuple(sorted(d.plans))
        if methods is None:
            methods = names
        elif names != methods:
            raise ReportMismatchError(
                f"{d.destination} day {d.due_day} has methods {names}, expected {methods}"
            )
    methods = methods or ()
    ordered = sorted(days, key=lambda d: (d.tier, str(d.destination), d.due_day))

    reference = None
    if normalize == "cross" and ordered:
        first = ordered[0].tier
        reference = fmean(
            distance_and_cost(d.plans["tl"], d.instance, capacity_scope)[0] for d in ordered if d.tier == first
        )

    day_rows = []
    by_tier: dict[str, list[dict[str, MethodMetrics]]] = {}
    for d in ordered:
        ms = day_metrics(d, transactions, capacity_scope, reference)
        by_tier.setdefault(d.tier, []).append(ms)
        day_rows.append({
            "destination": str(d.destination),
            "due_day": d.due_day,
            "tier": d.tier,
            "n_partial": d.n_partial,
            "n_paths": d.n_paths,
            "unfiltered_paths": d.unfiltered_paths,
            "methods": {LABELS.get(k, k.upper()): asdict(v) for k, v in ms.items()},
        })

    def aggregate(rows: list[dict[str, MethodMetrics]]) -> dict:
        out = {}
        for name in methods:
            ms = [r[name] for r in rows]
            agg = {k: _mean(getattr(m, k) for m in ms) for k in METRICS}
            agg["miles"] = sum(m.miles for m in ms)
            agg["cost"] = sum(m.cost for m in ms)
            agg["days"] = len(ms)
            agg["all_optimal"] = all(m.optimal for m in ms)
            out[LABELS.get(name, name.upper())] = agg
        return out

    tiers = {t: aggregate(rows) for t, rows in sorted(by_tier.items())}
    overall = aggregate([r for rows in by_tier.values() for r in rows])
    return _round({
        "config": dict(config or {}),
        "normalize": normalize,
        "definitions": DEFINITIONS,
        "methods": [LABELS.get(m, m.upper()) for m in methods],
        "days": day_rows,
        "tiers": tiers,
        "overall": overall,
    })


def dumps_report(report: Mapping) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.2f}"


def render_table(report: Mapping) -> str:
    """Aligned text table: one row per (tier, method), best positive cost reduction marked with '*'."""
    cols = ("travel_distance_pct", "cost_reduction_pct", "loads_cut_pct", "coverage_pct", "cp_ratio_pct",
            "daily_loads_per_cp", "path_freq_pct", "num_paths_pct")
    head = ("tier", "method", "days") + tuple(c.replace("_pct", "%") for c in cols)
    rows = []
    sections = list(report["tiers"].items()) + [("overall", report["overall"])]
    for tier, per_method in sections:
        best = max(
            (m["cost_reduction_pct"] for m in per_method.values() if m["cost_reduction_pct"] is not None),
            default=None,
        )
        for name, m in per_method.items():
            mark = "*" if best and best > 0 and m["cost_reduction_pct"] == best else ""
            rows.append((tier, name + mark, str(m["days"])) + tuple(_fmt(m[c]) for c in cols))
    widths = [max(len(r[i]) for r in [head, *rows]) for i in range(len(head))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in [head, *rows]]
    return "\n".join(lines) + "\n"
