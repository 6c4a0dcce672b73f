"""Constrained frequent itemset mining over abstracted clusters.

Clusters become transactions of abstract points (origin node, due day of
week, transit days). FP-growth enumerates the frequent itemsets; every
emitted pattern of size >= 2 must pass the time-feasibility constraint,
which checks whether at least one member can reach another member's origin
before that origin's sort closes.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Hashable, Iterable, Iterator, Mapping, Sequence

from .cluster import Cluster
from .model import MINUTES_PER_DAY, ContractViolation, DataError, Load, Node, Sort, day_of_week, transit_days


@dataclass(frozen=True, order=True)
class AbstractPoint:
    origin: Node
    due_dow: int
    transit_days: int

    def __str__(self) -> str:
        return f"{self.origin}@{self.due_dow}+{self.transit_days}"

    def to_record(self) -> dict:
        return {"origin": str(self.origin), "due_dow": self.due_dow, "transit_days": self.transit_days}

    @classmethod
    def from_record(cls, rec: Mapping) -> AbstractPoint:
        return cls(Node.parse(rec["origin"]), int(rec["due_dow"]), int(rec["transit_days"]))


def abstract_point(load: Load) -> AbstractPoint:
    return AbstractPoint(load.origin, day_of_week(load.due_day), transit_days(load))


GroupKey = tuple[Node, int]  # (destination, due day of week)


@dataclass(frozen=True)
class CandidateSet:
    destination: Node
    due_dow: int
    items: frozenset[AbstractPoint]
    support_count: int
    consolidation_points: frozenset[Node]

    @property
    def group(self) -> GroupKey:
        return (self.destination, self.due_dow)

    def sort_key(self):
        return (self.destination, self.due_dow, len(self.items), sorted(self.items))

    def to_record(self) -> dict:
        return {
            "destination": str(self.destination),
            "due_dow": self.due_dow,
            "items": [p.to_record() for p in sorted(self.items)],
            "support": self.support_count,
            "cps": sorted(str(n) for n in self.consolidation_points),
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> CandidateSet:
        return cls(
            Node.parse(rec["destination"]),
            int(rec["due_dow"]),
            frozenset(AbstractPoint.from_record(r) for r in rec["items"]),
            int(rec["support"]),
            frozenset(Node.parse(n) for n in rec["cps"]),
        )


def abstract_clusters(
    clusters: Iterable[Cluster], loads_by_id: Mapping[str, Load]
) -> dict[GroupKey, list[frozenset[AbstractPoint]]]:
    """One transaction per cluster, grouped by (destination, due day of week)."""
    groups: dict[GroupKey, list[frozenset[AbstractPoint]]] = defaultdict(list)
    ordered = sorted(clusters, key=lambda c: (c.destination, c.due_day, c.load_ids))
    for c in ordered:
        items = frozenset(abstract_point(loads_by_id[lid]) for lid in c.load_ids)
        groups[(c.destination, day_of_week(c.due_day))].append(items)
    return dict(sorted(groups.items()))


# --- time feasibility --------------------------------------------------------

TravelFn = Callable[[str, str], float]  # (terminal id, terminal id) -> minutes


class Feasibility:
    """Sort-level reachability between abstract points.

    ``pair(i, j)`` is true when a load at i's origin, leaving at the earliest
    departure of its sort, reaches j's origin before the latest arrival of
    j's sort, with the transit-day difference converted to minutes.
    """

    def __init__(self, sorts: Mapping[Node, Sort], travel: TravelFn):
        self.sorts = sorts
        self.travel = travel
        self._cache: dict[tuple, bool] = {}

    def _sort(self, node: Node) -> Sort:
        try:
            return self.sorts[node]
        except KeyError:
            raise DataError(f"unknown sort {node}") from None

    def pair(self, i: AbstractPoint, j: AbstractPoint) -> bool:
        key = (i, j)
        hit = self._cache.get(key)
        if hit is None:
            si, sj = self._sort(i.origin), self._sort(j.origin)
            lhs = si.dep_minutes + self.travel(i.origin.terminal, j.origin.terminal)
            rhs = sj.arr_minutes + (i.transit_days - j.transit_days) * MINUTES_PER_DAY
            hit = self._cache[key] = lhs <= rhs
        return hit

    def feasible(self, items: Iterable[AbstractPoint]) -> bool:
        items = list(items)
        if len(items) < 2:
            raise ContractViolation("feasibility is undefined for fewer than two items")
        return any(self.pair(a, b) or self.pair(b, a) for a, b in combinations(items, 2))

    def consolidation_points(self, items: Iterable[AbstractPoint]) -> frozenset[Node]:
        items = list(items)
        return frozenset(
            j.origin for j in items if any(i != j and self.pair(i, j) for i in items)
        )


class AlwaysFeasible:
    """Constraint that accepts everything; every origin becomes a consolidation point."""

    def pair(self, i, j) -> bool:
        return True

    def feasible(self, items) -> bool:
        return True

    def consolidation_points(self, items) -> frozenset:
        return frozenset(getattr(i, "origin", i) for i in items)


def kappa_pair(i: AbstractPoint, j: AbstractPoint, sorts: Mapping[Node, Sort], travel: TravelFn) -> bool:
    return Feasibility(sorts, travel).pair(i, j)


def kappa_set(items: Iterable[AbstractPoint], sorts: Mapping[Node, Sort], travel: TravelFn) -> bool:
    return Feasibility(sorts, travel).feasible(items)


def extract_cp(items: Iterable[AbstractPoint], feasibility: Feasibility) -> frozenset[Node]:
    """Origins that some other member of ``items`` can reach in time."""
    cps = feasibility.consolidation_points(items)
    if not cps:
        raise ContractViolation("itemset has no feasible pair; no consolidation point exists")
    return cps


def union_cp(candidates: Iterable[CandidateSet]) -> frozenset[Node]:
    out: set[Node] = set()
    for c in candidates:
        out |= c.consolidation_points
    return frozenset(out)


# --- FP-growth -------------------------------------------------------------

def item_order(transactions: Iterable[Iterable[Hashable]]) -> list[tuple[Hashable, int]]:
    """Items with their appearance counts, by descending count then ascending item."""
    counts = Counter(item for t in transactions for item in set(t))
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def reorder_transactions(transactions: Sequence[Iterable[Hashable]], min_count: int = 1) -> list[list]:
    """Each transaction's frequent items in global FP-tree order."""
    rank = {item: r for r, (item, n) in enumerate(item_order(transactions)) if n >= min_count}
    return [sorted((i for i in set(t) if i in rank), key=rank.__getitem__) for t in transactions]


class _FPNode:
    __slots__ = ("item", "count", "parent", "children", "link")

    def __init__(self, item, parent):
        self.item = item
        self.count = 0
        self.parent = parent
        self.children: dict = {}
        self.link = None


class FPTree:
    """Prefix tree over weighted transactions, with per-item node chains."""

    def __init__(self, weighted: Iterable[tuple[Sequence, int]], min_count: int):
        weighted = list(weighted)
        counts: Counter = Counter()
        for items, w in weighted:
            for i in items:
                counts[i] += w
        self.counts = {i: n for i, n in counts.items() if n >= min_count}
        self.order = sorted(self.counts, key=lambda i: (-self.counts[i], i))
        rank = {i: r for r, i in enumerate(self.order)}
        self.root = _FPNode(None, None)
        self.heads: dict = {}
        self._tails: dict = {}
        for items, w in weighted:
            path = sorted((i for i in items if i in rank), key=rank.__getitem__)
            self._insert(path, w)

    def _insert(self, path: Sequence, weight: int) -> None:
        node = self.root
        node.count += weight
        for item in path:
            child = node.children.get(item)
            if child is None:
                child = _FPNode(item, node)
                node.children[item] = child
                if item in self._tails:
                    self._tails[item].link = child
                else:
                    self.heads[item] = child
                self._tails[item] = child
            child.count += weight
            node = child

    def nodes(self, item) -> Iterator[_FPNode]:
        node = self.heads.get(item)
        while node is not None:
            yield node
            node = node.link

    def prefix_paths(self, item) -> list[tuple[list, int]]:
        """Conditional pattern base of ``item``."""
        out = []
        for node in self.nodes(item):
            path = []
            p = node.parent
            while p is not None and p.item is not None:
                path.append(p.item)
                p = p.parent
            if path:
                out.append((path[::-1], node.count))
        return out

    def single_path(self) -> list[_FPNode] | None:
        out = []
        node = self.root
        while node.children:
            if len(node.children) > 1:
                return None
            node = next(iter(node.children.values()))
            out.append(node)
        return out


def fp_growth(transactions: Iterable[Iterable[Hashable]], min_count: int) -> Iterator[tuple[frozenset, int]]:
    """All itemsets (singletons included) with support count >= ``min_count``."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    tree = FPTree(((list(set(t)), 1) for t in transactions), min_count)
    yield from _grow(tree, frozenset(), min_count)


def _grow(tree: FPTree, suffix: frozenset, min_count: int) -> Iterator[tuple[frozenset, int]]:
    path = tree.single_path()
    if path is not None:
        # every combination of a single prefix path is frequent with the
        # count of its deepest node
        for r in range(1, len(path) + 1):
            for combo in combinations(path, r):
                yield suffix | {n.item for n in combo}, min(n.count for n in combo)
        return
    for item in reversed(tree.order):
        pattern = suffix | {item}
        yield pattern, tree.counts[item]
        cond = FPTree(tree.prefix_paths(item), min_count)
        if cond.counts:
            yield from _grow(cond, pattern, min_count)


@dataclass
class MiningResult:
    candidates: list[CandidateSet] = field(default_factory=list)
    # frequent itemsets (size >= 2) discarded by the feasibility constraint
    rejected: list[tuple[frozenset, int]] = field(default_factory=list)


def fp_growth_constrained(
    transactions: Sequence[Iterable[AbstractPoint]],
    min_sup_count: int,
    feasibility=None,
    maximal_only: bool = False,
    group: GroupKey | None = None,
) -> MiningResult:
    """Frequent itemsets of size >= 2 that satisfy the feasibility constraint.

    ``feasibility`` defaults to :class:`AlwaysFeasible`. Consolidation points
    are attached to every emitted candidate. With ``maximal_only`` only
    candidates without a frequent, feasible strict superset are kept.
    """
    if min_sup_count < 1:
        raise ValueError("min_sup_count must be >= 1")
    feasibility = feasibility or AlwaysFeasible()
    dest, dow = group if group is not None else (None, -1)
    kept: list[tuple[frozenset, int]] = []
    rejected: list[tuple[frozenset, int]] = []
    for items, support in fp_growth(transactions, min_sup_count):
        if len(items) < 2:
            continue
        if feasibility.feasible(items):
            kept.append((items, support))
        else:
            rejected.append((items, support))
    if maximal_only:
        kept = _maximal(kept)
    cands = [
        CandidateSet(dest, dow, items, support, feasibility.consolidation_points(items))
        for items, support in kept
    ]
    cands.sort(key=CandidateSet.sort_key)
    rejected.sort(key=lambda r: (len(r[0]), sorted(r[0])))
    return MiningResult(cands, rejected)


def _maximal(sets: list[tuple[frozenset, int]]) -> list[tuple[frozenset, int]]:
    by_size = sorted(sets, key=lambda s: -len(s[0]))
    out: list[tuple[frozenset, int]] = []
    for items, sup in by_size:
        if not any(items < other for other, _ in out):
            out.append((items, sup))
    return out


def support_threshold(min_sup: float, n_transactions: int) -> int:
    """Absolute count for an integer threshold, or ceil(frac * n) for a fraction in (0, 1]."""
    if float(min_sup).is_integer() and min_sup >= 1:
        return int(min_sup)
    if not 0 < min_sup <= 1:
        raise ValueError(f"fractional min_sup must be in (0, 1], got {min_sup}")
    return max(1, math.ceil(min_sup * n_transactions - 1e-9))


def mine_groups(
    transactions: Mapping[GroupKey, Sequence[frozenset[AbstractPoint]]],
    min_sup: float,
    feasibility=None,
    maximal_only: bool = False,
) -> dict[GroupKey, MiningResult]:
    """Run the constrained miner independently for each (destination, dow) group."""
    out = {}
    for key in sorted(transactions):
        txs = transactions[key]
        out[key] = fp_growth_constrained(
            txs, support_threshold(min_sup, len(txs)), feasibility, maximal_only, group=key
        )
    return out


def consolidation_points_by_group(results: Mapping[GroupKey, MiningResult]) -> dict[GroupKey, frozenset[Node]]:
    return {k: union_cp(r.candidates) for k, r in results.items()}


def write_candidates(results: Mapping[GroupKey, MiningResult], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(results):
            for c in results[key].candidates:
                fh.write(json.dumps(c.to_record(), sort_keys=True) + "\n")


def read_candidates(path) -> list[CandidateSet]:
    with open(path, encoding="utf-8") as fh:
        return [CandidateSet.from_record(json.loads(line)) for line in fh if line.strip()]


def write_transactions(transactions: Mapping[GroupKey, Sequence[frozenset[AbstractPoint]]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (dest, dow) in sorted(transactions):
            for t in transactions[(dest, dow)]:
                rec = {"destination": str(dest), "due_dow": dow, "items": [p.to_record() for p in sorted(t)]}
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_transactions(path) -> dict[GroupKey, list[frozenset[AbstractPoint]]]:
    out: dict[GroupKey, list[frozenset[AbstractPoint]]] = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            key = (Node.parse(rec["destination"]), int(rec["due_dow"]))
            out[key].append(frozenset(AbstractPoint.from_record(r) for r in rec["items"]))
    return dict(out)


def candidates_by_group(candidates: Iterable[CandidateSet]) -> dict[GroupKey, list[CandidateSet]]:
    out: dict[GroupKey, list[CandidateSet]] = defaultdict(list)
    for c in candidates:
        out[c.group].append(c)
    return dict(out)
