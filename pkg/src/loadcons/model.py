"""Domain types for the freight network: terminals, sorts, nodes and loads.

All absolute times are integer minutes since the dataset epoch (midnight of
day 0, which is declared to be a Monday). Due dates are integer day indices.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

MINUTES_PER_DAY = 1440
DEFAULT_PARTIAL_THRESHOLD = 0.80


class InvalidLoadError(ValueError):
    """A load violates one of its arithmetic invariants."""


class DataError(ValueError):
    """Input data cannot be resolved (unknown sort, unreadable record, ...)."""


class ParseError(DataError):
    def __init__(self, path: str | Path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class ContractViolation(RuntimeError):
    """A caller broke an operation precondition."""


def day_of(minutes: int) -> int:
    return minutes // MINUTES_PER_DAY


def day_of_week(day: int) -> int:
    """0 = Monday, since the epoch is a Monday."""
    return day % 7


@dataclass(frozen=True)
class Terminal:
    id: str
    lat: float
    lon: float

    @property
    def coords(self) -> tuple[float, float]:
        return (self.lat, self.lon)


@dataclass(frozen=True)
class Sort:
    terminal: str
    sort_id: str
    dep_minutes: int  # earliest departure within the day
    arr_minutes: int  # latest arrival within the day

    @property
    def node(self) -> Node:
        return Node(self.terminal, self.sort_id)


@dataclass(frozen=True, order=True)
class Node:
    terminal: str
    sort: str

    def __str__(self) -> str:
        return f"{self.terminal}/{self.sort}"

    @classmethod
    def parse(cls, text: str) -> Node:
        terminal, _, sort = text.partition("/")
        return cls(terminal, sort)


@dataclass(frozen=True)
class Load:
    id: str
    origin: Node
    destination: Node
    departure: int  # t_l, absolute minutes
    due_day: int
    volume: float
    capacity: float
    trailer_type: str = "std"

    @property
    def departure_day(self) -> int:
        return day_of(self.departure)

    @property
    def transit_days(self) -> int:
        return transit_days(self)

    @property
    def utilization(self) -> float:
        return self.volume / self.capacity

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "origin_terminal": self.origin.terminal,
            "origin_sort": self.origin.sort,
            "dest_terminal": self.destination.terminal,
            "dest_sort": self.destination.sort,
            "departure_min": self.departure,
            "due_day": self.due_day,
            "volume": self.volume,
            "capacity": self.capacity,
            "trailer_type": self.trailer_type,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> Load:
        return cls(
            id=str(rec["id"]),
            origin=Node(str(rec["origin_terminal"]), str(rec["origin_sort"])),
            destination=Node(str(rec["dest_terminal"]), str(rec["dest_sort"])),
            departure=int(rec["departure_min"]),
            due_day=int(rec["due_day"]),
            volume=float(rec["volume"]),
            capacity=float(rec["capacity"]),
            trailer_type=str(rec.get("trailer_type", "std")),
        )


def transit_days(load: Load) -> int:
    """Days between the departure day and the due day."""
    omega = load.due_day - day_of(load.departure)
    if omega < 0:
        raise InvalidLoadError(f"load {load.id}: due day {load.due_day} precedes departure day")
    return omega


def is_partial(load: Load, threshold: float = DEFAULT_PARTIAL_THRESHOLD) -> bool:
    if load.capacity <= 0:
        raise InvalidLoadError(f"load {load.id}: nonpositive capacity")
    return load.volume / load.capacity < threshold


@dataclass(frozen=True)
class Network:
    terminals: tuple[Terminal, ...] = ()
    sorts: tuple[Sort, ...] = ()
    loads: tuple[Load, ...] = ()

    @cached_property
    def terminal_by_id(self) -> dict[str, Terminal]:
        out: dict[str, Terminal] = {}
        for t in self.terminals:
            out.setdefault(t.id, t)
        return out

    @cached_property
    def sort_by_node(self) -> dict[Node, Sort]:
        out: dict[Node, Sort] = {}
        for s in self.sorts:
            out.setdefault(s.node, s)
        return out

    @cached_property
    def load_by_id(self) -> dict[str, Load]:
        return {l.id: l for l in self.loads}

    def terminal(self, node_or_id: Node | str) -> Terminal:
        key = node_or_id.terminal if isinstance(node_or_id, Node) else node_or_id
        try:
            return self.terminal_by_id[key]
        except KeyError:
            raise DataError(f"unknown terminal {key!r}") from None

    def sort(self, node: Node) -> Sort:
        try:
            return self.sort_by_node[node]
        except KeyError:
            raise DataError(f"unknown sort {node}") from None

    def with_loads(self, loads: Iterable[Load]) -> Network:
        return Network(self.terminals, self.sorts, tuple(loads))


@dataclass(frozen=True)
class Violation:
    record: str
    rule: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"[{self.severity}] {self.record}: {self.rule}"


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def validate_network(network: Network) -> list[Violation]:
    """Check every type invariant; violations are returned, never raised.

    The report is sorted, so it does not depend on record order. Departures
    before the origin sort's earliest departure are reported as warnings only.
    """
    out: list[Violation] = []
    seen: set[str] = set()
    for t in network.terminals:
        rid = f"terminal:{t.id}"
        if t.id in seen:
            out.append(Violation(rid, "duplicate terminal id"))
        seen.add(t.id)
        if not (_finite(t.lat) and -90 <= t.lat <= 90):
            out.append(Violation(rid, "latitude out of bounds"))
        if not (_finite(t.lon) and -180 <= t.lon <= 180):
            out.append(Violation(rid, "longitude out of bounds"))

    seen_sorts: set[Node] = set()
    for s in network.sorts:
        rid = f"sort:{s.terminal}/{s.sort_id}"
        if s.node in seen_sorts:
            out.append(Violation(rid, "duplicate (terminal, sort_id)"))
        seen_sorts.add(s.node)
        if s.terminal not in network.terminal_by_id:
            out.append(Violation(rid, "sort references unknown terminal"))
        for name, val in (("dep_minutes", s.dep_minutes), ("arr_minutes", s.arr_minutes)):
            if not (0 <= val < MINUTES_PER_DAY):
                out.append(Violation(rid, f"{name} outside [0, 1440)"))

    seen_loads: set[str] = set()
    for l in network.loads:
        rid = f"load:{l.id}"
        if l.id in seen_loads:
            out.append(Violation(rid, "duplicate load id"))
        seen_loads.add(l.id)
        for role, node in (("origin", l.origin), ("destination", l.destination)):
            if node not in network.sort_by_node:
                out.append(Violation(rid, f"{role} sort {node} undeclared"))
        if l.departure < 0:
            out.append(Violation(rid, "negative departure"))
        if l.due_day < day_of(l.departure):
            out.append(Violation(rid, "due day before departure day"))
        if not (_finite(l.capacity) and l.capacity > 0):
            out.append(Violation(rid, "capacity must be positive"))
        if not (_finite(l.volume) and l.volume >= 0):
            out.append(Violation(rid, "volume must be nonnegative"))
        elif _finite(l.capacity) and l.volume > l.capacity:
            out.append(Violation(rid, "volume exceeds capacity"))
        sort = network.sort_by_node.get(l.origin)
        if sort is not None and l.departure >= 0 and l.departure % MINUTES_PER_DAY < sort.dep_minutes:
            out.append(Violation(rid, "departs before origin sort's earliest departure", "warning"))
    return sorted(out, key=lambda v: (v.record, v.rule, v.severity))


def errors_only(report: Sequence[Violation]) -> list[Violation]:
    return [v for v in report if v.severity == "error"]


# --- file formats -----------------------------------------------------------

TERMINAL_HEADER = ["id", "lat", "lon"]
SORT_HEADER = ["terminal", "sort_id", "dep_minutes", "arr_minutes"]


def _read_csv(path: Path, header: list[str]) -> list[tuple[int, dict]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != header:
            raise ParseError(path, 1, f"expected header {','.join(header)}, got {reader.fieldnames}")
        for row in reader:
            rows.append((reader.line_num, row))
    return rows


def read_terminals(path: str | Path) -> list[Terminal]:
    path = Path(path)
    out = []
    for line, row in _read_csv(path, TERMINAL_HEADER):
        try:
            out.append(Terminal(row["id"], float(row["lat"]), float(row["lon"])))
        except (TypeError, ValueError) as exc:
            raise ParseError(path, line, str(exc)) from None
    return out


def read_sorts(path: str | Path) -> list[Sort]:
    path = Path(path)
    out = []
    for line, row in _read_csv(path, SORT_HEADER):
        try:
            out.append(Sort(row["terminal"], row["sort_id"], int(row["dep_minutes"]), int(row["arr_minutes"])))
        except (TypeError, ValueError) as exc:
            raise ParseError(path, line, str(exc)) from None
    return out


def read_loads(path: str | Path) -> list[Load]:
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                out.append(Load.from_record(json.loads(text)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(path, lineno, f"{type(exc).__name__}: {exc}") from None
    return out


def read_network(directory: str | Path) -> Network:
    d = Path(directory)
    return Network(
        tuple(read_terminals(d / "terminals.csv")),
        tuple(read_sorts(d / "sorts.csv")),
        tuple(read_loads(d / "loads.jsonl")),
    )


def write_network(network: Network, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "terminals.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TERMINAL_HEADER)
        for t in network.terminals:
            w.writerow([t.id, repr(t.lat), repr(t.lon)])
    with open(d / "sorts.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SORT_HEADER)
        for s in network.sorts:
            w.writerow([s.terminal, s.sort_id, s.dep_minutes, s.arr_minutes])
    with open(d / "loads.jsonl", "w", encoding="utf-8") as fh:
        for l in network.loads:
            fh.write(json.dumps(l.to_record(), sort_keys=True) + "\n")
