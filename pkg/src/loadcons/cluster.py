"""Spatio-temporal DBSCAN over partial loads bound for one destination.

Two event points are neighbours when they share a due day and their route
bearings (origin -> destination) differ by at most ``eps`` radians.
"""

from __future__ import annotations

import bisect
import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .geo import TWO_PI, DegenerateBearingError, angle_distance, route_bearing
from .model import Load, Network, Node, is_partial


@dataclass(frozen=True, order=True)
class EventPoint:
    load_id: str
    origin: Node
    destination: Node
    due_day: int
    bearing: float


@dataclass(frozen=True)
class Cluster:
    destination: Node
    due_day: int
    members: tuple[EventPoint, ...]  # sorted by load id

    @property
    def load_ids(self) -> tuple[str, ...]:
        return tuple(p.load_id for p in self.members)

    def to_record(self) -> dict:
        return {
            "destination": str(self.destination),
            "due_day": self.due_day,
            "members": list(self.load_ids),
        }


def build_event_points(
    loads: Iterable[Load], network: Network, reference: str = "west"
) -> tuple[list[EventPoint], list[tuple[str, str]]]:
    """One event point per load; loads whose origin terminal is the destination are skipped."""
    points: list[EventPoint] = []
    skipped: list[tuple[str, str]] = []
    for load in loads:
        o = network.terminal(load.origin)
        d = network.terminal(load.destination)
        try:
            phi = route_bearing(o, d, reference)
        except DegenerateBearingError:
            skipped.append((load.id, "origin coincides with destination"))
            continue
        points.append(EventPoint(load.id, load.origin, load.destination, load.due_day, phi))
    return points, skipped


class _CircularIndex:
    """Bearings sorted around the circle, for eps-window neighbour queries."""

    def __init__(self, points: Sequence[EventPoint]):
        order = sorted(range(len(points)), key=lambda i: (points[i].bearing, points[i].load_id))
        self._idx = order
        self._keys = [points[i].bearing for i in order]
        self._points = points

    def neighbours(self, i: int, eps: float) -> list[int]:
        phi = self._points[i].bearing
        if eps >= TWO_PI / 2:
            return list(range(len(self._points)))
        lo, hi = phi - eps, phi + eps
        found = set(self._window(lo, hi))
        if lo < 0:
            found.update(self._window(lo + TWO_PI, TWO_PI))
        if hi >= TWO_PI:
            found.update(self._window(0.0, hi - TWO_PI))
        # window edges are inclusive up to float noise; the metric decides
        return sorted(j for j in found if angle_distance(phi, self._points[j].bearing) <= eps)

    def _window(self, lo: float, hi: float) -> list[int]:
        a = bisect.bisect_left(self._keys, lo - 1e-12)
        b = bisect.bisect_right(self._keys, hi + 1e-12)
        return self._idx[a:b]


def _dbscan_group(points: list[EventPoint], eps: float, min_pts: int) -> list[list[EventPoint]]:
    points = sorted(points, key=lambda p: p.load_id)
    index = _CircularIndex(points)
    nbrs = [index.neighbours(i, eps) for i in range(len(points))]
    label: list[int | None] = [None] * len(points)
    clusters: list[list[int]] = []
    for i in range(len(points)):
        if label[i] is not None or len(nbrs[i]) < min_pts:
            continue
        cid = len(clusters)
        members = [i]
        label[i] = cid
        frontier = [i]
        while frontier:
            nxt = []
            for p in frontier:
                if len(nbrs[p]) < min_pts:
                    continue  # border point: reachable but does not expand
                for q in nbrs[p]:
                    if label[q] is None:
                        label[q] = cid
                        members.append(q)
                        nxt.append(q)
            frontier = nxt
        clusters.append(members)
    return [sorted((points[j] for j in m), key=lambda p: p.load_id) for m in clusters]


def st_dbscan(points: Sequence[EventPoint], eps: float, min_pts: int = 2) -> list[Cluster]:
    """DBSCAN with the joint (same due day, bearing within eps) neighbourhood.

    ``min_pts`` counts the point itself. Border points reachable from two
    clusters go to the cluster whose core is found first when iterating
    in load-id order. Output clusters are sorted canonically.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if min_pts < 2:
        raise ValueError("min_pts must be at least 2")
    groups: dict[tuple[Node, int], list[EventPoint]] = defaultdict(list)
    for p in points:
        groups[(p.destination, p.due_day)].append(p)
    out: list[Cluster] = []
    for (dest, due), pts in groups.items():
        for members in _dbscan_group(pts, eps, min_pts):
            out.append(Cluster(dest, due, tuple(members)))
    out.sort(key=lambda c: (c.destination, c.due_day, c.load_ids))
    return out


def noise_points(points: Sequence[EventPoint], clusters: Iterable[Cluster]) -> list[EventPoint]:
    clustered = {p.load_id for c in clusters for p in c.members}
    return sorted((p for p in points if p.load_id not in clustered), key=lambda p: p.load_id)


def cluster_loads(
    network: Network,
    loads: Iterable[Load] | None = None,
    eps: float = 0.30,
    min_pts: int = 2,
    partial_threshold: float = 0.80,
    destinations: Iterable[Node] | None = None,
    reference: str = "west",
) -> tuple[list[Cluster], list[EventPoint], list[tuple[str, str]]]:
    """Cluster the partial loads of ``loads`` (default: all network loads).

    Returns (clusters, noise, skipped).
    """
    loads = network.loads if loads is None else loads
    wanted = None if destinations is None else set(destinations)
    partial = [
        l for l in loads
        if is_partial(l, partial_threshold) and (wanted is None or l.destination in wanted)
    ]
    points, skipped = build_event_points(partial, network, reference)
    clusters = st_dbscan(points, eps, min_pts)
    return clusters, noise_points(points, clusters), skipped


def write_clusters(clusters: Iterable[Cluster], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in clusters:
            fh.write(json.dumps(c.to_record(), sort_keys=True) + "\n")


def read_cluster_records(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
