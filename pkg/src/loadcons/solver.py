"""Exact consolidation planning for one destination-day.

Each load picks one of its paths (xi) and each trailer either runs the last
leg of its load's chosen path or is eliminated (nu). Loads whose chosen paths
share a last-leg origin pool their volume, and the trailers activated there
must cover it. The objective is the detour cost of every chosen path plus the
last-leg cost of every activated trailer.

``solve_exact`` splits the loads into components that share no
capacity-constrained origin and solves each by branch and bound. Bounds come
from a Lagrangian relaxation of the one-path-per-load rows: once those are
priced, every last-leg origin becomes an independent choice of who rides
and who keeps a trailer, solved by a small dynamic program over a rounded
capacity balance. The search starts with a cutoff just above the root bound
and widens it until the incumbent is proven. ``solve_bruteforce``
enumerates everything and is the test oracle.
"""

from __future__ import annotations

import itertools
import math
import time
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import ContractViolation, Load, Node
from .pathgen import Path

TOL = 1e-9
CAPACITY_SCOPES = ("all", "hubs")


@dataclass(frozen=True)
class Instance:
    loads: tuple[Load, ...]
    paths: Mapping[str, tuple[Path, ...]]
    hubs: frozenset[Node] = frozenset()
    destination: Node | None = None
    due_day: int | None = None

    @classmethod
    def build(cls, loads: Iterable[Load], paths: Mapping[str, Sequence[Path]], hubs: Iterable[Node] = (),
              destination: Node | None = None, due_day: int | None = None) -> Instance:
        loads = tuple(sorted(loads, key=lambda l: l.id))
        ordered = {l.id: tuple(sorted(paths[l.id], key=Path.key)) for l in loads}
        inst = cls(loads, ordered, frozenset(hubs), destination, due_day)
        inst.check()
        return inst

    def check(self) -> None:
        for l in self.loads:
            ps = self.paths.get(l.id, ())
            if not ps:
                raise ContractViolation(f"load {l.id} has no path")
            if sum(p.is_direct for p in ps) != 1:
                raise ContractViolation(f"load {l.id} must have exactly one direct path")

    @property
    def n_paths(self) -> int:
        return sum(len(ps) for ps in self.paths.values())

    def direct(self, load_id: str) -> Path:
        return next(p for p in self.paths[load_id] if p.is_direct)

    def constrained(self, node: Node, scope: str = "all") -> bool:
        if scope not in CAPACITY_SCOPES:
            raise ValueError(f"capacity scope must be one of {CAPACITY_SCOPES}")
        return scope == "all" or node in self.hubs


@dataclass
class Plan:
    xi: tuple[tuple[str, Path], ...]  # (load id, path) pairs with xi = 1
    nu: frozenset[tuple[str, Path]]  # (load id, path) pairs with nu = 1
    objective: float
    optimal: bool = True
    method: str = "exact"
    stats: dict = field(default_factory=dict)

    @property
    def assignment(self) -> dict[str, Path]:
        return {lid: p for lid, p in self.xi}

    @property
    def activated(self) -> frozenset[str]:
        return frozenset(lid for lid, _ in self.nu)

    def n_trailers(self) -> int:
        return len(self.nu)

    def to_records(self) -> list[dict]:
        act = self.nu
        return [
            {
                "load_id": lid,
                "kind": p.kind,
                "hub": None if p.hub is None else str(p.hub),
                "hub_load_id": p.hub_load_id,
                "last_leg_origin": str(p.last_leg_origin),
                "trailer_active": (lid, p) in act,
                "plan_optimal": self.optimal,
            }
            for lid, p in self.xi
        ]


def make_plan(instance: Instance, assignment: Mapping[str, Path], activated: Iterable[str],
              optimal: bool, method: str, stats: dict | None = None) -> Plan:
    act = set(activated)
    xi = tuple((l.id, assignment[l.id]) for l in instance.loads)
    nu = frozenset((lid, p) for lid, p in xi if lid in act)
    obj = sum(p.detour_cost for _, p in xi) + sum(p.last_leg_cost for _, p in nu)
    return Plan(xi, nu, obj, optimal, method, dict(stats or {}))


def plan_objective(plan: Plan) -> float:
    return sum(p.detour_cost for _, p in plan.xi) + sum(p.last_leg_cost for _, p in plan.nu)


def verify_plan(instance: Instance, plan: Plan, capacity_scope: str = "all") -> list[str]:
    """Constraint violations of ``plan``; empty iff the plan is feasible."""
    out: list[str] = []
    by_load: dict[str, list[Path]] = {}
    for lid, p in plan.xi:
        by_load.setdefault(lid, []).append(p)
    loads = {l.id: l for l in instance.loads}
    for lid in sorted(set(by_load) - set(loads)):
        out.append(f"one-path: unknown load {lid} in plan")
    for l in instance.loads:
        chosen = by_load.get(l.id, [])
        if len(chosen) != 1:
            out.append(f"one-path: load {l.id} selects {len(chosen)} paths")
        for p in chosen:
            if p not in instance.paths[l.id]:
                out.append(f"one-path: load {l.id} selects a path outside its feasible set")
    chosen_pairs = set(plan.xi)
    for lid, p in sorted(plan.nu, key=lambda x: (x[0], x[1].key())):
        if (lid, p) not in chosen_pairs:
            out.append(f"compatibility: trailer of {lid} active on an unselected path")
    volume: dict[Node, float] = {}
    cap: dict[Node, float] = {}
    for lid, p in plan.xi:
        if lid in loads:
            volume[p.last_leg_origin] = volume.get(p.last_leg_origin, 0.0) + loads[lid].volume
    for lid, p in plan.nu:
        if lid in loads and (lid, p) in chosen_pairs:
            cap[p.last_leg_origin] = cap.get(p.last_leg_origin, 0.0) + loads[lid].capacity
    for node in sorted(volume):
        if not instance.constrained(node, capacity_scope):
            continue
        slack = cap.get(node, 0.0) - volume[node]
        if slack < -TOL * max(1.0, volume[node]):
            out.append(f"capacity: hub {node} short by {-slack:g} (volume {volume[node]:g}, capacity {cap.get(node, 0.0):g})")
    if not math.isclose(plan.objective, plan_objective(plan), rel_tol=1e-9, abs_tol=1e-6):
        out.append(f"objective: reported {plan.objective} differs from recomputed {plan_objective(plan)}")
    return out


# --- covering knapsack ---------------------------------------------------------

def min_cover(trailers: Sequence[tuple[float, float]], volume: float) -> tuple[float, tuple[int, ...]]:
    """Cheapest subset of (capacity, cost) trailers with total capacity >= volume.

    Ties prefer fewer trailers, then the lexicographically smallest index set.
    Returns (inf, ()) when even all trailers fall short.
    """
    if volume <= TOL:
        return 0.0, ()
    n = len(trailers)
    if sum(q for q, _ in trailers) < volume - TOL * max(1.0, volume):
        return math.inf, ()
    order = sorted(range(n), key=lambda i: (trailers[i][1] / trailers[i][0], i))
    caps = [trailers[i][0] for i in order]
    costs = [trailers[i][1] for i in order]
    suffix_cap = list(itertools.accumulate(reversed(caps)))[::-1] + [0.0]
    best = [math.inf, n + 1, ()]
    need_tol = TOL * max(1.0, volume)

    def lp_bound(k: int, remaining: float) -> float:
        # fractional fill with the best ratios among items k..n-1
        b = 0.0
        for i in range(k, n):
            if caps[i] >= remaining:
                return b + costs[i] * remaining / caps[i]
            b += costs[i]
            remaining -= caps[i]
        return math.inf

    chosen: list[int] = []

    def better(c: float, cnt: int, sel: tuple) -> bool:
        if c < best[0] - TOL * max(1.0, abs(best[0]) if best[0] < math.inf else 1.0):
            return True
        if c <= best[0] + TOL * max(1.0, abs(c)):
            return (cnt, sel) < (best[1], best[2])
        return False

    def dfs(k: int, remaining: float, spent: float) -> None:
        if remaining <= need_tol:
            sel = tuple(sorted(order[i] for i in chosen))
            if better(spent, len(chosen), sel):
                best[0], best[1], best[2] = spent, len(chosen), sel
            return
        if k == n or suffix_cap[k] < remaining - need_tol:
            return
        if spent + lp_bound(k, remaining) > best[0] + TOL * max(1.0, abs(best[0]) if best[0] < math.inf else 1.0):
            return
        chosen.append(k)
        dfs(k + 1, remaining - caps[k], spent + costs[k])
        chosen.pop()
        dfs(k + 1, remaining, spent)

    dfs(0, volume, 0.0)
    return best[0], best[2]


class CoverFrontier:
    """Pareto frontier of (capacity, cost) over all subsets of a trailer pool.

    ``cost(v)`` is the minimum cost of any subset with capacity >= v.
    """

    def __init__(self, trailers: Iterable[tuple[float, float]]):
        pts = [(0.0, 0.0)]
        for q, f in trailers:
            merged = pts + [(c + q, k + f) for c, k in pts]
            merged.sort(key=lambda x: (-x[0], x[1]))
            front = []
            best_cost = math.inf
            for c, k in merged:
                if k < best_cost - 1e-12:
                    front.append((c, k))
                    best_cost = k
            pts = front[::-1]
        self.caps = [c for c, _ in pts]
        self.costs = [k for _, k in pts]

    def cost(self, volume: float) -> float:
        if volume <= TOL:
            return 0.0
        i = bisect_left(self.caps, volume - TOL * max(1.0, volume))
        return self.costs[i] if i < len(self.caps) else math.inf


# --- branch and bound ---------------------------------------------------------
#
# Bounds come from relaxing the one-path-per-load rows with multipliers lam.
# The relaxed problem splits into one subproblem per last-leg origin g: pick
# loads that can reach g, each either riding or owning an active trailer,
# paying (detour - lam) per picked load plus the last-leg cost of every owned
# trailer, with owned capacity covering the picked volume. Volumes are
# rounded onto an integer grid in the relaxation's favour so the subproblem is
# a small dynamic program over the capacity balance.

_OUT, _RIDE, _OWN = 0, 1, 2
_EXCLUDED = -2  # load placed at some other origin


@dataclass
class _Opt:
    group: int
    detour: float
    trailer: float
    path: Path


def _balance_dp(items: list[tuple[float, float, int, int, bool]]):
    """Min cost over out/ride/own states with nonnegative final capacity balance.

    ``items`` holds (ride cost, own cost, consumption, provision, forced).
    Returns (value, per-item states).
    """
    total = sum(c for w, _, c, _, f in items if f or w < 0)
    size = 2 * total + 1
    dp = np.full(size, np.inf)
    dp[total] = 0.0
    history = []
    for w, a, c, p, forced in items:
        new = np.full(size, np.inf) if forced else dp.copy()
        if forced or w < 0:
            if c == 0:
                np.minimum(new, dp + w, out=new)
            elif c < size:
                np.minimum(new[: size - c], dp[c:] + w, out=new[: size - c])
        if p == 0:
            np.minimum(new, dp + a, out=new)
        else:
            if p < size:
                np.minimum(new[p:], dp[: size - p] + a, out=new[p:])
            top = dp[max(0, size - p):].min() + a
            if top < new[-1]:
                new[-1] = top
        history.append(dp)
        dp = new
    i = total + int(np.argmin(dp[total:]))
    value = float(dp[i])
    if value == math.inf:
        return value, [_OUT] * len(items)
    states = [_OUT] * len(items)
    cur = value
    for j in range(len(items) - 1, -1, -1):
        w, a, c, p, forced = items[j]
        prev = history[j]
        target = cur
        if not forced and prev[i] == target:
            cur = prev[i]
            continue
        if (forced or w < 0) and i + c < size and prev[i + c] + w == target:
            states[j] = _RIDE
            i += c
            cur = prev[i]
            continue
        states[j] = _OWN
        if i - p >= 0 and prev[i - p] + a == target:
            i -= p
        else:  # clipped at the top of the balance range
            lo = max(0, size - p)
            i = lo + int(np.argmin(prev[lo:]))
        cur = prev[i]
    return value, states


class _Component:
    """Loads coupled through shared last-leg origins, solved as one search."""

    def __init__(self, loads: list[Load], options: list[list[_Opt]], group_nodes: list[Node],
                 constrained: list[bool]):
        self.loads = loads
        self.n = len(loads)
        self.q = [l.volume for l in loads]
        self.cap = [l.capacity for l in loads]
        self.opts = options
        self.group_nodes = group_nodes
        self.constrained = constrained
        self.groups = sorted({o.group for os in options for o in os})
        self.slot: list[dict[int, int]] = [{o.group: k for k, o in enumerate(os)} for os in options]
        grid = max(self.cap) / 200.0 if self.n else 1.0
        self.cons = [max(0, math.floor(q / grid - 1e-7)) for q in self.q]
        self.prov = [max(0, math.ceil((c - q) / grid + 1e-7)) for q, c in zip(self.q, self.cap)]
        self.alive = [list(range(len(os))) for os in options]
        self.banned: set[tuple[int, int]] = set()  # (load, origin) pairs ruled out in the current subtree
        self._exact: dict[tuple, float] = {}
        self._value_cache: dict[tuple, tuple[float, tuple[int, ...]]] = {}
        self._index_members()

    def _index_members(self) -> None:
        self.members: dict[int, list[int]] = {g: [] for g in self.groups}
        for u in range(self.n):
            for k in self.alive[u]:
                self.members[self.opts[u][k].group].append(u)
        self._value_cache.clear()

    # exact costs -------------------------------------------------------------
    def exact_cost(self, g: int, members: tuple[int, ...]) -> float:
        if not self.constrained[g] or not members:
            return 0.0
        hit = self._exact.get((g, members))
        if hit is None:
            vol = sum(self.q[u] for u in members)
            trailers = [(self.cap[u], self.opts[u][self.slot[u][g]].trailer) for u in members]
            hit = min_cover(trailers, vol)[0]
            self._exact[(g, members)] = hit
        return hit

    def evaluate(self, choice: Sequence[int]) -> float:
        members: dict[int, list[int]] = {}
        total = 0.0
        for u, k in enumerate(choice):
            o = self.opts[u][k]
            total += o.detour
            members.setdefault(o.group, []).append(u)
        for g, ms in members.items():
            total += self.exact_cost(g, tuple(ms))
        return total

    def trailers(self, choice: Sequence[int]) -> set[int]:
        members: dict[int, list[int]] = {}
        for u, k in enumerate(choice):
            members.setdefault(self.opts[u][k].group, []).append(u)
        active: set[int] = set()
        for g, ms in members.items():
            if not self.constrained[g]:
                continue
            vol = sum(self.q[u] for u in ms)
            _, picked = min_cover([(self.cap[u], self.opts[u][self.slot[u][g]].trailer) for u in ms], vol)
            active.update(ms[i] for i in picked)
        return active

    # relaxation --------------------------------------------------------------
    def group_value(self, g: int, lam: Sequence[float], assigned: Sequence[int]) -> tuple[float, tuple[int, ...]]:
        """Value of origin g's subproblem and the loads it picks, under a partial assignment."""
        items = []
        who = []
        any_gain = False
        banned = self.banned
        for u in self.members[g]:
            k = assigned[u]
            if k == _EXCLUDED or (k >= 0 and self.opts[u][k].group != g) or (k < 0 and (u, g) in banned):
                continue
            forced = k >= 0
            o = self.opts[u][self.slot[u][g]]
            w = o.detour - lam[u]
            a = w + o.trailer
            any_gain = any_gain or forced or w < 0 or a < 0
            items.append((w, a, self.cons[u], self.prov[u], forced))
            who.append(u)
        if not any_gain:
            return 0.0, ()
        if not self.constrained[g]:
            value = sum(w if f else min(0.0, w) for w, _, _, _, f in items)
            return value, tuple(u for u, (w, _, _, _, f) in zip(who, items) if f or w < 0)
        if len(items) == 1:
            w, a, c, p, f = items[0]
            value = min([a] + ([w] if c == 0 else []) + ([] if f else [0.0]))
            return value, (() if value == 0.0 and not f else tuple(who))
        key = (g, tuple(who), tuple(items))
        hit = self._value_cache.get(key)
        if hit is None:
            value, states = _balance_dp(items)
            hit = (value, tuple(u for u, s in zip(who, states) if s != _OUT))
            if len(self._value_cache) > 200_000:
                self._value_cache.clear()
            self._value_cache[key] = hit
        return hit

    def relaxed_bound(self, lam: Sequence[float], assigned: Sequence[int]) -> float:
        return sum(lam) + sum(self.group_value(g, lam, assigned)[0] for g in self.groups)

    def subgradient(self, lam: list[float], ub: float, iters: int, deadline: float):
        """Improve the multipliers; returns (best bound, its multipliers, best heuristic choice)."""
        assigned = [-1] * self.n
        best_lb, best_lam = -math.inf, list(lam)
        best_choice, best_val = None, math.inf
        theta, stall = 1.0, 0
        for _ in range(iters):
            if time.monotonic() > deadline:
                break
            total = sum(lam)
            hits = [0] * self.n
            homes: list[list[int]] = [[] for _ in range(self.n)]
            for g in self.groups:
                v, picked = self.group_value(g, lam, assigned)
                total += v
                for u in picked:
                    hits[u] += 1
                    homes[u].append(g)
            choice = self._choice_from(homes)
            val = self.evaluate(choice)
            if val < best_val:
                best_val, best_choice = val, choice
                ub = min(ub, val)
            if best_lb == -math.inf or total > best_lb + 1e-9 * max(1.0, abs(best_lb)):
                best_lb, best_lam, stall = total, list(lam), 0
            else:
                stall += 1
                if stall >= 8:
                    theta, stall = theta / 2, 0
            sub = [1 - h for h in hits]
            norm = sum(s * s for s in sub)
            if norm == 0 or theta < 1e-4 or best_lb >= ub - TOL * max(1.0, abs(ub)):
                break
            step = theta * max(ub - total, 1e-6 * max(1.0, abs(ub))) / norm
            lam = [l + step * s for l, s in zip(lam, sub)]
        return best_lb, best_lam, best_choice

    def _choice_from(self, homes: list[list[int]]) -> list[int]:
        choice = []
        for u in range(self.n):
            ks = [self.slot[u][g] for g in homes[u] if self.slot[u][g] in self.alive[u]]
            if not ks:
                ks = self.alive[u]
            choice.append(min(ks, key=lambda k: (self.opts[u][k].detour, k)))
        return choice

    # incumbents ---------------------------------------------------------------
    def local_search(self, choice: list[int]) -> tuple[list[int], float]:
        """Single-load moves evaluated incrementally until no move improves."""
        choice = list(choice)
        members: dict[int, set[int]] = {g: set() for g in self.groups}
        for u, k in enumerate(choice):
            members[self.opts[u][k].group].add(u)

        def gcost(g: int, ms: set[int]) -> float:
            return self.exact_cost(g, tuple(sorted(ms)))

        improved = True
        while improved:
            improved = False
            for u in range(self.n):
                k0 = choice[u]
                g0 = self.opts[u][k0].group
                without = members[g0] - {u}
                base = gcost(g0, members[g0]) - gcost(g0, without) + self.opts[u][k0].detour
                best_k, best_delta = k0, 0.0
                for k in self.alive[u]:
                    if k == k0:
                        continue
                    o = self.opts[u][k]
                    ms = members[o.group]
                    delta = o.detour + gcost(o.group, ms | {u}) - gcost(o.group, ms) - base
                    if delta < best_delta - TOL * max(1.0, abs(base)):
                        best_k, best_delta = k, delta
                if best_k != k0:
                    members[g0].discard(u)
                    members[self.opts[u][best_k].group].add(u)
                    choice[u] = best_k
                    improved = True
        return choice, self.evaluate(choice)

    # search ------------------------------------------------------------------
    def _open(self, u: int) -> list[int]:
        return [k for k in self.alive[u] if (u, self.opts[u][k].group) not in self.banned]

    def _child_bounds(self, u: int, ks: list[int], lam, assigned, gv: dict[int, float],
                      base: float) -> list[tuple[float, int]]:
        """Relaxed bound of each child that sends load u down option k, sorted."""
        gs = [self.opts[u][k].group for k in ks]
        assigned[u] = _EXCLUDED
        out = {g: self.group_value(g, lam, assigned)[0] for g in gs}
        shift = sum(out[g] - gv[g] for g in gs)
        res = []
        for k, g in zip(ks, gs):
            assigned[u] = k
            inside = self.group_value(g, lam, assigned)[0]
            res.append((base + shift - out[g] + inside, k))
        assigned[u] = -1
        res.sort()
        return res

    def _node(self, lam, assigned, ub: float, undo_bans: list, undo_forced: list):
        """Bound a search node, ruling out options whose child bound reaches ``ub``.

        Loads left with a single option are assigned to it. Returns the node
        bound and, for branching, the free load with the largest smallest
        child bound (None if every load is assigned); the bound is inf when
        some load has no option left.
        """
        cut = ub - TOL * max(1.0, abs(ub))
        for _ in range(2):
            gv = {g: self.group_value(g, lam, assigned)[0] for g in self.groups}
            base = sum(lam) + sum(gv.values())
            if base >= cut:
                return base, None
            changed = False
            pick, pick_score = None, -math.inf
            for u in range(self.n):
                if assigned[u] >= 0:
                    continue
                ks = self._open(u)
                if not ks:
                    return math.inf, None
                if len(ks) == 1:
                    assigned[u] = ks[0]
                    undo_forced.append(u)
                    changed = True
                    continue
                bounds = self._child_bounds(u, ks, lam, assigned, gv, base)
                keep = [b for b, _ in bounds if b < cut]
                for b, k in bounds:
                    if b >= cut:
                        ban = (u, self.opts[u][k].group)
                        self.banned.add(ban)
                        undo_bans.append(ban)
                        changed = True
                if not keep:
                    return math.inf, None
                if len(keep) >= 2 and keep[0] > pick_score:
                    pick, pick_score = u, keep[0]
                elif len(keep) == 1:
                    changed = True  # forced on the next pass
            if not changed:
                return base, pick
        gv = {g: self.group_value(g, lam, assigned)[0] for g in self.groups}
        base = sum(lam) + sum(gv.values())
        pick, pick_score = None, -math.inf
        for u in range(self.n):
            if assigned[u] < 0:
                ks = self._open(u)
                if len(ks) == 1:
                    assigned[u] = ks[0]
                    undo_forced.append(u)
                elif len(ks) > 1:
                    first = self._child_bounds(u, ks, lam, assigned, gv, base)[0][0]
                    if first > pick_score:
                        pick, pick_score = u, first
        return base, pick

    def solve(self, max_nodes: int, deadline: float) -> tuple[list[int], float, bool, int]:
        """Optimal choice for this component, or the incumbent if the budget runs out.

        The search runs under a cutoff that starts just above the root bound
        and widens geometrically. A pass that finds nothing below its cutoff
        proves the optimum is at least the cutoff; a pass that finds
        something has, by completing, proved it optimal.
        """
        if self.n == 1:
            v, k = min((self.evaluate([k]), k) for k in range(len(self.opts[0])))
            return [k], v, True, 1
        best_choice, best = self.local_search([0] * self.n)
        lam = [min(o.detour + o.trailer for o in os) for os in self.opts]
        lb, lam, heur = self.subgradient(lam, best, 300, deadline)
        if heur is not None:
            cand, val = self.local_search(heur)
            if val < best - TOL * max(1.0, abs(best)):
                best_choice, best = cand, val
        nodes = 0
        step = 0.0025
        while lb < best - TOL * max(1.0, abs(best)):
            cutoff = min(best, lb + step * max(abs(lb), abs(best), 1.0))
            choice, val, complete, used = self._branch(lam, best_choice, cutoff, max_nodes - nodes, deadline)
            nodes += used
            if val < cutoff:
                best_choice, best = choice, val
            if not complete:
                return best_choice, best, False, nodes
            if val < cutoff or cutoff >= best:
                break
            lb = cutoff
            step *= 2
        return best_choice, best, True, nodes

    def _branch(self, lam, best_choice, best, max_nodes: int, deadline: float):
        assigned = [-1] * self.n
        state = {"best": best, "choice": list(best_choice), "nodes": 0, "complete": True}

        def dfs() -> None:
            state["nodes"] += 1
            if state["nodes"] > max_nodes or time.monotonic() > deadline:
                state["complete"] = False
                return
            bans: list[tuple[int, int]] = []
            forced: list[int] = []
            try:
                bound, u = self._node(lam, assigned, state["best"], bans, forced)
                if bound >= state["best"] - TOL * max(1.0, abs(state["best"])):
                    return
                if u is None:
                    if all(k >= 0 for k in assigned):
                        self._offer(assigned, state)
                    return
                gv = {g: self.group_value(g, lam, assigned)[0] for g in self.groups}
                base = sum(lam) + sum(gv.values())
                for b, k in self._child_bounds(u, self._open(u), lam, assigned, gv, base):
                    if b >= state["best"] - TOL * max(1.0, abs(state["best"])):
                        break
                    assigned[u] = k
                    dfs()
                    assigned[u] = -1
                    if not state["complete"]:
                        return
            finally:
                for ban in bans:
                    self.banned.discard(ban)
                for v in forced:
                    assigned[v] = -1

        dfs()
        self.banned.clear()
        return state["choice"], state["best"], state["complete"], state["nodes"]

    def _offer(self, choice: list[int], state: dict) -> None:
        val = self.evaluate(choice)
        if val < state["best"] - TOL * max(1.0, abs(state["best"])):
            cand, better = self.local_search(choice)
            if better < val:
                val, choice = better, cand
            state["best"], state["choice"] = val, list(choice)



def _components(instance: Instance, capacity_scope: str) -> list[_Component]:
    nodes = sorted({p.last_leg_origin for ps in instance.paths.values() for p in ps})
    gid = {n: i for i, n in enumerate(nodes)}
    constrained = [instance.constrained(n, capacity_scope) for n in nodes]
    loads = list(instance.loads)
    parent = list(range(len(loads)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    first_at: dict[int, int] = {}
    for i, l in enumerate(loads):
        for p in instance.paths[l.id]:
            g = gid[p.last_leg_origin]
            if not constrained[g]:
                continue  # unconstrained origins never couple loads
            if g in first_at:
                a, b = find(i), find(first_at[g])
                if a != b:
                    parent[max(a, b)] = min(a, b)
            else:
                first_at[g] = i
    comps: dict[int, list[int]] = {}
    for i in range(len(loads)):
        comps.setdefault(find(i), []).append(i)
    out = []
    for idx in sorted(comps.values()):
        ls = [loads[i] for i in idx]
        opts = [[_Opt(gid[p.last_leg_origin], p.detour_cost, p.last_leg_cost, p) for p in instance.paths[l.id]]
                for l in ls]
        out.append(_Component(ls, opts, nodes, constrained))
    return out


def solve_exact(
    instance: Instance,
    capacity_scope: str = "all",
    max_nodes: int = 10_000_000,
    max_seconds: float = 60.0,
) -> Plan:
    """Minimum-cost plan by branch and bound; ``optimal`` is False if the budget ran out."""
    t0 = time.monotonic()
    deadline = t0 + max_seconds
    assignment: dict[str, Path] = {}
    active: set[str] = set()
    optimal = True
    nodes = 0
    for comp in _components(instance, capacity_scope):
        choice, _, complete, n = comp.solve(max(0, max_nodes - nodes), deadline)
        nodes += n
        optimal &= complete
        for u, k in enumerate(choice):
            assignment[comp.loads[u].id] = comp.opts[u][k].path
        active.update(comp.loads[u].id for u in comp.trailers(choice))
    stats = {"nodes": nodes, "seconds": time.monotonic() - t0}
    return make_plan(instance, assignment, active, optimal, "exact", stats)



def solve_bruteforce(instance: Instance, capacity_scope: str = "all", max_loads: int = 10) -> Plan:
    """Exhaustive enumeration of path choices and per-origin trailer subsets.

    Among optimal plans: fewest activated trailers, then the smallest
    assignment in load-id order.
    """
    if len(instance.loads) > max_loads:
        raise ContractViolation(f"brute force limited to {max_loads} loads, got {len(instance.loads)}")
    loads = instance.loads
    choices = [instance.paths[l.id] for l in loads]
    best_key = None
    best = None
    for combo in itertools.product(*choices):
        groups: dict[Node, list[int]] = {}
        for i, p in enumerate(combo):
            groups.setdefault(p.last_leg_origin, []).append(i)
        total = sum(p.detour_cost for p in combo)
        active: list[int] = []
        feasible = True
        for node, members in groups.items():
            if not instance.constrained(node, capacity_scope):
                continue
            cost, picked = _enumerate_cover(
                [(loads[i].capacity, combo[i].last_leg_cost) for i in members],
                sum(loads[i].volume for i in members),
            )
            if picked is None:
                feasible = False
                break
            total += cost
            active.extend(members[j] for j in picked)
        if not feasible:
            continue
        key = (round(total, 9), len(active), tuple(p.key() for p in combo))
        if best_key is None or key < best_key:
            best_key = key
            best = (combo, active)
    if best is None:
        return Plan((), frozenset(), 0.0, True, "bruteforce")
    combo, active = best
    assignment = {l.id: p for l, p in zip(loads, combo)}
    return make_plan(instance, assignment, {loads[i].id for i in active}, True, "bruteforce")


def _enumerate_cover(trailers: list[tuple[float, float]], volume: float):
    best = None
    for r in range(len(trailers) + 1):
        for subset in itertools.combinations(range(len(trailers)), r):
            capsum = sum(trailers[i][0] for i in subset)
            if capsum + TOL * max(1.0, volume) < volume:
                continue
            cost = sum(trailers[i][1] for i in subset)
            key = (round(cost, 9), r, subset)
            if best is None or key < best[0]:
                best = (key, cost, subset)
    if best is None:
        return math.inf, None
    return best[1], best[2]


def all_direct_plan(instance: Instance, method: str = "tl") -> Plan:
    assignment = {l.id: instance.direct(l.id) for l in instance.loads}
    return make_plan(instance, assignment, assignment.keys(), True, method)
