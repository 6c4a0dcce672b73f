"""Reference planners: truckload (no consolidation) and nearest-neighbour pairing."""

from __future__ import annotations

from .solver import Instance, Plan, all_direct_plan, make_plan


def plan_tl(instance: Instance) -> Plan:
    """Every load travels direct in its own trailer."""
    return all_direct_plan(instance, method="tl")


def nnch_decisions(instance: Instance) -> list[tuple[str, str]]:
    """Greedy pairing decisions (o, h); (o, o) means o stays direct.

    Loads are visited by departure time. Each load pairs with the nearest
    (by travel time) remaining hub load whose combined volume fits the larger
    of the two trailers. Both loads then leave the pool.
    """
    loads = {l.id: l for l in instance.loads}
    # one record per feasible path; direct paths have h == o
    records: list[tuple[str, str, float, int]] = []
    for l in instance.loads:
        for k, p in enumerate(instance.paths[l.id]):
            hub = l.id if p.is_direct else p.hub_load_id
            records.append((l.id, hub, p.detour_minutes, k))
    records.sort(key=lambda r: (loads[r[0]].departure, r[0], r[2], r[1]))
    decisions: list[tuple[str, str]] = []
    while records:
        o = records[0][0]
        cands = sorted((r for r in records if r[0] == o and r[1] != o), key=lambda r: (r[2], r[1]))
        partner = None
        for _, h, _, _ in cands:
            lo, lh = loads[o], loads[h]
            if lo.volume + lh.volume <= max(lo.capacity, lh.capacity):
                partner = h
                break
        if partner is not None:
            decisions.append((o, partner))
            gone = {o, partner}
        else:
            decisions.append((o, o))
            gone = {o}
        records = [r for r in records if r[0] not in gone and r[1] not in gone]
    return decisions


def plan_nnch(instance: Instance) -> Plan:
    """Map the pairing decisions onto path choices and trailer activations.

    A pair (o, h) sends o through h's origin; the larger of the two trailers
    runs the last leg and the other is eliminated (h's on a capacity tie).
    """
    loads = {l.id: l for l in instance.loads}
    assignment = {l.id: instance.direct(l.id) for l in instance.loads}
    active = set(loads)
    for o, h in nnch_decisions(instance):
        if o == h:
            continue
        path = next(p for p in instance.paths[o] if not p.is_direct and p.hub_load_id == h)
        assignment[o] = path
        if loads[o].capacity > loads[h].capacity:
            active.discard(h)
        else:
            active.discard(o)
    return make_plan(instance, assignment, active, False, "nnch")
