"""Seeded random instances and small hand-built fixtures shared by the tests."""

from __future__ import annotations

import random

from loadcons.model import Load, Node
from loadcons.pathgen import CONSOLIDATION, DIRECT, Path
from loadcons.solver import Instance

DEST = Node("D", "s0")


def random_instance(seed: int, n_loads: int = 6, n_hubs: int = 2, max_paths: int = 3,
                    cap_choices=(100, 160), path_prob: float = 0.7) -> Instance:
    """Integer-cost instance; hubs are origins of randomly picked loads."""
    rng = random.Random(seed)
    origins = [Node(f"T{i:02d}", "s0") for i in range(n_loads)]
    loads = []
    for i in range(n_loads):
        cap = rng.choice(cap_choices)
        vol = rng.randint(0, int(0.79 * cap))
        loads.append(Load(f"L{i:02d}", origins[i], DEST, 100 * i, 2, vol, cap, "std" if cap == 100 else "long"))
    hub_idx = sorted(rng.sample(range(n_loads), min(n_hubs, n_loads)))
    paths = {}
    for i, l in enumerate(loads):
        direct = rng.randint(50, 300)
        ps = [Path(l.id, DIRECT, l.origin, 0.0, float(direct), 0.0, float(direct))]
        for h in hub_idx:
            if h == i or len(ps) >= max_paths or rng.random() > path_prob:
                continue
            c, f = rng.randint(0, 80), rng.randint(30, 300)
            ps.append(Path(l.id, CONSOLIDATION, origins[h], float(c), float(f), float(c), float(f),
                           hub=origins[h], hub_load_id=loads[h].id, detour_minutes=float(c)))
        paths[l.id] = ps
    return Instance.build(loads, paths, hubs=[origins[h] for h in hub_idx])


def fuzz_instance(seed: int) -> Instance:
    rng = random.Random(10_000 + seed)
    n = rng.randint(1, 30)
    return random_instance(seed, n, rng.randint(0, min(n, 6)), rng.randint(1, 5))


def two_load_fixture() -> Instance:
    """Load 1 can ride to load 2's origin (detour 10, last leg 100); both fit one trailer."""
    o1, o2 = Node("A", "s0"), Node("B", "s0")
    l1 = Load("L1", o1, DEST, 0, 1, 30, 100, "std")
    l2 = Load("L2", o2, DEST, 60, 1, 40, 100, "std")
    paths = {
        "L1": [Path("L1", DIRECT, o1, 0.0, 100.0, 0.0, 100.0),
               Path("L1", CONSOLIDATION, o2, 10.0, 100.0, 10.0, 100.0, hub=o2, hub_load_id="L2")],
        "L2": [Path("L2", DIRECT, o2, 0.0, 100.0, 0.0, 100.0)],
    }
    return Instance.build([l1, l2], paths, hubs=[o2])


def four_load_network():
    """Four loads east of a western destination; o3 and o4 are consolidation points.

    Volumes are chosen so that load 3 cannot share a trailer with load 1
    or 2, and load 4 cannot share with anyone, leaving loads 1 and 2
    riding together to o3 as the only trailer-saving move.
    Returns (network, loads, hubs).
    """
    from loadcons.model import Network, Sort, Terminal

    coords = {"D": (40.0, -100.0), "O1": (40.0, -84.0), "O2": (41.0, -84.5), "O3": (40.5, -86.0), "O4": (39.0, -88.0)}
    terms = tuple(Terminal(k, *v) for k, v in coords.items())
    sorts = tuple(Sort(k, "s", 0, 1439) for k in coords)
    dest = Node("D", "s")
    rows = [("L1", "O1", 480, 40), ("L2", "O2", 540, 40), ("L3", "O3", 900, 65), ("L4", "O4", 1200, 70)]
    loads = [Load(lid, Node(o, "s"), dest, t, 1, q, 100) for lid, o, t, q in rows]
    return Network(terms, sorts, tuple(loads)), loads, frozenset({Node("O3", "s"), Node("O4", "s")})
