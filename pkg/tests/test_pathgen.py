import logging
import random

import pytest
from hypothesis import given, settings, strategies as st

from loadcons.mining import AbstractPoint, CandidateSet, abstract_point
from loadcons.model import ContractViolation, Load, Network, Node, Sort, Terminal
from loadcons.pathgen import (
    CONSOLIDATION,
    DIRECT,
    CostModel,
    Path,
    build_paths,
    cost,
    count_unfiltered_paths,
    generate_paths,
    kappa_op,
    select_lc,
)
from loadcons.geo import haversine_miles, travel_minutes

from instances import four_load_network

DEST = Node("D", "s")


def _load(lid, origin, t, due=1, dest=DEST, q=30):
    return Load(lid, origin, dest, t, due, q, 100)


@pytest.mark.parametrize(
    "miles, model, expected",
    [(0, CostModel(fixed_dispatch=25.0), 25.0), (250, CostModel(), 250.0), (250, CostModel({"std": 2.0}, fixed_dispatch=100), 600.0)],
)
def test_cost(miles, model, expected):
    assert cost(miles, "std", model) == expected


def test_unknown_trailer_type_falls_back_with_warning(caplog):
    model = CostModel({"std": 2.0}, default_rate=1.5)
    with caplog.at_level(logging.WARNING):
        assert model.cost(10, "reefer-test") == 15.0
    assert "reefer-test" in caplog.text


@pytest.mark.parametrize(
    "t_l, travel, dwell, t_h, expected",
    [(100, 0, 0, 200, True), (300, 10, 0, 300, False), (480, 90, 30, 610, True), (480, 90, 30, 599, False)],
)
def test_kappa_op(t_l, travel, dwell, t_h, expected):
    l, h = _load("a", Node("A", "s"), t_l), _load("b", Node("B", "s"), t_h)
    assert kappa_op(l, h, lambda a, b: travel, dwell) is expected


def test_kappa_op_needs_same_destination_day():
    with pytest.raises(ContractViolation):
        kappa_op(_load("a", Node("A", "s"), 0), _load("b", Node("B", "s"), 10, due=2), lambda a, b: 0)


def _network(n_terms=6, seed=0):
    rng = random.Random(seed)
    terms = [Terminal("D", 40.0, -100.0)] + [
        Terminal(f"T{i}", rng.uniform(38, 42), rng.uniform(-90, -84)) for i in range(n_terms)
    ]
    sorts = [Sort(t.id, s, 0, 1439) for t in terms for s in ("s", "r")]
    return Network(tuple(terms), tuple(sorts))


def test_empty_hub_set_gives_direct_only():
    net, loads, _ = four_load_network()
    paths = generate_paths(loads, frozenset(), net)
    assert all(len(ps) == 1 and ps[0].is_direct for ps in paths.values())


def test_co_located_loads():
    net = _network()
    early = _load("a", Node("T0", "s"), 100)
    late = _load("b", Node("T0", "r"), 200)
    paths = generate_paths([early, late], {late.origin}, net)
    assert [p.kind for p in paths["a"]] == [DIRECT, CONSOLIDATION]
    assert paths["a"][1].hub_load_id == "b" and paths["a"][1].detour_miles == 0
    assert [p.kind for p in paths["b"]] == [DIRECT]


def test_four_load_path_sets():
    net, loads, hubs = four_load_network()
    paths = generate_paths(loads, hubs, net)
    hubs_of = {lid: [p.hub.terminal for p in ps if not p.is_direct] for lid, ps in paths.items()}
    assert hubs_of == {"L1": ["O3", "O4"], "L2": ["O3", "O4"], "L3": ["O4"], "L4": []}


def test_hub_load_is_latest_feasible_departure():
    net = _network()
    hub = Node("T1", "s")
    l = _load("a", Node("T0", "s"), 0)
    h1, h2 = _load("h1", hub, 900), _load("h2", hub, 1200)
    paths = generate_paths([l, h1, h2], {hub}, net)
    assert paths["a"][1].hub_load_id == "h2"


def test_select_lc():
    a = _load("a", Node("A", "s"), 0)
    b = _load("b", Node("B", "s"), 0)
    assert select_lc([a, b], []) == []
    cand = CandidateSet(DEST, 1, frozenset({abstract_point(a), AbstractPoint(Node("Z", "s"), 1, 1)}), 3,
                        frozenset({Node("Z", "s")}))
    assert select_lc([a, b], [cand]) == [a]
    other_day = CandidateSet(DEST, 2, cand.items, 3, cand.consolidation_points)
    assert select_lc([a, b], [other_day]) == []


def test_build_paths_gives_loads_outside_lc_their_direct_path():
    net, loads, hubs = four_load_network()
    cand = CandidateSet(DEST, 1, frozenset(abstract_point(l) for l in loads[:3]), 5, hubs)
    paths = build_paths(loads, [cand], hubs, net)
    assert [p.kind for p in paths["L4"]] == [DIRECT]
    assert len(paths["L1"]) == 2  # L4 is not in L_C, so O4 has no hub load


def test_comembership_filter_drops_pairs_without_a_shared_candidate():
    net, loads, hubs = four_load_network()
    pts = [abstract_point(l) for l in loads]
    cands = [CandidateSet(DEST, 1, frozenset({pts[0], pts[2]}), 5, hubs),
             CandidateSet(DEST, 1, frozenset({pts[1], pts[3]}), 5, hubs)]
    loose = build_paths(loads, cands, hubs, net)
    strict = build_paths(loads, cands, hubs, net, require_comembership=True)
    assert [p.hub.terminal for p in strict["L1"] if p.hub] == ["O3"]
    assert [p.hub.terminal for p in strict["L2"] if p.hub] == ["O4"]
    assert sum(len(v) for v in strict.values()) < sum(len(v) for v in loose.values())


def test_unfiltered_count_uses_every_origin_as_hub():
    net, loads, _ = four_load_network()
    # L1 -> O3, O4; L2 -> O3, O4; L3 -> O4. L1 reaches O2 at minute 552, after L2 leaves at 540.
    assert count_unfiltered_paths(loads, net) == 5


def test_path_record_round_trip():
    p = Path("a", CONSOLIDATION, Node("H", "s"), 1.5, 2.5, 1.5, 2.5, Node("H", "s"), "b", 12.0)
    assert Path.from_record(p.to_record()) == p


def _brute_count(loads, hubs, net, dwell=0.0):
    n = 0
    for l in loads:
        nodes = set()
        for h in loads:
            if h is l or h.origin not in hubs or h.origin == l.origin:
                continue
            if h.destination == l.destination and h.due_day == l.due_day and \
                    l.departure + travel_minutes(net.terminal(l.origin), net.terminal(h.origin)) + dwell <= h.departure:
                nodes.add(h.origin)
        n += len(nodes)
    return n


@settings(max_examples=60)
@given(st.integers(0, 10**6), st.floats(0, 120))
def test_path_invariants_on_random_days(seed, dwell):
    rng = random.Random(seed)
    net = _network(6, seed)
    nodes = [Node(f"T{i}", s) for i in range(6) for s in ("s", "r")]
    loads = [_load(f"L{i:02d}", rng.choice(nodes), rng.randint(0, 1400), due=rng.choice([1, 2]))
             for i in range(rng.randint(0, 20))]
    hubs = frozenset(rng.sample(nodes, rng.randint(0, 6)))
    paths = generate_paths(loads, hubs, net, dwell_minutes=dwell)
    by_id = {l.id: l for l in loads}
    n_cons = 0
    for lid, ps in paths.items():
        assert sum(p.is_direct for p in ps) == 1
        direct = next(p for p in ps if p.is_direct)
        assert direct.last_leg_origin == by_id[lid].origin and direct.detour_cost == 0
        for p in ps:
            if p.is_direct:
                continue
            n_cons += 1
            h = by_id[p.hub_load_id]
            assert p.hub in hubs and p.last_leg_origin == p.hub == h.origin
            assert kappa_op(by_id[lid], h, lambda a, b: travel_minutes(net.terminal(a), net.terminal(b)), dwell)
            assert p.detour_miles + p.last_leg_miles >= direct.last_leg_miles - 1e-6
    assert n_cons == _brute_count(loads, hubs, net, dwell)


def test_direct_cost_is_distance_by_default():
    net, loads, hubs = four_load_network()
    p = generate_paths(loads[:1], hubs, net)["L1"][0]
    expected = haversine_miles(net.terminal("O1").coords, net.terminal("D").coords)
    assert p.last_leg_cost == pytest.approx(expected) and p.last_leg_miles == pytest.approx(expected)
