import random

import pytest
from hypothesis import given, settings, strategies as st

from loadcons.model import ContractViolation, Load, Node
from loadcons.pathgen import CONSOLIDATION, DIRECT, Path, generate_paths
from loadcons.solver import (
    Instance,
    Plan,
    all_direct_plan,
    make_plan,
    min_cover,
    solve_bruteforce,
    solve_exact,
    verify_plan,
)

from instances import DEST, four_load_network, fuzz_instance, random_instance, two_load_fixture
from milp_oracle import milp_objective


def _four_load_instance():
    net, loads, hubs = four_load_network()
    return Instance.build(loads, generate_paths(loads, hubs, net), hubs, Node("D", "s"), 1)


# --- examples ------------------------------------------------------------------------

def test_single_load_goes_direct():
    o = Node("A", "s0")
    l = Load("L1", o, DEST, 0, 1, 20, 100)
    inst = Instance.build([l], {"L1": [Path("L1", DIRECT, o, 0.0, 75.0, 0.0, 75.0)]})
    plan = solve_exact(inst)
    assert plan.objective == 75.0 and plan.optimal
    assert plan.assignment["L1"].is_direct and plan.activated == {"L1"}


def test_empty_instance():
    inst = Instance.build([], {})
    for plan in (solve_exact(inst), solve_bruteforce(inst)):
        assert plan.objective == 0 and plan.xi == () and plan.optimal


def test_two_load_fixture_consolidates():
    inst = two_load_fixture()
    plan = solve_exact(inst)
    assert plan.objective == pytest.approx(110.0)
    assert not plan.assignment["L1"].is_direct
    assert plan.n_trailers() == 1 and verify_plan(inst, plan) == []


def test_four_load_optimum():
    inst = _four_load_instance()
    plan = solve_exact(inst)
    assert plan.optimal
    assert plan.objective == pytest.approx(solve_bruteforce(inst).objective, abs=1e-6)
    assert plan.objective == pytest.approx(2316.3989, abs=1e-3)
    assert {lid: p.last_leg_origin.terminal for lid, p in plan.assignment.items()} == \
        {"L1": "O3", "L2": "O3", "L3": "O3", "L4": "O4"}
    assert plan.n_trailers() == 3
    assert sum(1 for _, p in plan.nu if p.last_leg_origin.terminal == "O3") == 2


def test_all_direct_when_consolidation_never_pays():
    inst = random_instance(3, 5, path_prob=1.0)
    # make every consolidation path strictly worse than the direct route
    paths = {}
    for l in inst.loads:
        direct = inst.direct(l.id)
        paths[l.id] = [direct] + [
            Path(l.id, CONSOLIDATION, p.hub, 1000.0, p.last_leg_cost, p.detour_miles, p.last_leg_miles,
                 hub=p.hub, hub_load_id=p.hub_load_id)
            for p in inst.paths[l.id] if not p.is_direct
        ]
    expensive = Instance.build(inst.loads, paths, inst.hubs)
    assert solve_exact(expensive).objective == pytest.approx(all_direct_plan(expensive).objective)
    assert solve_bruteforce(expensive).xi == all_direct_plan(expensive).xi


def test_bruteforce_refuses_large_instances():
    with pytest.raises(ContractViolation):
        solve_bruteforce(random_instance(0, 11), max_loads=10)


@pytest.mark.parametrize(
    "trailers, volume, expected",
    [
        ([(100, 50), (100, 60)], 0, (0.0, ())),
        ([(100, 50), (100, 60)], 80, (50.0, (0,))),
        ([(100, 50), (100, 60)], 150, (110.0, (0, 1))),
        ([(100, 50), (100, 60)], 201, (float("inf"), ())),
        ([(100, 50), (100, 50)], 80, (50.0, (0,))),  # tie goes to the smaller index
        ([(60, 30), (60, 30), (100, 60)], 100, (60.0, (2,))),  # equal cost, fewer trailers
    ],
)
def test_min_cover(trailers, volume, expected):
    assert min_cover(trailers, volume) == expected


# --- verification ----------------------------------------------------------------

def test_verify_flags_each_violation_kind():
    inst = two_load_fixture()
    good = solve_exact(inst)
    cons = good.assignment["L1"]
    d1, d2 = inst.direct("L1"), inst.direct("L2")

    two_paths = Plan(good.xi + (("L1", d1),), good.nu, good.objective, True, "x")
    assert any(v.startswith("one-path") for v in verify_plan(inst, two_paths))

    missing = Plan((("L1", cons),), frozenset({("L1", cons)}), 110.0, True, "x")
    assert any("L2 selects 0" in v for v in verify_plan(inst, missing))

    no_trailer = make_plan(inst, {"L1": cons, "L2": d2}, set(), True, "x")
    assert any(v.startswith("capacity") for v in verify_plan(inst, no_trailer))

    stray = Plan((("L1", d1), ("L2", d2)), frozenset({("L1", cons), ("L2", d2)}), 200.0, True, "x")
    assert any(v.startswith("compatibility") for v in verify_plan(inst, stray))

    wrong_obj = Plan(good.xi, good.nu, good.objective + 1, True, "x")
    assert any(v.startswith("objective") for v in verify_plan(inst, wrong_obj))


def test_hub_scope_ignores_other_origins():
    inst = two_load_fixture()
    # no trailer at the non-hub origin A is fine only under the narrower scope
    plan = make_plan(inst, {"L1": inst.direct("L1"), "L2": inst.direct("L2")}, {"L2"}, True, "x")
    assert verify_plan(inst, plan, "hubs") == []
    assert verify_plan(inst, plan, "all") != []
    assert solve_exact(inst, "hubs").objective <= solve_exact(inst, "all").objective


# --- oracles -----------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(40))
def test_exact_matches_bruteforce(seed):
    rng = random.Random(seed)
    inst = random_instance(seed, rng.randint(1, 7), rng.randint(0, 3), rng.randint(1, 4))
    exact, brute = solve_exact(inst), solve_bruteforce(inst)
    assert exact.optimal and verify_plan(inst, exact) == []
    assert exact.objective == pytest.approx(brute.objective, abs=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_exact_matches_milp_on_mid_size_days(seed):
    inst = random_instance(500 + seed, 22, 5, 4, path_prob=0.8)
    plan = solve_exact(inst)
    ref, proven = milp_objective(inst)
    assert plan.optimal and proven
    assert plan.objective == pytest.approx(ref, abs=1e-6)


@pytest.mark.parametrize("seed", [0, 7])
def test_hub_scope_matches_milp(seed):
    inst = random_instance(900 + seed, 12, 4, 4)
    ref, _ = milp_objective(inst, "hubs")
    assert solve_exact(inst, "hubs").objective == pytest.approx(ref, abs=1e-6)


# --- properties --------------------------------------------------------------------

@settings(max_examples=40)
@given(st.integers(0, 10**6))
def test_exact_dominates_every_feasible_reference(seed):
    from loadcons.baseline import plan_nnch, plan_tl

    inst = fuzz_instance(seed % 500)
    plan = solve_exact(inst)
    assert verify_plan(inst, plan) == []
    assert plan.objective <= plan_tl(inst).objective + 1e-6
    assert plan.objective <= plan_nnch(inst).objective + 1e-6


@settings(max_examples=40)
@given(st.integers(0, 10**6))
def test_removing_a_chosen_path_never_helps(seed):
    inst = random_instance(seed, 7, 3, 4)
    plan = solve_exact(inst)
    chosen = [(lid, p) for lid, p in plan.xi if not p.is_direct]
    if not chosen:
        return
    lid, drop = chosen[0]
    paths = {l: [p for p in ps if not (l == lid and p == drop)] for l, ps in inst.paths.items()}
    smaller = Instance.build(inst.loads, paths, inst.hubs)
    assert solve_exact(smaller).objective >= plan.objective - 1e-6


@settings(max_examples=30)
@given(st.integers(0, 10**6), st.randoms(use_true_random=False))
def test_objective_ignores_load_order(seed, rnd):
    inst = random_instance(seed, 8, 3, 4)
    loads = list(inst.loads)
    rnd.shuffle(loads)
    shuffled = Instance.build(loads, inst.paths, inst.hubs)
    assert solve_exact(shuffled).objective == pytest.approx(solve_exact(inst).objective, abs=1e-6)


def test_budget_exhaustion_still_returns_a_feasible_plan():
    inst = random_instance(42, 40, 6, 5)
    plan = solve_exact(inst, max_nodes=1)
    assert verify_plan(inst, plan) == []
    assert plan.stats["nodes"] <= 1 or not plan.optimal


def test_plan_records_round_trip_fields():
    inst = two_load_fixture()
    recs = solve_exact(inst).to_records()
    assert {r["load_id"] for r in recs} == {"L1", "L2"}
    assert all(r["plan_optimal"] is True for r in recs)
