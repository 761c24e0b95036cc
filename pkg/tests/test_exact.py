import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfroute.exact import (BRUTE_FORCE_CAP, RouteInstance, SolverLimitError, SolverSettings, Status,
                           Variant, brute_force, completion_lower_bound, held_karp_table, solve,
                           solve_tsp, solve_tsp_mc, solve_tsp_nc)
from cfroute.grid import Cell
from cfroute.schedule import BlockedWindowTable, schedule
from cfroute.validation import oracle_check, random_instance

E = Cell(1, 1)
SIX = [Cell(1, 5), Cell(3, 2), Cell(4, 4), Cell(6, 2), Cell(6, 4), Cell(8, 4)]


def make(dist, nodes, t0=0.0, windows=None, **kw):
    return RouteInstance.make(nodes, dist, t0, 12.5, 2.0, BlockedWindowTable(windows or {}, 2.0), **kw)


def test_six_node_tsp_equals_bounding_box_perimeter(dist):
    # rectilinear tours are at least the bounding-box perimeter: 2 * (7 + 4) * 5 m
    sol = solve_tsp(make(dist, SIX))
    assert sol.objective == 110
    assert sol.order == (E, Cell(1, 5), Cell(4, 4), Cell(6, 4), Cell(8, 4), Cell(6, 2), Cell(3, 2))


def test_nc_infeasible_single_node(dist):
    inst = make(dist, [Cell(1, 5)], t0=1.0, windows={Cell(1, 5): (4.6,)})
    assert solve_tsp_nc(inst).status is Status.INFEASIBLE
    mc = solve_tsp_mc(inst)
    assert mc.objective == 40 + 1000 and mc.planned_contacts == 1


def test_touching_window_is_not_a_contact(dist):
    inst = make(dist, [Cell(1, 5)], t0=1.0, windows={Cell(1, 5): (2.6, 6.6)})
    assert solve_tsp_nc(inst).objective == 40


def test_nc_takes_longer_detour_to_avoid_window(dist):
    a, b = Cell(1, 4), Cell(1, 5)
    free = solve_tsp(make(dist, [a, b]))
    assert free.order == (E, a, b)
    # block (1,4) at its first-position arrival 3.2
    inst = make(dist, [a, b], windows={a: (3.2,)})
    nc = solve_tsp_nc(inst)
    assert nc.order == (E, b, a) and nc.planned_contacts == 0
    assert nc.objective == free.objective     # reversal costs nothing here


def test_mc_pays_for_unavoidable_contact(dist):
    a, b = Cell(1, 4), Cell(8, 4)
    # (1,4) is reached at 3.2 in order a-b and at 10.8 in order b-a; block both
    inst = make(dist, [a, b], windows={a: (3.2, 10.8)}, penalty=0.5)
    assert solve_tsp_nc(inst).status is Status.INFEASIBLE
    mc = solve_tsp_mc(inst)
    assert mc.planned_contacts == 1
    assert mc.objective == 100 + 0.5
    assert mc.order == (E, a, b)             # tie on length and contacts: lexicographic


def _small_instances(draw, layout, dist, max_nodes=6):
    nodes = draw(st.lists(st.sampled_from(layout.non_entry_nodes), min_size=1, max_size=max_nodes,
                          unique=True))
    # decimal inputs: the rational oracle reads floats through repr, so 3 * 0.4 must be 1.2
    t0 = round(draw(st.integers(0, 100)) * 0.4, 10)
    span = 2 * len(nodes) + 12
    windows = {}
    for n in nodes:
        ks = draw(st.lists(st.integers(0, int(span / 0.4)), max_size=3))
        if ks:
            windows[n] = tuple(sorted(round(t0 + 0.4 * k, 10) for k in ks))
    penalty = draw(st.sampled_from([1000.0, 7.5, 0.25]))
    return make(dist, nodes, t0, windows, penalty=penalty)


@given(st.data())
def test_all_variants_match_brute_force(layout, dist, data):
    inst = _small_instances(data.draw, layout, dist)
    for variant in Variant:
        got = solve(inst, variant)
        exact = brute_force(inst, variant, exact=True)
        ref = brute_force(inst, variant)
        assert got.status is exact.status is ref.status
        if exact.feasible:
            assert got.objective == exact.objective
            assert got.order == ref.order           # lexicographically smallest optimum
            assert got.planned_contacts == ref.planned_contacts


@given(st.data())
def test_nc_optimum_is_contact_free_and_mc_never_worse_in_length(layout, dist, data):
    inst = _small_instances(data.draw, layout, dist)
    nc, mc, tsp = (solve(inst, v) for v in (Variant.NC, Variant.MC, Variant.TSP))
    assert tsp.objective <= mc.tour_length
    if nc.feasible:
        assert nc.planned_contacts == 0
        assert mc.objective <= nc.objective
        assert tsp.objective <= nc.objective


def test_oracle_suite_small_batch():
    rep = oracle_check(40, seed=123, max_nodes=7)
    assert rep.ok, rep.mismatches
    assert rep.statuses.get("nc:infeasible", 0) > 0    # the batch exercises infeasibility


def test_held_karp_matches_enumeration(dist):
    inst = make(dist, SIX[:5])
    C = np.array(inst.local_matrix())
    dp = held_karp_table(C)
    m = inst.size
    for S in range(1, 1 << m):
        members = [i for i in range(m) if S >> i & 1]
        for j in members:
            best = math.inf
            for perm in itertools.permutations([i for i in members if i != j]):
                path = [0, *(p + 1 for p in perm), j + 1]
                best = min(best, sum(C[a, b] for a, b in zip(path, path[1:])))
            assert dp[S, j] == best


def _best_completion(inst, prefix):
    rest = [n for n in inst.nodes[1:] if n not in prefix]
    best = math.inf
    for perm in itertools.permutations(rest):
        path = [*prefix[-1:], *perm, inst.nodes[0]]
        best = min(best, sum(inst.dist.between(a, b) for a, b in zip(path, path[1:])))
    return best


@pytest.mark.parametrize("dp_limit", [18, 0])
@given(data=st.data())
def test_completion_bounds_are_admissible(layout, dist, dp_limit, data):
    nodes = data.draw(st.lists(st.sampled_from(layout.non_entry_nodes), min_size=2, max_size=7,
                               unique=True))
    inst = make(dist, nodes)
    k = data.draw(st.integers(0, len(nodes) - 1))
    prefix = (E, *sorted(nodes)[:k])
    bound = completion_lower_bound(inst, prefix, SolverSettings(dp_limit=dp_limit))
    true = _best_completion(inst, prefix)
    assert bound <= true + 1e-9
    if dp_limit:
        assert bound == true                     # the DP bound is exact without windows


def test_larger_instance_against_held_karp(layout, dist):
    rng = np.random.default_rng(4)
    for m in (12, 16):
        nodes = [layout.non_entry_nodes[i] for i in rng.choice(34, m, replace=False)]
        inst = make(dist, nodes)
        sol = solve_tsp(inst)
        C = np.array(inst.local_matrix())
        dp = held_karp_table(C)
        full = (1 << m) - 1
        assert sol.objective == min(dp[full, j] + C[j + 1, 0] for j in range(m))


def test_mst_bound_solver_agrees_with_dp_solver(layout, dist):
    rng = np.random.default_rng(5)
    for _ in range(5):
        inst = random_instance(rng, layout, dist, max_nodes=9)
        for variant in Variant:
            a = solve(inst, variant)
            b = solve(inst, variant, SolverSettings(dp_limit=0))
            assert (a.status, a.objective, a.order) == (b.status, b.objective, b.order)


def test_size_cap(layout, dist):
    inst = make(dist, layout.non_entry_nodes[:5])
    with pytest.raises(SolverLimitError):
        solve_tsp(inst, SolverSettings(size_cap=4))
    with pytest.raises(SolverLimitError):
        brute_force(make(dist, layout.non_entry_nodes[:BRUTE_FORCE_CAP + 1]), Variant.TSP)


def test_node_limit_falls_back_to_a_valid_order(layout, dist):
    inst = make(dist, layout.non_entry_nodes[:14])
    sol = solve_tsp(inst, SolverSettings(node_limit=10))
    assert sol.limit_hit and sol.feasible
    assert set(sol.order[1:]) == set(inst.nodes[1:])
    assert sol.objective >= solve_tsp(inst).objective


def test_solution_schedule_is_consistent(dist):
    sol = solve_tsp_nc(make(dist, SIX, t0=3.0, windows={Cell(4, 4): (9.0,)}))
    again = schedule(sol.order, 3.0, 12.5, 2.0, dist)
    assert sol.sched == again and sol.tour_length == again.tour_length


@pytest.mark.parametrize("kw", [dict(t0=-1.0), dict(penalty=0.0)])
def test_instance_validation(dist, kw):
    with pytest.raises(ValueError):
        make(dist, SIX, **kw)


def test_instance_drops_foreign_and_entry_windows(dist):
    inst = make(dist, [Cell(1, 5)], windows={E: (1.0,), Cell(8, 4): (2.0,), Cell(1, 5): (9.0, 3.0)})
    assert dict(inst.windows.starts) == {Cell(1, 5): (3.0, 9.0)}
