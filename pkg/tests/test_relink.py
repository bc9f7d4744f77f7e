import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_solution
from darpdp.io import random_instance
from darpdp.model import SolverParams
from darpdp.relink import (Action, DeltaMove, EliteSet, apply_delta_move, compute_delta,
                           path_relink, update_elite)
from darpdp.schedule import check_feasibility, rank

P = SolverParams()


def _pair(seed, n=5, m=2):
    inst = random_instance(n, m, seed)
    rng = random.Random(seed)
    return inst, random_solution(inst, rng), random_solution(inst, rng)


def test_delta_actions():
    for seed in range(40):
        inst, a, g = _pair(seed)
        ha, hg = a.assignment(inst), g.assignment(inst)
        moves = compute_delta(inst, a, g)
        assert [mv.request for mv in moves] == [r for r in range(inst.n) if ha[r] != hg[r]]
        for mv in moves:
            if ha[mv.request] < 0:
                assert mv.action is Action.INSERT and mv.target_route == hg[mv.request]
            elif hg[mv.request] < 0:
                assert mv.action is Action.REMOVE and mv.target_route is None
            else:
                assert mv.action is Action.REASSIGN and mv.target_route == hg[mv.request]


def test_delta_of_identical_solutions_is_empty():
    inst, a, _ = _pair(1)
    assert compute_delta(inst, a, a) == []


@given(st.integers(0, 100_000))
@settings(max_examples=80, deadline=None)
def test_applying_delta_reaches_the_guide(seed):
    inst, a, g = _pair(seed)
    hg = g.assignment(inst)
    start = a.assignment(inst)
    cur = a
    applied = set()
    for mv in compute_delta(inst, a, g):
        nxt = apply_delta_move(inst, cur, mv, P)
        if nxt is not None:
            cur = nxt
            applied.add(mv.request)
    final = cur.assignment(inst)
    for r in range(inst.n):
        assert final[r] == (hg[r] if r in applied or start[r] == hg[r] else start[r])


def test_inconsistent_moves_are_refused(line_instance):
    from darpdp.schedule import DEFAULT_PARAMS, build_solution, make_route
    inst = line_instance
    served = build_solution(inst, DEFAULT_PARAMS, [make_route(inst, 0, (0, 1, 2, 3))], [])
    assert apply_delta_move(inst, served, DeltaMove(0, Action.INSERT, 0)) is None
    assert apply_delta_move(inst, served, DeltaMove(0, Action.REASSIGN, 0)) is None
    removed = apply_delta_move(inst, served, DeltaMove(0, Action.REMOVE))
    assert removed.rejected == {0} and removed.served == 0
    assert apply_delta_move(inst, removed, DeltaMove(0, Action.REMOVE)) is None


@given(st.integers(0, 100_000))
@settings(max_examples=60, deadline=None)
def test_relink_never_loses_to_its_endpoints(seed):
    inst, a, g = _pair(seed)
    out = path_relink(inst, P, a, g)
    best = min(rank(inst, a), rank(inst, g))
    got = rank(inst, out)
    assert got[0] < best[0] or (got[0] == best[0] and got[1] <= best[1] + 1e-9)
    assert [p for p in check_feasibility(inst, out) if not p.startswith("epsilon")] == []


def _check_elite(inst, elite, cap):
    assert len(elite) <= cap
    keys = [rank(inst, s) for s in elite.solutions]
    for a, b in zip(keys, keys[1:]):
        assert a[0] < b[0] or (a[0] == b[0] and a[1] < b[1] - 1e-9)
    assert elite.signatures == [s.signature(inst) for s in elite.solutions]
    assert len(set(elite.signatures)) == len(elite.signatures)


@given(st.integers(0, 100_000), st.integers(1, 4), st.integers(1, 40))
@settings(max_examples=60, deadline=None)
def test_elite_ordering_invariant(seed, cap, steps):
    inst = random_instance(5, 2, seed)
    rng = random.Random(seed)
    elite = EliteSet(cap)
    seen = []
    for _ in range(steps):
        sol = random_solution(inst, rng, reject_p=rng.random() * 0.5)
        seen.append(sol)
        elite = update_elite(inst, elite, sol)
        _check_elite(inst, elite, cap)
    # the best solution offered is always kept
    top = min(seen, key=lambda s: rank(inst, s))
    assert rank(inst, elite.solutions[0]) == pytest.approx(rank(inst, top))


def test_elite_rejects_duplicates_and_ties():
    inst, a, _ = _pair(3)
    elite = update_elite(inst, EliteSet(3), a)
    assert update_elite(inst, elite, a).solutions == [a]


def _line_pair():
    from darpdp.model import build_instance
    from darpdp.schedule import DEFAULT_PARAMS, build_solution, empty_solution, try_insert
    inst = build_instance(
        "pair", [(0, 0, 480, 610), (0, 5, 480, 610)], [(10, 0, 560, 580), (10, 5, 560, 580)],
        pickups=[(2, 1, 500, 530), (4, 4, 500, 530)],
        deliveries=[(5, 1, 505, 560), (7, 4, 505, 560)], served_fraction_min=0.5)
    base = empty_solution(inst)

    def make(assign):
        routes = list(base.routes)
        for r, k in enumerate(assign):
            if k >= 0:
                routes[k] = try_insert(inst, routes[k], r).route
        return build_solution(inst, DEFAULT_PARAMS, routes,
                              {r for r, k in enumerate(assign) if k < 0})
    return inst, make


def test_worked_deltas():
    inst, make = _line_pair()
    a, g = make([0, -1]), make([1, -1])
    assert compute_delta(inst, a, g) == [DeltaMove(0, Action.REASSIGN, 1)]
    a, g = make([-1, 1]), make([0, -1])
    assert compute_delta(inst, a, g) == [DeltaMove(0, Action.INSERT, 0),
                                        DeltaMove(1, Action.REMOVE, None)]


def test_worked_delta_applications():
    inst, make = _line_pair()
    one = make([0, -1])
    shrunk = apply_delta_move(inst, one, DeltaMove(0, Action.REMOVE), P)
    assert shrunk.routes[0].stops == (0, 6)
    grown = apply_delta_move(inst, shrunk, DeltaMove(1, Action.INSERT, 1), P)
    assert grown.served == shrunk.served + 1


def test_reassign_into_a_full_route_fails():
    from darpdp.model import build_instance
    from darpdp.schedule import DEFAULT_PARAMS, build_solution, empty_solution, try_insert
    # capacity 1 and identical simultaneous requests: route 1 cannot take a second one
    pts = [(1, 0, 500, 500), (1, 0, 500, 500)]
    drops = [(2, 0, 505, 505), (2, 0, 505, 505)]
    inst = build_instance("full", [(0, 0, 480, 610)] * 2, [(3, 0, 480, 610)] * 2, pts, drops,
                          capacity=1)
    routes = list(empty_solution(inst).routes)
    routes[0] = try_insert(inst, routes[0], 0).route
    routes[1] = try_insert(inst, routes[1], 1).route
    sol = build_solution(inst, DEFAULT_PARAMS, routes, [])
    assert apply_delta_move(inst, sol, DeltaMove(0, Action.REASSIGN, 1), P) is None


def test_relink_of_identical_endpoints():
    inst, make = _line_pair()
    a = make([0, 1])
    assert path_relink(inst, P, a, a) is a


def test_relink_single_step_returns_cheaper_endpoint():
    inst, make = _line_pair()
    a, g = make([1, 1]), make([0, 1])
    assert path_relink(inst, P, a, g) == min(a, g, key=lambda s: s.weighted)


def test_relink_finds_a_crossover_optimum():
    from darpdp.exact import brute_force_solve
    inst = random_instance(3, 2, 0)
    opt = brute_force_solve(inst).optimum.weighted
    rng = random.Random(0)
    for _ in range(30):
        a, g = random_solution(inst, rng, 0), random_solution(inst, rng, 0)
        if min(a.weighted, g.weighted) > opt + 1e-6 and a.served == g.served == 3:
            out = path_relink(inst, P, a, g)
            if abs(out.weighted - opt) <= 1e-6:
                return
    pytest.fail("no endpoint pair relinked to the optimum")


def test_worked_elite_updates():
    inst, make = _line_pair()
    cheap, dear = make([0, 1]), make([1, 0])
    assert cheap.weighted < dear.weighted
    elite = update_elite(inst, EliteSet(1), dear)
    assert elite.solutions == [dear]
    assert update_elite(inst, elite, dear).solutions == [dear]
    assert update_elite(inst, elite, cheap).solutions == [cheap]
