import dataclasses
import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from darpdp.io import random_instance
from darpdp.model import build_instance
from darpdp.schedule import (DEFAULT_PARAMS, InfeasibleRoute, better, build_solution,
                             check_feasibility, empty_solution, feasible_insertions, make_route,
                             rank, route_eval, schedule_route, solution_cost, try_insert)

from oracles import lp_route_eval


def test_hand_schedule(line_instance):
    # forward pass 480, 500, 505, 515; origin slack is capped by the pickup window (28 min)
    s = schedule_route(line_instance, (0, (0, 1, 2, 3)))
    assert s.start_times == pytest.approx((508.0, 510.0, 514.5, 517.0))
    assert s.travel == pytest.approx(8.0)
    assert s.duration == pytest.approx(9.0)
    assert s.lateness == 0.0
    assert s.loads == (0, 1, 0, 0)


def test_lateness_within_tolerance_is_priced():
    inst = build_instance("late", [(0, 0, 480, 610)], [(4, 0, 500, 504.5)],
                          [(1, 0, 500, 510)], [(3, 0, 505, 530)])
    s = schedule_route(inst, (0, (0, 1, 2, 3)))
    assert s.lateness == pytest.approx(3.0)
    route = make_route(inst, 0, (0, 1, 2, 3))
    sol = build_solution(inst, DEFAULT_PARAMS, [route], [])
    assert sol.weighted == pytest.approx(40 * 8 + 60 * 3)


def test_lateness_beyond_tolerance_is_infeasible():
    inst = build_instance("late", [(0, 0, 480, 610)], [(4, 0, 500, 504.5)],
                          [(1, 0, 500, 510)], [(3, 0, 505, 530)], dest_tolerance=2.0)
    with pytest.raises(InfeasibleRoute) as exc:
        schedule_route(inst, (0, (0, 1, 2, 3)))
    assert exc.value.family == "lateness"


@pytest.mark.parametrize("stops,family", [
    ((0, 2, 1, 3), "precedence"),
    ((0, 1, 3), "precedence"),
    ((1, 2, 3), "structure"),
    ((0, 1, 1, 2, 3), "structure"),
])
def test_structural_failures(line_instance, stops, family):
    with pytest.raises(InfeasibleRoute) as exc:
        schedule_route(line_instance, (0, stops))
    assert exc.value.family == family


def test_capacity_failure():
    inst = build_instance("cap", [(0, 0, 480, 610)], [(0, 0, 480, 610)],
                          [(1, 0, 480, 600), (1, 1, 480, 600)],
                          [(2, 0, 480, 600), (2, 1, 480, 600)], capacity=1)
    with pytest.raises(InfeasibleRoute) as exc:
        schedule_route(inst, (0, (0, 1, 2, 3, 4, 5)))
    assert exc.value.family == "capacity"
    assert schedule_route(inst, (0, (0, 1, 3, 2, 4, 5))).loads == (0, 1, 0, 1, 0, 0)


def test_ride_time_needs_late_pickup():
    # forward earliest times would carry the passenger too long; a later pickup fixes it
    inst = build_instance("ride", [(0, 0, 480, 480)], [(0, 0, 480, 700)],
                          [(1, 0, 481, 600)], [(2, 0, 530, 600)], max_ride_time=20,
                          max_route_duration=200)
    s = schedule_route(inst, (0, (0, 1, 2, 3)))
    ride = s.start_times[2] - s.start_times[1] - 0.5
    assert ride <= 20 + 1e-9
    assert s.start_times[1] >= 509.5 - 1e-9


def _random_sequences(inst, rng, count):
    for _ in range(count):
        k = rng.randrange(inst.m)
        reqs = rng.sample(range(inst.n), rng.randint(0, inst.n))
        verts = []
        for r in reqs:
            verts.append(inst.requests[r].pickup)
        for r in reqs:
            pos = rng.randint(verts.index(inst.requests[r].pickup) + 1, len(verts))
            verts.insert(pos, inst.requests[r].delivery)
        veh = inst.vehicles[k]
        yield k, (veh.origin, *verts, veh.destination)


@given(st.integers(0, 10_000), st.sampled_from([(30.0, 90.0), (9.0, 45.0), (6.0, 30.0)]))
@settings(max_examples=90, deadline=None)
def test_route_eval_matches_lp_oracle(seed, limits):
    # tight ride/duration limits force the exact fallback path
    inst = dataclasses.replace(random_instance(4, 2, seed), max_ride_time=limits[0],
                               max_route_duration=limits[1])
    rng = random.Random(seed)
    for k, stops in _random_sequences(inst, rng, 15):
        got = route_eval(inst, k, stops)
        want = lp_route_eval(inst, k, stops)
        assert (got is None) == (want is None), stops
        if got is not None:
            assert got[0] == pytest.approx(want[0], abs=1e-9)
            assert got[1] == pytest.approx(want[1], abs=1e-6)


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_schedule_meets_every_constraint(seed):
    inst = random_instance(4, 2, seed)
    rng = random.Random(seed)
    V = inst.vertices
    for k, stops in _random_sequences(inst, rng, 10):
        try:
            s = schedule_route(inst, (k, stops))
        except InfeasibleRoute:
            continue
        T = s.start_times
        veh = inst.vehicles[k]
        for i, v in enumerate(stops[:-1]):
            assert V[v].earliest - 1e-9 <= T[i] <= V[v].latest + 1e-9
            nxt = stops[i + 1]
            assert T[i + 1] >= T[i] + V[v].service + inst.tt[v][nxt] - 1e-9
        assert T[-1] <= V[stops[-1]].latest + veh.dest_tolerance + 1e-9
        assert T[-1] - T[0] <= inst.max_route_duration + 1e-9
        pos = {v: i for i, v in enumerate(stops)}
        for r in inst.requests:
            if r.pickup in pos:
                assert T[pos[r.delivery]] - T[pos[r.pickup]] - V[r.pickup].service \
                    <= inst.max_ride_time + 1e-9
        assert max(s.loads) <= veh.capacity


def test_schedule_is_pure(line_instance):
    a = schedule_route(line_instance, (0, (0, 1, 2, 3)))
    b = schedule_route(line_instance, (0, (0, 1, 2, 3)))
    assert a == b


def test_try_insert_is_cheapest_feasible():
    for seed in range(30):
        inst = random_instance(4, 1, seed)
        route = make_route(inst, 0, (0, inst.vehicles[0].destination))
        for r in range(inst.n):
            ins = try_insert(inst, route, r)
            opts = feasible_insertions(inst, route, r)
            if ins is None:
                assert not opts
                continue
            route_w = 40 * route.travel + 60 * route.lateness
            best = min(40 * o.travel + 60 * o.lateness - route_w for o, _, _ in opts)
            assert ins.delta == pytest.approx(best, abs=1e-9)
            route = ins.route


def test_try_insert_brute_force_positions():
    # every precedence-respecting placement, evaluated directly
    for seed in range(25):
        inst = random_instance(4, 1, seed)
        route = make_route(inst, 0, (0, inst.vehicles[0].destination))
        for r in range(inst.n - 1):
            ins = try_insert(inst, route, r)
            if ins is not None:
                route = ins.route
        r = inst.n - 1
        p, d = inst.requests[r].pickup, inst.requests[r].delivery
        s = route.stops
        best = None
        for i, j in itertools.combinations_with_replacement(range(1, len(s)), 2):
            stops = s[:i] + (p,) + s[i:j] + (d,) + s[j:]
            val = route_eval(inst, 0, stops)
            if val is not None:
                w = 40 * val[0] + 60 * val[1]
                best = w if best is None else min(best, w)
        ins = try_insert(inst, route, r)
        if best is None:
            assert ins is None
        else:
            assert 40 * ins.route.travel + 60 * ins.route.lateness == pytest.approx(best)


def test_cached_cost_matches_recomputation():
    for seed in range(20):
        inst = random_instance(5, 2, seed)
        sol = empty_solution(inst)
        routes = list(sol.routes)
        rejected = set(range(inst.n))
        for r in range(inst.n):
            ins = try_insert(inst, routes[r % 2], r)
            if ins:
                routes[r % 2] = ins.route
                rejected.discard(r)
        sol = build_solution(inst, DEFAULT_PARAMS, routes, rejected)
        fresh = solution_cost(inst, DEFAULT_PARAMS, sol)
        assert fresh.weighted == pytest.approx(sol.weighted, abs=1e-9)
        assert fresh.served == sol.served


def test_check_feasibility_flags_every_family(line_instance):
    inst = line_instance
    sol = empty_solution(inst)
    assert any(p.startswith("epsilon-constraint") for p in check_feasibility(inst, sol))
    good = build_solution(inst, DEFAULT_PARAMS, [make_route(inst, 0, (0, 1, 2, 3))], [])
    assert check_feasibility(inst, good) == []
    double = build_solution(inst, DEFAULT_PARAMS, [make_route(inst, 0, (0, 1, 2, 3))], [0])
    assert any(p.startswith("assignment") for p in check_feasibility(inst, double))


def test_rank_orders_shortfall_first():
    # the pickup sits off the driver's straight line, so serving it costs travel
    inst = build_instance("detour", [(0, 0, 480, 610)], [(4, 0, 515, 530)],
                          [(1, 1, 500, 510)], [(3, 1, 505, 530)])
    empty = empty_solution(inst)
    full = build_solution(inst, DEFAULT_PARAMS, [make_route(inst, 0, (0, 1, 2, 3))], [])
    assert empty.weighted < full.weighted
    assert rank(inst, full) < rank(inst, empty)
    assert better(inst, full, empty) and not better(inst, empty, full)
    assert not better(inst, full, full)


def test_idle_route_departs_as_late_as_possible():
    # s_k opens at 490, the drive takes 20 minutes and t_k closes at 600
    inst = build_instance("idle", [(0, 0, 490, 610)], [(10, 0, 500, 600)], [], [])
    s = schedule_route(inst, (0, (0, 1)))
    assert s.start_times == pytest.approx((580.0, 600.0))
    assert s.lateness == 0.0


def test_forced_long_ride_is_infeasible():
    # pickup pinned at 500, delivery cannot start before 531.5: ride 31 > 30
    inst = build_instance("ride31", [(0, 0, 480, 610)], [(0, 0, 480, 610)],
                          [(0, 0, 500, 500)], [(0, 0, 531.5, 540)])
    with pytest.raises(InfeasibleRoute) as exc:
        schedule_route(inst, (0, (0, 1, 2, 3)))
    assert exc.value.family == "ride time"


def test_four_passengers_exceed_capacity_three():
    pts = [(i, 0, 480, 600) for i in range(4)]
    inst = build_instance("four", [(0, 0, 480, 610)], [(0, 0, 480, 610)], pts,
                          [(5, 0, 480, 600)] * 4)
    with pytest.raises(InfeasibleRoute) as exc:
        schedule_route(inst, (0, (0, 1, 2, 3, 4, 5, 6, 7, 8, 9)))
    assert exc.value.family == "capacity"


def test_idle_fleet_at_shared_depot_costs_nothing():
    inst = build_instance("depot", [(1, 1, 480, 610)] * 2, [(1, 1, 480, 610)] * 2, [], [])
    sol = empty_solution(inst)
    assert solution_cost(inst, DEFAULT_PARAMS, sol).weighted == 0.0


def test_three_of_ten_rejected_breaks_the_floor():
    inst = random_instance(10, 2, 0)
    sol = empty_solution(inst)
    routes = list(sol.routes)
    served = set()
    for r in range(10):
        for k in range(2):
            ins = try_insert(inst, routes[k], r)
            if ins is not None:
                routes[k] = ins.route
                served.add(r)
                break
        if len(served) == 7:
            break
    assert len(served) == 7
    sol = build_solution(inst, DEFAULT_PARAMS, routes, set(range(10)) - served)
    assert check_feasibility(inst, sol) == ["epsilon-constraint: 7 served < 8 required"]


def test_delivery_before_pickup_is_flagged(line_instance):
    from darpdp.schedule import Route
    bad = build_solution(line_instance, DEFAULT_PARAMS, [Route(0, (0, 2, 1, 3))], [])
    assert any(p.startswith("precedence") for p in check_feasibility(line_instance, bad))


def test_insert_on_the_driver_segment(line_instance):
    route = make_route(line_instance, 0, (0, 3))
    ins = try_insert(line_instance, route, 0)
    assert (ins.pickup_pos, ins.delivery_pos) == (1, 2)
    assert ins.delta >= 0
    assert ins.route.stops == (0, 1, 2, 3)


def test_unreachable_pickup_window():
    inst = build_instance("far", [(0, 0, 480, 610)], [(0, 0, 480, 610)],
                          [(30, 0, 480, 500)], [(31, 0, 480, 600)])
    assert try_insert(inst, make_route(inst, 0, (0, 3)), 0) is None


def test_insertion_delta_matches_recomputation():
    for seed in range(20):
        inst = random_instance(3, 1, seed)
        route = make_route(inst, 0, (0, inst.vehicles[0].destination))
        for r in (0, 1):
            route = try_insert(inst, route, r).route if try_insert(inst, route, r) else route
        before = build_solution(inst, DEFAULT_PARAMS, [route], [])
        ins = try_insert(inst, route, 2)
        if ins is None:
            continue
        after = build_solution(inst, DEFAULT_PARAMS, [ins.route], [])
        delta = (solution_cost(inst, DEFAULT_PARAMS, after).weighted
                 - solution_cost(inst, DEFAULT_PARAMS, before).weighted)
        assert ins.delta == pytest.approx(delta, abs=1e-9)
