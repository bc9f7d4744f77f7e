"""Reference implementations used only by the tests.

They share no code with the package beyond the Instance data: route timing
is decided by a linear program, the exact optimum by enumerating
``itertools.permutations`` and KPIs by a direct replay of the schedule.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog


def _coords(inst, v):
    return inst.vertices[v].x, inst.vertices[v].y


def leg(inst, a, b):
    (xa, ya), (xb, yb) = _coords(inst, a), _coords(inst, b)
    return math.hypot(xa - xb, ya - yb) * inst.time_factor


def structure_ok(inst, k, stops):
    veh = inst.vehicles[k]
    if stops[0] != veh.origin or stops[-1] != veh.destination:
        return False
    load = 0
    seen = set()
    by_pickup = {r.pickup: r for r in inst.requests}
    by_delivery = {r.delivery: r for r in inst.requests}
    for v in stops[1:-1]:
        if v in by_pickup:
            load += by_pickup[v].demand
            seen.add(v)
        elif v in by_delivery:
            if by_delivery[v].pickup not in seen:
                return False
            load -= by_delivery[v].demand
        else:
            return False
        if load > veh.capacity:
            return False
    return load == 0


def lp_route_eval(inst, k, stops):
    """``(travel, lateness)`` of the stop sequence, or None when no timing works.

    Minimizes the destination start time over every schedule meeting the
    windows, ride times, route duration and destination tolerance.
    """
    stops = tuple(stops)
    if not structure_ok(inst, k, stops):
        return None
    veh = inst.vehicles[k]
    V = inst.vertices
    L = len(stops)
    A, b = [], []

    def ge(j, i, w):  # T_j - T_i >= w
        row = np.zeros(L)
        row[i] += 1.0
        row[j] -= 1.0
        A.append(row)
        b.append(-w)

    for idx in range(L - 1):
        ge(idx + 1, idx, V[stops[idx]].service + leg(inst, stops[idx], stops[idx + 1]))
    pos = {v: i for i, v in enumerate(stops)}
    for r in inst.requests:
        if r.pickup in pos:
            ip, idl = pos[r.pickup], pos[r.delivery]
            ge(ip, idl, -(V[r.pickup].service + inst.max_ride_time))
    ge(0, L - 1, -inst.max_route_duration)
    bounds = [(V[v].earliest, V[v].latest) for v in stops]
    bounds[-1] = (V[stops[-1]].earliest, V[stops[-1]].latest + veh.dest_tolerance)
    c = np.zeros(L)
    c[-1] = 1.0
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(b), bounds=bounds, method="highs")
    if res.status != 0:
        return None
    travel = sum(leg(inst, stops[i], stops[i + 1]) for i in range(L - 1))
    late = max(0.0, res.x[-1] - V[stops[-1]].latest)
    return travel, late


def _sequences(inst, k, reqs):
    veh = inst.vehicles[k]
    verts = [v for r in reqs for v in (inst.requests[r].pickup, inst.requests[r].delivery)]
    for perm in itertools.permutations(verts):
        stops = (veh.origin,) + perm + (veh.destination,)
        if structure_ok(inst, k, stops):
            yield stops


def enumerate_optimum(inst, w1, w2):
    """Lowest weighted cost over every assignment and stop order, or None.

    Requests map to a vehicle or to the rejection pool; at least
    ``ceil(fraction * n)`` must be served.
    """
    need = math.ceil(inst.served_fraction_min * inst.n - 1e-9)
    memo = {}

    def best_route(k, reqs):
        key = (k, reqs)
        if key not in memo:
            best = None
            for stops in _sequences(inst, k, reqs):
                val = lp_route_eval(inst, k, stops)
                if val is not None:
                    w = w1 * val[0] + w2 * val[1]
                    best = w if best is None else min(best, w)
            memo[key] = best
        return memo[key]

    best = None
    for assign in itertools.product(range(-1, inst.m), repeat=inst.n):
        if sum(a >= 0 for a in assign) < need:
            continue
        total = 0.0
        for k in range(inst.m):
            w = best_route(k, tuple(r for r in range(inst.n) if assign[r] == k))
            if w is None:
                break
            total += w
        else:
            best = total if best is None else min(best, total)
    return best


def replay_kpis(inst, sol):
    """KPIs recomputed by walking each route's stored schedule stop by stop."""
    from darpdp.schedule import schedule_route

    served = sum((len(r.stops) - 2) // 2 for r in sol.routes)
    shares, excess = [], 0.0
    for route in sol.routes:
        sched = schedule_route(inst, route)
        T = sched.start_times
        onboard = 0
        empty = 0.0
        picked = {}
        for idx, v in enumerate(route.stops):
            vx = inst.vertices[v]
            onboard += vx.load_delta
            if idx + 1 < len(route.stops) and onboard == 0:
                empty += T[idx + 1] - T[idx]
            if vx.load_delta > 0:
                picked[v] = T[idx] + vx.service
            elif vx.load_delta < 0:
                p = v - inst.n
                excess += T[idx] - picked[p] - leg(inst, p, v)
        span = T[-1] - T[0]
        if span > 0:
            shares.append(100.0 * empty / span)
    kpi1 = 100.0 * served / inst.n
    kpi2 = sum(shares) / len(shares) if shares else 0.0
    kpi3 = excess / served if served else 0.0
    return kpi1, kpi2, kpi3
