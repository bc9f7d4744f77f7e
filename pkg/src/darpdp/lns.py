"""Destroy/repair perturbation with four removal and three insertion operators."""
from __future__ import annotations

import enum
import math

from .model import Instance, SolverParams
from .neighborhoods import shift_descent
from .schedule import (DEFAULT_PARAMS, EPS, Solution, insertion_candidates, make_route, place,
                       replace_routes, try_insert)


class RemovalKind(enum.Enum):
    ROUTE = "Route"
    RANDOM = "Random"
    GREEDY = "Greedy"
    RELATED = "Related"


class InsertionKind(enum.Enum):
    BEST = "Best"
    RANDOM = "Random"
    COMPATIBILITY = "Compatibility"


def _served(inst, sol):
    owner = sol.assignment(inst)
    return [r for r in range(inst.n) if owner[r] >= 0], owner


def removal_saving(inst: Instance, sol: Solution, r: int) -> float:
    """Travel-time saving of dropping request ``r`` from its route."""
    owner = sol.assignment(inst)[r]
    if owner < 0:
        raise ValueError(f"request {r} is not served")
    stops = sol.routes[owner].stops
    req = inst.requests[r]
    p, d = stops.index(req.pickup), stops.index(req.delivery)
    t = inst.tt
    s = stops
    if d == p + 1:
        return t[s[p - 1]][s[p]] + t[s[p]][s[d]] + t[s[d]][s[d + 1]] - t[s[p - 1]][s[d + 1]]
    return ((t[s[p - 1]][s[p]] + t[s[p]][s[p + 1]] - t[s[p - 1]][s[p + 1]])
            + (t[s[d - 1]][s[d]] + t[s[d]][s[d + 1]] - t[s[d - 1]][s[d + 1]]))


def _attributes(inst, r):
    V = inst.vertices
    req = inst.requests[r]
    vp, vd = V[req.pickup], V[req.delivery]
    return (math.hypot(vp.x, vp.y), math.hypot(vd.x, vd.y), vp.earliest, vd.latest)


def similarity(inst: Instance, r_i: int, r_j: int) -> float:
    """Mean per-attribute similarity; positions are scalarized as distance from (0, 0)."""
    table = [_attributes(inst, r) for r in range(inst.n)]
    return _similarity(table, r_i, r_j)


def _similarity(table, r_i, r_j):
    total = 0.0
    for a in range(4):
        col = [row[a] for row in table]
        span = max(col) - min(col)
        if span <= 0:
            total += 1.0
        else:
            total += 1.0 - abs(table[r_i][a] - table[r_j][a]) / span
    return total / 4


def comp_measure(inst: Instance, r1: int, r2: int) -> float:
    """Pairwise time-window incompatibility of two requests, in minutes."""
    V = inst.vertices
    t = inst.tt
    a, b = inst.requests[r1], inst.requests[r2]

    def term(u, v):
        return max(abs(V[u].latest - V[v].earliest - t[u][v]),
                   abs(V[v].latest - V[u].earliest - t[u][v]))

    pp = term(a.pickup, b.pickup)
    pd = term(a.pickup, b.delivery)
    dp = term(a.delivery, b.pickup)
    dd = term(a.delivery, b.delivery)
    # grouped so that swapping r1 and r2 gives bit-identical sums
    return (pp + dd) + (pd + dp)


# ---------------------------------------------------------------------------
# destroy


def _drop(inst, params, sol, reqs):
    """Remove ``reqs`` from their routes; returns the new solution and touched vehicles."""
    owner = sol.assignment(inst)
    drop = {}
    for r in reqs:
        drop.setdefault(owner[r], set()).update(
            (inst.requests[r].pickup, inst.requests[r].delivery))
    changes = {}
    for k, verts in drop.items():
        stops = tuple(v for v in sol.routes[k].stops if v not in verts)
        route = make_route(inst, k, stops)
        if route is None:  # cannot happen for a feasible route, removals only relax timing
            raise AssertionError(f"removal made route {k} infeasible")
        changes[k] = route
    rejected = set(sol.rejected) | set(reqs)
    return replace_routes(inst, params, sol, changes, rejected), sorted(drop)


def destroy(inst: Instance, sol: Solution, kind: RemovalKind, count: int, rng,
            params: SolverParams = DEFAULT_PARAMS) -> tuple[Solution, list]:
    """Remove requests from ``sol``; returns the new solution and the removed ids."""
    if count < 1:
        raise ValueError("count must be >= 1")
    served, owner = _served(inst, sol)
    if not served:
        return sol, []
    count = min(count, len(served))

    if kind is RemovalKind.ROUTE:
        sizes = [(len(r.stops) - 2) // 2 for r in sol.routes]
        k = min((k for k in range(inst.m) if sizes[k] > 0), key=lambda k: (sizes[k], k))
        removed = [r for r in served if owner[r] == k]
        new, _ = _drop(inst, params, sol, removed)
        return new, removed

    if kind is RemovalKind.RANDOM:
        removed = sorted(rng.sample(served, count))
        new, touched = _drop(inst, params, sol, removed)
        return shift_descent(inst, params, new, touched), removed

    if kind is RemovalKind.GREEDY:
        removed = []
        cur = sol
        for _ in range(count):
            left = [r for r in served if r not in removed]
            r = max(left, key=lambda r: (removal_saving(inst, cur, r), -r))
            cur, _ = _drop(inst, params, cur, [r])
            removed.append(r)
        return cur, removed

    if kind is RemovalKind.RELATED:
        table = [_attributes(inst, r) for r in range(inst.n)]
        seed = rng.choice(served)
        others = sorted((r for r in served if r != seed),
                        key=lambda r: (-_similarity(table, seed, r), r))
        removed = [seed] + others[:count - 1]
        new, _ = _drop(inst, params, sol, removed)
        return new, removed

    raise ValueError(f"unknown removal kind {kind!r}")


# ---------------------------------------------------------------------------
# repair


def _best_anywhere(inst, params, routes, r, order):
    best = None
    for k in order:
        ins = try_insert(inst, routes[k], r, params)
        if ins is not None and (best is None or ins.delta < best.delta - EPS):
            best = ins
    return best


def _random_anywhere(inst, routes, r, rng):
    req = inst.requests[r]
    cands = [(k, i, j) for k in range(inst.m)
             for _, i, j in insertion_candidates(inst, routes[k], r)]
    rng.shuffle(cands)
    for k, i, j in cands:
        stops = place(routes[k], req.pickup, req.delivery, i, j)
        route = make_route(inst, k, stops)
        if route is not None:
            return route
    return None


def _compat_order(inst, routes, r, comp):
    members = []
    for route in routes:
        members.append([inst.request_at[v] for v in route.stops[1:-1]
                        if inst.is_pickup(v)])
    if all(not m for m in members):
        return list(range(inst.m))
    score = [sum(comp(r, q) for q in mem) / len(mem) if mem else math.inf for mem in members]
    return sorted(range(inst.m), key=lambda k: (score[k], k))


def repair(inst: Instance, sol: Solution, kind: InsertionKind, pool, rng,
           params: SolverParams = DEFAULT_PARAMS) -> Solution:
    """Reinsert requests from ``pool`` (visited in random order) where they fit."""
    order = sorted(pool)
    if not order:
        return sol
    rng.shuffle(order)
    routes = list(sol.routes)
    rejected = set(sol.rejected)
    memo = {}

    def comp(a, b):
        key = (a, b) if a <= b else (b, a)
        if key not in memo:
            memo[key] = comp_measure(inst, *key)
        return memo[key]

    for r in order:
        if kind is InsertionKind.BEST:
            ins = _best_anywhere(inst, params, routes, r, range(inst.m))
            route = ins.route if ins else None
        elif kind is InsertionKind.RANDOM:
            route = _random_anywhere(inst, routes, r, rng)
        elif kind is InsertionKind.COMPATIBILITY:
            route = None
            for k in _compat_order(inst, routes, r, comp):
                ins = try_insert(inst, routes[k], r, params)
                if ins is not None:
                    route = ins.route
                    break
        else:
            raise ValueError(f"unknown insertion kind {kind!r}")
        if route is not None:
            routes[route.vehicle] = route
            rejected.discard(r)
    return replace_routes(inst, params, sol, dict(enumerate(routes)), rejected)


def removal_count(params: SolverParams, served: int, rng) -> int:
    return rng.randint(1, max(1, math.floor(params.removal_fraction * served)))


def perturb(inst: Instance, params: SolverParams, sol: Solution, rng,
            record: dict | None = None) -> Solution:
    """One destroy/repair round with uniformly drawn operators."""
    count = removal_count(params, sol.served, rng)
    d = rng.choice(list(RemovalKind))
    r = rng.choice(list(InsertionKind))
    partial, removed = destroy(inst, sol, d, count, rng, params)
    out = repair(inst, partial, r, partial.rejected, rng, params)
    if record is not None:
        record.update(destroy=d.value, repair=r.value, removed=removed, count=count)
    return out

