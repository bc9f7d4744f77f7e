"""Exhaustive solver for tiny instances and an LP-format MILP exporter."""
from __future__ import annotations

from dataclasses import dataclass

from .model import Instance, SolverParams
from .schedule import (DEFAULT_PARAMS, Cost, InfeasibleRoute, Route, Solution, build_solution,
                       schedule_route)


class OverLimit(ValueError):
    """The instance is larger than the brute-force caps."""


class NoFeasibleSolution(ValueError):
    """No assignment satisfies the hard constraints and the served-count floor."""


@dataclass(frozen=True)
class ExactLimits:
    max_requests: int = 7
    max_vehicles: int = 2


@dataclass(frozen=True)
class ExactResult:
    optimum: Cost
    solution: Solution
    nodes_explored: int
    proven: bool


def _routes_by_subset(inst: Instance, params: SolverParams, k: int):
    """Cheapest feasible route of vehicle ``k`` for every servable request subset.

    Depth-first over precedence-ordered stop sequences, pruned on capacity and
    on the forward earliest start times (which only grow along a sequence).
    Returns ``({mask: (weight, stops, Route)}, nodes)``.
    """
    V = inst.vertices
    tt = inst.tt
    veh = inst.vehicles[k]
    reqs = inst.requests
    best = {}
    nodes = 0

    def close(stops, mask):
        full = stops + (veh.destination,)
        try:
            sched = schedule_route(inst, (k, full))
        except InfeasibleRoute:
            return
        w = params.w1 * sched.travel + params.w2 * sched.lateness
        cur = best.get(mask)
        if cur is None or w < cur[0] - 1e-12 or (abs(w - cur[0]) <= 1e-12 and full < cur[1]):
            best[mask] = (w, full, Route(k, full, sched.travel, sched.lateness))

    def dfs(stops, t, load, mask, onboard):
        nonlocal nodes
        nodes += 1
        if not onboard:
            close(stops, mask)
        last = stops[-1]
        s_last = V[last].service
        for r in range(inst.n):
            req = reqs[r]
            if r in onboard:
                v = req.delivery
            elif not mask >> r & 1 and load + req.demand <= veh.capacity:
                v = req.pickup
            else:
                continue
            arrive = t + s_last + tt[last][v]
            start = max(V[v].earliest, arrive)
            if start > V[v].latest + 1e-9:
                continue
            if v == req.pickup:
                dfs(stops + (v,), start, load + req.demand, mask | 1 << r, onboard | {r})
            else:
                dfs(stops + (v,), start, load - req.demand, mask, onboard - {r})

    dfs((veh.origin,), V[veh.origin].earliest, 0, 0, frozenset())
    return best, nodes


def brute_force_solve(inst: Instance, limits: ExactLimits | None = None,
                      params: SolverParams = DEFAULT_PARAMS) -> ExactResult:
    """Proven optimum of a tiny instance by exhaustive enumeration.

    Every subset of requests is tried on every vehicle with every feasible
    stop order; subsets are then combined across vehicles under the
    served-count floor. Among equal costs the lexicographically smallest
    tuple of stop sequences wins.
    """
    limits = limits or ExactLimits()
    if inst.n > limits.max_requests or inst.m > limits.max_vehicles:
        raise OverLimit(f"instance has n={inst.n}, m={inst.m}; brute force is capped at "
                        f"n<={limits.max_requests}, m<={limits.max_vehicles}")
    if inst.m == 0:
        raise NoFeasibleSolution("instance has no vehicles")
    nodes = 0
    per_vehicle = []
    for k in range(inst.m):
        table, cnt = _routes_by_subset(inst, params, k)
        nodes += cnt
        if not table:
            raise NoFeasibleSolution(f"vehicle {k} cannot reach its destination in time")
        per_vehicle.append(table)

    # combine vehicle by vehicle over disjoint masks
    layer = {0: (0.0, ())}
    for table in per_vehicle:
        nxt = {}
        for used, (w0, enc0) in layer.items():
            for mask, (w1, stops, _) in table.items():
                if used & mask:
                    continue
                key = used | mask
                cand = (w0 + w1, enc0 + (stops,))
                cur = nxt.get(key)
                if cur is None or cand[0] < cur[0] - 1e-12 or (
                        abs(cand[0] - cur[0]) <= 1e-12 and cand[1] < cur[1]):
                    nxt[key] = cand
        layer = nxt

    best = None
    for mask, (w, enc) in layer.items():
        if bin(mask).count("1") < inst.min_served:
            continue
        if best is None or w < best[1] - 1e-12 or (abs(w - best[1]) <= 1e-12 and enc < best[2]):
            best = (mask, w, enc)
    if best is None:
        raise NoFeasibleSolution(
            f"no feasible solution serves at least {inst.min_served} of {inst.n} requests")
    mask, _, enc = best
    routes = []
    for k, stops in enumerate(enc):
        sub = 0
        for v in stops[1:-1]:
            if inst.is_pickup(v):
                sub |= 1 << inst.request_at[v]
        routes.append(per_vehicle[k][sub][2])
    rejected = [r for r in range(inst.n) if not mask >> r & 1]
    sol = build_solution(inst, params, routes, rejected)
    return ExactResult(sol.cost, sol, nodes, True)


# ---------------------------------------------------------------------------
# MILP export

_HEADER = """\\ DARPDP MILP in CPLEX LP format
\\ instance: {name}  (m={m} vehicles, n={n} requests, |V|={nv})
\\ vertex ids: origins 0..m-1, pickups m..m+n-1, deliveries pickup+n,
\\   destinations m+2n..2m+2n-1
\\ variables (all indices are vertex or vehicle ids):
\\   x_i_j_k  binary, vehicle k drives arc (i, j); declared for every i, j, k,
\\            arcs no route can use are fixed to 0 in Bounds
\\   y_i_k    binary, pickup i is served by vehicle k
\\   T_i_k    continuous, service start at vertex i by vehicle k
\\   Q_i_k    continuous, load of vehicle k after vertex i
\\   L_k      continuous >= 0, lateness of vehicle k at its destination
\\ rows: eps, once_i, link_i_k, pair_i_k, start_k, flow_i_k, end_k,
\\   time_i_j_k, ridemax_i_k, ridemin_i_k, late_k, dur_k, load_i_j_k
"""


def _num(v: float) -> str:
    s = f"{v:.12g}"
    return "0" if s == "-0" else s


def _expr(terms) -> str:
    """Render ``[(coef, var), ...]`` as an LP linear expression."""
    parts = []
    for c, var in terms:
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = var if mag == 1 else f"{_num(mag)} {var}"
        parts.append(f"{sign} {body}")
    if not parts:
        return "0"
    text = " ".join(parts)
    if text.startswith("+ "):
        text = text[2:]
    return text


def _wrap(line: str, width: int = 200) -> list:
    out = []
    while len(line) > width:
        cut = line.rfind(" + ", 0, width)
        cut2 = line.rfind(" - ", 0, width)
        cut = max(cut, cut2)
        if cut <= 0:
            break
        out.append(line[:cut])
        line = "   " + line[cut + 1:]
    out.append(line)
    return out


def arc_allowed(inst: Instance, i: int, j: int, k: int) -> bool:
    """Whether vehicle ``k`` may drive arc ``(i, j)`` in the model."""
    if i == j:
        return False
    m, n = inst.m, inst.n
    veh = inst.vehicles[k]
    req_i = m <= i < m + 2 * n
    req_j = m <= j < m + 2 * n
    if i == veh.origin:
        # leave the origin to a pickup or straight to the destination
        return (m <= j < m + n) or j == veh.destination
    if req_i:
        if j == veh.destination:
            return i >= m + n  # only a delivery precedes the destination
        return req_j
    return False


def export_milp(inst: Instance, params: SolverParams = DEFAULT_PARAMS,
                duration_row: bool = True) -> str:
    """The DARPDP model as CPLEX LP text.

    The max in the objective is linearized with one slack ``L_k`` per
    vehicle. Big-M values are tightened per arc. The ride-time rows are
    relaxed when the request is not served by that vehicle so that
    unserved requests cannot make the model infeasible. ``duration_row``
    adds ``T_t - T_s <= T_r`` for every vehicle.
    """
    m, n = inst.m, inst.n
    V = inst.vertices
    tt = inst.tt
    nv = len(V)
    pickups = range(m, m + n)
    req_vertices = range(m, m + 2 * n)

    def x(i, j, k):
        return f"x_{i}_{j}_{k}"

    lines = [_HEADER.format(name=inst.name, m=m, n=n, nv=nv).rstrip("\n"), "Minimize"]
    obj = []
    for k in range(m):
        for i in range(nv):
            for j in range(nv):
                if arc_allowed(inst, i, j, k) and tt[i][j] != 0:
                    obj.append((params.w1 * tt[i][j], x(i, j, k)))
        obj.append((params.w2, f"L_{k}"))
    lines += _wrap(" obj: " + _expr(obj))
    lines.append("Subject To")
    rows = []

    def row(name, terms, op, rhs):
        rows.extend(_wrap(f" {name}: {_expr(terms)} {op} {_num(rhs)}"))

    row("eps", [(1, f"y_{i}_{k}") for i in pickups for k in range(m)], ">=", inst.min_served)
    for i in pickups:
        row(f"once_{i}", [(1, f"y_{i}_{k}") for k in range(m)], "<=", 1)
    for k in range(m):
        veh = inst.vehicles[k]
        s, t = veh.origin, veh.destination
        for i in pickups:
            out = [(1, x(i, j, k)) for j in range(nv) if arc_allowed(inst, i, j, k)]
            row(f"link_{i}_{k}", out + [(-1, f"y_{i}_{k}")], "=", 0)
            into_p = [(1, x(j, i, k)) for j in range(nv) if arc_allowed(inst, j, i, k)]
            into_d = [(-1, x(j, i + n, k)) for j in range(nv) if arc_allowed(inst, j, i + n, k)]
            row(f"pair_{i}_{k}", into_p + into_d, "=", 0)
        row(f"start_{k}", [(1, x(s, j, k)) for j in range(nv) if arc_allowed(inst, s, j, k)],
            "=", 1)
        for i in req_vertices:
            into = [(1, x(j, i, k)) for j in range(nv) if arc_allowed(inst, j, i, k)]
            out = [(-1, x(i, j, k)) for j in range(nv) if arc_allowed(inst, i, j, k)]
            row(f"flow_{i}_{k}", into + out, "=", 0)
        row(f"end_{k}", [(1, x(i, t, k)) for i in range(nv) if arc_allowed(inst, i, t, k)],
            "=", 1)
        for i in range(nv):
            for j in range(nv):
                if not arc_allowed(inst, i, j, k):
                    continue
                si = V[i].service
                big = max(0.0, _upper(inst, i, k) + si + tt[i][j] - V[j].earliest)
                row(f"time_{i}_{j}_{k}",
                    [(1, f"T_{i}_{k}"), (-1, f"T_{j}_{k}"), (big, x(i, j, k))],
                    "<=", big - si - tt[i][j])
        for i in pickups:
            d = i + n
            sp = V[i].service
            hi = max(0.0, V[d].latest - V[i].earliest - sp - inst.max_ride_time)
            row(f"ridemax_{i}_{k}", [(1, f"T_{d}_{k}"), (-1, f"T_{i}_{k}"), (hi, f"y_{i}_{k}")],
                "<=", inst.max_ride_time + sp + hi)
            lo = max(0.0, tt[i][d] - (V[d].earliest - V[i].latest - sp))
            row(f"ridemin_{i}_{k}", [(1, f"T_{d}_{k}"), (-1, f"T_{i}_{k}"), (-lo, f"y_{i}_{k}")],
                ">=", tt[i][d] + sp - lo)
        row(f"late_{k}", [(1, f"L_{k}"), (-1, f"T_{t}_{k}")], ">=", -V[t].latest)
        if duration_row:
            row(f"dur_{k}", [(1, f"T_{t}_{k}"), (-1, f"T_{s}_{k}")], "<=",
                inst.max_route_duration)
        cap = veh.capacity
        for i in range(nv):
            for j in range(nv):
                if not arc_allowed(inst, i, j, k):
                    continue
                qj = V[j].load_delta
                row(f"load_{i}_{j}_{k}",
                    [(1, f"Q_{i}_{k}"), (-1, f"Q_{j}_{k}"), (cap, x(i, j, k))], "<=", cap - qj)
    lines += rows

    lines.append("Bounds")
    for k in range(m):
        veh = inst.vehicles[k]
        for i in range(nv):
            for j in range(nv):
                if not arc_allowed(inst, i, j, k):
                    lines.append(f" {x(i, j, k)} = 0")
        for i in _vertices_of(inst, k):
            lines.append(f" {_num(V[i].earliest)} <= T_{i}_{k} <= {_num(_upper(inst, i, k))}")
        for i in _vertices_of(inst, k):
            q = V[i].load_delta
            if i in (veh.origin, veh.destination):
                lines.append(f" Q_{i}_{k} = 0")
            else:
                lines.append(f" {_num(max(0, q))} <= Q_{i}_{k} <= "
                             f"{_num(min(veh.capacity, veh.capacity + q))}")
        lines.append(f" L_{k} >= 0")
    lines.append("Binaries")
    names = [x(i, j, k) for k in range(m) for i in range(nv) for j in range(nv)]
    names += [f"y_{i}_{k}" for k in range(m) for i in pickups]
    for a in range(0, len(names), 8):
        lines.append(" " + " ".join(names[a:a + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _vertices_of(inst, k):
    veh = inst.vehicles[k]
    return [veh.origin, *range(inst.m, inst.m + 2 * inst.n), veh.destination]


def _upper(inst, i, k):
    veh = inst.vehicles[k]
    if i == veh.destination:
        return inst.vertices[i].latest + veh.dest_tolerance
    return inst.vertices[i].latest
