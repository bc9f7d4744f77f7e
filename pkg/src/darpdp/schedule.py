"""Route scheduling, feasibility and cost evaluation.

Every cost in the package is computed here. A route is scheduled in two
passes: earliest start times forward, then the origin departure is delayed
by the largest amount that breaks no downstream latest time. When that
schedule breaks a ride-time or route-duration limit, an exact earliest-time
propagation over the route's difference constraints decides feasibility
instead, so a sequence is rejected only when no timing of it works.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .model import Instance, SolverParams

EPS = 1e-9
_CACHE_LIMIT = 400_000

DEFAULT_PARAMS = SolverParams()


class InfeasibleRoute(Exception):
    """A stop sequence that cannot be scheduled.

    ``family`` is one of ``structure``, ``precedence``, ``time window``,
    ``ride time``, ``capacity``, ``duration`` or ``lateness``; ``where`` is the
    offending vertex or request id.
    """

    def __init__(self, family: str, where=None, detail: str = ""):
        self.family = family
        self.where = where
        self.detail = detail
        msg = family if where is None else f"{family} at {where}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


@dataclass(frozen=True)
class Route:
    vehicle: int
    stops: tuple
    travel: float = field(default=0.0, compare=False)
    lateness: float = field(default=0.0, compare=False)

    def __len__(self):
        return len(self.stops)


@dataclass(frozen=True)
class Schedule:
    stops: tuple
    start_times: tuple
    loads: tuple
    travel: float
    duration: float
    lateness: float


@dataclass(frozen=True)
class Cost:
    travel: float
    lateness_total: float
    weighted: float
    served: int


@dataclass(frozen=True)
class Solution:
    routes: tuple
    rejected: frozenset
    cost: Cost

    @property
    def weighted(self) -> float:
        return self.cost.weighted

    @property
    def served(self) -> int:
        return self.cost.served

    def assignment(self, inst: Instance) -> list:
        """Route (vehicle id) serving each request, ``-1`` when rejected."""
        owner = [-1] * inst.n
        ra = inst.request_at
        for route in self.routes:
            for v in route.stops[1:-1]:
                owner[ra[v]] = route.vehicle
        return owner

    def signature(self, inst: Instance) -> tuple:
        return tuple(self.assignment(inst))


@dataclass(frozen=True)
class Insertion:
    route: Route
    pickup_pos: int
    delivery_pos: int
    delta: float


# ---------------------------------------------------------------------------
# scheduling


def _schedule(inst: Instance, vehicle: int, stops, full: bool):
    veh = inst.vehicles[vehicle]
    L = len(stops)
    if L < 2 or stops[0] != veh.origin or stops[-1] != veh.destination:
        raise InfeasibleRoute("structure", vehicle, "route must start at s_k and end at t_k")
    V = inst.vertices
    tt = inst.tt
    ra = inst.request_at
    reqs = inst.requests
    cap = veh.capacity

    loads = [0] * L
    onboard = {}
    seen = set()
    load = 0
    cap_breach = None
    for idx in range(1, L - 1):
        v = stops[idx]
        r = ra[v]
        if r < 0 or v in seen:
            raise InfeasibleRoute("structure", v, "unexpected or repeated stop")
        seen.add(v)
        req = reqs[r]
        if v == req.pickup:
            onboard[r] = idx
            load += req.demand
            if load > cap and cap_breach is None:
                cap_breach = v
        else:
            if r not in onboard:
                raise InfeasibleRoute("precedence", r, "delivery before pickup")
            del onboard[r]
            load -= req.demand
        loads[idx] = load
    if onboard:
        raise InfeasibleRoute("precedence", next(iter(onboard)), "pickup without delivery")

    # forward pass: earliest start times
    first = V[stops[0]]
    T = [0.0] * L
    T[0] = t = first.earliest
    travel = 0.0
    prev = stops[0]
    s_prev = first.service
    for idx in range(1, L):
        v = stops[idx]
        leg = tt[prev][v]
        travel += leg
        arrive = t + s_prev + leg
        vx = V[v]
        t = vx.earliest if vx.earliest > arrive else arrive
        if idx < L - 1 and t > vx.latest + EPS:
            raise InfeasibleRoute("time window", v, f"earliest start {t:.4f} > {vx.latest}")
        T[idx] = t
        prev = v
        s_prev = vx.service
    dest = V[stops[-1]]
    lateness = T[-1] - dest.latest
    if lateness < 0.0:
        lateness = 0.0

    # origin shift: delay departure by the forward slack
    slack = first.latest - T[0]
    wait = 0.0
    for idx in range(1, L):
        vx = V[stops[idx]]
        wait += T[idx] - (T[idx - 1] + V[stops[idx - 1]].service + tt[stops[idx - 1]][stops[idx]])
        lim = vx.latest
        if idx == L - 1 and T[idx] > lim:
            lim = T[idx]
        room = wait + lim - T[idx]
        if room < slack:
            slack = room
    if slack > EPS:
        S = [0.0] * L
        S[0] = t = T[0] + slack
        for idx in range(1, L):
            a, b = stops[idx - 1], stops[idx]
            arrive = t + V[a].service + tt[a][b]
            e = V[b].earliest
            t = e if e > arrive else arrive
            S[idx] = t
        T = S

    bad = _ride_or_duration(inst, stops, T)
    if bad is not None:
        if cap_breach is not None:
            raise InfeasibleRoute(*bad)
        T = _exact_times(inst, veh, stops)
        if T is None:
            raise InfeasibleRoute(*bad)
        lateness = max(0.0, T[-1] - dest.latest)
    if cap_breach is not None:
        raise InfeasibleRoute("capacity", cap_breach, f"load exceeds {cap}")
    if lateness > veh.dest_tolerance + EPS:
        raise InfeasibleRoute("lateness", vehicle,
                              f"{lateness:.4f} min late > tolerance {veh.dest_tolerance}")
    if not full:
        return travel, lateness
    return Schedule(tuple(stops), tuple(T), tuple(loads), travel, T[-1] - T[0], lateness)


def _ride_or_duration(inst, stops, T):
    V = inst.vertices
    ra = inst.request_at
    reqs = inst.requests
    pos = {}
    for idx in range(1, len(stops) - 1):
        v = stops[idx]
        req = reqs[ra[v]]
        if v == req.pickup:
            pos[req.id] = idx
        else:
            ip = pos[req.id]
            ride = T[idx] - T[ip] - V[req.pickup].service
            if ride > inst.max_ride_time + EPS:
                return ("ride time", req.id, f"{ride:.4f} > {inst.max_ride_time}")
    dur = T[-1] - T[0]
    if dur > inst.max_route_duration + EPS:
        return ("duration", None, f"{dur:.4f} > {inst.max_route_duration}")
    return None


def _exact_times(inst, veh, stops):
    """Least start times meeting every timing constraint of the sequence, or None.

    All constraints have the form ``T_j >= T_i + w`` plus per-stop windows, so
    the least fixpoint of the lower bounds is the earliest feasible schedule
    whenever one exists.
    """
    V = inst.vertices
    tt = inst.tt
    L = len(stops)
    upper = [V[v].latest for v in stops]
    upper[-1] += veh.dest_tolerance
    edges = []
    for idx in range(L - 1):
        a, b = stops[idx], stops[idx + 1]
        edges.append((idx, idx + 1, V[a].service + tt[a][b]))
    at = {v: idx for idx, v in enumerate(stops)}
    for v in stops[1:-1]:
        req = inst.requests[inst.request_at[v]]
        if v == req.pickup:
            ip, idl = at[v], at[req.delivery]
            # ride time: T_d - T_p - s_p <= T_M
            edges.append((idl, ip, -V[v].service - inst.max_ride_time))
    edges.append((L - 1, 0, -inst.max_route_duration))
    T = [V[v].earliest for v in stops]
    for _ in range(L + 1):
        changed = False
        for i, j, w in edges:
            cand = T[i] + w
            if cand > T[j] + 1e-12:
                T[j] = cand
                if cand > upper[j] + EPS:
                    return None
                changed = True
        if not changed:
            return T
    return None


def schedule_route(inst: Instance, route) -> Schedule:
    """Schedule ``route`` (a Route or ``(vehicle, stops)``); raises InfeasibleRoute."""
    vehicle, stops = _unpack(route)
    return _schedule(inst, vehicle, tuple(stops), True)


def _unpack(route):
    if isinstance(route, Route):
        return route.vehicle, route.stops
    vehicle, stops = route
    return vehicle, stops


def route_eval(inst: Instance, vehicle: int, stops: tuple):
    """Cached ``(travel, lateness)`` of a stop tuple, or None when infeasible."""
    key = (vehicle, stops)
    cache = inst.route_cache
    hit = cache.get(key, False)
    if hit is not False:
        return hit
    try:
        val = _schedule(inst, vehicle, stops, False)
    except InfeasibleRoute:
        val = None
    if len(cache) >= _CACHE_LIMIT:
        cache.clear()
    cache[key] = val
    return val


def make_route(inst: Instance, vehicle: int, stops) -> Route | None:
    stops = tuple(stops)
    val = route_eval(inst, vehicle, stops)
    if val is None:
        return None
    return Route(vehicle, stops, val[0], val[1])


def empty_route(inst: Instance, vehicle: int) -> Route | None:
    veh = inst.vehicles[vehicle]
    return make_route(inst, vehicle, (veh.origin, veh.destination))


def route_weight(params: SolverParams, route: Route) -> float:
    return params.w1 * route.travel + params.w2 * route.lateness


# ---------------------------------------------------------------------------
# solutions


def build_solution(inst: Instance, params: SolverParams, routes, rejected) -> Solution:
    routes = tuple(routes)
    travel = sum(r.travel for r in routes)
    late = sum(r.lateness for r in routes)
    rejected = frozenset(rejected)
    cost = Cost(travel, late, params.w1 * travel + params.w2 * late, inst.n - len(rejected))
    return Solution(routes, rejected, cost)


def replace_routes(inst, params, sol: Solution, changes: dict, rejected=None) -> Solution:
    routes = list(sol.routes)
    for k, route in changes.items():
        routes[k] = route
    return build_solution(inst, params, routes, sol.rejected if rejected is None else rejected)


def empty_solution(inst: Instance, params: SolverParams = DEFAULT_PARAMS) -> Solution:
    routes = []
    for k in range(inst.m):
        route = empty_route(inst, k)
        if route is None:
            # the driver cannot even reach the destination; keep the route for reporting
            veh = inst.vehicles[k]
            route = Route(k, (veh.origin, veh.destination), inst.tt[veh.origin][veh.destination], 0.0)
        routes.append(route)
    return build_solution(inst, params, routes, range(inst.n))


def shortfall(inst: Instance, sol: Solution) -> int:
    return max(0, inst.min_served - sol.served)


def rank(inst: Instance, sol: Solution) -> tuple:
    """Ordering key: epsilon-constraint shortfall first, then weighted cost."""
    return (max(0, inst.min_served - sol.cost.served), sol.cost.weighted)


def better(inst: Instance, a: Solution, b: Solution) -> bool:
    """True when ``a`` strictly beats ``b``."""
    sa, sb = shortfall(inst, a), shortfall(inst, b)
    if sa != sb:
        return sa < sb
    return a.cost.weighted < b.cost.weighted - EPS


def solution_cost(inst: Instance, params: SolverParams, sol: Solution) -> Cost:
    """Recompute the cost of ``sol`` from scratch (no caches)."""
    travel = late = 0.0
    for route in sol.routes:
        sched = schedule_route(inst, route)
        travel += sched.travel
        late += sched.lateness
    served = sum((len(r.stops) - 2) // 2 for r in sol.routes)
    return Cost(travel, late, params.w1 * travel + params.w2 * late, served)


def check_feasibility(inst: Instance, sol: Solution) -> list[str]:
    """Every violated constraint family; empty means feasible."""
    problems = []
    if len(sol.routes) != inst.m:
        problems.append(f"structure: {len(sol.routes)} routes for {inst.m} vehicles")
    count = [0] * inst.n
    for k, route in enumerate(sol.routes):
        if route.vehicle != k:
            problems.append(f"structure: route {k} belongs to vehicle {route.vehicle}")
        try:
            schedule_route(inst, route)
        except InfeasibleRoute as exc:
            problems.append(f"{exc.family}: vehicle {route.vehicle}: {exc}")
        except (IndexError, KeyError) as exc:
            problems.append(f"structure: vehicle {route.vehicle}: bad stop ({exc})")
            continue
        for v in route.stops[1:-1]:
            if 0 <= v < len(inst.request_at) and inst.request_at[v] >= 0:
                r = inst.request_at[v]
                if inst.requests[r].pickup == v:
                    count[r] += 1
    for r in range(inst.n):
        c = count[r] + (1 if r in sol.rejected else 0)
        if c != 1:
            problems.append(f"assignment: request {r} served {count[r]} times, "
                            f"rejected={r in sol.rejected}")
    served = sum(1 for c in count if c >= 1)
    if served < inst.min_served:
        problems.append(f"epsilon-constraint: {served} served < {inst.min_served} required")
    return problems


# ---------------------------------------------------------------------------
# insertion and removal


def remove_request(inst: Instance, route: Route, r: int) -> Route | None:
    req = inst.requests[r]
    stops = tuple(v for v in route.stops if v != req.pickup and v != req.delivery)
    return make_route(inst, route.vehicle, stops)


def insertion_candidates(inst: Instance, route: Route, r: int):
    """Pickup/delivery slots that pass cheap window and load screens.

    Yields ``(travel_increase, i, j)`` where the pickup is placed before
    ``stops[i]`` and the delivery before ``stops[j]`` (``j >= i``).
    """
    req = inst.requests[r]
    p, d = req.pickup, req.delivery
    q = req.demand
    stops = route.stops
    L = len(stops)
    V = inst.vertices
    tt = inst.tt
    cap = inst.vehicles[route.vehicle].capacity
    if q > cap:
        return []
    # earliest times and loads of the current route as lower bounds
    T = [0.0] * L
    loads = [0] * L
    t = V[stops[0]].earliest
    T[0] = t
    load = 0
    for idx in range(1, L):
        a, b = stops[idx - 1], stops[idx]
        arrive = t + V[a].service + tt[a][b]
        t = max(V[b].earliest, arrive)
        T[idx] = t
        dv = V[b].load_delta
        load += dv
        loads[idx] = load
    vp, vd = V[p], V[d]
    tp, td = tt[p], tt[d]
    out = []
    for i in range(1, L):
        a = stops[i - 1]
        if loads[i - 1] + q > cap:
            continue
        tpick = max(vp.earliest, T[i - 1] + V[a].service + tt[a][p])
        if tpick > vp.latest + EPS:
            break
        b = stops[i]
        ta = tt[a]
        detour_p = ta[p] + tp[b] - ta[b]
        # delivery right after the pickup
        direct = ta[p] + tp[d] + td[b] - ta[b]
        tdel = max(vd.earliest, tpick + vp.service + tp[d])
        if tdel <= vd.latest + EPS:
            out.append((direct, i, i))
        for j in range(i + 1, L):
            c = stops[j - 1]
            if loads[j - 1] + q > cap:
                break
            tdel = max(vd.earliest, T[j - 1] + V[c].service + tt[c][d])
            if tdel > vd.latest + EPS:
                break
            e = stops[j]
            out.append((detour_p + tt[c][d] + td[e] - tt[c][e], i, j))
    return out


def place(route: Route, p: int, d: int, i: int, j: int) -> tuple:
    s = route.stops
    if i == j:
        return s[:i] + (p, d) + s[i:]
    return s[:i] + (p,) + s[i:j] + (d,) + s[j:]


def try_insert(inst: Instance, route: Route, request: int,
               params: SolverParams = DEFAULT_PARAMS) -> Insertion | None:
    """Cheapest feasible insertion of ``request`` into ``route``.

    Ties on the weighted increase go to the lowest pickup position, then the
    lowest delivery position.
    """
    req = inst.requests[request]
    p, d = req.pickup, req.delivery
    cands = insertion_candidates(inst, route, request)
    if not cands:
        return None
    cands.sort()
    w1, w2 = params.w1, params.w2
    base = w1 * route.travel + w2 * route.lateness
    best = None
    best_key = None
    for dtravel, i, j in cands:
        # lateness never drops when stops are added, so w1 * dtravel bounds the delta
        if best is not None and w1 * dtravel > best_key[0] + EPS:
            break
        stops = place(route, p, d, i, j)
        val = route_eval(inst, route.vehicle, stops)
        if val is None:
            continue
        delta = w1 * val[0] + w2 * val[1] - base
        pi, dj = i, j + 1
        if (best is None or delta < best_key[0] - EPS
                or (abs(delta - best_key[0]) <= EPS and (pi, dj) < best_key[1])):
            best = (stops, val)
            best_key = (delta, (pi, dj))
    if best is None:
        return None
    stops, val = best
    return Insertion(Route(route.vehicle, stops, val[0], val[1]), best_key[1][0],
                     best_key[1][1], best_key[0])


def feasible_insertions(inst: Instance, route: Route, request: int):
    """Every feasible placement as ``(Route, pickup_pos, delivery_pos)``."""
    req = inst.requests[request]
    out = []
    for _, i, j in sorted(insertion_candidates(inst, route, request), key=lambda c: (c[1], c[2])):
        stops = place(route, req.pickup, req.delivery, i, j)
        val = route_eval(inst, route.vehicle, stops)
        if val is not None:
            out.append((Route(route.vehicle, stops, val[0], val[1]), i, j + 1))
    return out
