"""Cluster-first, route-second initial solution."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .model import Instance, SolverParams
from .schedule import DEFAULT_PARAMS, build_solution, empty_solution, try_insert


@dataclass
class ClusterAssignment:
    per_vehicle_lists: list            # L_k: request ids per vehicle
    multi_cluster: list                # (request id, candidate vehicle ids)
    unassigned: list = field(default_factory=list)


def point_segment_distance(p, a, b) -> float:
    """Euclidean distance from ``p`` to the closed segment ``[a, b]``."""
    px, py = p
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.hypot(px - ax, py - ay)
    u = ((px - ax) * dx + (py - ay) * dy) / seg2
    u = min(1.0, max(0.0, u))
    return math.hypot(px - (ax + u * dx), py - (ay + u * dy))


def cluster_requests(inst: Instance, strict_mean: bool = False) -> ClusterAssignment:
    """Assign requests to the drivers whose origin-destination segment passes close by.

    A request joins vehicle k's list when both its pickup and its delivery
    lie strictly closer to the segment than the mean vertex distance. By
    default the mean runs over request vertices only; ``strict_mean`` also
    counts the driver endpoints.
    """
    V = inst.vertices
    lists = []
    for veh in inst.vehicles:
        a = (V[veh.origin].x, V[veh.origin].y)
        b = (V[veh.destination].x, V[veh.destination].y)
        d = [point_segment_distance((v.x, v.y), a, b) for v in V]
        if strict_mean:
            pool = d
        else:
            pool = [d[v] for r in inst.requests for v in (r.pickup, r.delivery)]
        mean = sum(pool) / len(pool) if pool else 0.0
        lists.append([r.id for r in inst.requests
                      if d[r.pickup] < mean and d[r.delivery] < mean])

    members = {}
    for k, lst in enumerate(lists):
        for r in lst:
            members.setdefault(r, []).append(k)
    multi = [(r, ks) for r, ks in sorted(members.items()) if len(ks) >= 2]
    shared = {r for r, _ in multi}
    per_vehicle = [[r for r in lst if r not in shared] for lst in lists]
    unassigned = [r.id for r in inst.requests if r.id not in members]
    return ClusterAssignment(per_vehicle, multi, unassigned)


def sort_key(inst: Instance, r: int) -> float:
    """Upper bound on the pickup start: min(l_p, l_d - t_pd - s_d)."""
    req = inst.requests[r]
    vp, vd = inst.vertices[req.pickup], inst.vertices[req.delivery]
    return min(vp.latest, vd.latest - inst.tt[req.pickup][req.delivery] - vd.service)


def build_initial(inst: Instance, params: SolverParams = DEFAULT_PARAMS):
    """Initial solution by sequential then parallel best insertion.

    Requests left out of every cluster, or whose insertion fails, go to the
    rejection pool.
    """
    clusters = cluster_requests(inst, params.strict_cluster_mean)
    base = empty_solution(inst, params)
    routes = list(base.routes)
    rejected = set(clusters.unassigned)

    for k, lst in enumerate(clusters.per_vehicle_lists):
        for r in sorted(lst, key=lambda r: (sort_key(inst, r), r)):
            ins = try_insert(inst, routes[k], r, params)
            if ins is None:
                rejected.add(r)
            else:
                routes[k] = ins.route

    for r, ks in sorted(clusters.multi_cluster, key=lambda rk: (sort_key(inst, rk[0]), rk[0])):
        best = None
        for k in sorted(ks):
            ins = try_insert(inst, routes[k], r, params)
            if ins is not None and (best is None or ins.delta < best.delta - 1e-9):
                best = ins
        if best is None:
            rejected.add(r)
        else:
            routes[best.route.vehicle] = best.route

    return build_solution(inst, params, routes, rejected)
