"""Problem data for the dial-a-ride problem with driver preferences.

Vertex layout (0-based) for an instance with ``m`` vehicles and ``n`` requests::

    0 .. m-1              vehicle origins        (s_k = k)
    m .. m+n-1            pickups                (request r -> m + r)
    m+n .. m+2n-1         deliveries             (pickup + n)
    m+2n .. 2m+2n-1       vehicle destinations   (t_k = m + 2n + k)

Times are minutes from midnight, coordinates are miles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional


DEFAULT_TIME_FACTOR = 2.0  # minutes per mile (30 mph)
DEFAULT_DEST_TOLERANCE = 5.0


@dataclass(frozen=True)
class Vertex:
    id: int
    x: float
    y: float
    earliest: float
    latest: float
    service: float = 0.0
    load_delta: int = 0


@dataclass(frozen=True)
class Request:
    id: int
    pickup: int
    delivery: int
    demand: int = 1


@dataclass(frozen=True)
class Vehicle:
    id: int
    origin: int
    destination: int
    capacity: int = 3
    dest_tolerance: float = DEFAULT_DEST_TOLERANCE


@dataclass(frozen=True, eq=False)
class Instance:
    name: str
    vertices: tuple
    requests: tuple
    vehicles: tuple
    max_route_duration: float = 90.0
    max_ride_time: float = 30.0
    time_factor: float = DEFAULT_TIME_FACTOR
    served_fraction_min: float = 0.8

    # derived lookups, filled in __post_init__
    dist: list = field(init=False, repr=False)
    tt: list = field(init=False, repr=False)
    request_at: list = field(init=False, repr=False)
    route_cache: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "requests", tuple(self.requests))
        object.__setattr__(self, "vehicles", tuple(self.vehicles))
        pts = [(v.x, v.y) for v in self.vertices]
        dist = [[math.hypot(xa - xb, ya - yb) for (xb, yb) in pts] for (xa, ya) in pts]
        tf = self.time_factor
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "tt", [[d * tf for d in row] for row in dist])
        request_at = [-1] * len(self.vertices)
        for r in self.requests:
            for v in (r.pickup, r.delivery):
                if 0 <= v < len(request_at):
                    request_at[v] = r.id
        object.__setattr__(self, "request_at", request_at)
        object.__setattr__(self, "route_cache", {})

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.name, self.vertices, self.requests, self.vehicles,
                self.max_route_duration, self.max_ride_time, self.time_factor,
                self.served_fraction_min) == (
                other.name, other.vertices, other.requests, other.vehicles,
                other.max_route_duration, other.max_ride_time, other.time_factor,
                other.served_fraction_min)

    __hash__ = object.__hash__

    @property
    def n(self) -> int:
        return len(self.requests)

    @property
    def m(self) -> int:
        return len(self.vehicles)

    @property
    def min_served(self) -> int:
        """Smallest number of served requests allowed by the epsilon-constraint."""
        # guard against 0.8 * n landing a hair above an integer
        return max(0, math.ceil(self.served_fraction_min * self.n - 1e-9))

    def is_pickup(self, v: int) -> bool:
        r = self.request_at[v]
        return r >= 0 and self.requests[r].pickup == v


@dataclass(frozen=True)
class SolverParams:
    """E-ILS settings. Defaults are the reference tuning."""

    w1: float = 40.0
    w2: float = 60.0
    alpha: float = 0.1
    beta1: float = 5.0
    beta2: float = 1.0
    gamma: float = 0.9
    size_n: int = 3
    size_e: int = 1
    alpha_t: float = 0.99
    t_min: Optional[float] = None  # None -> m/2
    t_max: Optional[float] = None  # None -> n/2
    cpu_max: Optional[float] = None  # None -> size class budget
    iter_max: int = 10
    iter_budget: Optional[int] = None
    rng_seed: int = 0
    removal_fraction: float = 0.15
    # perturb on every odd no-improvement count instead of once per even count
    strict_perturb_parity: bool = False
    # average over every vertex (driver endpoints included) when clustering
    strict_cluster_mean: bool = False

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0 < self.alpha_t < 1:
            raise ValueError(f"alpha_t must lie in (0, 1), got {self.alpha_t}")
        if self.w1 <= 0 or self.w2 <= 0:
            raise ValueError("objective weights must be positive")
        if self.size_e < 1:
            raise ValueError("size_e must be >= 1")
        if self.size_n < 1:
            raise ValueError("size_n must be >= 1")
        if self.iter_max < 0:
            raise ValueError("iter_max must be >= 0")
        if self.cpu_max is not None and self.cpu_max <= 0:
            raise ValueError("cpu_max must be positive")
        if self.iter_budget is not None and self.iter_budget < 0:
            raise ValueError("iter_budget must be >= 0")

    def temperatures(self, inst: Instance) -> tuple[float, float]:
        t_max = self.t_max if self.t_max is not None else inst.n / 2
        t_min = self.t_min if self.t_min is not None else inst.m / 2
        if t_min >= t_max:
            t_min = t_max / 2
        return t_min, t_max

    def time_budget(self, inst: Instance) -> float:
        if self.cpu_max is not None:
            return self.cpu_max
        if inst.n <= 15:
            return 300.0
        if inst.n <= 50:
            return 900.0
        return 1200.0


def travel_time(inst: Instance, i: int, j: int) -> float:
    _check_ids(inst, i, j)
    return inst.tt[i][j]


def distance_miles(inst: Instance, i: int, j: int) -> float:
    _check_ids(inst, i, j)
    return inst.dist[i][j]


def _check_ids(inst, *ids):
    nv = len(inst.vertices)
    for v in ids:
        if not (isinstance(v, int) and 0 <= v < nv):
            raise KeyError(f"unknown vertex id {v!r}")


def validate_instance(inst: Instance) -> list[str]:
    """Return every violated structural invariant; an empty list means valid."""
    problems = []
    m, n = inst.m, inst.n
    nv = len(inst.vertices)
    if nv != 2 * m + 2 * n:
        problems.append(f"expected {2 * m + 2 * n} vertices for m={m}, n={n}, got {nv}")
    for pos, v in enumerate(inst.vertices):
        if v.id != pos:
            problems.append(f"vertex at position {pos} has id {v.id}")
        if v.earliest > v.latest:
            problems.append(f"earliest > latest at vertex {v.id} ({v.earliest} > {v.latest})")
        if v.service < 0:
            problems.append(f"negative service time at vertex {v.id}")
    if inst.time_factor <= 0:
        problems.append("time_factor must be positive")
    if not 0 < inst.served_fraction_min <= 1:
        problems.append("served_fraction_min must lie in (0, 1]")
    if inst.max_ride_time < 0 or inst.max_route_duration < 0:
        problems.append("negative ride time or route duration limit")

    def known(v):
        return isinstance(v, int) and 0 <= v < nv

    for pos, r in enumerate(inst.requests):
        if r.id != pos:
            problems.append(f"request at position {pos} has id {r.id}")
        if r.demand < 1:
            problems.append(f"request {r.id} has demand {r.demand} < 1")
        if r.pickup == r.delivery:
            problems.append(f"request {r.id} has pickup == delivery")
        if not (known(r.pickup) and known(r.delivery)):
            problems.append(f"request {r.id} references an unknown vertex")
            continue
        if r.pickup != m + pos:
            problems.append(f"pairing violation: request {r.id} pickup {r.pickup} != {m + pos}")
        if r.delivery != r.pickup + n:
            problems.append(
                f"pairing violation: request {r.id} delivery {r.delivery} != pickup + n = {r.pickup + n}")
        qp = inst.vertices[r.pickup].load_delta
        qd = inst.vertices[r.delivery].load_delta
        if qp != r.demand or qd != -r.demand:
            problems.append(f"load deltas of request {r.id} are ({qp}, {qd}), expected "
                            f"({r.demand}, {-r.demand})")
    for pos, k in enumerate(inst.vehicles):
        if k.id != pos:
            problems.append(f"vehicle at position {pos} has id {k.id}")
        if k.capacity < 1:
            problems.append(f"vehicle {k.id} has capacity {k.capacity} < 1")
        if k.dest_tolerance < 0:
            problems.append(f"vehicle {k.id} has negative destination tolerance")
        if not (known(k.origin) and known(k.destination)):
            problems.append(f"vehicle {k.id} references an unknown vertex")
            continue
        if k.origin != pos or k.destination != m + 2 * n + pos:
            problems.append(f"vehicle {k.id} endpoints ({k.origin}, {k.destination}) break the layout")
        for v in (k.origin, k.destination):
            vx = inst.vertices[v]
            if vx.service != 0 or vx.load_delta != 0:
                problems.append(f"vehicle endpoint {v} must have zero service and load")
    return problems


def build_instance(name, origins, destinations, pickups, deliveries, *, capacity=3,
                   dest_tolerance=DEFAULT_DEST_TOLERANCE, demand=1, service=0.5,
                   max_route_duration=90.0, max_ride_time=30.0,
                   time_factor=DEFAULT_TIME_FACTOR, served_fraction_min=0.8) -> Instance:
    """Assemble an instance in the canonical layout.

    ``origins``/``destinations`` hold one ``(x, y, earliest, latest)`` per
    vehicle, ``pickups``/``deliveries`` one per request.
    """
    m, n = len(origins), len(pickups)
    if len(destinations) != m or len(deliveries) != n:
        raise ValueError("origins/destinations and pickups/deliveries must pair up")
    vertices = []
    for group, svc, q in ((origins, 0.0, 0), (pickups, service, demand),
                          (deliveries, service, -demand), (destinations, 0.0, 0)):
        for (x, y, e, l) in group:
            vertices.append(Vertex(len(vertices), float(x), float(y), float(e), float(l),
                                   float(svc), q))
    requests = [Request(r, m + r, m + n + r, demand) for r in range(n)]
    vehicles = [Vehicle(k, k, m + 2 * n + k, capacity, dest_tolerance) for k in range(m)]
    return Instance(name, vertices, requests, vehicles, max_route_duration, max_ride_time,
                    time_factor, served_fraction_min)
