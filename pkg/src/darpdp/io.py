"""File formats, the taxi-trip benchmark generator and KPI reporting."""
from __future__ import annotations

import csv
import io as _io
import json
import math
import random
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import jsonschema
import numpy as np

from .model import Instance, Request, SolverParams, Vehicle, Vertex, build_instance, validate_instance
from .schedule import (DEFAULT_PARAMS, InfeasibleRoute, Route, Solution, build_solution,
                       schedule_route)

# ---------------------------------------------------------------------------
# instance JSON

INSTANCE_FORMAT = "darpdp-instance"
SOLUTION_FORMAT = "darpdp-solution"

_num = {"type": "number"}
_int = {"type": "integer"}


def _obj(props: dict) -> dict:
    return {"type": "object", "properties": props, "required": list(props),
            "additionalProperties": False}


INSTANCE_SCHEMA = _obj({
    "format": {"const": INSTANCE_FORMAT},
    "version": {"const": 1},
    "name": {"type": "string"},
    "time_factor": {"type": "number", "exclusiveMinimum": 0},
    "max_route_duration": {"type": "number", "minimum": 0},
    "max_ride_time": {"type": "number", "minimum": 0},
    "served_fraction_min": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    "vertices": {"type": "array", "items": _obj({
        "id": _int, "x": _num, "y": _num, "earliest": _num, "latest": _num,
        "service": {"type": "number", "minimum": 0}, "load_delta": _int})},
    "requests": {"type": "array", "items": _obj({
        "id": _int, "pickup": _int, "delivery": _int, "demand": {"type": "integer", "minimum": 1}})},
    "vehicles": {"type": "array", "items": _obj({
        "id": _int, "origin": _int, "destination": _int,
        "capacity": {"type": "integer", "minimum": 1},
        "dest_tolerance": {"type": "number", "minimum": 0}})},
})


class FormatError(ValueError):
    """A document does not match its schema or its instance."""


def _load_json(text: str, schema: dict, what: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{what}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                          f"{exc.msg}") from None
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for err in errors:
            where = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}"
                                  for p in err.absolute_path)
            msg = err.message
            if err.validator == "required":
                missing = [f for f in err.validator_value if f not in err.instance]
                msg = "missing field " + ", ".join(repr(f) for f in missing)
            msgs.append(f"{where}: {msg}")
        raise FormatError(f"{what}: " + "; ".join(msgs))
    return doc


def write_instance(inst: Instance) -> str:
    doc = {
        "format": INSTANCE_FORMAT,
        "version": 1,
        "name": inst.name,
        "time_factor": inst.time_factor,
        "max_route_duration": inst.max_route_duration,
        "max_ride_time": inst.max_ride_time,
        "served_fraction_min": inst.served_fraction_min,
        "vertices": [{"id": v.id, "x": v.x, "y": v.y, "earliest": v.earliest, "latest": v.latest,
                      "service": v.service, "load_delta": v.load_delta} for v in inst.vertices],
        "requests": [{"id": r.id, "pickup": r.pickup, "delivery": r.delivery, "demand": r.demand}
                     for r in inst.requests],
        "vehicles": [{"id": k.id, "origin": k.origin, "destination": k.destination,
                      "capacity": k.capacity, "dest_tolerance": k.dest_tolerance}
                     for k in inst.vehicles],
    }
    return json.dumps(doc, indent=1) + "\n"


def parse_instance(text: str) -> Instance:
    """Parse and validate an instance document (schema v1)."""
    doc = _load_json(text, INSTANCE_SCHEMA, "instance")
    inst = Instance(
        doc["name"],
        [Vertex(v["id"], float(v["x"]), float(v["y"]), float(v["earliest"]), float(v["latest"]),
                float(v["service"]), v["load_delta"]) for v in doc["vertices"]],
        [Request(r["id"], r["pickup"], r["delivery"], r["demand"]) for r in doc["requests"]],
        [Vehicle(k["id"], k["origin"], k["destination"], k["capacity"],
                 float(k["dest_tolerance"])) for k in doc["vehicles"]],
        float(doc["max_route_duration"]), float(doc["max_ride_time"]),
        float(doc["time_factor"]), float(doc["served_fraction_min"]))
    problems = validate_instance(inst)
    if problems:
        raise FormatError("instance: " + "; ".join(problems))
    return inst


def read_instance(path) -> Instance:
    return parse_instance(Path(path).read_text())


# ---------------------------------------------------------------------------
# solution JSON

SOLUTION_SCHEMA = _obj({
    "format": {"const": SOLUTION_FORMAT},
    "version": {"const": 1},
    "instance": {"type": "string"},
    "weights": _obj({"w1": _num, "w2": _num}),
    "routes": {"type": "array", "items": _obj({
        "vehicle": _int,
        "stops": {"type": "array", "items": _int},
        "start_times": {"type": "array", "items": _num},
        "loads": {"type": "array", "items": _int}})},
    "rejected": {"type": "array", "items": _int},
    "cost": _obj({"travel": _num, "lateness": _num, "weighted": _num, "served": _int}),
})

COST_TOL = 1e-6


def write_solution(inst: Instance, sol: Solution, params: SolverParams = DEFAULT_PARAMS) -> str:
    routes = []
    for route in sol.routes:
        sched = schedule_route(inst, route)
        routes.append({"vehicle": route.vehicle, "stops": list(route.stops),
                       "start_times": list(sched.start_times), "loads": list(sched.loads)})
    doc = {
        "format": SOLUTION_FORMAT,
        "version": 1,
        "instance": inst.name,
        "weights": {"w1": params.w1, "w2": params.w2},
        "routes": routes,
        "rejected": sorted(sol.rejected),
        "cost": {"travel": sol.cost.travel, "lateness": sol.cost.lateness_total,
                 "weighted": sol.cost.weighted, "served": sol.cost.served},
    }
    return json.dumps(doc, indent=1) + "\n"


def parse_solution(text: str, inst: Instance) -> Solution:
    """Parse a solution and re-check it against ``inst``.

    Stops must be known vertices, every route must schedule, the stored
    start times and loads must equal the recomputed schedule and the stored
    cost must match within 1e-6.
    """
    doc = _load_json(text, SOLUTION_SCHEMA, "solution")
    params = SolverParams(w1=doc["weights"]["w1"], w2=doc["weights"]["w2"])
    if len(doc["routes"]) != inst.m:
        raise FormatError(f"solution: {len(doc['routes'])} routes for {inst.m} vehicles")
    nv = len(inst.vertices)
    routes = []
    for k, r in enumerate(doc["routes"]):
        if r["vehicle"] != k:
            raise FormatError(f"solution: route {k} is labelled vehicle {r['vehicle']}")
        bad = [v for v in r["stops"] if not 0 <= v < nv]
        if bad:
            raise FormatError(f"solution: route {k} references unknown vertex {bad[0]}")
        try:
            sched = schedule_route(inst, (k, tuple(r["stops"])))
        except InfeasibleRoute as exc:
            raise FormatError(f"solution: route {k} is infeasible ({exc})") from None
        if len(r["start_times"]) != len(r["stops"]) or any(
                abs(a - b) > COST_TOL for a, b in zip(r["start_times"], sched.start_times)):
            raise FormatError(f"solution: start times of route {k} do not match its schedule")
        if list(r["loads"]) != list(sched.loads):
            raise FormatError(f"solution: loads of route {k} do not match its stops")
        routes.append(Route(k, tuple(r["stops"]), sched.travel, sched.lateness))
    rejected = set(doc["rejected"])
    served = {inst.request_at[v] for route in routes for v in route.stops[1:-1]}
    if rejected & served or len(rejected | served) != inst.n or any(
            not 0 <= r < inst.n for r in rejected):
        raise FormatError("solution: rejected set does not complement the served requests")
    sol = build_solution(inst, params, routes, rejected)
    c = doc["cost"]
    for field, mine in (("travel", sol.cost.travel), ("lateness", sol.cost.lateness_total),
                        ("weighted", sol.cost.weighted)):
        if abs(c[field] - mine) > COST_TOL:
            raise FormatError(f"solution: cost mismatch on {field}: stored {c[field]!r}, "
                              f"recomputed {mine!r}")
    if c["served"] != sol.cost.served:
        raise FormatError("solution: served count mismatch")
    return sol


# ---------------------------------------------------------------------------
# trip data and the benchmark generator

HORIZON = (490.0, 610.0)
TRIP_COLUMNS = ("PULocationID", "DOLocationID", "tpep_pickup_datetime", "tpep_dropoff_datetime",
                "trip_distance")
ZONE_COLUMNS = ("LocationID", "x", "y")
SIZES = (10, 15, 20, 30, 50, 100, 200)


@dataclass(frozen=True)
class TripRecord:
    pickup_location_id: int
    dropoff_location_id: int
    pickup_datetime: datetime
    dropoff_datetime: datetime
    trip_distance: float
    pickup_xy: tuple
    dropoff_xy: tuple

    @property
    def pickup_minute(self) -> float:
        return _minute(self.pickup_datetime)

    @property
    def dropoff_minute(self) -> float:
        return _minute(self.dropoff_datetime)


def _minute(ts: datetime) -> float:
    return ts.hour * 60 + ts.minute + ts.second / 60


@dataclass(frozen=True)
class Scenario:
    tw_width: float = 5.0           # 5 -> type a, 10 -> type b
    fleet_rule: str = "floor"       # floor or ceil of n / 9
    horizon: tuple = HORIZON
    driver_dest_earliest_range: tuple = (550.0, 595.0)
    driver_dest_width: float = 15.0

    def __post_init__(self):
        if self.fleet_rule not in ("floor", "ceil"):
            raise ValueError(f"fleet_rule must be 'floor' or 'ceil', got {self.fleet_rule!r}")
        if self.tw_width <= 0:
            raise ValueError("tw_width must be positive")

    @property
    def letter(self) -> str:
        return {5.0: "a", 10.0: "b"}.get(float(self.tw_width), f"w{self.tw_width:g}")

    def fleet_size(self, n: int) -> int:
        if self.fleet_rule == "floor":
            return max(1, n // 9)
        return max(1, math.ceil(n / 9))


SCENARIOS = tuple(Scenario(w, rule) for w in (5.0, 10.0) for rule in ("floor", "ceil"))


def _check_columns(header, needed, what):
    missing = [c for c in needed if c not in (header or ())]
    if missing:
        raise FormatError(f"{what}: missing column(s) {', '.join(missing)}")


def read_zones(path_or_text) -> dict:
    text = _text(path_or_text)
    reader = csv.DictReader(_io.StringIO(text))
    _check_columns(reader.fieldnames, ZONE_COLUMNS, "zone CSV")
    return {int(row["LocationID"]): (float(row["x"]), float(row["y"])) for row in reader}


def read_trips(trip_csv, zones) -> list[TripRecord]:
    """Trip records joined to zone centroids; rows that cannot be resolved are dropped."""
    if not isinstance(zones, dict):
        zones = read_zones(zones)
    reader = csv.DictReader(_io.StringIO(_text(trip_csv)))
    _check_columns(reader.fieldnames, TRIP_COLUMNS, "trip CSV")
    out = []
    for row in reader:
        try:
            pu, do = int(row["PULocationID"]), int(row["DOLocationID"])
            t0 = datetime.fromisoformat(row["tpep_pickup_datetime"].strip())
            t1 = datetime.fromisoformat(row["tpep_dropoff_datetime"].strip())
            dist = float(row["trip_distance"])
        except (TypeError, ValueError):
            continue
        if pu not in zones or do not in zones or t1 < t0:
            continue
        out.append(TripRecord(pu, do, t0, t1, dist, zones[pu], zones[do]))
    return out


def _text(path_or_text) -> str:
    if isinstance(path_or_text, Path):
        return path_or_text.read_text()
    if isinstance(path_or_text, str) and "\n" not in path_or_text and Path(path_or_text).exists():
        return Path(path_or_text).read_text()
    return path_or_text


def in_horizon(trips, horizon=HORIZON) -> list[TripRecord]:
    lo, hi = horizon
    return [t for t in trips if lo <= t.pickup_minute and t.dropoff_minute <= hi]


def _rng(seed: int, *keys) -> random.Random:
    state = np.random.SeedSequence([seed, *keys]).generate_state(1, dtype=np.uint64)[0]
    return random.Random(int(state))


def generate_instance(trips, n: int, scenario: Scenario, seed: int) -> Instance:
    pool = sorted(in_horizon(trips, scenario.horizon),
                  key=lambda t: (t.pickup_datetime, t.dropoff_datetime, t.pickup_location_id,
                                 t.dropoff_location_id, t.trip_distance))
    if len(pool) < n:
        raise ValueError(f"only {len(pool)} trips inside the horizon, {n} needed")
    rng = _rng(seed, n, int(scenario.tw_width * 1000), scenario.fleet_rule == "ceil")
    chosen = sorted(rng.sample(range(len(pool)), n))
    m = scenario.fleet_size(n)
    half = scenario.tw_width / 2
    pickups, deliveries = [], []
    for idx in chosen:
        t = pool[idx]
        cp, cd = t.pickup_minute, t.dropoff_minute
        pickups.append((*t.pickup_xy, cp - half, cp + half))
        deliveries.append((*t.dropoff_xy, cd - half, cd + half))
    lo, hi = scenario.horizon
    e_lo, e_hi = scenario.driver_dest_earliest_range
    origins, destinations = [], []
    for _ in range(m):
        o = pool[rng.randrange(len(pool))].pickup_xy
        d = pool[rng.randrange(len(pool))].dropoff_xy
        e = rng.uniform(e_lo, e_hi)
        origins.append((*o, lo, hi))
        destinations.append((*d, e, e + scenario.driver_dest_width))
    name = f"inst_{scenario.letter}{n}_{m}"
    return build_instance(name, origins, destinations, pickups, deliveries, capacity=3,
                          demand=1, service=0.5, max_route_duration=90.0, max_ride_time=30.0)


def generate_instances(trips, sizes, scenario: Scenario, seed: int) -> list[Instance]:
    """One instance per requested size under ``scenario``; deterministic in ``seed``."""
    return [generate_instance(trips, n, scenario, seed) for n in sizes]


def generate_suite(trips, seed: int, sizes=SIZES) -> list[Instance]:
    """The full benchmark: every size under all four scenarios (28 instances by default)."""
    out = []
    for sc in SCENARIOS:
        out.extend(generate_instances(trips, sizes, sc, seed))
    return out


def synthetic_trips(count: int, seed: int, zones: int = 60, side: float = 4.0,
                    window: tuple = (500, 545)):
    """Stand-in trip data in the taxi-trip column layout.

    Returns ``(trip_csv_text, zone_csv_text)``: ``zones`` centroids uniform in
    a ``side``-mile square and ``count`` trips picked up during ``window``
    (minutes), driven at 30 mph plus up to three minutes of slack.
    """
    rng = _rng(seed, 0xC5)
    cents = {z: (round(rng.uniform(0, side), 4), round(rng.uniform(0, side), 4))
             for z in range(1, zones + 1)}
    zbuf = _io.StringIO()
    w = csv.writer(zbuf, lineterminator="\n")
    w.writerow(ZONE_COLUMNS)
    for z, (x, y) in cents.items():
        w.writerow([z, x, y])
    tbuf = _io.StringIO()
    w = csv.writer(tbuf, lineterminator="\n")
    w.writerow(("VendorID",) + TRIP_COLUMNS)
    for _ in range(count):
        pu, do = rng.randint(1, zones), rng.randint(1, zones)
        (x0, y0), (x1, y1) = cents[pu], cents[do]
        dist = math.hypot(x1 - x0, y1 - y0)
        start = rng.randint(int(window[0]) * 60, int(window[1]) * 60)
        ride = int(round(dist * 2.0 * 60 + rng.uniform(0, 180)))
        t0, t1 = _stamp(start), _stamp(start + ride)
        w.writerow([1, pu, do, t0, t1, round(dist * 1.2, 2)])
    return tbuf.getvalue(), zbuf.getvalue()


def _stamp(seconds: int) -> str:
    h, rem = divmod(seconds, 3600)
    return f"2021-01-15 {h:02d}:{rem // 60:02d}:{rem % 60:02d}"


def random_instance(n: int, m: int, seed: int, *, side: float = 5.0,
                    served_fraction_min: float = 0.8) -> Instance:
    """Small random instance with loose windows, for tests and demos."""
    rng = _rng(seed, n, m, 0x7E)
    pickups, deliveries = [], []
    for _ in range(n):
        px, py = rng.uniform(0, side), rng.uniform(0, side)
        dx, dy = rng.uniform(0, side), rng.uniform(0, side)
        direct = 2.0 * math.hypot(dx - px, dy - py)
        e = rng.uniform(495, 540)
        w = rng.uniform(8, 20)
        pickups.append((px, py, e, e + w))
        de = e + 0.5 + direct
        deliveries.append((dx, dy, de, de + w + 10))
    origins, destinations = [], []
    for _ in range(m):
        origins.append((rng.uniform(0, side), rng.uniform(0, side), 480.0, 610.0))
        e = rng.uniform(555, 580)
        destinations.append((rng.uniform(0, side), rng.uniform(0, side), e, e + 15))
    return build_instance(f"rand_n{n}_m{m}_s{seed}", origins, destinations, pickups, deliveries,
                          served_fraction_min=served_fraction_min)


# ---------------------------------------------------------------------------
# published instances (best effort)


class UnsupportedFormat(ValueError):
    pass


def import_published(path) -> Instance:
    """Best-effort reader for the published benchmark files.

    Accepts this package's JSON format or a whitespace table in the common
    DARP layout: a header ``m 2n T_r Q T_M`` followed by one line per vertex
    ``id x y service load e l`` in origins, pickups, deliveries, destinations
    order. Anything else raises UnsupportedFormat with the reason.
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return parse_instance(text)
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    try:
        head = [float(v) for v in rows[0]]
        m, two_n = int(head[0]), int(head[1])
        t_r, cap, t_m = head[2], int(head[3]), head[4]
        body = [[float(v) for v in r[:7]] for r in rows[1:]]
    except (IndexError, ValueError) as exc:
        raise UnsupportedFormat(f"{path}: unrecognized layout ({exc})") from None
    if two_n % 2 or len(body) != 2 * m + two_n or any(len(r) < 7 for r in body):
        raise UnsupportedFormat(f"{path}: expected {2 * m + two_n} vertex rows with 7 fields")
    n = two_n // 2
    pts = [(r[1], r[2], r[5], r[6]) for r in body]
    svc = body[m][3] if n else 0.5
    inst = build_instance(Path(path).stem, pts[:m], pts[m + 2 * n:], pts[m:m + n],
                          pts[m + n:m + 2 * n], capacity=cap, service=svc,
                          max_route_duration=t_r, max_ride_time=t_m)
    problems = validate_instance(inst)
    if problems:
        raise UnsupportedFormat(f"{path}: " + "; ".join(problems))
    return inst


# ---------------------------------------------------------------------------
# KPIs and result tables


@dataclass(frozen=True)
class KpiReport:
    kpi1: float   # percent of requests served
    kpi2: float   # percent of route time driven empty
    kpi3: float   # mean excess ride time, minutes


def compute_kpis(inst: Instance, sol: Solution, strict: bool = False) -> KpiReport:
    """Coverage, empty-driving share and excess ride time of ``sol``.

    ``strict`` sums the per-vehicle empty shares instead of averaging them
    and divides the excess ride time by all requests instead of the served
    ones.
    """
    served = sol.served
    kpi1 = 100.0 * served / inst.n if inst.n else 100.0
    shares = []
    excess = 0.0
    V = inst.vertices
    for route in sol.routes:
        sched = schedule_route(inst, route)
        T, Q, stops = sched.start_times, sched.loads, sched.stops
        span = T[-1] - T[0]
        if span > 0:
            empty = sum(T[i + 1] - T[i] for i in range(len(stops) - 1) if Q[i] == 0)
            shares.append(100.0 * empty / span)
        at = {v: idx for idx, v in enumerate(stops)}
        for v in stops[1:-1]:
            if inst.is_pickup(v):
                d = inst.requests[inst.request_at[v]].delivery
                excess += T[at[d]] - (T[at[v]] + V[v].service) - inst.tt[v][d]
    if strict:
        kpi2 = sum(shares)
        kpi3 = excess / inst.n if inst.n else 0.0
    else:
        kpi2 = sum(shares) / len(shares) if shares else 0.0
        kpi3 = excess / served if served else 0.0
    return KpiReport(kpi1, kpi2, kpi3)


RESULTS_HEADER = ("instance", "best", "avg", "cpu_s", "gap_pct")


def results_table(runs, baseline: dict | None = None) -> str:
    """CSV summary per instance: best and mean cost, mean seconds and gap to ``baseline``.

    ``runs`` holds RunStats-like objects (``instance``, ``best_cost``,
    ``elapsed_s``). ``baseline`` maps instance names to a reference best; the
    gap is ``100 * (best - base) / base``.
    """
    groups = {}
    for r in runs:
        groups.setdefault(r.instance, []).append(r)
    if baseline is not None and set(baseline) != set(groups):
        raise ValueError("baseline and runs cover different instances: "
                         f"{sorted(set(baseline) ^ set(groups))}")
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for name in sorted(groups):
        costs = [r.best_cost for r in groups[name]]
        best = min(costs)
        avg = sum(costs) / len(costs)
        cpu = sum(r.elapsed_s for r in groups[name]) / len(costs)
        gap = ""
        if baseline is not None:
            base = baseline[name]
            gap = f"{100.0 * (best - base) / base:.4f}"
        w.writerow([name, f"{best:.6f}", f"{avg:.6f}", f"{cpu:.3f}", gap])
    return buf.getvalue()
