"""Command-line entry point: ``darpdp <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import io as dio
from .engine import run_eils
from .exact import ExactLimits, NoFeasibleSolution, OverLimit, brute_force_solve, export_milp
from .model import SolverParams, validate_instance
from .schedule import check_feasibility

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_OVER_CAP = 0, 1, 2, 3
OUT_ENV = "DARPDP_OUT"

log = logging.getLogger("darpdp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors exit with 1; 2 is reserved for infeasible instances
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# (flag, SolverParams field, type)
PARAM_FLAGS = (
    ("--w1", "w1", float), ("--w2", "w2", float), ("--alpha", "alpha", float),
    ("--beta1", "beta1", float), ("--beta2", "beta2", float), ("--gamma", "gamma", float),
    ("--size-n", "size_n", int), ("--size-e", "size_e", int), ("--alpha-t", "alpha_t", float),
    ("--t-min", "t_min", float), ("--t-max", "t_max", float), ("--cpu-max", "cpu_max", float),
    ("--iter-max", "iter_max", int), ("--iter-budget", "iter_budget", int),
    ("--removal-fraction", "removal_fraction", float),
)


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "out")


def _add_params(p):
    g = p.add_argument_group("solver parameters")
    for flag, name, typ in PARAM_FLAGS:
        g.add_argument(flag, dest=name, type=typ, default=None,
                       help=f"override {name} (default {getattr(SolverParams(), name)})")
    g.add_argument("--strict-perturb-parity", action="store_true",
                   help="perturb on every odd no-improvement count instead of once per even count")
    g.add_argument("--strict-cluster-mean", action="store_true",
                   help="average over all vertices when clustering")


def _params(args, seed=None) -> SolverParams:
    fields = {name: getattr(args, name) for _, name, _ in PARAM_FLAGS
              if getattr(args, name, None) is not None}
    fields["strict_perturb_parity"] = getattr(args, "strict_perturb_parity", False)
    fields["strict_cluster_mean"] = getattr(args, "strict_cluster_mean", False)
    if seed is not None:
        fields["rng_seed"] = seed
    try:
        return SolverParams(**fields)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid parameters: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="darpdp", description="Dial-a-ride with driver preferences: solver toolkit.")
    p.add_argument("--log-level", default="WARNING",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="logging verbosity")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="run E-ILS on instance files")
    s.add_argument("instances", nargs="+", help="instance JSON files")
    s.add_argument("--runs", type=int, default=1, help="seeded runs per instance (default 1)")
    s.add_argument("--seed", type=int, default=0, help="first seed; run i uses seed+i")
    s.add_argument("--jobs", type=int, default=1, help="replicas run in parallel processes")
    s.add_argument("--trace", action="store_true", help="write a per-iteration trace CSV")
    s.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./out)")
    _add_params(s)

    b = sub.add_parser("bench", help="solve several instances and print the results table")
    b.add_argument("instances", nargs="+", help="instance JSON files")
    b.add_argument("--runs", type=int, default=10, help="seeded runs per instance (default 10)")
    b.add_argument("--seed", type=int, default=0, help="first seed; run i uses seed+i")
    b.add_argument("--jobs", type=int, default=1, help="replicas run in parallel processes")
    b.add_argument("--baseline", default=None, help="CSV with columns instance,best for gaps")
    b.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./out)")
    _add_params(b)

    g = sub.add_parser("generate", help="build benchmark instances from trip data")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--trips", help="trip CSV with the taxi-trip columns")
    src.add_argument("--synthetic", type=int, metavar="COUNT",
                     help="use COUNT synthetic trips instead of a trip file")
    g.add_argument("--zones", help="zone centroid CSV (LocationID,x,y); needed with --trips")
    g.add_argument("--seed", type=int, default=0, help="generator seed")
    g.add_argument("--sizes", default=",".join(map(str, dio.SIZES)),
                   help="comma-separated request counts")
    g.add_argument("--types", default="a,b", help="a (5-minute windows), b (10-minute), or both")
    g.add_argument("--fleet", default="floor,ceil", help="fleet rule(s): floor, ceil")
    g.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./out)")

    e = sub.add_parser("export-lp", help="write the MILP model in LP format")
    e.add_argument("instance", help="instance JSON file")
    e.add_argument("--output", "-o", default=None, help="LP file (default: stdout)")
    e.add_argument("--no-duration-row", action="store_true", help="omit the route duration rows")
    e.add_argument("--w1", type=float, default=None, help="travel weight")
    e.add_argument("--w2", type=float, default=None, help="lateness weight")

    o = sub.add_parser("oracle", help="solve a tiny instance exactly by enumeration")
    o.add_argument("instance", help="instance JSON file")
    o.add_argument("--max-requests", type=int, default=ExactLimits.max_requests,
                   help="refuse instances with more requests")
    o.add_argument("--max-vehicles", type=int, default=ExactLimits.max_vehicles,
                   help="refuse instances with more vehicles")
    o.add_argument("--output", "-o", default=None, help="write the optimal solution JSON here")

    k = sub.add_parser("kpi", help="coverage, empty driving and excess ride time of a solution")
    k.add_argument("instance", help="instance JSON file")
    k.add_argument("solution", help="solution JSON file")
    k.add_argument("--strict", action="store_true", help="sum vehicle shares; divide by all requests")

    c = sub.add_parser("check", help="validate an instance and optionally a solution")
    c.add_argument("instance", help="instance JSON file")
    c.add_argument("solution", nargs="?", default=None, help="solution JSON file")
    return p


# ---------------------------------------------------------------------------


def _solve_one(job):
    path, params, trace = job
    inst = dio.read_instance(path)
    sol, stats = run_eils(inst, params, trace_path=trace)
    return path, sol, stats, dio.write_solution(inst, sol, params)


def _check_counts(args):
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    _params(args)


def _run_many(args, out: Path, trace: bool):
    jobs = []
    insts = {}
    for path in args.instances:
        inst = dio.read_instance(path)
        insts[path] = inst
        for i in range(args.runs):
            seed = args.seed + i
            tr = str(out / f"{inst.name}_seed{seed}.trace.csv") if trace else None
            jobs.append((path, _params(args, seed), tr))
    if args.jobs == 1:
        results = [_solve_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_solve_one, jobs))
    return insts, results


def cmd_solve(args) -> int:
    _check_counts(args)
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    insts, results = _run_many(args, out, args.trace)
    status = EXIT_OK
    best = {}
    for path, sol, stats, text in results:
        inst = insts[path]
        (out / f"{inst.name}_seed{stats.seed}.solution.json").write_text(text)
        (out / f"{inst.name}_seed{stats.seed}.stats.json").write_text(stats.to_json() + "\n")
        if path not in best or sol.weighted < best[path][0].weighted:
            best[path] = (sol, text)
    for path, (sol, text) in best.items():
        inst = insts[path]
        (out / f"{inst.name}.best.json").write_text(text)
        problems = check_feasibility(inst, sol)
        print(f"{inst.name}: best {sol.weighted:.4f} served {sol.served}/{inst.n}"
              + ("" if not problems else "  INFEASIBLE: " + "; ".join(problems)))
        if problems:
            status = EXIT_INFEASIBLE
    (out / "results.csv").write_text(dio.results_table([r[2] for r in results]))
    return status


def _read_baseline(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"instance", "best"} <= set(reader.fieldnames):
            raise UsageError("baseline CSV needs the columns instance,best")
        return {row["instance"]: float(row["best"]) for row in reader}


def cmd_bench(args) -> int:
    _check_counts(args)
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    baseline = _read_baseline(args.baseline) if args.baseline else None
    _, results = _run_many(args, out, False)
    try:
        table = dio.results_table([r[2] for r in results], baseline)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    (out / "results.csv").write_text(table)
    sys.stdout.write(table)
    return EXIT_OK


def cmd_generate(args) -> int:
    out = Path(args.out or _default_out())
    if args.trips:
        if not args.zones:
            raise UsageError("--zones is required with --trips")
        trips = dio.read_trips(Path(args.trips), Path(args.zones))
    else:
        trip_text, zone_text = dio.synthetic_trips(args.synthetic, args.seed)
        trips = dio.read_trips(trip_text, zone_text)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad --sizes {args.sizes!r}") from None
    widths = {"a": 5.0, "b": 10.0}
    types = [t.strip() for t in args.types.split(",") if t.strip()]
    rules = [r.strip() for r in args.fleet.split(",") if r.strip()]
    if any(t not in widths for t in types) or any(r not in ("floor", "ceil") for r in rules):
        raise UsageError("--types takes a,b and --fleet takes floor,ceil")
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for t in types:
        for rule in rules:
            for inst in dio.generate_instances(trips, sizes, dio.Scenario(widths[t], rule),
                                               args.seed):
                (out / f"{inst.name}.json").write_text(dio.write_instance(inst))
                count += 1
    print(f"wrote {count} instances to {out}")
    return EXIT_OK


def cmd_export_lp(args) -> int:
    inst = dio.read_instance(args.instance)
    over = {k: v for k, v in (("w1", args.w1), ("w2", args.w2)) if v is not None}
    try:
        params = SolverParams(**over)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = export_milp(inst, params, duration_row=not args.no_duration_row)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = dio.read_instance(args.instance)
    try:
        res = brute_force_solve(inst, ExactLimits(args.max_requests, args.max_vehicles))
    except OverLimit as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_OVER_CAP
    except NoFeasibleSolution as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"{inst.name}: optimum {res.optimum.weighted:.6f} (travel {res.optimum.travel:.6f}, "
          f"lateness {res.optimum.lateness_total:.6f}, served {res.optimum.served}/{inst.n}), "
          f"proven={res.proven}, nodes={res.nodes_explored}")
    if args.output:
        Path(args.output).write_text(dio.write_solution(inst, res.solution))
    return EXIT_OK


def cmd_kpi(args) -> int:
    inst = dio.read_instance(args.instance)
    sol = dio.parse_solution(Path(args.solution).read_text(), inst)
    rep = dio.compute_kpis(inst, sol, strict=args.strict)
    print(f"kpi1={rep.kpi1:.4f} kpi2={rep.kpi2:.4f} kpi3={rep.kpi3:.4f}")
    return EXIT_OK


def cmd_check(args) -> int:
    text = Path(args.instance).read_text()
    try:
        inst = dio.parse_instance(text)
    except dio.FormatError as exc:
        print(exc)
        return EXIT_INFEASIBLE
    problems = validate_instance(inst)
    if args.solution:
        try:
            sol = dio.parse_solution(Path(args.solution).read_text(), inst)
        except dio.FormatError as exc:
            problems.append(str(exc))
        else:
            problems += check_feasibility(inst, sol)
    for line in problems:
        print(line)
    if not problems:
        print("ok")
    return EXIT_INFEASIBLE if problems else EXIT_OK


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "generate": cmd_generate,
            "export-lp": cmd_export_lp, "oracle": cmd_oracle, "kpi": cmd_kpi, "check": cmd_check}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"darpdp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (dio.FormatError, FileNotFoundError) as exc:
        print(f"darpdp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

