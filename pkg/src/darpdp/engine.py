"""The E-ILS main loop: local search, path relinking, SA acceptance and perturbation."""
from __future__ import annotations

import csv
import enum
import json
import logging
import math
import random
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .construct import build_initial
from .lns import InsertionKind, perturb, repair
from .model import Instance, SolverParams
from .neighborhoods import KINDS, learning_local_search
from .relink import EliteSet, path_relink, update_elite
from .schedule import DEFAULT_PARAMS, Solution, better, shortfall

log = logging.getLogger(__name__)

COMPONENTS = ("local_search", "relink", "acceptance", "perturbation")


class Acceptance(enum.Enum):
    ACCEPT_NEW = "AcceptNew"
    KEEP_CURRENT = "KeepCurrent"


def sa_accept(f_cur: float, f_new: float, T: float, rng) -> Acceptance:
    """Metropolis rule: improvements always pass, a worsening by d passes with probability exp(-d/T)."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    if f_new < f_cur:
        return Acceptance.ACCEPT_NEW
    if rng.random() < math.exp(-(f_new - f_cur) / T):
        return Acceptance.ACCEPT_NEW
    return Acceptance.KEEP_CURRENT


@dataclass
class RunStats:
    instance: str
    seed: int
    component_seeds: dict
    iterations: int = 0
    accepts: int = 0
    improvements: int = 0
    perturbations: int = 0
    initial_cost: float = 0.0
    best_cost: float = 0.0
    best_served: int = 0
    elapsed_s: float = 0.0
    stop_reason: str = ""
    best_trace: list = field(default_factory=list)     # (iteration, best cost, shortfall) per change
    score_history: list = field(default_factory=list)  # final operator probabilities per iteration
    timings: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def component_rngs(seed: int) -> tuple[dict, dict]:
    """Independent ``random.Random`` streams per component, all derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(len(COMPONENTS))
    seeds = {name: int(child.generate_state(1, dtype=np.uint64)[0])
             for name, child in zip(COMPONENTS, children)}
    return {name: random.Random(s) for name, s in seeds.items()}, seeds


def _perturb_due(no_improve: int, stalled: bool, strict: bool) -> bool:
    """Literal rule: every iteration with an odd counter. Default: whenever a
    non-improving iteration brings the counter to an even value."""
    if strict:
        return no_improve % 2 == 1
    return stalled and no_improve % 2 == 0


def run_eils(inst: Instance, params: SolverParams = DEFAULT_PARAMS,
             trace_path=None) -> tuple[Solution, RunStats]:
    """Solve ``inst``; returns the best solution found and run statistics.

    The loop stops after ``params.iter_budget`` iterations or ``cpu_max``
    wall-clock seconds, whichever comes first. With an iteration budget and
    no explicit ``cpu_max`` only the iteration count applies, which makes the
    run reproducible. ``trace_path`` receives one CSV row per iteration.
    """
    if inst.m == 0:
        raise ValueError("instance has no vehicles")
    start = time.perf_counter()
    if params.cpu_max is not None or params.iter_budget is None:
        limit = params.time_budget(inst)
    else:
        limit = math.inf
    t_min, t_max = params.temperatures(inst)
    rngs, seeds = component_rngs(params.rng_seed)
    stats = RunStats(inst.name, params.rng_seed, seeds,
                     timings={name: 0.0 for name in ("construction",) + COMPONENTS})

    sol = build_initial(inst, params)
    stats.timings["construction"] = time.perf_counter() - start
    stats.initial_cost = sol.weighted
    best = sol
    stats.best_trace.append((0, best.weighted, shortfall(inst, best)))

    if inst.n == 0:
        return _finish(stats, best, start, "no requests")
    if t_max <= 0:
        raise ValueError("maximum temperature must be positive")

    elite = update_elite(inst, EliteSet(params.size_e), sol)
    T = t_max
    no_improve = 0
    trace = _open_trace(trace_path)
    reason = "iteration budget"
    try:
        while True:
            if params.iter_budget is not None and stats.iterations >= params.iter_budget:
                break
            if time.perf_counter() - start >= limit:
                reason = "time budget"
                break
            stats.iterations += 1
            it = stats.iterations

            t = time.perf_counter()
            record = {}
            s1 = learning_local_search(inst, params, sol, best, rngs["local_search"], record=record)
            stats.score_history.append(list(record["scores"].probabilities))
            stats.timings["local_search"] += time.perf_counter() - t

            t = time.perf_counter()
            guide = rngs["relink"].choice(elite.solutions)
            s2 = path_relink(inst, params, s1, guide)
            stats.timings["relink"] += time.perf_counter() - t

            t = time.perf_counter()
            stalled = not better(inst, s2, sol)
            if not stalled:
                sol = s2
                stats.improvements += 1
            else:
                no_improve += 1
                if (shortfall(inst, s2) == shortfall(inst, sol)
                        and sa_accept(sol.weighted, s2.weighted, T, rngs["acceptance"])
                        is Acceptance.ACCEPT_NEW):
                    sol = s2
                    stats.accepts += 1
            # checked on its own: a perturbed current can hide a new best
            if better(inst, s2, best):
                best = s2
                stats.best_trace.append((it, best.weighted, shortfall(inst, best)))
            elite = update_elite(inst, elite, sol)
            stats.timings["acceptance"] += time.perf_counter() - t

            if _perturb_due(no_improve, stalled, params.strict_perturb_parity):
                t = time.perf_counter()
                prng = rngs["perturbation"]
                sol = perturb(inst, params, sol, prng)
                if shortfall(inst, sol) > 0:
                    sol = repair(inst, sol, InsertionKind.BEST, sol.rejected, prng, params)
                stats.perturbations += 1
                if better(inst, sol, best):
                    best = sol
                    stats.best_trace.append((it, best.weighted, shortfall(inst, best)))
                stats.timings["perturbation"] += time.perf_counter() - t

            T *= params.alpha_t
            if T <= t_min:
                T = t_max
            if trace is not None:
                trace[1].writerow([it, repr(sol.weighted), repr(best.weighted),
                                   shortfall(inst, best), repr(T)]
                                  + [repr(p) for p in record["scores"].probabilities])
    finally:
        if trace is not None:
            trace[0].close()
    return _finish(stats, best, start, reason)


def _open_trace(path):
    if path is None:
        return None
    fh = open(path, "w", newline="")
    w = csv.writer(fh)
    w.writerow(["iteration", "current_cost", "best_cost", "best_shortfall", "temperature"]
               + [f"p_{k.value}" for k in KINDS])
    return fh, w


def _finish(stats, best, start, reason):
    stats.best_cost = best.weighted
    stats.best_served = best.served
    stats.elapsed_s = time.perf_counter() - start
    stats.stop_reason = reason
    log.info("%s: best %.4f after %d iterations (%s)", stats.instance, best.weighted,
             stats.iterations, reason)
    return best, stats
