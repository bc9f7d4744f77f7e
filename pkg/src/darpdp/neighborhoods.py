"""Move operators and the score-driven learning local search."""
from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass

from .model import Instance, SolverParams
from .schedule import (DEFAULT_PARAMS, EPS, Solution, better, make_route, remove_request,
                       replace_routes, route_weight, try_insert)

log = logging.getLogger(__name__)


class MoveKind(enum.Enum):
    RELOCATE = "Relocate"
    EXCHANGE = "Exchange"
    EXCHANGE_NATURAL = "ExchangeNatural"
    R4OPT = "R4Opt"
    SHIFT = "Shift"


KINDS = tuple(MoveKind)


class Outcome(enum.Enum):
    NEW_BEST = "NewBest"
    IMPROVING = "Improving"
    WORSE = "Worse"


@dataclass(frozen=True)
class OperatorScores:
    scores: tuple
    probabilities: tuple

    @classmethod
    def initial(cls) -> "OperatorScores":
        return recompute_probabilities(cls(tuple(1.0 for _ in KINDS), ()))

    def score(self, kind: MoveKind) -> float:
        return self.scores[KINDS.index(kind)]

    def probability(self, kind: MoveKind) -> float:
        return self.probabilities[KINDS.index(kind)]

    def as_dict(self) -> dict:
        return {k.value: p for k, p in zip(KINDS, self.probabilities)}


def recompute_probabilities(scores: OperatorScores) -> OperatorScores:
    total = sum(scores.scores)
    return OperatorScores(scores.scores, tuple(s / total for s in scores.scores))


def update_score(scores: OperatorScores, kind: MoveKind, outcome: Outcome,
                 params: SolverParams) -> OperatorScores:
    i = KINDS.index(kind)
    sc = list(scores.scores)
    if outcome is Outcome.NEW_BEST:
        sc[i] += params.alpha * params.beta1
    elif outcome is Outcome.IMPROVING:
        sc[i] += params.alpha * params.beta2
    else:
        sc[i] *= params.gamma
    return recompute_probabilities(OperatorScores(tuple(sc), ()))


# ---------------------------------------------------------------------------
# moves
#
# Each move walks its candidates in random order and returns the first
# strictly improving feasible neighbour, giving up after ``budget`` tries.


def _delta_improves(params, sol, old_routes, new_routes):
    delta = sum(route_weight(params, r) for r in new_routes) - sum(
        route_weight(params, r) for r in old_routes)
    return delta < -EPS


def _relocate(inst, params, sol, rng, budget):
    owner = sol.assignment(inst)
    cands = [(r, k) for r in range(inst.n) if owner[r] >= 0
             for k in range(inst.m) if k != owner[r]]
    rng.shuffle(cands)
    shrunk = {}
    for r, k in cands[:budget]:
        a = owner[r]
        if r not in shrunk:
            shrunk[r] = remove_request(inst, sol.routes[a], r)
        src = shrunk[r]
        if src is None:
            continue
        ins = try_insert(inst, sol.routes[k], r, params)
        if ins is None:
            continue
        if _delta_improves(params, sol, (sol.routes[a], sol.routes[k]), (src, ins.route)):
            return replace_routes(inst, params, sol, {a: src, k: ins.route})
    return None


def _exchange(inst, params, sol, rng, budget):
    owner = sol.assignment(inst)
    served = [r for r in range(inst.n) if owner[r] >= 0]
    cands = [(r1, r2) for i, r1 in enumerate(served) for r2 in served[i + 1:]
             if owner[r1] != owner[r2]]
    rng.shuffle(cands)
    for r1, r2 in cands[:budget]:
        a, b = owner[r1], owner[r2]
        ra = remove_request(inst, sol.routes[a], r1)
        rb = remove_request(inst, sol.routes[b], r2)
        if ra is None or rb is None:
            continue
        ins_a = try_insert(inst, ra, r2, params)
        if ins_a is None:
            continue
        ins_b = try_insert(inst, rb, r1, params)
        if ins_b is None:
            continue
        if _delta_improves(params, sol, (sol.routes[a], sol.routes[b]), (ins_a.route, ins_b.route)):
            return replace_routes(inst, params, sol, {a: ins_a.route, b: ins_b.route})
    return None


def natural_sequences(inst: Instance, route) -> list:
    """``(start, end)`` index pairs of blocks entered and left with an empty vehicle."""
    V = inst.vertices
    blocks = []
    load = 0
    start = None
    for idx in range(1, len(route.stops) - 1):
        if load == 0:
            start = idx
        load += V[route.stops[idx]].load_delta
        if load == 0 and start is not None:
            blocks.append((start, idx))
            start = None
    return blocks


def _exchange_natural(inst, params, sol, rng, budget):
    blocks = [natural_sequences(inst, r) for r in sol.routes]
    cands = [(a, ba, b, bb) for a, b in itertools.combinations(range(inst.m), 2)
             for ba in blocks[a] for bb in blocks[b]]
    rng.shuffle(cands)
    for a, (ia, ja), b, (ib, jb) in cands[:budget]:
        sa, sb = sol.routes[a].stops, sol.routes[b].stops
        new_a = make_route(inst, a, sa[:ia] + sb[ib:jb + 1] + sa[ja + 1:])
        if new_a is None:
            continue
        new_b = make_route(inst, b, sb[:ib] + sa[ia:ja + 1] + sb[jb + 1:])
        if new_b is None:
            continue
        if _delta_improves(params, sol, (sol.routes[a], sol.routes[b]), (new_a, new_b)):
            return replace_routes(inst, params, sol, {a: new_a, b: new_b})
    return None


_REORDERS = [p for p in itertools.permutations(range(3)) if p != (0, 1, 2)]


def _r4opt(inst, params, sol, rng, budget):
    cands = [(k, a, perm) for k, route in enumerate(sol.routes)
             if len(route.stops) - 1 >= 5
             for a in range(len(route.stops) - 4) for perm in _REORDERS]
    rng.shuffle(cands)
    for k, a, perm in cands[:budget]:
        s = sol.routes[k].stops
        inner = s[a + 1:a + 4]
        stops = s[:a + 1] + tuple(inner[i] for i in perm) + s[a + 4:]
        new = make_route(inst, k, stops)
        if new is not None and _delta_improves(params, sol, (sol.routes[k],), (new,)):
            return replace_routes(inst, params, sol, {k: new})
    return None


def _swap(stops, i, j):
    s = list(stops)
    s[i], s[j] = s[j], s[i]
    return tuple(s)


def _shift(inst, params, sol, rng, budget):
    busy = [k for k, r in enumerate(sol.routes) if len(r.stops) > 2]
    if not busy:
        return None
    k = rng.choice(busy)
    route = sol.routes[k]
    L = len(route.stops)
    cands = list(itertools.combinations(range(1, L - 1), 2))
    rng.shuffle(cands)
    for i, j in cands[:budget]:
        new = make_route(inst, k, _swap(route.stops, i, j))
        if new is not None and _delta_improves(params, sol, (route,), (new,)):
            return replace_routes(inst, params, sol, {k: new})
    return None


def shift_descent(inst, params, sol: Solution, vehicles) -> Solution:
    """Exhaustive first-improvement swap descent on the given routes."""
    for k in sorted(set(vehicles)):
        improved = True
        while improved:
            improved = False
            route = sol.routes[k]
            L = len(route.stops)
            for i, j in itertools.combinations(range(1, L - 1), 2):
                new = make_route(inst, k, _swap(route.stops, i, j))
                if new is not None and route_weight(params, new) < route_weight(params, route) - EPS:
                    sol = replace_routes(inst, params, sol, {k: new})
                    improved = True
                    break
    return sol


_MOVES = {
    MoveKind.RELOCATE: _relocate,
    MoveKind.EXCHANGE: _exchange,
    MoveKind.EXCHANGE_NATURAL: _exchange_natural,
    MoveKind.R4OPT: _r4opt,
    MoveKind.SHIFT: _shift,
}


def apply_move(kind: MoveKind, inst: Instance, sol: Solution, rng,
               params: SolverParams = DEFAULT_PARAMS) -> Solution | None:
    """First strictly improving neighbour of ``sol`` under ``kind``, or None."""
    budget = params.size_n * max(1, inst.n)
    return _MOVES[kind](inst, params, sol, rng, budget)


def learning_local_search(inst: Instance, params: SolverParams, sol: Solution,
                          best: Solution, rng, scores: OperatorScores | None = None,
                          record: dict | None = None) -> Solution:
    """Improve ``sol`` with moves picked by their learned scores.

    Scores start at 1 unless ``scores`` is given. When ``record`` is a dict
    it receives the final ``scores``, the accepted ``moves`` and the number of
    move ``calls``.
    """
    scores = scores or OperatorScores.initial()
    accepted = []
    calls = 0
    no_improve = 0
    while no_improve < params.iter_max:
        probs = scores.probabilities
        u = rng.random()
        cand = [k for k, p in zip(KINDS, probs) if p > u]
        if not cand:
            cand = [KINDS[max(range(len(KINDS)), key=lambda i: (probs[i], -i))]]
        initial = list(cand)
        while cand:
            move = rng.choice(cand)
            calls += 1
            nxt = apply_move(move, inst, sol, rng, params)
            if nxt is not None and nxt.weighted < sol.weighted - EPS:
                delta = nxt.weighted - sol.weighted
                sol = nxt
                cand = list(initial)
                no_improve = 0
                if better(inst, nxt, best):
                    scores = update_score(scores, move, Outcome.NEW_BEST, params)
                    best = nxt
                else:
                    scores = update_score(scores, move, Outcome.IMPROVING, params)
                accepted.append((move.value, delta, sol.weighted))
                log.debug("accepted %s delta=%.6f cost=%.6f", move.value, delta, sol.weighted)
            else:
                scores = update_score(scores, move, Outcome.WORSE, params)
                cand.remove(move)
                no_improve += 1
    if record is not None:
        record["scores"] = scores
        record["moves"] = accepted
        record["calls"] = calls
    return sol
