"""Elite archive and back-and-forward path relinking over request assignments."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .model import Instance, SolverParams
from .schedule import (DEFAULT_PARAMS, EPS, Solution, rank, remove_request, replace_routes,
                       try_insert)


class Action(enum.Enum):
    INSERT = "InsertIntoGuidingRoute"
    REMOVE = "Remove"
    REASSIGN = "Reassign"


@dataclass(frozen=True)
class DeltaMove:
    request: int
    action: Action
    target_route: int | None = None


def compute_delta(inst: Instance, s_i: Solution, s_g: Solution) -> list[DeltaMove]:
    """Moves turning the request-to-route assignment of ``s_i`` into that of ``s_g``."""
    a, g = s_i.assignment(inst), s_g.assignment(inst)
    return [_move_for(r, a[r], g[r]) for r in range(inst.n) if a[r] != g[r]]


def _move_for(r, have, want):
    if have < 0:
        return DeltaMove(r, Action.INSERT, want)
    if want < 0:
        return DeltaMove(r, Action.REMOVE, None)
    return DeltaMove(r, Action.REASSIGN, want)


def apply_delta_move(inst: Instance, sol: Solution, move: DeltaMove,
                     params: SolverParams = DEFAULT_PARAMS) -> Solution | None:
    r = move.request
    owner = sol.assignment(inst)[r]
    changes = {}
    rejected = set(sol.rejected)
    if move.action in (Action.REMOVE, Action.REASSIGN):
        if owner < 0:
            return None
        src = remove_request(inst, sol.routes[owner], r)
        if src is None:
            return None
        changes[owner] = src
        rejected.add(r)
    elif owner >= 0:
        return None
    if move.action in (Action.INSERT, Action.REASSIGN):
        k = move.target_route
        if k == owner:
            return None
        ins = try_insert(inst, sol.routes[k], r, params)
        if ins is None:
            return None
        changes[k] = ins.route
        rejected.discard(r)
    return replace_routes(inst, params, sol, changes, rejected)


def path_relink(inst: Instance, params: SolverParams, s_i: Solution, s_g: Solution) -> Solution:
    """Best solution met while walking between ``s_i`` and ``s_g`` from both ends.

    One walker starts at each endpoint. Steps alternate between them; each
    step moves the active walker one request closer to the other walker's
    assignment, choosing the request whose move gives the lowest cost.
    Requests whose move is infeasible stay in the difference set; the walk
    ends when no remaining move is feasible or at most one request differs.
    """
    best = min((s_i, s_g), key=lambda s: rank(inst, s))
    walkers = [s_i, s_g]
    a0, a1 = s_i.assignment(inst), s_g.assignment(inst)
    delta = {r for r in range(inst.n) if a0[r] != a1[r]}
    turn = 0
    while len(delta) > 1:
        cur, other = walkers[turn], walkers[1 - turn]
        want = other.assignment(inst)
        have = cur.assignment(inst)
        step = None
        step_key = None
        for r in sorted(delta):
            nxt = apply_delta_move(inst, cur, _move_for(r, have[r], want[r]), params)
            if nxt is None:
                continue
            key = rank(inst, nxt)
            if step is None or key[0] < step_key[0] or (
                    key[0] == step_key[0] and key[1] < step_key[1] - EPS):
                step, step_key, chosen = nxt, key, r
        if step is None:
            break
        delta.discard(chosen)
        walkers[turn] = step
        bk = rank(inst, best)
        if step_key[0] < bk[0] or (step_key[0] == bk[0] and step_key[1] < bk[1] - EPS):
            best = step
        turn = 1 - turn
    return best


@dataclass
class EliteSet:
    size: int
    solutions: list = field(default_factory=list)
    signatures: list = field(default_factory=list)

    def __len__(self):
        return len(self.solutions)


def update_elite(inst: Instance, elite: EliteSet, sol: Solution, size_e: int | None = None) -> EliteSet:
    """Add ``sol`` if it is good enough and its assignment is new.

    A solution whose assignment is already archived replaces that member
    only when strictly cheaper. Members are kept in strictly increasing cost
    order.
    """
    cap = size_e if size_e is not None else elite.size
    sig = sol.signature(inst)
    key = rank(inst, sol)
    members = list(zip(elite.solutions, elite.signatures))
    for idx, (s, sg) in enumerate(members):
        if sg == sig:
            if _lt(key, rank(inst, s)):
                members[idx] = (sol, sig)
                break
            return elite
    else:
        if any(_tie(key, rank(inst, s)) for s, _ in members):
            return elite
        if len(members) >= cap and not _lt(key, rank(inst, members[-1][0])):
            return elite
        members.append((sol, sig))
    members.sort(key=lambda ms: rank(inst, ms[0]))
    # drop equal-cost neighbours left by an in-place replacement
    kept = []
    for s, sg in members:
        if kept and _tie(rank(inst, s), rank(inst, kept[-1][0])):
            continue
        kept.append((s, sg))
    kept = kept[:cap]
    return EliteSet(cap, [s for s, _ in kept], [sg for _, sg in kept])


def _lt(a, b):
    return a[0] < b[0] or (a[0] == b[0] and a[1] < b[1] - EPS)


def _tie(a, b):
    return a[0] == b[0] and abs(a[1] - b[1]) <= EPS
