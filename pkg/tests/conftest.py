import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from darpdp.io import random_instance  # noqa: E402
from darpdp.model import build_instance  # noqa: E402


@pytest.fixture
def line_instance():
    """One driver and one request on the x axis; every time is worked out by hand."""
    return build_instance(
        "line",
        origins=[(0, 0, 480, 610)],
        destinations=[(4, 0, 515, 530)],
        pickups=[(1, 0, 500, 510)],
        deliveries=[(3, 0, 505, 530)],
    )


@pytest.fixture
def tiny():
    return random_instance


def random_solution(inst, rng, reject_p=0.2):
    """Feasible solution with a random request-to-route assignment."""
    from darpdp.schedule import DEFAULT_PARAMS, build_solution, empty_solution, try_insert

    routes = list(empty_solution(inst).routes)
    rejected = set()
    order = list(range(inst.n))
    rng.shuffle(order)
    for r in order:
        if rng.random() < reject_p:
            rejected.add(r)
            continue
        ks = list(range(inst.m))
        rng.shuffle(ks)
        for k in ks:
            ins = try_insert(inst, routes[k], r)
            if ins is not None:
                routes[k] = ins.route
                break
        else:
            rejected.add(r)
    return build_solution(inst, DEFAULT_PARAMS, routes, rejected)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
