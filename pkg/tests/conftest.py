import itertools

import numpy as np
import pytest

from clawsim.instances import ProblemInstance

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def brute_claws(instance: ProblemInstance, domains=None):
    """Independent O(prod N_i) scan over raw tables."""
    tables = [list(map(int, instance.table(i))) for i in range(instance.k)]
    if domains is None:
        domains = [(1, n) for n in instance.domain_sizes]
    ranges = [range(lo, hi + 1) for lo, hi in domains]
    return [
        tup
        for tup in itertools.product(*ranges)
        if len({tables[i][x - 1] for i, x in enumerate(tup)}) == 1
    ]


def random_instance(rng, sizes, range_size):
    sizes = sorted(sizes)
    values = [rng.integers(1, range_size + 1, size=n) for n in sizes]
    return ProblemInstance(sizes, range_size, values)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {detail}")
