import itertools

import numpy as np
import pytest


def brute_force_fronts(F):
    """Peel non-dominated layers with plain pairwise loops."""
    F = [tuple(map(float, row)) for row in F]

    def dom(a, b):
        return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))

    left = list(range(len(F)))
    fronts = []
    while left:
        layer = [i for i in left if not any(dom(F[j], F[i]) for j in left if j != i)]
        fronts.append(layer)
        left = [i for i in left if i not in layer]
    return fronts


def simplex_lattice(m, p):
    """Enumerate all integer m-tuples summing to p, scaled by 1/p."""
    pts = [c for c in itertools.product(range(p + 1), repeat=m) if sum(c) == p]
    return {tuple(x / p for x in c) for c in pts}


class FixedUniform:
    """Stand-in generator returning a constant for every uniform draw."""

    def __init__(self, u):
        self.u = u

    def random(self, size=None):
        if size is None:
            return self.u
        return np.full(size, self.u)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


VERDICTS: list[str] = []


def record_verdict(tag, ok, detail):
    """Store a one-line criterion verdict for the terminal summary."""
    line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
    VERDICTS.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
