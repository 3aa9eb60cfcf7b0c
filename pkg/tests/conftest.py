import numpy as np
import pytest

from fairrecip.core import ExaminationModel, Instance, Policy


def random_doubly_stochastic(rng, d, terms=4):
    """Random convex combination of permutation matrices."""
    w = rng.dirichlet(np.ones(terms))
    out = np.zeros((d, d))
    for k in range(terms):
        out[np.arange(d), rng.permutation(d)] += w[k]
    return out


def random_policy(rng, n, m):
    a = np.stack([random_doubly_stochastic(rng, m) for _ in range(n)])
    b = np.stack([random_doubly_stochastic(rng, n) for _ in range(m)])
    return Policy(a, b)


def random_instance(rng, n, m, exam=None):
    return Instance(rng.random((n, m)), rng.random((m, n)), exam or ExaminationModel())


def two_agent_market(eps=0.5):
    """Two left agents, one right agent, inverse-rank examination with K=2."""
    return Instance(np.ones((2, 1)), np.array([[1.0, 1.0 - eps]]), ExaminationModel("inv", 2))


def two_agent_optimal():
    return Policy(np.ones((2, 1, 1)), np.eye(2)[None])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# lines recorded by the acceptance suite, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
