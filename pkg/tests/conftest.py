import numpy as np
import pytest

from asyncnet.data import AgentDataProfile, ScenarioTruth
from asyncnet.network import BernoulliAsyncModel, build_topology

# lines appended by the acceptance tests; printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def line3():
    """Line graph 0-1-2."""
    return build_topology({"kind": "edges", "n_agents": 3, "edges": [(0, 1), (1, 2)]})


@pytest.fixture
def line3_half(line3):
    return BernoulliAsyncModel.from_topology(line3, q=1.0, eta=0.5, mu=0.002)


@pytest.fixture
def ring4_async():
    topo = build_topology("ring(4)")
    return BernoulliAsyncModel.from_topology(topo, q=[0.3, 0.5, 0.7, 0.9], eta=0.6, mu=0.002)


def white_truth(n, M=2, sigma_u2=1.0, sigma_xi2=0.01, w_o=None):
    sigma_u2 = np.broadcast_to(sigma_u2, (n,))
    sigma_xi2 = np.broadcast_to(sigma_xi2, (n,))
    if w_o is None:
        w_o = np.ones(M) / np.sqrt(M)
    return ScenarioTruth(w_o=w_o, profiles=[AgentDataProfile.white(s, x, M)
                                            for s, x in zip(sigma_u2, sigma_xi2)])


@pytest.fixture
def make_truth():
    return white_truth
