import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from radner.economy import Agent, Economy, UtilitySpec  # noqa: E402
from radner.information import Partition, Prior, StateSpace  # noqa: E402

settings.register_profile("artifact", deadline=None, derandomize=True)
settings.load_profile("artifact")

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


def make_economy(endowments, utilities, partitions=None, prior=None) -> Economy:
    """Economy from ``(n, S, l)`` endowments and per-agent lists of per-state
    utility specs; partitions default to discrete, prior to uniform."""
    a = np.asarray(endowments, dtype=float)
    n, s, _ = a.shape
    space = StateSpace(tuple(f"w{k + 1}" for k in range(s)))
    parts = partitions or [Partition.discrete(s)] * n
    q = Prior(tuple(prior)) if prior is not None else Prior.uniform(s)
    agents = tuple(Agent(parts[i], a[i], tuple(utilities[i]), q, f"agent{i + 1}") for i in range(n))
    return Economy(space, a.shape[2], agents)


def cd(*w):
    return UtilitySpec("cobb_douglas", tuple(w))


@pytest.fixture
def edgeworth_economy():
    from oracles import edgeworth
    return edgeworth()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
