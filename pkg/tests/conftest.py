from collections import deque
from pathlib import Path

import pytest

from mrls.topology import MrlsSpec, build_mrls, build_oft, OftSpec, load_topology

DATA = Path(__file__).parent / "data"


def bfs_oracle(adjacency, s):
    """Plain queue BFS over neighbour lists, independent of the numba kernels."""
    dist = [-1] * len(adjacency)
    dist[s] = 0
    q = deque([s])
    while q:
        x = q.popleft()
        for y in adjacency[x]:
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                q.append(y)
    return dist


@pytest.fixture(scope="session")
def sample():
    return load_topology(DATA / "sample.topo")


@pytest.fixture(scope="session")
def oft2():
    return build_oft(OftSpec(2))


@pytest.fixture(scope="session")
def desk512():
    # corner-free S=512 instance used by the simulator tests
    return build_mrls(MrlsSpec(16, 8, 8, 64, 32, seed=1))


@pytest.fixture(scope="session")
def mrls14():
    # corner-free instance with the 14-leaf, 7-spine shape
    return build_mrls(MrlsSpec(6, 3, 3, 14, 7, seed=4))


ACCEPTANCE: list[str] = []


def acceptance(n, ok, text):
    """Record one acceptance line; the caller asserts ``ok`` afterwards."""
    ACCEPTANCE.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
