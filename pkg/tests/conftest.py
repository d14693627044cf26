import pytest

from frogsim import GraphSpec, build_graph


@pytest.fixture(scope="session")
def tree8():
    return build_graph(GraphSpec("regular_tree", degree=3, depth=8))


@pytest.fixture(scope="session")
def tree12():
    return build_graph(GraphSpec("regular_tree", degree=3, depth=12))


@pytest.fixture(scope="session")
def tree16():
    return build_graph(GraphSpec("regular_tree", degree=3, depth=16))


@pytest.fixture(scope="session")
def z1_box():
    return build_graph(GraphSpec("lattice_box", d=1, radius=30))


@pytest.fixture(scope="session")
def z2_box20():
    return build_graph(GraphSpec("lattice_box", d=2, radius=20))


@pytest.fixture(scope="session")
def z2_box40():
    return build_graph(GraphSpec("lattice_box", d=2, radius=40))


@pytest.fixture(scope="session")
def ladder240():
    return build_graph(GraphSpec("ladder", width=2, length=240))


def bfs_oracle(neighbors, start, radius=None):
    """Reference BFS, independent of the package's id layout: `neighbors`
    is a callable on hashable states."""
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for v in frontier:
            if radius is not None and dist[v] >= radius:
                continue
            for u in neighbors(v):
                if u not in dist:
                    dist[u] = dist[v] + 1
                    nxt.append(u)
        frontier = nxt
    return dist
