import numpy as np
import pytest

from graphhull.graph import Graph


def clique_graph(sizes, noise_edges=0, seed=0):
    """Disjoint cliques plus random inter-clique edges, connected by a chain."""
    rng = np.random.default_rng(seed)
    edges, start, blocks = [], 0, []
    for size in sizes:
        nodes = np.arange(start, start + size)
        blocks.append(nodes)
        edges += [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]]
        start += size
    for left, right in zip(blocks, blocks[1:]):
        edges.append((left[-1], right[0]))
    n = start
    labels = np.concatenate([np.full(len(b), k) for k, b in enumerate(blocks)])
    while noise_edges > 0:
        i, j = rng.integers(0, n, 2)
        if labels[i] != labels[j]:
            edges.append((i, j))
            noise_edges -= 1
    return Graph(n, edges), labels


def erdos_renyi(n, p, rng):
    i, j = np.triu_indices(n, 1)
    hit = rng.random(len(i)) < p
    return Graph(n, np.stack([i[hit], j[hit]], 1))


@pytest.fixture
def three_cliques():
    return clique_graph([20, 20, 20], noise_edges=15, seed=3)


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
