"""Simple undirected graphs, edge-list I/O and the link-prediction split."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised for malformed edge-list input."""


class DisconnectedGraphError(ValueError):
    """Raised when an operation requires a connected graph."""


def _canonical_edges(edges, n_nodes: int) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if arr.size and (arr.min() < 0 or arr.max() >= n_nodes):
        raise ValueError(f"edge endpoint outside [0, {n_nodes})")
    loops = arr[:, 0] == arr[:, 1]
    if loops.any():
        raise ValueError(f"self-loop on node {int(arr[loops][0, 0])}")
    arr = np.sort(arr, axis=1)
    if arr.size:
        arr = np.unique(arr, axis=0)
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph.

    Edges are stored as an ``(E, 2)`` integer array of pairs ``i < j``,
    deduplicated and sorted lexicographically. ``node_labels`` optionally maps
    dense indices back to the identifiers found in the source file.
    """

    n_nodes: int
    edges: np.ndarray
    node_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n_nodes < 0:
            raise ValueError("n_nodes must be non-negative")
        edges = _canonical_edges(self.edges, self.n_nodes)
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        if self.node_labels is not None:
            labels = tuple(str(x) for x in self.node_labels)
            if len(labels) != self.n_nodes:
                raise ValueError("node_labels length must equal n_nodes")
            object.__setattr__(self, "node_labels", labels)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n_nodes == other.n_nodes
            and np.array_equal(self.edges, other.edges)
            and self.labels == other.labels
        )

    def __hash__(self):
        return hash((self.n_nodes, self.edges.tobytes()))

    def __repr__(self):
        return f"Graph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_pairs(self) -> int:
        return self.n_nodes * (self.n_nodes - 1) // 2

    @property
    def labels(self) -> tuple[str, ...]:
        if self.node_labels is None:
            return tuple(str(i) for i in range(self.n_nodes))
        return self.node_labels

    @cached_property
    def edge_keys(self) -> np.ndarray:
        """Sorted integer keys ``i * n + j`` for O(log E) pair lookup."""
        keys = self.edges[:, 0] * self.n_nodes + self.edges[:, 1]
        keys.setflags(write=False)
        return keys

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        n = self.n_nodes
        if self.n_edges == 0:
            return sp.csr_matrix((n, n), dtype=np.float64)
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        data = np.ones(len(rows))
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    def has_edges(self, i, j) -> np.ndarray:
        """Vectorised membership test for the pairs ``(i, j)``."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        keys = np.minimum(i, j) * self.n_nodes + np.maximum(i, j)
        if self.n_edges == 0:
            return np.zeros(keys.shape, dtype=bool)
        pos = np.searchsorted(self.edge_keys, keys)
        pos = np.minimum(pos, self.n_edges - 1)
        return self.edge_keys[pos] == keys

    def dense_adjacency(self) -> np.ndarray:
        Y = np.zeros((self.n_nodes, self.n_nodes))
        Y[self.edges[:, 0], self.edges[:, 1]] = 1.0
        Y[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return Y

    def subgraph_without(self, drop: np.ndarray) -> "Graph":
        """Same node set with the edges at positions ``drop`` removed."""
        keep = np.ones(self.n_edges, dtype=bool)
        keep[np.asarray(drop, dtype=np.int64)] = False
        return Graph(self.n_nodes, self.edges[keep], self.node_labels)


def _sort_identifiers(ids: Iterable[str]) -> list[str]:
    ids = list(ids)
    try:
        return sorted(ids, key=int)
    except ValueError:
        return sorted(ids)


def load_edge_list(text: str) -> Graph:
    """Parse a whitespace-separated edge list.

    Lines starting with ``#`` and blank lines are ignored. Node identifiers
    are arbitrary tokens; they are re-indexed densely in sorted order
    (numeric order when every identifier is an integer) and the mapping is
    kept in ``Graph.node_labels``.

    Examples
    --------
    >>> load_edge_list("0 1\\n1 2").edges.tolist()
    [[0, 1], [1, 2]]
    """
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise GraphFormatError(
                f"line {lineno}: expected 2 node identifiers, got {len(tokens)}"
            )
        a, b = tokens
        if a == b:
            raise GraphFormatError(f"line {lineno}: self-loop on node {a!r}")
        pairs.append((a, b))

    labels = _sort_identifiers({x for p in pairs for x in p})
    index = {lab: i for i, lab in enumerate(labels)}
    edges = np.array([(index[a], index[b]) for a, b in pairs], dtype=np.int64)
    return Graph(len(labels), edges.reshape(-1, 2), tuple(labels))


def read_edge_list(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh.read())


def format_pairs(pairs, labels: Sequence[str] | None = None) -> str:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if labels is None:
        lines = [f"{i} {j}" for i, j in pairs]
    else:
        lines = [f"{labels[i]} {labels[j]}" for i, j in pairs]
    return "".join(line + "\n" for line in lines)


def serialize_edge_list(g: Graph) -> str:
    return format_pairs(g.edges, g.node_labels)


def degrees(g: Graph) -> tuple[np.ndarray, int]:
    """Per-node degree vector and the maximum degree."""
    deg = np.bincount(g.edges.ravel(), minlength=g.n_nodes).astype(np.int64)
    deg_max = int(deg.max()) if g.n_nodes else 0
    return deg, deg_max


def is_connected(g: Graph) -> bool:
    if g.n_nodes <= 1:
        return True
    n_comp, _ = connected_components(g.adjacency, directed=False)
    return n_comp == 1


def largest_component(g: Graph) -> Graph:
    """Induced subgraph on the largest connected component."""
    _, comp = connected_components(g.adjacency, directed=False)
    biggest = np.argmax(np.bincount(comp))
    keep = np.flatnonzero(comp == biggest)
    remap = -np.ones(g.n_nodes, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    mask = (comp[g.edges[:, 0]] == biggest) & (comp[g.edges[:, 1]] == biggest)
    edges = remap[g.edges[mask]]
    labels = None if g.node_labels is None else tuple(g.labels[i] for i in keep)
    return Graph(len(keep), edges, labels)


@dataclass(frozen=True)
class SplitResult:
    residual: Graph
    test_positives: np.ndarray
    test_negatives: np.ndarray
    seed: int
    holdout_fraction: float
    shortfall: int = 0

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "holdout_fraction": self.holdout_fraction,
            "shortfall": self.shortfall,
        }


def _csr_from_edges(n, edges, alive):
    e = edges[alive]
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


def _spanning_tree_edges(n, edges, alive) -> set[int]:
    """Edge positions of a BFS spanning tree of the alive subgraph."""
    adj = _csr_from_edges(n, edges, alive)
    _, pred = breadth_first_order(adj, 0, directed=False, return_predecessors=True)
    child = np.flatnonzero(pred >= 0)
    par = pred[child]
    keys = np.minimum(child, par) * n + np.maximum(child, par)
    all_keys = edges[:, 0] * n + edges[:, 1]
    return set(np.searchsorted(all_keys, keys).tolist())


def remove_non_bridges(g: Graph, quota: int, rng: np.random.Generator) -> np.ndarray:
    """Walk a random edge order, removing edges that are not bridges.

    Every accepted removal keeps the residual connected. A spanning tree of
    the current residual certifies non-tree edges as removable in O(1); tree
    edges get an explicit connectivity check.
    """
    n, edges = g.n_nodes, g.edges
    alive = np.ones(g.n_edges, dtype=bool)
    removed: list[int] = []
    if quota <= 0:
        return np.array(removed, dtype=np.int64)
    tree = _spanning_tree_edges(n, edges, alive)
    for e in rng.permutation(g.n_edges):
        e = int(e)
        if e not in tree:
            alive[e] = False
            removed.append(e)
        else:
            alive[e] = False
            n_comp, _ = connected_components(
                _csr_from_edges(n, edges, alive), directed=False
            )
            if n_comp == 1:
                removed.append(e)
                tree = _spanning_tree_edges(n, edges, alive)
            else:
                alive[e] = True
        if len(removed) == quota:
            break
    return np.array(removed, dtype=np.int64)


def sample_non_edges(
    g: Graph, count: int, rng: np.random.Generator, replace: bool = False
) -> np.ndarray:
    """Uniform non-edges ``i < j`` of ``g`` by rejection sampling."""
    n_non = g.n_pairs - g.n_edges
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if n_non <= 0 or (not replace and count > n_non):
        raise ValueError(
            f"cannot draw {count} non-edges: graph has only {max(n_non, 0)}"
        )
    n = g.n_nodes
    chosen: list[np.ndarray] = []
    seen: set[int] = set()
    have = 0
    while have < count:
        batch = max(2 * (count - have), 16)
        i = rng.integers(0, n, size=batch)
        j = rng.integers(0, n, size=batch)
        ok = i != j
        i, j = np.minimum(i, j)[ok], np.maximum(i, j)[ok]
        ok = ~g.has_edges(i, j)
        i, j = i[ok], j[ok]
        if not replace:
            keys = i * n + j
            fresh = []
            for pos, k in enumerate(keys.tolist()):
                if k not in seen:
                    seen.add(k)
                    fresh.append(pos)
            i, j = i[fresh], j[fresh]
        take = min(len(i), count - have)
        chosen.append(np.stack([i[:take], j[:take]], axis=1))
        have += take
    return np.concatenate(chosen, axis=0)


def split_links(g: Graph, holdout_fraction: float = 0.5, seed: int = 0) -> SplitResult:
    """Hold out edges for link prediction while keeping the residual connected.

    Removes ``floor(holdout_fraction * |E|)`` edges when enough non-bridge
    edges exist; otherwise removes as many as possible and records the
    shortfall. Negatives are drawn uniformly without replacement from the
    non-edges of the original graph, one per held-out positive.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must lie in (0, 1)")
    if not is_connected(g):
        raise DisconnectedGraphError("split_links requires a connected graph")
    rng = np.random.default_rng(seed)
    quota = int(np.floor(holdout_fraction * g.n_edges))
    removed = remove_non_bridges(g, quota, rng)
    shortfall = quota - len(removed)
    if shortfall:
        logger.warning("only %d of %d edges removable; shortfall %d",
                       len(removed), quota, shortfall)
    positives = g.edges[np.sort(removed)]
    negatives = sample_non_edges(g, len(positives), rng)
    return SplitResult(
        residual=g.subgraph_without(removed),
        test_positives=np.array(positives),
        test_negatives=negatives,
        seed=seed,
        holdout_fraction=holdout_fraction,
        shortfall=shortfall,
    )
