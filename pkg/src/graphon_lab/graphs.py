"""Labelled simple graphs, small motifs and edge/triangle bookkeeping."""

from __future__ import annotations

import json
from itertools import combinations

import numpy as np

from .errors import DomainError, InvalidEdgeError
from .graphon import StepGraphon

__all__ = [
    "SimpleGraph",
    "Motif",
    "checkerboard",
    "edge_count",
    "triangle_count",
    "toggle_edge_delta",
    "DEFAULT_MOTIFS",
]


class SimpleGraph:
    """Simple graph on the labelled vertices ``1..n``.

    Stored as an immutable boolean adjacency matrix.  Edges are reported
    1-indexed to match the JSON interchange format.
    """

    __slots__ = ("_adj",)

    def __init__(self, n: int, edges=()):
        n = int(n)
        if n < 0:
            raise DomainError("vertex count must be non-negative")
        adj = np.zeros((n, n), dtype=bool)
        for (i, j) in edges:
            i, j = int(i), int(j)
            _check_pair(n, i, j)
            adj[i - 1, j - 1] = adj[j - 1, i - 1] = True
        adj.setflags(write=False)
        self._adj = adj

    @classmethod
    def from_adjacency(cls, adjacency) -> "SimpleGraph":
        a = np.array(adjacency, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError("adjacency must be square")
        if np.any(np.diag(a)):
            raise DomainError("simple graphs have no self-loops")
        if not np.array_equal(a, a.T):
            raise DomainError("adjacency must be symmetric")
        g = cls.__new__(cls)
        a.setflags(write=False)
        g._adj = a
        return g

    @classmethod
    def complete(cls, n: int) -> "SimpleGraph":
        return cls(n, combinations(range(1, n + 1), 2))

    @property
    def n(self) -> int:
        return self._adj.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        return self._adj

    @property
    def edges(self) -> list:
        i, j = np.nonzero(np.triu(self._adj, 1))
        return [(int(a) + 1, int(b) + 1) for a, b in zip(i, j)]

    def has_edge(self, i: int, j: int) -> bool:
        _check_pair(self.n, i, j)
        return bool(self._adj[i - 1, j - 1])

    def toggled(self, i: int, j: int) -> "SimpleGraph":
        """Copy of the graph with edge ``{i, j}`` flipped."""
        _check_pair(self.n, i, j)
        a = self._adj.copy()
        a[i - 1, j - 1] = a[j - 1, i - 1] = not a[i - 1, j - 1]
        return SimpleGraph.from_adjacency(a)

    def __eq__(self, other):
        if not isinstance(other, SimpleGraph):
            return NotImplemented
        return np.array_equal(self._adj, other._adj)

    def __hash__(self):
        return hash((self.n, np.packbits(self._adj).tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, edges={len(self.edges)})"

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_dict(cls, d: dict) -> "SimpleGraph":
        return cls(d["n"], [tuple(e) for e in d["edges"]])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, s: str) -> "SimpleGraph":
        return cls.from_dict(json.loads(s))


def _check_pair(n: int, i: int, j: int) -> None:
    if i == j:
        raise InvalidEdgeError(f"({i}, {j}) is a self-loop")
    if not (1 <= i <= n and 1 <= j <= n):
        raise InvalidEdgeError(f"({i}, {j}) is out of range for n={n}")


class Motif(SimpleGraph):
    """Small pattern graph used in homomorphism densities (``n <= 8``)."""

    __slots__ = ("name",)

    def __init__(self, n: int, edges=(), name: str = ""):
        if n > 8:
            raise DomainError("motifs are limited to 8 vertices")
        super().__init__(n, edges)
        self.name = name

    def __repr__(self):
        return f"Motif({self.name or self.edges!r})"


EDGE = Motif(2, [(1, 2)], "edge")
PATH3 = Motif(3, [(1, 2), (2, 3)], "path3")
TRIANGLE = Motif(3, [(1, 2), (2, 3), (1, 3)], "triangle")
PATH4 = Motif(4, [(1, 2), (2, 3), (3, 4)], "path4")
STAR3 = Motif(4, [(1, 2), (1, 3), (1, 4)], "star3")
CYCLE4 = Motif(4, [(1, 2), (2, 3), (3, 4), (1, 4)], "cycle4")
PAW = Motif(4, [(1, 2), (2, 3), (1, 3), (3, 4)], "paw")
DIAMOND = Motif(4, [(1, 2), (2, 3), (1, 3), (2, 4), (3, 4)], "diamond")
K4 = Motif(4, list(combinations(range(1, 5), 2)), "K4")

# All connected simple graphs on 2..4 vertices, by vertex count then edge
# count.  The single vertex is left out: its density is identically 1.
DEFAULT_MOTIFS = (EDGE, PATH3, TRIANGLE, PATH4, STAR3, CYCLE4, PAW, DIAMOND, K4)


def checkerboard(G: SimpleGraph) -> StepGraphon:
    """The step graphon of ``G``: n equal blocks, value 1 on edges."""
    if G.n == 0:
        raise DomainError("the empty vertex set has no graphon")
    return StepGraphon.from_values(G.adjacency.astype(float))


def edge_count(G: SimpleGraph) -> int:
    return int(np.count_nonzero(G.adjacency)) // 2


def triangle_count(G: SimpleGraph) -> int:
    a = G.adjacency.astype(np.int64)
    return int(np.trace(a @ a @ a)) // 6


def toggle_edge_delta(G: SimpleGraph, i: int, j: int):
    """Change in (edge count, triangle count) if ``{i, j}`` were toggled.

    ``G`` is not modified.
    """
    _check_pair(G.n, i, j)
    a = G.adjacency
    common = int(np.count_nonzero(a[i - 1] & a[j - 1]))
    if a[i - 1, j - 1]:
        return -1, -common
    return 1, common
