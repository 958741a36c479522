"""Network topologies: random geometric graphs, incidence structures and
honest-subgraph partitions.

Directed-edge ("entry") convention used throughout the package: for the
k-th undirected edge ``(i, j)`` with ``i < j``, entry ``k`` is ``(i|j)``
(held at node ``i``, associated with neighbour ``j``) and entry ``m + k``
is ``(j|i)``. Edge fields are plain length-``2m`` arrays in that order,
which makes them line up with the rows of ``C = [B+; B-]``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "IncidenceData",
    "HonestPartition",
    "ConnectivityError",
    "from_edges",
    "generate_geometric_graph",
    "connectivity_radius",
    "is_connected",
    "incidence",
    "honest_partition",
    "component_sums",
    "write_graph",
    "read_graph",
]


class ConnectivityError(RuntimeError):
    """Raised when no connected graph was found within the retry budget."""


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[frozenset[int], ...] = field(repr=False)
    coords: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def neighbors(self, i: int) -> frozenset[int]:
        return self.adjacency[i]


def from_edges(n: int, edges: Iterable[Sequence[int]], coords=None) -> Graph:
    """Build a :class:`Graph` from an arbitrary collection of node pairs.

    Pairs are normalised to ``i < j``, de-duplicated and sorted so that the
    edge index is reproducible.
    """
    if n < 1:
        raise ValueError("n must be positive")
    norm = set()
    for a, b in edges:
        a, b = int(a), int(b)
        if a == b:
            raise ValueError(f"self loop on node {a}")
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"edge ({a}, {b}) out of range for n={n}")
        norm.add((min(a, b), max(a, b)))
    ordered = tuple(sorted(norm))
    adj = [set() for _ in range(n)]
    for i, j in ordered:
        adj[i].add(j)
        adj[j].add(i)
    if coords is not None:
        coords = np.asarray(coords, dtype=float)
        coords.setflags(write=False)
    return Graph(n, ordered, tuple(frozenset(a) for a in adj), coords)


def connectivity_radius(n: int) -> float:
    """Radius ``sqrt(2 log(n) / n)`` giving connectivity with high probability."""
    return math.sqrt(2.0 * math.log(n) / n)


def generate_geometric_graph(n: int, radius: float | None = None, rng=None,
                             dim: int = 3, max_retries: int = 1000) -> Graph:
    """Random geometric graph in the unit cube, resampled until connected.

    Parameters
    ----------
    n : int
        Number of nodes (``n >= 2``).
    radius : float, optional
        Connection radius; defaults to :func:`connectivity_radius`.
    rng : numpy.random.Generator or int, optional
        Source of randomness. Same seed, same graph.
    dim : int
        Dimension of the unit cube the nodes are placed in.
    max_retries : int
        Number of placements tried before giving up.

    Raises
    ------
    ConnectivityError
        If no connected placement was drawn within ``max_retries``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if radius is None:
        radius = connectivity_radius(n)
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(rng)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_retries):
        pts = rng.random((n, dim))
        dist = np.linalg.norm(pts[iu] - pts[ju], axis=1)
        close = dist <= radius
        g = from_edges(n, zip(iu[close], ju[close]), coords=pts)
        if is_connected(g):
            return g
    raise ConnectivityError(
        f"no connected placement in {max_retries} tries (n={n}, radius={radius:.4g}); "
        "the radius is probably too small")


def _reach(adjacency, start, allowed=None) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if v not in seen and (allowed is None or v in allowed):
                seen.add(v)
                queue.append(v)
    return seen


def is_connected(g: Graph) -> bool:
    return len(_reach(g.adjacency, 0)) == g.n


@dataclass(frozen=True)
class IncidenceData:
    """Signed incidence matrix and the derived directed-entry index arrays.

    ``owner[e]`` holds entry ``e``, ``peer[e]`` is the neighbour it refers to,
    ``sign[e] = B_{owner|peer}`` and ``rev[e]`` is the entry of the opposite
    direction (so ``z[rev]`` is ``P z``).
    """

    graph: Graph = field(repr=False)
    B: np.ndarray = field(repr=False)
    Bplus: np.ndarray = field(repr=False)
    Bminus: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    owner: np.ndarray = field(repr=False)
    peer: np.ndarray = field(repr=False)
    sign: np.ndarray = field(repr=False)
    rev: np.ndarray = field(repr=False)
    degrees: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def P(self) -> np.ndarray:
        """Permutation swapping the upper and lower ``m`` rows."""
        m = self.m
        P = np.zeros((2 * m, 2 * m))
        P[np.arange(2 * m), self.rev] = 1.0
        return P

    @staticmethod
    def edge_weight(i: int, j: int) -> int:
        """``B_{i|j}``: +1 if ``i < j`` else -1."""
        return 1 if i < j else -1

    def entry(self, i: int, j: int) -> int:
        """Index of the directed entry ``(i|j)``."""
        k = self._edge_index[(min(i, j), max(i, j))]
        return k if i < j else k + self.m

    @property
    def _edge_index(self) -> dict:
        cache = self.__dict__.get("_edge_cache")
        if cache is None:
            cache = {e: k for k, e in enumerate(self.graph.edges)}
            object.__setattr__(self, "_edge_cache", cache)
        return cache


def incidence(g: Graph) -> IncidenceData:
    m, n = g.m, g.n
    B = np.zeros((m, n))
    if m:
        E = np.array(g.edges, dtype=np.int64)
        rows = np.arange(m)
        B[rows, E[:, 0]] = 1.0
        B[rows, E[:, 1]] = -1.0
        owner = np.concatenate([E[:, 0], E[:, 1]])
        peer = np.concatenate([E[:, 1], E[:, 0]])
    else:
        owner = peer = np.zeros(0, dtype=np.int64)
    Bplus = np.clip(B, 0.0, None)
    Bminus = np.clip(B, None, 0.0)
    C = np.vstack([Bplus, Bminus])
    sign = np.concatenate([np.ones(m), -np.ones(m)])
    rev = np.concatenate([np.arange(m, 2 * m), np.arange(m)]).astype(np.int64)
    arrays = (B, Bplus, Bminus, C, owner, peer, sign, rev)
    for a in arrays:
        a.setflags(write=False)
    deg = g.degrees
    deg.setflags(write=False)
    return IncidenceData(g, B, Bplus, Bminus, C, owner.astype(np.int64),
                         peer.astype(np.int64), sign, rev, deg)


@dataclass(frozen=True)
class HonestPartition:
    graph: Graph = field(repr=False)
    corrupt: frozenset[int]
    honest: frozenset[int]
    honest_edges: tuple[tuple[int, int], ...] = field(repr=False)
    corrupt_edges: tuple[tuple[int, int], ...] = field(repr=False)
    components: tuple[tuple[int, ...], ...]

    @property
    def k_h(self) -> int:
        return len(self.components)

    def honest_neighbors(self, i: int) -> frozenset[int]:
        return frozenset(j for j in self.graph.adjacency[i] if j in self.honest)

    def corrupt_neighbors(self, i: int) -> frozenset[int]:
        return frozenset(j for j in self.graph.adjacency[i] if j in self.corrupt)

    def component_of(self, i: int) -> tuple[int, ...]:
        for comp in self.components:
            if i in comp:
                return comp
        raise KeyError(f"node {i} is not honest")


def honest_partition(g: Graph, corrupt: Iterable[int]) -> HonestPartition:
    """Split ``g`` into corrupt nodes and connected honest components.

    Components are listed in order of their smallest node, nodes sorted
    inside each component, so the result does not depend on the order of
    ``corrupt``.
    """
    corrupt = frozenset(int(c) for c in corrupt)
    if any(not 0 <= c < g.n for c in corrupt):
        raise ValueError("corrupt node out of range")
    honest = frozenset(range(g.n)) - corrupt
    e_h = tuple(e for e in g.edges if e[0] in honest and e[1] in honest)
    e_c = tuple(e for e in g.edges if e[0] in corrupt or e[1] in corrupt)
    comps = []
    left = set(honest)
    for start in sorted(honest):
        if start not in left:
            continue
        comp = _reach(g.adjacency, start, allowed=honest)
        left -= comp
        comps.append(tuple(sorted(comp)))
    return HonestPartition(g, corrupt, honest, e_h, e_c, tuple(comps))


def component_sums(p: HonestPartition, s) -> list[float]:
    s = np.asarray(s)
    return [s[list(comp)].sum() for comp in p.components]


def write_graph(g: Graph, path, with_coords: bool = True) -> None:
    """Write ``n m`` then one ``i j`` line per edge, then ``i x y z`` lines."""
    lines = [f"{g.n} {g.m}"]
    lines += [f"{i} {j}" for i, j in g.edges]
    if with_coords and g.coords is not None:
        for i, row in enumerate(g.coords):
            lines.append(" ".join([str(i)] + [repr(float(v)) for v in row]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_graph(path) -> Graph:
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip()]
    n, m = int(rows[0][0]), int(rows[0][1])
    edges = [(int(a), int(b)) for a, b in rows[1:1 + m]]
    coord_rows = rows[1 + m:]
    coords = None
    if coord_rows:
        coords = np.zeros((n, len(coord_rows[0]) - 1))
        for r in coord_rows:
            coords[int(r[0])] = [float(v) for v in r[1:]]
    return from_edges(n, edges, coords)
