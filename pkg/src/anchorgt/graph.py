"""Immutable undirected graphs in CSR form, BFS traversals and generators."""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

# Strictly greater than any realizable shortest-path distance, so "dist <= k"
# stays a valid membership test without branching.
UNREACHABLE = 2**31 - 1


class GraphInputError(ValueError):
    """Malformed graph input (bad endpoint, self-loop, bad generator spec)."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph stored as sorted CSR adjacency.

    ``indptr`` has length ``n + 1``; the neighbors of ``v`` are
    ``indices[indptr[v]:indptr[v + 1]]`` in ascending order.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    features: Optional[np.ndarray] = field(default=None)

    @property
    def m(self) -> int:
        return len(self.indices) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def edges(self) -> list[tuple[int, int]]:
        """Edges as ``(u, v)`` pairs with ``u < v``, lexicographically sorted."""
        out = []
        for u in range(self.n):
            for w in self.neighbors(u):
                if u < w:
                    out.append((u, int(w)))
        return out

    def adjacency_lists(self) -> list[list[int]]:
        return [self.neighbors(v).tolist() for v in range(self.n)]

    def with_features(self, features: np.ndarray) -> "Graph":
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != self.n:
            raise GraphInputError(f"feature matrix must have {self.n} rows, got shape {features.shape}")
        return Graph(self.n, self.indptr, self.indices, features)

    def check_node(self, v: int) -> None:
        if not (0 <= v < self.n):
            raise GraphInputError(f"node {v} out of range for graph with {self.n} nodes")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        if self.n != other.n or not np.array_equal(self.indptr, other.indptr):
            return False
        if not np.array_equal(self.indices, other.indices):
            return False
        if (self.features is None) != (other.features is None):
            return False
        return self.features is None or np.array_equal(self.features, other.features)

    def __hash__(self) -> int:
        return hash((self.n, self.indices.tobytes(), self.indptr.tobytes()))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


def from_edge_list(n: int, edges: Iterable[Sequence[int]], features: Optional[np.ndarray] = None) -> Graph:
    """Build the canonical graph on ``n`` nodes; duplicate edges collapse."""
    if n < 0:
        raise GraphInputError("node count must be non-negative")
    pairs = set()
    for e in edges:
        u, v = int(e[0]), int(e[1])
        if not (0 <= u < n and 0 <= v < n):
            raise GraphInputError(f"edge ({u}, {v}) has an endpoint outside [0, {n})")
        if u == v:
            raise GraphInputError(f"self-loop at node {u}")
        pairs.add((u, v) if u < v else (v, u))
    return _from_unique_pairs(n, np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2), features)


def _from_unique_pairs(n: int, pairs: np.ndarray, features: Optional[np.ndarray] = None) -> Graph:
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    indptr.flags.writeable = False
    dst = dst.astype(np.int64)
    dst.flags.writeable = False
    g = Graph(n, indptr, dst)
    return g.with_features(features) if features is not None else g


def relabel(g: Graph, perm: Sequence[int]) -> Graph:
    """Return the graph with node ``u`` renamed to ``perm[u]``."""
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(g.n)):
        raise GraphInputError("relabeling must be a permutation of the node ids")
    edges = [(perm[u], perm[v]) for u, v in g.edges()]
    feats = None
    if g.features is not None:
        feats = np.empty_like(g.features)
        feats[perm] = g.features
    return from_edge_list(g.n, edges, feats)


# --------------------------------------------------------------------------
# traversal


@dataclass(frozen=True)
class BfsResult:
    source: int
    dist: np.ndarray

    def reachable(self) -> np.ndarray:
        return self.dist != UNREACHABLE


def bfs_distances(g: Graph, source: int) -> BfsResult:
    g.check_node(source)
    dist = np.full(g.n, UNREACHABLE, dtype=np.int64)
    dist[source] = 0
    indptr, indices = g.indptr, g.indices
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for w in indices[indptr[u] : indptr[u + 1]]:
            if dist[w] == UNREACHABLE:
                dist[w] = du
                queue.append(w)
    dist.flags.writeable = False
    return BfsResult(source, dist)


def bounded_bfs(g: Graph, source: int, k: int) -> tuple[dict[int, int], int]:
    """Depth-``k`` BFS. Returns ``({node: spd}, adjacency_queries)``.

    One adjacency query is charged per neighbor-list entry inspected.
    """
    found = {source: 0}
    frontier = [source]
    queries = 0
    indptr, indices = g.indptr, g.indices
    for depth in range(1, k + 1):
        nxt = []
        for u in frontier:
            nbrs = indices[indptr[u] : indptr[u + 1]]
            queries += len(nbrs)
            for w in nbrs.tolist():
                if w not in found:
                    found[w] = depth
                    nxt.append(w)
        if not nxt:
            break
        frontier = nxt
    return found, queries


def k_hop_neighborhood(g: Graph, v: int, k: int) -> dict[int, int]:
    """Nodes within shortest-path distance ``k`` of ``v``, mapped to that distance."""
    g.check_node(v)
    if k < 0:
        raise GraphInputError("radius must be non-negative")
    return bounded_bfs(g, v, k)[0]


def max_k_hop_size(g: Graph, k: int) -> int:
    return max((len(bounded_bfs(g, v, k)[0]) for v in range(g.n)), default=0)


def connected_components(g: Graph) -> int:
    seen = np.zeros(g.n, dtype=bool)
    count = 0
    for s in range(g.n):
        if not seen[s]:
            count += 1
            seen[bfs_distances(g, s).reachable()] = True
    return count


def is_connected(g: Graph) -> bool:
    return g.n > 0 and connected_components(g) == 1


# --------------------------------------------------------------------------
# generators


def _require_nodes(n: int, minimum: int = 1) -> None:
    if n < minimum:
        raise GraphInputError(f"need at least {minimum} node(s), got {n}")


def single() -> Graph:
    return from_edge_list(1, [])


def cycle(n: int) -> Graph:
    _require_nodes(n, 3)
    return from_edge_list(n, [(i, (i + 1) % n) for i in range(n)])


def path(n: int) -> Graph:
    _require_nodes(n)
    return from_edge_list(n, [(i, i + 1) for i in range(n - 1)])


def star(n: int) -> Graph:
    """Center 0 joined to leaves ``1..n-1``."""
    _require_nodes(n)
    return from_edge_list(n, [(0, i) for i in range(1, n)])


def complete(n: int) -> Graph:
    _require_nodes(n)
    return from_edge_list(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def grid(w: int, h: int) -> Graph:
    _require_nodes(w)
    _require_nodes(h)
    edges = []
    for r in range(h):
        for c in range(w):
            v = r * w + c
            if c + 1 < w:
                edges.append((v, v + 1))
            if r + 1 < h:
                edges.append((v, v + w))
    return from_edge_list(w * h, edges)


def disjoint_union(g1: Graph, g2: Graph) -> Graph:
    """Nodes of ``g2`` are shifted by ``g1.n``."""
    edges = g1.edges() + [(u + g1.n, v + g1.n) for u, v in g2.edges()]
    return from_edge_list(g1.n + g2.n, edges)


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """G(n, p); deterministic for a fixed seed.

    Draws the edge count from Binomial(n(n-1)/2, p), then that many distinct
    slots of the strict lower triangle, so the cost is O(n + m).
    """
    _require_nodes(n)
    if not 0.0 <= p <= 1.0:
        raise GraphInputError(f"edge probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    slots = n * (n - 1) // 2
    m = int(rng.binomial(slots, p)) if slots else 0
    flat = np.sort(rng.choice(slots, size=m, replace=False)) if m else np.empty(0, dtype=np.int64)
    # slot t <-> (i, j) with i > j and t = i(i-1)/2 + j
    i = ((1 + np.sqrt(1 + 8 * flat.astype(np.float64))) // 2).astype(np.int64)
    i -= (i * (i - 1) // 2 > flat).astype(np.int64)
    i += ((i + 1) * i // 2 <= flat).astype(np.int64)
    j = flat - i * (i - 1) // 2
    pairs = np.stack([j, i], axis=1) if m else np.empty((0, 2), dtype=np.int64)
    return _from_unique_pairs(n, pairs)


def parse_gen_spec(spec: str) -> Graph:
    """Build a graph from an inline spec such as ``cycle:6`` or ``grid:3x3``.

    Families: ``single[:1]``, ``cycle:N``, ``path:N``, ``star:N``,
    ``complete:N``, ``grid:WxH``, ``er:N:P:SEED``, ``2cycle:N`` (two disjoint
    N-cycles) and ``union:SPEC+SPEC``.
    """
    family, _, rest = spec.partition(":")
    try:
        if family == "union":
            left, _, right = rest.partition("+")
            return disjoint_union(parse_gen_spec(left), parse_gen_spec(right))
        if family == "single":
            if rest not in ("", "1"):
                raise GraphInputError("single takes no size other than 1")
            return single()
        if family in ("cycle", "path", "star", "complete"):
            return {"cycle": cycle, "path": path, "star": star, "complete": complete}[family](int(rest))
        if family == "2cycle":
            c = cycle(int(rest))
            return disjoint_union(c, c)
        if family == "grid":
            w, _, h = rest.partition("x")
            return grid(int(w), int(h))
        if family == "er":
            n, p, seed = rest.split(":")
            return erdos_renyi(int(n), float(p), int(seed))
    except ValueError as exc:
        if isinstance(exc, GraphInputError):
            raise
        raise GraphInputError(f"bad generator spec {spec!r}: {exc}") from exc
    raise GraphInputError(f"unknown graph family in {spec!r}")


# --------------------------------------------------------------------------
# file formats


def write_edge_list(g: Graph, path: str | Path) -> None:
    """Write ``N M`` then one ``u v`` line per edge (u < v)."""
    edges = g.edges()
    lines = [f"{g.n} {len(edges)}"] + [f"{u} {v}" for u, v in edges]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path: str | Path) -> Graph:
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise GraphInputError(f"{path}: missing 'N M' header")
    try:
        n, m = int(tokens[0]), int(tokens[1])
        body = [int(t) for t in tokens[2:]]
    except ValueError as exc:
        raise GraphInputError(f"{path}: non-integer token") from exc
    if len(body) != 2 * m:
        raise GraphInputError(f"{path}: header declares {m} edges, found {len(body) / 2:g}")
    return from_edge_list(n, zip(body[0::2], body[1::2]))


def write_features(features: np.ndarray, path: str | Path) -> None:
    # repr() of a Python float round-trips exactly
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(features, dtype=np.float64):
            writer.writerow([repr(float(x)) for x in row])


def read_features(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
    if not rows:
        return np.empty((0, 0))
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise GraphInputError(f"{path}: ragged feature rows")
    arr = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise GraphInputError(f"{path}: non-finite feature value")
    return arr


def log2(n: int) -> float:
    return math.log2(n) if n > 1 else 0.0
