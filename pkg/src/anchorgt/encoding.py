"""Receptive fields ``R(v) = N_k(v) | S`` with bucketed shortest-path encodings."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .anchor import AnchorSet
from .graph import UNREACHABLE, Graph, bfs_distances, bounded_bfs


class EncodingConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SpdBucketing:
    """Clamp SPDs to ``d_max``; unreachable pairs get their own bucket ``d_max + 1``."""

    d_max: int

    def __post_init__(self):
        if self.d_max < 0:
            raise EncodingConfigError("d_max must be non-negative")

    @classmethod
    def default_for(cls, k: int) -> "SpdBucketing":
        return cls(2 * k + 2)

    @property
    def unreachable_bucket(self) -> int:
        return self.d_max + 1

    @property
    def n_buckets(self) -> int:
        return self.d_max + 2

    def bucket(self, d: int) -> int:
        if d == UNREACHABLE:
            return self.d_max + 1
        return min(int(d), self.d_max)

    def bucket_array(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=np.int64)
        return np.where(d == UNREACHABLE, self.d_max + 1, np.minimum(d, self.d_max))


@dataclass(frozen=True, eq=False)
class ReceptiveField:
    """Per-node attention support in CSR form.

    Row ``v`` lists targets ``targets[indptr[v]:indptr[v+1]]`` (ascending)
    with encoded distances in the matching slice of ``buckets``.
    ``in_hood`` marks entries drawn from ``N_k(v)`` as opposed to anchors
    outside it.
    """

    k: int
    anchors: tuple[int, ...]
    d_max: int
    indptr: np.ndarray
    targets: np.ndarray
    buckets: np.ndarray
    in_hood: np.ndarray

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @property
    def total_pairs(self) -> int:
        return len(self.targets)

    @property
    def rows(self) -> np.ndarray:
        """Row index of every entry."""
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    def entries(self, v: int) -> list[tuple[int, int]]:
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return list(zip(self.targets[lo:hi].tolist(), self.buckets[lo:hi].tolist()))

    def with_buckets(self, buckets: np.ndarray) -> "ReceptiveField":
        """Same support, different encoding values (used to test validators)."""
        buckets = np.asarray(buckets, dtype=np.int64)
        if buckets.shape != self.buckets.shape:
            raise EncodingConfigError("bucket array does not match the receptive field")
        return ReceptiveField(self.k, self.anchors, self.d_max, self.indptr, self.targets, buckets, self.in_hood)


def compute_receptive_fields(g: Graph, s: AnchorSet, bucketing: Optional[SpdBucketing] = None) -> ReceptiveField:
    """Depth-k BFS per node plus one full BFS per anchor; no all-pairs work."""
    k = s.k
    if bucketing is None:
        bucketing = SpdBucketing.default_for(k)
    # at d_max == k an anchor at distance k+1 clamps onto the bucket of
    # in-neighborhood pairs at distance k
    if bucketing.d_max <= k:
        raise EncodingConfigError(
            f"d_max={bucketing.d_max} <= k={k} would merge neighborhood and anchor buckets"
        )
    anchor_dist = {a: bfs_distances(g, a).dist for a in s.nodes}
    indptr = np.zeros(g.n + 1, dtype=np.int64)
    targets, buckets, in_hood = [], [], []
    for v in range(g.n):
        row = bounded_bfs(g, v, k)[0]
        hood = set(row)
        for a in s.nodes:
            if a not in hood:
                row[a] = int(anchor_dist[a][v])
        for u in sorted(row):
            targets.append(u)
            buckets.append(bucketing.bucket(row[u]))
            in_hood.append(u in hood)
        indptr[v + 1] = len(targets)
    return ReceptiveField(
        k,
        tuple(s.nodes),
        bucketing.d_max,
        indptr,
        np.array(targets, dtype=np.int64),
        np.array(buckets, dtype=np.int64),
        np.array(in_hood, dtype=bool),
    )


def count_receptive_pairs(g: Graph, s: AnchorSet) -> tuple[int, int]:
    """``(sum_v |R(v)|, max_v |N_k(v)|)`` without materializing the field.

    Uses ``|N_k(v) | S| = |N_k(v)| + A - |N_k(v) & S|`` and the symmetry
    ``sum_v |N_k(v) & S| = sum_{a in S} |N_k(a)|``.
    """
    sizes = [len(bounded_bfs(g, v, s.k)[0]) for v in range(g.n)]
    overlap = sum(sizes[a] for a in s.nodes)
    return sum(sizes) + g.n * len(s.nodes) - overlap, max(sizes, default=0)


def attention_pair_count(rf: ReceptiveField) -> int:
    """Score evaluations per head: ``sum_v |R(v)|``."""
    return rf.total_pairs


def _edge_mask(rf: ReceptiveField, g: Graph) -> np.ndarray:
    rows = rf.rows
    mask = np.zeros(rf.total_pairs, dtype=bool)
    for i, (v, u) in enumerate(zip(rows.tolist(), rf.targets.tolist())):
        nb = g.neighbors(v)
        j = np.searchsorted(nb, u)
        mask[i] = j < len(nb) and nb[j] == u
    return mask


def _separable(values: np.ndarray, flag: np.ndarray) -> bool:
    # a 0/1 map on encoding values exists iff no value occurs on both sides
    return not (set(values[flag].tolist()) & set(values[~flag].tolist()))


def check_neighbor_distinguishable(rf: ReceptiveField, g: Graph) -> bool:
    """Can adjacency be read off the encoding value of every receptive-field pair?"""
    return _separable(rf.buckets, _edge_mask(rf, g))


def check_anchor_distinguishable(rf: ReceptiveField, g: Graph) -> bool:
    """Can "anchor outside N_k(v)" be read off the encoding value of every pair?"""
    anchors = np.zeros(g.n, dtype=bool)
    anchors[list(rf.anchors)] = True
    return _separable(rf.buckets, anchors[rf.targets] & ~rf.in_hood)


def format_receptive_field(rf: ReceptiveField) -> str:
    """CSV text: a ``# k=.. anchors=a;b d_max=..`` line, a header, then ``v,u,spd_bucket`` rows."""
    anchors = ";".join(map(str, rf.anchors))
    lines = [f"# k={rf.k} anchors={anchors} d_max={rf.d_max}", "v,u,spd_bucket"]
    for v, u, b in zip(rf.rows.tolist(), rf.targets.tolist(), rf.buckets.tolist()):
        lines.append(f"{v},{u},{b}")
    return "\n".join(lines) + "\n"


def write_receptive_field(rf: ReceptiveField, path: str | Path) -> None:
    Path(path).write_text(format_receptive_field(rf))


def read_receptive_field(path: str | Path, n: int) -> ReceptiveField:
    """Inverse of :func:`write_receptive_field` for a graph with ``n`` nodes."""
    lines = Path(path).read_text().splitlines()
    meta = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split())
    k, d_max = int(meta["k"]), int(meta["d_max"])
    anchors = tuple(int(a) for a in meta["anchors"].split(";") if a)
    rows, targets, buckets = [], [], []
    for line in lines[2:]:
        v, u, b = (int(x) for x in line.split(","))
        rows.append(v)
        targets.append(u)
        buckets.append(b)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(np.array(rows, dtype=np.int64), minlength=n), out=indptr[1:])
    buckets_arr = np.array(buckets, dtype=np.int64)
    anchor_mask = np.zeros(n, dtype=bool)
    anchor_mask[list(anchors)] = True
    targets_arr = np.array(targets, dtype=np.int64)
    # anchors outside N_k(v) are exactly the entries encoded beyond k
    in_hood = ~anchor_mask[targets_arr] | (buckets_arr <= k)
    return ReceptiveField(k, anchors, d_max, indptr, targets_arr, buckets_arr, in_hood)

