"""Greedy k-dominating-set anchor selection.

Selection repeatedly takes a still-labeled node of maximal (static) degree,
breaking ties uniformly at random, and unlabels its closed k-hop
neighborhood. :func:`greedy_outcome_distribution` branches over every tie
instead of sampling, which gives the exact distribution of anchor sets on
small graphs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .graph import Graph, GraphInputError, bounded_bfs

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood 2014).

    ``state += 0x9E3779B97F4A7C15`` then the output mix
    ``z = (z ^ z>>30) * 0xBF58476D1CE4E5B9; z = (z ^ z>>27) * 0x94D049BB133111EB;
    z ^ z>>31``, all modulo 2**64. Spelled out so anchor choices are
    bit-reproducible from the seed alone.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` by rejection (no modulo bias)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound


@dataclass(frozen=True)
class AnchorSet:
    nodes: tuple[int, ...]
    k: int
    seed: int
    op_count: int = 0
    order: tuple[int, ...] = ()  # anchors in selection order

    @property
    def size(self) -> int:
        return len(self.nodes)

    def __contains__(self, v: int) -> bool:
        return v in self.nodes


def _check_args(g: Graph, k: int) -> None:
    if g.n == 0:
        raise GraphInputError("cannot select anchors on an empty graph")
    if k < 1:
        raise GraphInputError(f"coverage radius must be >= 1, got {k}")


def select_k_ds(g: Graph, k: int, seed: int) -> AnchorSet:
    """Greedy k-dominating set with seeded uniform tie-breaking.

    ``op_count`` charges one step per node placed into a degree bucket, one
    per bucket scanned while looking for the current maximum, and one per
    neighbor-list entry read during the k-hop sweeps.
    """
    _check_args(g, k)
    rng = SplitMix64(seed)
    degrees = g.degrees.tolist()
    max_deg = max(degrees)

    # Counting sort into degree buckets; each bucket supports O(1) removal.
    buckets: list[list[int]] = [[] for _ in range(max_deg + 1)]
    slot = [0] * g.n
    for v, d in enumerate(degrees):
        slot[v] = len(buckets[d])
        buckets[d].append(v)
    ops = g.n

    labeled = [True] * g.n
    remaining = g.n

    def unlabel(v: int) -> None:
        bucket = buckets[degrees[v]]
        i, last = slot[v], bucket[-1]
        bucket[i] = last
        slot[last] = i
        bucket.pop()
        labeled[v] = False

    order = []
    top = max_deg
    while remaining:
        while not buckets[top]:
            top -= 1
            ops += 1
        ties = buckets[top]
        a = ties[rng.below(len(ties))] if len(ties) > 1 else ties[0]
        order.append(a)
        hood, queries = bounded_bfs(g, a, k)
        ops += queries
        for v in hood:
            if labeled[v]:
                unlabel(v)
                remaining -= 1
    return AnchorSet(tuple(sorted(order)), k, seed, ops, tuple(order))


def verify_k_ds(g: Graph, s: AnchorSet) -> bool:
    """True iff every node lies within distance ``s.k`` of some anchor."""
    covered = [False] * g.n
    for a in s.nodes:
        g.check_node(a)
        for v in bounded_bfs(g, a, s.k)[0]:
            covered[v] = True
    return all(covered)


def greedy_outcome_distribution(g: Graph, k: int, max_nodes: int = 12) -> dict[tuple[int, ...], Fraction]:
    """Exact distribution of anchor sets over all tie-breaking choices.

    Every tie among ``t`` nodes is taken with probability ``1/t``, matching
    :func:`select_k_ds`. Raises for graphs larger than ``max_nodes``.
    """
    _check_args(g, k)
    if g.n > max_nodes:
        raise ValueError(f"graph has {g.n} nodes; exhaustive enumeration limited to {max_nodes}")
    degrees = g.degrees.tolist()
    hoods = [sum(1 << v for v in bounded_bfs(g, a, k)[0]) for a in range(g.n)]

    # memo: bitmask of labeled nodes -> {anchor bitmask picked from here on: prob}
    memo: dict[int, dict[int, Fraction]] = {0: {0: Fraction(1)}}

    def expand(left: int) -> dict[int, Fraction]:
        if left in memo:
            return memo[left]
        cands = [v for v in range(g.n) if left >> v & 1]
        best = max(degrees[v] for v in cands)
        ties = [v for v in cands if degrees[v] == best]
        share = Fraction(1, len(ties))
        dist: dict[int, Fraction] = {}
        for a in ties:
            for rest, p in expand(left & ~hoods[a] & ~(1 << a)).items():
                key = rest | (1 << a)
                dist[key] = dist.get(key, Fraction(0)) + share * p
        memo[left] = dist
        return dist

    full = (1 << g.n) - 1
    return {
        tuple(v for v in range(g.n) if mask >> v & 1): p
        for mask, p in sorted(expand(full).items())
    }


def enumerate_greedy_outcomes(g: Graph, k: int, max_nodes: int = 12) -> set[tuple[int, ...]]:
    """Support of :func:`greedy_outcome_distribution`: every reachable anchor set."""
    return set(greedy_outcome_distribution(g, k, max_nodes))


def anchor_report(g: Graph, s: AnchorSet) -> dict:
    return {
        "k": s.k,
        "seed": s.seed,
        "anchors": list(s.nodes),
        "op_count": s.op_count,
        "coverage_ok": verify_k_ds(g, s),
    }
