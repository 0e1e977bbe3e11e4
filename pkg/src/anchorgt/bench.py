"""Scaling measurements for anchor selection and sparse attention."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from .anchor import select_k_ds
from .attention import init_params, transformer_block_forward
from .encoding import SpdBucketing, compute_receptive_fields, count_receptive_pairs
from .graph import Graph, GraphInputError, complete, cycle, erdos_renyi, grid, path, star

FAMILIES = ("cycle", "path", "star", "grid", "er", "complete")


@dataclass(frozen=True)
class ScalingRecord:
    family: str
    n: int
    m: int
    k: int
    seed: int
    anchors: int
    n_k_max: int
    select_ops: int
    attn_pairs: int
    dense_pairs: int
    wall_ns: Optional[int] = None

    @property
    def pair_bound(self) -> int:
        return self.n * (self.n_k_max + self.anchors)

    @property
    def select_bound(self) -> float:
        return self.n * ((math.log2(self.n) if self.n > 1 else 0.0) + self.n_k_max)


def family_graph(family: str, n: int, seed: int = 0) -> Graph:
    """Graph of roughly ``n`` nodes. Grids use the largest square not above ``n``;
    ER uses ``p = 8/n`` so expected degree stays fixed."""
    if family == "cycle":
        return cycle(n)
    if family == "path":
        return path(n)
    if family == "star":
        return star(n)
    if family == "complete":
        return complete(n)
    if family == "grid":
        w = math.isqrt(n)
        return grid(w, w)
    if family == "er":
        return erdos_renyi(n, min(1.0, 8.0 / n), seed)
    raise GraphInputError(f"unknown family {family!r}; expected one of {FAMILIES}")


def measure(g: Graph, family: str, k: int, seed: int, time_forward: bool = False, d: int = 16, h: int = 4) -> ScalingRecord:
    s = select_k_ds(g, k, seed)
    pairs, n_k_max = count_receptive_pairs(g, s)
    wall = None
    if time_forward:
        bucketing = SpdBucketing.default_for(k)
        rf = compute_receptive_fields(g, s, bucketing)
        p = init_params(d, h, bucketing.n_buckets, seed)
        x = np.random.default_rng(seed).standard_normal((g.n, d))
        runs = []
        for _ in range(3):
            t0 = time.perf_counter_ns()
            transformer_block_forward(x, rf, p)
            runs.append(time.perf_counter_ns() - t0)
        wall = min(runs)
    return ScalingRecord(family, g.n, g.m, k, seed, s.size, n_k_max, s.op_count, pairs, g.n * g.n, wall)


def scaling_sweep(
    family: str, sizes: Sequence[int], k: int = 1, seeds: Iterable[int] = (0,), time_forward: bool = False
) -> list[ScalingRecord]:
    """One record per (size, seed). Counts are deterministic; timing is best of 3 and opt-in."""
    if list(sizes) != sorted(sizes):
        raise ValueError("sizes must be ascending")
    seeds = list(seeds)
    return [measure(family_graph(family, n, seed), family, k, seed, time_forward) for n in sizes for seed in seeds]


def fit_exponent(ns: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(n)."""
    ns = np.asarray(ns, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if len(np.unique(ns)) < 4:
        raise ValueError("need at least 4 distinct sizes to fit a scaling exponent")
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


def record_exponent(records: Sequence[ScalingRecord], field: str = "attn_pairs") -> float:
    return fit_exponent([r.n for r in records], [getattr(r, field) for r in records])


COLUMNS = [f.name for f in fields(ScalingRecord)]


def records_to_csv(records: Sequence[ScalingRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in records:
        row = asdict(r)
        if row["wall_ns"] is None:
            row["wall_ns"] = ""
        writer.writerow(row)
    return buf.getvalue()


def records_from_csv(text: str) -> list[ScalingRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        vals = {k: (row[k] if k == "family" else int(row[k]) if row[k] != "" else None) for k in COLUMNS}
        out.append(ScalingRecord(**vals))
    return out


def parse_sizes(spec: str) -> list[int]:
    """``64:8192`` doubles from 64 to 8192; ``10,20,40`` lists sizes explicitly."""
    if ":" in spec:
        lo, hi = (int(t) for t in spec.split(":"))
        if lo < 1 or hi < lo:
            raise ValueError(f"bad size range {spec!r}")
        sizes = []
        while lo <= hi:
            sizes.append(lo)
            lo *= 2
        return sizes
    return sorted(int(t) for t in spec.split(","))
