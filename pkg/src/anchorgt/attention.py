"""Anchor-restricted multi-head attention and the pre-LN transformer block.

All arithmetic is float64. Attention rows are segments of the receptive
field's CSR arrays; nodes outside ``R(v)`` are never touched.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .encoding import ReceptiveField

LN_EPS = 1e-5


class ShapeError(ValueError):
    pass


class NumericError(FloatingPointError):
    pass


@dataclass
class LayerParams:
    w_q: np.ndarray  # (h, d, d_head)
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray  # (d, d)
    bias_table: np.ndarray  # (h, n_buckets)
    w1: np.ndarray  # (d, d_ff)
    b1: np.ndarray
    w2: np.ndarray  # (d_ff, d)
    b2: np.ndarray
    ln1_scale: np.ndarray
    ln1_shift: np.ndarray
    ln2_scale: np.ndarray
    ln2_shift: np.ndarray

    @property
    def h(self) -> int:
        return self.w_q.shape[0]

    @property
    def d(self) -> int:
        return self.w_q.shape[1]

    @property
    def d_head(self) -> int:
        return self.w_q.shape[2]

    @property
    def n_buckets(self) -> int:
        return self.bias_table.shape[1]

    def named(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "LayerParams":
        return LayerParams(**{k: v.copy() for k, v in self.named().items()})

    def zeros_like(self) -> "LayerParams":
        return LayerParams(**{k: np.zeros_like(v) for k, v in self.named().items()})

    def validate(self) -> None:
        h, d, dh = self.w_q.shape
        if h * dh != d:
            raise ShapeError(f"{h} heads of width {dh} do not tile model width {d}")
        for name, arr in self.named().items():
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"parameter {name} has non-finite entries")
        expected = {
            "w_k": (h, d, dh), "w_v": (h, d, dh), "w_o": (d, d),
            "b2": (d,), "ln1_scale": (d,), "ln1_shift": (d,), "ln2_scale": (d,), "ln2_shift": (d,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        d_ff = self.w1.shape[1]
        if self.w1.shape != (d, d_ff) or self.b1.shape != (d_ff,) or self.w2.shape != (d_ff, d):
            raise ShapeError("feed-forward weights have inconsistent shapes")
        if self.bias_table.ndim != 2 or self.bias_table.shape[0] != h:
            raise ShapeError("bias_table must have one row per head")


def init_params(d: int, h: int, n_buckets: int, seed: int, d_ff: Optional[int] = None) -> LayerParams:
    """Seeded uniform(-1/sqrt(d), 1/sqrt(d)) weights; LayerNorm starts at scale 1, shift 0."""
    if h <= 0 or d % h:
        raise ShapeError(f"head count {h} must divide width {d}")
    d_ff = 2 * d if d_ff is None else d_ff
    dh = d // h
    rng = np.random.default_rng(seed)
    lim = 1.0 / np.sqrt(d)

    def u(*shape):
        return rng.uniform(-lim, lim, size=shape)

    return LayerParams(
        w_q=u(h, d, dh), w_k=u(h, d, dh), w_v=u(h, d, dh), w_o=u(d, d),
        bias_table=u(h, n_buckets),
        w1=u(d, d_ff), b1=u(d_ff), w2=u(d_ff, d), b2=u(d),
        ln1_scale=np.ones(d), ln1_shift=np.zeros(d),
        ln2_scale=np.ones(d), ln2_shift=np.zeros(d),
    )


def zero_params(d: int, h: int, n_buckets: int, d_ff: Optional[int] = None) -> LayerParams:
    p = init_params(d, h, n_buckets, 0, d_ff).zeros_like()
    p.ln1_scale[:] = 1.0
    p.ln2_scale[:] = 1.0
    return p


def save_params(layers: list[LayerParams], path: str | Path) -> None:
    """Checkpoint as ``.npz``: arrays named ``layer{i}.{field}`` with their shapes."""
    arrays = {f"layer{i}.{k}": v for i, p in enumerate(layers) for k, v in p.named().items()}
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_params(path: str | Path) -> list[LayerParams]:
    with np.load(path) as data:
        grouped: dict[int, dict[str, np.ndarray]] = {}
        for key in data.files:
            layer, name = key.split(".", 1)
            grouped.setdefault(int(layer[len("layer"):]), {})[name] = data[key]
    return [LayerParams(**grouped[i]) for i in sorted(grouped)]


# --------------------------------------------------------------------------
# forward / backward


@dataclass
class AttentionWeights:
    """Sparse softmax weights: ``alpha[head, e]`` for entry ``e = (rows[e], targets[e])``."""

    rows: np.ndarray
    targets: np.ndarray
    alpha: np.ndarray

    def records(self):
        for hd in range(self.alpha.shape[0]):
            for v, u, a in zip(self.rows.tolist(), self.targets.tolist(), self.alpha[hd].tolist()):
                yield v, u, hd, a

    def row_sums(self, indptr: np.ndarray) -> np.ndarray:
        return np.add.reduceat(self.alpha, indptr[:-1], axis=1)


def _check_inputs(x: np.ndarray, rf: ReceptiveField, p: LayerParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != p.d:
        raise ShapeError(f"features of shape {x.shape} do not match model width {p.d}")
    if x.shape[0] != rf.n:
        raise ShapeError(f"{x.shape[0]} feature rows for a receptive field over {rf.n} nodes")
    if not np.all(np.isfinite(x)):
        raise NumericError("input features contain NaN or Inf")
    p.validate()
    if rf.total_pairs and rf.buckets.max() >= p.n_buckets:
        raise ShapeError(f"bucket {rf.buckets.max()} exceeds bias table of size {p.n_buckets}")
    return x


def _attend(z, rf, p):
    """Core attention on normalized input ``z``. Returns output and a cache."""
    rows, tgt, starts = rf.rows, rf.targets, rf.indptr[:-1]
    scale = 1.0 / np.sqrt(p.d_head)
    q = np.einsum("nd,hde->hne", z, p.w_q)
    k = np.einsum("nd,hde->hne", z, p.w_k)
    v = np.einsum("nd,hde->hne", z, p.w_v)
    qe, ke, ve = q[:, rows], k[:, tgt], v[:, tgt]
    scores = np.einsum("hpe,hpe->hp", qe, ke) * scale + p.bias_table[:, rf.buckets]
    row_max = np.maximum.reduceat(scores, starts, axis=1)
    ex = np.exp(scores - row_max[:, rows])
    alpha = ex / np.add.reduceat(ex, starts, axis=1)[:, rows]
    heads = np.add.reduceat(alpha[..., None] * ve, starts, axis=1)  # (h, n, dh)
    concat = heads.transpose(1, 0, 2).reshape(z.shape[0], -1)
    cache = dict(q=q, k=k, v=v, qe=qe, ke=ke, ve=ve, alpha=alpha, concat=concat, scale=scale)
    return concat, cache


def anchor_attention_forward(x, rf: ReceptiveField, p: LayerParams) -> tuple[np.ndarray, AttentionWeights]:
    """Multi-head attention of every node over its receptive field, then ``W_O``."""
    x = _check_inputs(x, rf, p)
    concat, cache = _attend(x, rf, p)
    return concat @ p.w_o, AttentionWeights(rf.rows, rf.targets, cache["alpha"])


def attention_heads(x, rf: ReceptiveField, p: LayerParams) -> np.ndarray:
    """Concatenated head outputs before the output projection."""
    x = _check_inputs(x, rf, p)
    return _attend(x, rf, p)[0]


def _layer_norm(x, scale, shift):
    mu = x.mean(axis=1, keepdims=True)
    sigma = np.sqrt(((x - mu) ** 2).mean(axis=1, keepdims=True) + LN_EPS)
    xhat = (x - mu) / sigma
    return xhat * scale + shift, (xhat, sigma)


def _layer_norm_backward(dz, scale, cache):
    xhat, sigma = cache
    dxhat = dz * scale
    dx = (dxhat - dxhat.mean(axis=1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)) / sigma
    return dx, (dz * xhat).sum(axis=0), dz.sum(axis=0)


def _block(x, rf, p):
    z1, ln1 = _layer_norm(x, p.ln1_scale, p.ln1_shift)
    concat, att = _attend(z1, rf, p)
    hid = concat @ p.w_o + x
    z2, ln2 = _layer_norm(hid, p.ln2_scale, p.ln2_shift)
    f1 = z2 @ p.w1 + p.b1
    r = np.maximum(f1, 0.0)
    out = r @ p.w2 + p.b2 + hid
    return out, dict(z1=z1, ln1=ln1, att=att, z2=z2, ln2=ln2, f1=f1, r=r)


def transformer_block_forward(x, rf: ReceptiveField, p: LayerParams) -> np.ndarray:
    """``H = MHA(LN(x)) + x``; ``out = FFN(LN(H)) + H`` with a ReLU FFN."""
    x = _check_inputs(x, rf, p)
    return _block(x, rf, p)[0]


def transformer_block_backward(x, rf: ReceptiveField, p: LayerParams, upstream) -> tuple[np.ndarray, LayerParams]:
    """Gradients of ``L = sum(upstream * block(x))`` w.r.t. ``x`` and every parameter."""
    x = _check_inputs(x, rf, p)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != x.shape:
        raise ShapeError(f"upstream gradient shape {upstream.shape} != output shape {x.shape}")
    _, c = _block(x, rf, p)
    g = p.zeros_like()
    n, h, dh = x.shape[0], p.h, p.d_head

    # feed-forward branch
    g.w2 = c["r"].T @ upstream
    g.b2 = upstream.sum(axis=0)
    df1 = (upstream @ p.w2.T) * (c["f1"] > 0)
    g.w1 = c["z2"].T @ df1
    g.b1 = df1.sum(axis=0)
    dhid, g.ln2_scale, g.ln2_shift = _layer_norm_backward(df1 @ p.w1.T, p.ln2_scale, c["ln2"])
    dhid += upstream

    # attention branch
    att = c["att"]
    g.w_o = att["concat"].T @ dhid
    dheads = (dhid @ p.w_o.T).reshape(n, h, dh).transpose(1, 0, 2)  # (h, n, dh)
    rows, tgt, starts = rf.rows, rf.targets, rf.indptr[:-1]
    alpha, scale = att["alpha"], att["scale"]
    de = dheads[:, rows]  # upstream per entry, (h, P, dh)
    dalpha = np.einsum("hpe,hpe->hp", de, att["ve"])
    dscore = alpha * (dalpha - np.add.reduceat(alpha * dalpha, starts, axis=1)[:, rows])
    for hd in range(h):
        g.bias_table[hd] = np.bincount(rf.buckets, weights=dscore[hd], minlength=p.n_buckets)
    dq = np.zeros((h, n, dh))
    dk = np.zeros((h, n, dh))
    dv = np.zeros((h, n, dh))
    np.add.at(dq, (slice(None), rows), dscore[..., None] * att["ke"] * scale)
    np.add.at(dk, (slice(None), tgt), dscore[..., None] * att["qe"] * scale)
    np.add.at(dv, (slice(None), tgt), alpha[..., None] * de)
    z1 = c["z1"]
    g.w_q = np.einsum("nd,hne->hde", z1, dq)
    g.w_k = np.einsum("nd,hne->hde", z1, dk)
    g.w_v = np.einsum("nd,hne->hde", z1, dv)
    dz1 = (
        np.einsum("hne,hde->nd", dq, p.w_q)
        + np.einsum("hne,hde->nd", dk, p.w_k)
        + np.einsum("hne,hde->nd", dv, p.w_v)
    )
    dx, g.ln1_scale, g.ln1_shift = _layer_norm_backward(dz1, p.ln1_scale, c["ln1"])
    return dx + dhid, g
