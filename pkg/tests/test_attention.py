import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorgt import graph as G
from anchorgt.anchor import AnchorSet, select_k_ds
from anchorgt.attention import (
    LN_EPS,
    NumericError,
    ShapeError,
    anchor_attention_forward,
    init_params,
    load_params,
    save_params,
    transformer_block_backward,
    transformer_block_forward,
    zero_params,
)
from anchorgt.encoding import SpdBucketing, compute_receptive_fields
from anchorgt.gradcheck import check_block_gradients, randomize

from conftest import small_corpus
from oracles import dense_biased_attention, scalar_block_single_node


def setup(g, k=1, d=8, h=2, seed=0, anchors=None, random_all=False):
    s = select_k_ds(g, k, seed) if anchors is None else AnchorSet(tuple(anchors), k, seed)
    b = SpdBucketing.default_for(k)
    rf = compute_receptive_fields(g, s, b)
    rng = np.random.default_rng(seed)
    p = init_params(d, h, b.n_buckets, seed)
    if random_all:
        p = randomize(p, rng)
    x = rng.standard_normal((g.n, d))
    return s, rf, p, x


def test_zero_params():
    g = G.erdos_renyi(12, 0.3, 1)
    s, rf, _, x = setup(g)
    out, w = anchor_attention_forward(x, rf, zero_params(8, 2, 6))
    assert np.all(out == 0)
    sizes = np.diff(rf.indptr)[rf.rows]
    assert np.allclose(w.alpha, 1.0 / sizes, rtol=0, atol=1e-15)


def test_single_node_attention():
    _, rf, p, x = setup(G.single(), d=4, h=1)
    out, w = anchor_attention_forward(x, rf, p)
    assert w.alpha.tolist() == [[1.0]]
    assert np.allclose(out, x @ p.w_v[0] @ p.w_o, rtol=1e-14, atol=1e-15)


def test_self_bias_limit():
    g = G.cycle(8)
    _, rf, p, x = setup(g, h=1)
    p.bias_table[0, 1:] = -1e6
    out, _ = anchor_attention_forward(x, rf, p)
    want = x @ p.w_v[0] @ p.w_o
    assert np.max(np.abs(out - want) / np.abs(want)) < 1e-6


def test_block_identity_through_residuals():
    g = G.grid(3, 3)
    _, rf, _, x = setup(g, d=16, h=4)
    out = transformer_block_forward(x, rf, zero_params(16, 4, 6))
    assert np.array_equal(out, x)


def test_block_single_node_scalar_reference():
    rng = np.random.default_rng(42)
    _, rf, p, _ = setup(G.single(), d=8, h=2, seed=42, random_all=True)
    x = rng.standard_normal((1, 8))
    got = transformer_block_forward(x, rf, p)[0]
    want = scalar_block_single_node(x[0].tolist(), p, LN_EPS)
    assert np.max(np.abs(got - np.array(want))) < 1e-12


def test_block_shape():
    g = G.erdos_renyi(10, 0.3, 5)
    _, rf, p, x = setup(g, d=16, h=4)
    assert transformer_block_forward(x, rf, p).shape == (10, 16)


def test_shape_and_numeric_errors():
    g = G.cycle(5)
    _, rf, p, x = setup(g)
    with pytest.raises(ShapeError):
        transformer_block_forward(x[:, :4], rf, p)
    with pytest.raises(ShapeError):
        transformer_block_forward(x[:4], rf, p)
    bad = x.copy()
    bad[2, 1] = np.nan
    with pytest.raises(NumericError):
        anchor_attention_forward(bad, rf, p)
    bad[2, 1] = np.inf
    with pytest.raises(NumericError):
        transformer_block_forward(bad, rf, p)
    with pytest.raises(ShapeError):
        init_params(10, 3, 6, 0)


def test_zero_upstream_gives_zero_gradients():
    _, rf, p, x = setup(G.cycle(6), random_all=True)
    dx, gp = transformer_block_backward(x, rf, p, np.zeros_like(x))
    assert not np.any(dx)
    assert all(not np.any(v) for v in gp.named().values())


def test_finite_difference_instance():
    rng = np.random.default_rng(3)
    g = G.erdos_renyi(7, 0.4, 3)
    _, rf, p, x = setup(g, k=1, d=8, h=2, seed=3, random_all=True)
    res = check_block_gradients(x, rf, p, rng.standard_normal(x.shape), step=1e-5)
    assert res.max_rel_err < 1e-5, res


def test_symmetric_input_gradients():
    c6 = G.cycle(6)
    _, rf, p, _ = setup(c6, anchors=range(6), random_all=True)
    x = np.tile(np.random.default_rng(1).standard_normal(8), (6, 1))
    up = np.tile(np.random.default_rng(2).standard_normal(8), (6, 1))
    dx, _ = transformer_block_backward(x, rf, p, up)
    assert np.allclose(dx, dx[0], rtol=0, atol=1e-12)


def test_checkpoint_round_trip(tmp_path):
    layers = [randomize(init_params(8, 2, 6, s), np.random.default_rng(s)) for s in range(3)]
    save_params(layers, tmp_path / "ck.npz")
    back = load_params(tmp_path / "ck.npz")
    assert len(back) == 3
    for a, b in zip(layers, back):
        for name, arr in a.named().items():
            assert np.array_equal(arr, getattr(b, name)) and arr.shape == getattr(b, name).shape


def test_weight_records():
    _, rf, p, x = setup(G.path(3), anchors=(1,))
    _, w = anchor_attention_forward(x, rf, p)
    recs = list(w.records())
    assert len(recs) == 2 * rf.total_pairs
    assert {(v, u) for v, u, _, _ in recs} == {(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)}


# --- properties -----------------------------------------------------------

graph_params = st.tuples(st.integers(1, 16), st.sampled_from([0.1, 0.3, 0.6]), st.integers(0, 10**6),
                         st.integers(1, 2), st.sampled_from([(8, 1), (8, 2), (16, 4)]))


@settings(max_examples=40, deadline=None)
@given(graph_params)
def test_row_stochastic_and_dense_agreement(args):
    n, prob, seed, k, (d, h) = args
    g = G.erdos_renyi(n, prob, seed)
    s, rf, p, x = setup(g, k=k, d=d, h=h, seed=seed, random_all=True)
    out, w = anchor_attention_forward(x, rf, p)
    assert np.all(np.abs(w.row_sums(rf.indptr) - 1) < 1e-9)
    dense_out, dense_alpha = dense_biased_attention(x, g.n, g.edges(), set(s.nodes), k, rf.d_max, p)
    assert np.max(np.abs(out - dense_out)) < 1e-10
    sparse_alpha = np.zeros_like(dense_alpha)
    sparse_alpha[:, rf.rows, rf.targets] = w.alpha
    assert np.max(np.abs(sparse_alpha - dense_alpha)) < 1e-10
    outside = np.ones((g.n, g.n), dtype=bool)
    outside[rf.rows, rf.targets] = False
    assert np.all(dense_alpha[:, outside] == 0)


@settings(max_examples=30, deadline=None)
@given(graph_params, st.data())
def test_permutation_equivariance(args, data):
    n, prob, seed, k, (d, h) = args
    g = G.erdos_renyi(n, prob, seed)
    s, rf, p, x = setup(g, k=k, d=d, h=h, seed=seed, random_all=True)
    perm = data.draw(st.permutations(range(n)))
    gp = G.relabel(g, perm)
    sp = AnchorSet(tuple(sorted(perm[a] for a in s.nodes)), k, 0)
    rfp = compute_receptive_fields(gp, sp, SpdBucketing(rf.d_max))
    xp = np.empty_like(x)
    xp[perm] = x
    out = transformer_block_forward(x, rf, p)
    outp = transformer_block_forward(xp, rfp, p)
    assert np.max(np.abs(outp[perm] - out)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(graph_params, st.floats(-50, 50))
def test_bias_shift_invariance(args, c):
    n, prob, seed, k, (d, h) = args
    g = G.erdos_renyi(n, prob, seed)
    _, rf, p, x = setup(g, k=k, d=d, h=h, seed=seed, random_all=True)
    _, w = anchor_attention_forward(x, rf, p)
    shifted = p.copy()
    shifted.bias_table[0] += c
    _, w2 = anchor_attention_forward(x, rf, shifted)
    assert np.max(np.abs(w.alpha - w2.alpha)) < 1e-10


def test_dense_equivalence_on_complete_graphs():
    for n in range(1, 17):
        g = G.complete(n)
        s, rf, p, x = setup(g, d=8, h=2, seed=n, random_all=True)
        assert rf.total_pairs == n * n
        dense_out, _ = dense_biased_attention(x, n, g.edges(), set(s.nodes), 1, rf.d_max, p)
        out, _ = anchor_attention_forward(x, rf, p)
        assert np.max(np.abs(out - dense_out)) < 1e-10


def test_dense_equivalence_all_anchors():
    for g in small_corpus(count=10, max_n=12):
        s, rf, p, x = setup(g, k=2, anchors=range(g.n), random_all=True)
        assert rf.total_pairs == g.n * g.n
        dense_out, _ = dense_biased_attention(x, g.n, g.edges(), set(s.nodes), 2, rf.d_max, p)
        out, _ = anchor_attention_forward(x, rf, p)
        assert np.max(np.abs(out - dense_out)) < 1e-10
