"""Brute-force reference computations, independent of the package's fast paths."""

import itertools
import math

import numpy as np

INF = math.inf


def floyd_warshall(n, edges):
    d = [[0 if i == j else INF for j in range(n)] for i in range(n)]
    for u, v in edges:
        d[u][v] = d[v][u] = 1
    for m in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][m] + d[m][j] < d[i][j]:
                    d[i][j] = d[i][m] + d[m][j]
    return d


def is_k_dominating(n, edges, nodes, k):
    d = floyd_warshall(n, edges)
    return all(any(d[v][a] <= k for a in nodes) for v in range(n))


def minimum_k_dominating_sets(n, edges, k):
    """All dominating sets of the smallest size (exhaustive)."""
    for size in range(1, n + 1):
        found = [c for c in itertools.combinations(range(n), size) if is_k_dominating(n, edges, c, k)]
        if found:
            return found
    return []


def receptive_oracle(n, edges, anchors, k, d_max):
    """{v: {u: bucket}} from all-pairs distances."""
    d = floyd_warshall(n, edges)
    out = {}
    for v in range(n):
        row = {}
        for u in range(n):
            if d[v][u] <= k or u in anchors:
                row[u] = d_max + 1 if d[v][u] == INF else min(d[v][u], d_max)
        out[v] = row
    return out


def dense_biased_attention(x, n, edges, anchors, k, d_max, p):
    """Full N x N attention with -inf outside R(v); returns (output, alpha[h, n, n])."""
    rf = receptive_oracle(n, edges, anchors, k, d_max)
    h, d, dh = p.w_q.shape
    outs = []
    alphas = np.zeros((h, n, n))
    for hd in range(h):
        q, kk, v = x @ p.w_q[hd], x @ p.w_k[hd], x @ p.w_v[hd]
        scores = np.full((n, n), -np.inf)
        for i in range(n):
            for j, b in rf[i].items():
                scores[i, j] = q[i] @ kk[j] / math.sqrt(dh) + p.bias_table[hd, b]
        scores -= scores.max(axis=1, keepdims=True)
        w = np.exp(scores)
        w /= w.sum(axis=1, keepdims=True)
        alphas[hd] = w
        outs.append(w @ v)
    return np.concatenate(outs, axis=1) @ p.w_o, alphas


def scalar_block_single_node(x, p, eps):
    """One node, so attention weight is exactly 1; pure-Python loops throughout."""
    d = len(x)

    def ln(vec, scale, shift):
        mu = sum(vec) / d
        var = sum((t - mu) ** 2 for t in vec) / d
        return [(vec[i] - mu) / math.sqrt(var + eps) * scale[i] + shift[i] for i in range(d)]

    z = ln(list(x), list(p.ln1_scale), list(p.ln1_shift))
    h, _, dh = p.w_q.shape
    concat = []
    for hd in range(h):
        for e in range(dh):
            concat.append(sum(z[i] * p.w_v[hd][i][e] for i in range(d)))
    hid = [sum(concat[i] * p.w_o[i][j] for i in range(d)) + x[j] for j in range(d)]
    z2 = ln(hid, list(p.ln2_scale), list(p.ln2_shift))
    d_ff = p.w1.shape[1]
    r = [max(0.0, sum(z2[i] * p.w1[i][f] for i in range(d)) + p.b1[f]) for f in range(d_ff)]
    return [sum(r[f] * p.w2[f][j] for f in range(d_ff)) + p.b2[j] + hid[j] for j in range(d)]
