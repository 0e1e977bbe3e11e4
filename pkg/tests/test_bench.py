import math

import pytest

from anchorgt import bench
from anchorgt.bench import ScalingRecord, fit_exponent, parse_sizes, records_from_csv, records_to_csv, scaling_sweep


def test_parse_sizes():
    assert parse_sizes("64:512") == [64, 128, 256, 512]
    assert parse_sizes("10,5,20") == [5, 10, 20]
    with pytest.raises(ValueError):
        parse_sizes("8:4")


def test_fit_exponent_basics():
    ns = [8, 16, 32, 64]
    assert fit_exponent(ns, [5, 5, 5, 5]) == pytest.approx(0.0, abs=1e-12)
    assert fit_exponent(ns, [n * n for n in ns]) == pytest.approx(2.0, abs=1e-12)
    assert fit_exponent(ns, [3 * n for n in ns]) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_exponent([1, 2, 4], [1, 2, 4])


def test_complete_family_is_dense():
    (rec,) = scaling_sweep("complete", [32], k=1)
    assert rec.attn_pairs == 1024 == rec.dense_pairs


def test_single_node_record():
    from anchorgt.graph import single
    rec = bench.measure(single(), "single", 1, 0)
    assert rec.attn_pairs == 1 and rec.select_ops <= 2


def test_records_respect_bounds():
    for fam in ("cycle", "path", "grid", "er", "star"):
        for rec in scaling_sweep(fam, [16, 32, 64, 128], k=1, seeds=[0, 1]):
            assert rec.attn_pairs <= rec.pair_bound
            assert rec.attn_pairs <= rec.dense_pairs
            assert rec.select_ops <= 4 * rec.select_bound


def test_sweep_deterministic_and_csv_round_trip():
    a = scaling_sweep("er", [32, 64, 128, 256], k=2, seeds=[3])
    b = scaling_sweep("er", [32, 64, 128, 256], k=2, seeds=[3])
    assert a == b
    text = records_to_csv(a)
    assert text.splitlines()[0] == ",".join(bench.COLUMNS)
    assert records_from_csv(text) == a


def test_timing_is_opt_in():
    (rec,) = scaling_sweep("cycle", [64], time_forward=True)
    assert rec.wall_ns > 0
    (rec,) = scaling_sweep("cycle", [64])
    assert rec.wall_ns is None


def test_sizes_must_ascend():
    with pytest.raises(ValueError):
        scaling_sweep("cycle", [64, 32])


def test_cycle_anchor_ratio_reported():
    recs = scaling_sweep("cycle", parse_sizes("64:1024"))
    ratios = [r.anchors / r.n for r in recs]
    # greedy on a cycle keeps close to one anchor per three nodes
    assert all(0.3 <= q <= 0.45 for q in ratios)
    assert all(math.isclose(r.n_k_max, 3) for r in recs)
