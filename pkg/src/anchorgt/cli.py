"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bench
from .anchor import anchor_report, select_k_ds
from .attention import init_params
from .encoding import EncodingConfigError, SpdBucketing, compute_receptive_fields, format_receptive_field
from .gradcheck import check_block_gradients, randomize
from .graph import GraphInputError, parse_gen_spec, read_edge_list
from .model import ModelConfig, distinguish_randomized, model_forward, verdict_record, wl_refine

DEFAULT_SEED = 0
EXIT_INPUT = 1
EXIT_INVARIANT = 2


class InvariantViolation(RuntimeError):
    pass


def _load(path: Optional[str], spec: Optional[str]):
    if path is not None:
        return read_edge_list(path), Path(path).name
    if spec is not None:
        return parse_gen_spec(spec), spec
    raise GraphInputError("one of --graph or --gen is required")


def _graphs(args, count: int):
    paths, specs = args.graph or [], args.gen or []
    if len(paths) + len(specs) != count:
        raise GraphInputError(f"expected {count} graph(s) via --graph/--gen, got {len(paths) + len(specs)}")
    return [_load(p, None) for p in paths] + [_load(None, s) for s in specs]


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _bucketing(args) -> SpdBucketing:
    return SpdBucketing(args.dmax) if args.dmax is not None else SpdBucketing.default_for(args.k)


def _model_config(args) -> ModelConfig:
    return ModelConfig(
        layers=args.layers, d=args.d, h=args.heads, k=args.k, d_max=args.dmax, readout=args.readout,
        param_seed=args.param_seed, anchor_seed=args.anchor_seed, feature_seed=args.seed,
    )


def cmd_anchors(args) -> int:
    (g, _), = _graphs(args, 1)
    report = anchor_report(g, select_k_ds(g, args.k, args.seed))
    _emit(_json(report), args.out)
    if not report["coverage_ok"]:
        raise InvariantViolation("selected anchors do not cover the graph")
    return 0


def cmd_receptive(args) -> int:
    (g, _), = _graphs(args, 1)
    rf = compute_receptive_fields(g, select_k_ds(g, args.k, args.seed), _bucketing(args))
    _emit(format_receptive_field(rf), args.out)
    return 0


def cmd_forward(args) -> int:
    (g, name), = _graphs(args, 1)
    cfg = _model_config(args)
    nodes, graph_emb = model_forward(g, cfg)
    if args.format == "csv":
        lines = [",".join(repr(float(v)) for v in row) for row in nodes]
        _emit("\n".join(lines) + "\n", args.out)
        return 0
    anchors = select_k_ds(g, cfg.k, cfg.anchor_seed)
    record = {
        "graph": name,
        "anchors": list(anchors.nodes),
        "graph_embedding": [float(v) for v in graph_emb],
        "node_embeddings": [[float(v) for v in row] for row in nodes],
    }
    _emit(_json(record), args.out)
    return 0


def cmd_distinguish(args) -> int:
    (g1, n1), (g2, n2) = _graphs(args, 2)
    cfg = _model_config(args)
    wl = wl_refine(g1, g2, args.wl_iters)
    res = distinguish_randomized(g1, g2, cfg)
    _emit(_json(verdict_record((n1, n2), wl, res)), args.out)
    return 0


def cmd_gradcheck(args) -> int:
    (g, _), = _graphs(args, 1)
    rng = np.random.default_rng(args.seed)
    bucketing = _bucketing(args)
    rf = compute_receptive_fields(g, select_k_ds(g, args.k, args.anchor_seed), bucketing)
    p = randomize(init_params(args.d, args.heads, bucketing.n_buckets, args.seed), rng)
    x = rng.standard_normal((g.n, args.d))
    upstream = rng.standard_normal((g.n, args.d))
    res = check_block_gradients(x, rf, p, upstream)
    verdict = "PASS" if res.passed(args.tol) else "FAIL"
    _emit(f"checked {res.checked} coordinates; worst at {res.worst}\n"
          f"max_rel_err = {res.max_rel_err:.3e}\n"
          f"max_rel_err < {args.tol:g}: {verdict}\n", args.out)
    return 0 if verdict == "PASS" else EXIT_INVARIANT


def cmd_bench(args) -> int:
    sizes = bench.parse_sizes(args.sizes)
    seeds = args.seed_list or [args.seed]
    records = bench.scaling_sweep(args.family, sizes, args.k, seeds, time_forward=args.timing)
    text = bench.records_to_csv(records)
    for r in records:
        if r.attn_pairs > r.pair_bound or r.attn_pairs > r.dense_pairs:
            raise InvariantViolation(f"pair count {r.attn_pairs} exceeds its bound at n={r.n}")
    if len({r.n for r in records}) >= 4:
        summary = (f"# slope attn_pairs={bench.record_exponent(records):.4f} "
                   f"dense_pairs={bench.record_exponent(records, 'dense_pairs'):.4f} "
                   f"select_ops={bench.record_exponent(records, 'select_ops'):.4f}\n")
    else:
        summary = "# slope unavailable (fewer than 4 sizes)\n"
    _emit(text, args.out)
    sys.stdout.write(summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anchorgt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, graphs=True):
        if graphs:
            p.add_argument("--graph", action="append", metavar="PATH", help="edge-list file")
            p.add_argument("--gen", action="append", metavar="SPEC", help="generator, e.g. cycle:6")
        p.add_argument("--k", type=int, default=1)
        p.add_argument("--dmax", type=int, default=None)
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=["json", "csv"], default="json")

    def model_flags(p, d=16, heads=4):
        p.add_argument("--param-seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--anchor-seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--d", type=int, default=d)
        p.add_argument("--heads", type=int, default=heads)
        p.add_argument("--layers", type=int, default=2)
        p.add_argument("--readout", choices=["mean", "sum"], default="mean")

    p = sub.add_parser("anchors", help="select a k-dominating anchor set")
    common(p)
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser("receptive", help="dump receptive fields as CSV")
    common(p)
    p.set_defaults(func=cmd_receptive)

    p = sub.add_parser("forward", help="run the stacked model")
    common(p)
    model_flags(p)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("distinguish", help="1-WL and randomized anchor verdicts for two graphs")
    common(p)
    model_flags(p)
    p.set_defaults(layers=1, readout="sum")
    p.add_argument("--wl-iters", type=int, default=10)
    p.set_defaults(func=cmd_distinguish)

    p = sub.add_parser("gradcheck", help="finite-difference check of block gradients")
    common(p)
    model_flags(p, d=8, heads=2)
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="scaling sweep as CSV")
    common(p, graphs=False)
    p.add_argument("--family", choices=bench.FAMILIES, required=True)
    p.add_argument("--sizes", default="64:8192")
    p.add_argument("--seeds", dest="seed_list", type=int, nargs="+", default=None)
    p.add_argument("--timing", action="store_true", help="record best-of-3 forward time (not reproducible)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphInputError, EncodingConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
