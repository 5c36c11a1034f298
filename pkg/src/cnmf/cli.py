"""Command-line front end: ``cnmf {convert,nmf,snmf,bench}``."""

import argparse
import json
import sys
import time

from .bench import run_benchmark
from .compress import CompressionConfig
from .errors import CnmfError
from .nmf import nmf_admm, nmf_alternating
from .snmf import snmf
from .store import load_matrix, save_matrix


def _add_compression_flags(p, default_power):
    p.add_argument("--rank", type=int, required=True, help="target rank r")
    p.add_argument("--oversample", type=int, default=10, help="extra basis columns")
    p.add_argument("--power", type=int, default=default_power, help="power passes")
    p.add_argument("--seed", type=int, default=0, help="run seed")


def _add_io_flags(p):
    p.add_argument("--input", required=True, help="input matrix (.cnmf binary or .csv)")
    p.add_argument("--block-rows", type=int, default=None, help="rows per block override")
    p.add_argument("--scratch-dir", default=None, help="directory for scratch files")


def _load(args):
    fmt = "csv" if args.input.endswith(".csv") else "binary"
    return load_matrix(args.input, format=fmt, block_rows=args.block_rows)


def _cmd_convert(args):
    fmt = args.format or ("csv" if args.input.endswith(".csv") else "binary")
    store = load_matrix(args.input, format=fmt, block_rows=args.block_rows)
    save_matrix(store, args.output)
    print(f"wrote {store.rows}x{store.cols} matrix to {args.output}")
    return 0


def _cmd_nmf(args):
    store = _load(args)
    cfg = CompressionConfig(r=args.rank, r_ov=args.oversample, w=args.power, seed=args.seed)
    start = time.perf_counter()
    if args.method == "admm":
        if args.compress == "gaussian":
            print("error: the ADMM driver has no Gaussian-compressed variant", file=sys.stderr)
            return 2
        result = nmf_admm(store, args.rank, compressed=args.compress == "structured",
                          cfg=cfg, max_iter=args.max_iter, tol=args.tol,
                          scratch_dir=args.scratch_dir)
    else:
        result = nmf_alternating(store, args.rank, method=args.method,
                                 compression=args.compress, cfg=cfg,
                                 max_iter=args.max_iter, tol=args.tol,
                                 scratch_dir=args.scratch_dir)
    elapsed = time.perf_counter() - start
    save_matrix(result.X, args.out_x)
    save_matrix(result.Y, args.out_y)
    if args.report:
        _write_report(args.report, {
            "task": "nmf", "method": args.method, "compression": args.compress,
            "iterations": result.iterations, "time_s": elapsed,
            "rel_error": result.rel_error, "objective_trace": result.objective_trace,
            "config": {"rank": args.rank, "oversample": args.oversample,
                       "power": args.power, "seed": args.seed,
                       "max_iter": args.max_iter, "tol": args.tol},
        })
    print(f"nmf done: {result.iterations} iterations, rel_error={result.rel_error:.6g}, "
          f"{elapsed:.3f}s")
    return 0


def _cmd_snmf(args):
    store = _load(args)
    cfg = CompressionConfig(r=args.rank, r_ov=args.oversample, w=args.power, seed=args.seed)
    start = time.perf_counter()
    result = snmf(store, args.rank, selector=args.selector, reduction=args.reduce,
                  cfg=cfg, scratch_dir=args.scratch_dir)
    elapsed = time.perf_counter() - start
    with open(args.out_k, "w", encoding="utf-8") as f:
        json.dump({"indices": [int(i) for i in result.K]}, f)
    save_matrix(result.Y, args.out_y)
    if args.report:
        _write_report(args.report, {
            "task": "snmf", "selector": args.selector, "reduction": args.reduce,
            "iterations": args.rank, "time_s": elapsed,
            "rel_error": result.rel_error_full,
            "rel_error_reduced": result.rel_error_reduced,
            "objective_trace": [],
            "config": {"rank": args.rank, "oversample": args.oversample,
                       "power": args.power, "seed": args.seed},
        })
    print(f"snmf done: K={[int(i) for i in result.K]}, "
          f"rel_error={result.rel_error_full:.6g}, {elapsed:.3f}s")
    return 0


def _cmd_bench(args):
    paths = run_benchmark(args.suite, args.out, parallel=args.parallel)
    print(f"bench done: {paths['raw']}, {paths['summary']}, {paths['manifest']}")
    return 0


def _write_report(path, payload):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cnmf",
        description="Randomly compressed NMF and separable NMF, in and out of core.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a matrix file to the binary format")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=["csv", "binary"], default=None)
    p.add_argument("--block-rows", type=int, default=None)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("nmf", help="nonnegative matrix factorization")
    _add_io_flags(p)
    _add_compression_flags(p, default_power=4)
    p.add_argument("--method", choices=["mu", "activeset", "admm"], default="activeset")
    p.add_argument("--compress", choices=["none", "gaussian", "structured"],
                   default="structured")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--out-x", required=True)
    p.add_argument("--out-y", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_nmf)

    p = sub.add_parser("snmf", help="separable NMF (column selection)")
    _add_io_flags(p)
    _add_compression_flags(p, default_power=0)
    p.add_argument("--selector", choices=["spa", "xray"], default="spa")
    p.add_argument("--reduce", choices=["qr", "compressed"], default="compressed")
    p.add_argument("--out-k", required=True)
    p.add_argument("--out-y", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_snmf)

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--parallel", action="store_true",
                   help="run cells concurrently (use for error-only suites)")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CnmfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
