"""Command-line driver: ``stkde run``, ``stkde compare``, ``stkde bench``.

Exit codes: 0 success, 1 I/O failure, 2 validation error, 3 memory-budget
refusal, 4 volumes differ beyond the tolerance.
"""

import argparse
import csv
import os
import sys

import numpy as np

from .algorithms import ALGORITHMS, SEQUENTIAL_ALGORITHMS, run_algorithm
from .decomposition import parse_decomposition
from .domain import MemoryBudgetError, default_threads
from .io import (
    InstanceConfig,
    VolumeFormatError,
    build_instance,
    read_volume,
    write_stats_json,
    write_volume,
)

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_OOM, EXIT_DIFFER = 0, 1, 2, 3, 4

BENCH_COLUMNS = [
    "algo", "decomp", "threads", "init_s", "compute_s", "reduce_s", "total_s",
    "speedup_vs_pb_sym_1t", "work_overhead_ratio", "T1", "Tinf",
]


def _triple(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(float(p) for p in parts)


def _synthetic(text):
    parts = text.split(",")
    if len(parts) != 5:
        raise argparse.ArgumentTypeError("expected n,clusters,sigma_xy,sigma_t,seed")
    n, clusters, sxy, st, seed = parts
    return int(n), int(clusters), float(sxy), float(st), int(seed)


def _physical_memory():
    try:
        return os.sysconf("SC_PHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return None


def _add_instance_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="CSV file of x,y,t points")
    src.add_argument("--synthetic", type=_synthetic, metavar="N,CLUSTERS,SXY,ST,SEED")
    p.add_argument("--origin", type=_triple, help="x0,y0,t0 (default: auto, or 0 for synthetic)")
    p.add_argument("--extent", type=_triple, help="gx,gy,gt (default: auto)")
    p.add_argument("--sres", type=float, required=True)
    p.add_argument("--tres", type=float, required=True)
    p.add_argument("--hs", type=float, required=True)
    p.add_argument("--ht", type=float, required=True)
    p.add_argument("--skip-outside", action="store_true", help="drop out-of-domain points")
    p.add_argument("--mem-budget", type=int, default=None, help="bytes (default: physical memory)")


def _config(args):
    return InstanceConfig(
        sres=args.sres, tres=args.tres, hs=args.hs, ht=args.ht,
        input=args.input, synthetic=args.synthetic,
        origin=args.origin, extent=args.extent,
        on_out_of_domain="skip" if args.skip_outside else "fail",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stkde", description="Space-time kernel density estimation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one algorithm")
    run.add_argument("--algo", choices=ALGORITHMS, required=True)
    _add_instance_args(run)
    run.add_argument("--decomp", default="1x1x1", help="AxBxC")
    run.add_argument("--threads", type=int, default=None)
    run.add_argument("--out", help="volume output path (STKDE1)")
    run.add_argument("--stats", help="stats JSON output path")

    cmp_ = sub.add_parser("compare", help="compare two volumes")
    cmp_.add_argument("vol_a")
    cmp_.add_argument("vol_b")
    cmp_.add_argument("--tol", type=float, default=1e-12, help="max relative difference")

    bench = sub.add_parser("bench", help="timing sweep, CSV output")
    _add_instance_args(bench)
    bench.add_argument("--algos", default="pb-sym", help="comma-separated algorithm names")
    bench.add_argument("--threads-list", default="1", help="comma-separated thread counts")
    bench.add_argument("--decomp-list", default="1x1x1", help="comma-separated AxBxC")
    bench.add_argument("--repeats", type=int, default=3)
    bench.add_argument("--csv", help="output CSV path (default: stdout)")
    return parser


def _fail(code, msg):
    print(f"stkde: {msg}", file=sys.stderr)
    return code


def cmd_run(args):
    threads = args.threads if args.threads is not None else default_threads()
    budget = args.mem_budget if args.mem_budget is not None else _physical_memory()
    try:
        points, grid, skipped = build_instance(_config(args))
        dec = parse_decomposition(args.decomp, grid.shape)
        if threads < 1:
            raise ValueError("--threads must be >= 1")
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    except ValueError as exc:
        return _fail(EXIT_INVALID, exc)
    try:
        volume, stats = run_algorithm(args.algo, points, grid, dec, threads, budget)
    except MemoryBudgetError as exc:
        return _fail(EXIT_OOM, exc)
    except ValueError as exc:
        return _fail(EXIT_INVALID, exc)

    print(f"algorithm  {args.algo}")
    print(f"grid       {grid.Gx}x{grid.Gy}x{grid.Gt}  Hs={grid.Hs} Ht={grid.Ht}")
    print(f"points     {len(points)} accepted, {skipped} skipped")
    if stats.decomposition:
        print(f"decomp     {'x'.join(map(str, stats.decomposition))}")
    print(f"threads    {stats.threads}")
    for name in ("init", "bucket", "compute", "reduce"):
        print(f"{name + '_s':<10} {stats.phases.get(name, 0.0):.6f}")
    print(f"{'total_s':<10} {stats.total_seconds:.6f}")
    try:
        if args.out:
            write_volume(volume, args.out)
        if args.stats:
            write_stats_json(stats, args.stats)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    return EXIT_OK


def volume_difference(a, b):
    """``(max_abs, max_rel)`` with ``max_rel = max_abs / max(1, max|a|)``."""
    if a.values.size == 0:
        return 0.0, 0.0
    max_abs = float(np.max(np.abs(a.values - b.values)))
    return max_abs, max_abs / max(1.0, float(np.max(np.abs(a.values))))


def cmd_compare(args):
    try:
        a = read_volume(args.vol_a)
        b = read_volume(args.vol_b)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    except VolumeFormatError as exc:
        return _fail(EXIT_INVALID, exc)
    if a.grid.key != b.grid.key:
        return _fail(EXIT_INVALID, "grids differ")
    max_abs, max_rel = volume_difference(a, b)
    print(f"max_abs {max_abs!r}")
    print(f"max_rel {max_rel!r}")
    return EXIT_OK if max_rel <= args.tol else EXIT_DIFFER


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def bench_rows(points, grid, algos, threads_list, decomps, repeats, mem_budget=None):
    """Run the sweep and return CSV rows (dicts keyed by BENCH_COLUMNS).

    Sequential algorithms run once per sweep (1 thread, no decomposition);
    ``pb-sym-dr`` ignores the decomposition. Failing cells report ``OOM`` or
    ``ERR`` in their timing columns.
    """
    cells = []
    for algo in algos:
        if algo in SEQUENTIAL_ALGORITHMS:
            cells.append((algo, None, 1))
        elif algo == "pb-sym-dr":
            cells.extend((algo, None, p) for p in threads_list)
        else:
            cells.extend((algo, d, p) for d in decomps for p in threads_list)

    done = {}

    def best(algo, dec, threads):
        key = (algo, str(dec), threads)
        if key not in done:
            runs = []
            for _ in range(repeats):
                _, stats = run_algorithm(algo, points, grid, dec or (1, 1, 1), threads, mem_budget)
                runs.append(stats)
            done[key] = min(runs, key=lambda s: s.total_seconds)
        return done[key]

    # warm the compiled kernels so no cell pays for loading them
    for algo in algos + ["pb-sym"]:
        try:
            run_algorithm(algo, points[:1], grid, (1, 1, 1), 1, mem_budget)
        except Exception:
            pass
    baseline = best("pb-sym", None, 1).total_seconds
    rows = []
    for algo, dec, threads in cells:
        row = dict.fromkeys(BENCH_COLUMNS, "")
        row.update(algo=algo, decomp=str(dec) if dec else "-", threads=threads)
        try:
            s = best(algo, dec, threads)
        except MemoryBudgetError:
            row.update(init_s="OOM", compute_s="OOM", reduce_s="OOM", total_s="OOM")
        except Exception:
            row.update(init_s="ERR", compute_s="ERR", reduce_s="ERR", total_s="ERR")
        else:
            sched = s.schedule
            row.update(
                decomp="x".join(map(str, s.decomposition)) if s.decomposition else row["decomp"],
                init_s=s.phases["init"],
                compute_s=s.phases["compute"] + s.phases.get("bucket", 0.0),
                reduce_s=s.phases["reduce"],
                total_s=s.total_seconds,
                speedup_vs_pb_sym_1t=baseline / s.total_seconds,
                work_overhead_ratio=s.work_overhead_ratio,
                T1=sched.T1 if sched else None,
                Tinf=float(sched.Tinf) if sched else None,
            )
        rows.append(row)
    return rows


def cmd_bench(args):
    budget = args.mem_budget if args.mem_budget is not None else _physical_memory()
    try:
        points, grid, _ = build_instance(_config(args))
        algos = [a.strip() for a in args.algos.split(",") if a.strip()]
        for a in algos:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        threads_list = [int(v) for v in args.threads_list.split(",")]
        decomps = [parse_decomposition(d, grid.shape) for d in args.decomp_list.split(",")]
        if args.repeats < 1 or min(threads_list) < 1:
            raise ValueError("--repeats and thread counts must be >= 1")
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    except ValueError as exc:
        return _fail(EXIT_INVALID, exc)
    rows = bench_rows(points, grid, algos, threads_list, decomps, args.repeats, budget)
    try:
        fh = open(args.csv, "w", newline="") if args.csv else sys.stdout
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    try:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "compare": cmd_compare, "bench": cmd_bench}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
