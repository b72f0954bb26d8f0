"""Command-line front-end: sampling, verification, point processes,
spanning trees, and the benchmark table.

Exit codes: 0 success, 1 usage error, 2 cap or non-coalescence,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import __version__, backend
from .chains import CHAIN_NAMES, make_chain
from .ciaftp import aldous_broder_tree, graph_from_spec
from .engines import (
    COMPOSITE_VARIANTS,
    binary_backoff_cftp,
    citp_cftp,
    read_once_cftp,
)
from .errors import CapExceededError
from .points import Rectangle
from .render import write_csv, write_svg
from .stream import ReadOnceStream, derive_seed
from .strauss import StraussModel, sample_strauss_report
from .verify import performance_harness, run_audit, run_suite

ENGINES = ("citp", "binary-backoff", "read-once")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here reserves 2 for
    # cap overruns, so remap.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _resolve_seed(value) -> int:
    if value is not None:
        return value
    env = os.environ.get("ROCFTP_SEED")
    return int(env) if env else 0


def _dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _state_str(state) -> str:
    if isinstance(state, tuple):
        return "-".join(str(s) for s in state)
    return str(state)


def _chain_kwargs(args) -> dict:
    return {"n": args.n, "size": args.size, "beta": args.beta}


def _read_once_chunk(chain, chain_kwargs, variant, count, seed):
    coupling = make_chain(chain, **chain_kwargs)
    return read_once_cftp(coupling, ReadOnceStream(seed), count, variant)


def cmd_sample(args) -> int:
    seed = _resolve_seed(args.seed)
    kwargs = _chain_kwargs(args)
    coupling = make_chain(args.chain, **kwargs)
    if args.parallel > 1 and args.engine != "read-once":
        print("error: --parallel requires --engine read-once", file=sys.stderr)
        return 1

    if args.parallel > 1:
        # Independent streams per chunk: a different (still exact) sample
        # set than the single-stream run with the same seed.
        base = args.samples // args.parallel
        counts = [
            base + (1 if i < args.samples % args.parallel else 0)
            for i in range(args.parallel)
        ]
        jobs = [
            (args.chain, kwargs, args.composite, count, derive_seed(seed, 7001, i))
            for i, count in enumerate(counts)
            if count > 0
        ]
        reports = []
        if jobs:
            with ProcessPoolExecutor(max_workers=args.parallel) as pool:
                reports = list(pool.map(_read_once_chunk, *zip(*jobs)))
        samples = [s for rep in reports for s in rep.samples]
        meta_extra = {
            "parallel": args.parallel,
            "chunk_words": [rep.words_drawn for rep in reports],
            "final_position": sum(rep.words_drawn for rep in reports),
            "total_maps": sum(rep.total_maps for rep in reports),
            "replay_events": 0,
        }
    elif args.engine == "read-once":
        report = read_once_cftp(
            coupling, ReadOnceStream(seed), args.samples, args.composite
        )
        samples = report.samples
        meta_extra = {
            "parallel": 1,
            "final_position": report.words_drawn,
            "total_maps": report.total_maps,
            "init_composites": report.init_composites,
            "replay_events": report.replay_events,
        }
    elif args.engine == "binary-backoff":
        report = binary_backoff_cftp(coupling, seed, args.samples)
        samples = report.samples
        meta_extra = {
            "parallel": 1,
            "final_position": report.words_drawn,
            "total_maps": report.total_maps,
            "replay_events": report.replay_events,
        }
    else:
        report = citp_cftp(coupling, ReadOnceStream(seed), args.samples)
        samples = report.samples
        meta_extra = {
            "parallel": 1,
            "final_position": report.words_drawn,
            "total_maps": report.total_maps,
            "replay_events": 0,
        }

    lines = "".join(
        f"{ix},{_state_str(state)}\n" for ix, state in enumerate(samples)
    )
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(lines)
    else:
        sys.stdout.write(lines)

    meta = {
        "chain": coupling.describe(),
        "chain_name": args.chain,
        "chain_args": kwargs,
        "engine": args.engine,
        "composite": args.composite if args.engine == "read-once" else None,
        "samples": args.samples,
        "seed": seed,
        "backend": backend.backend_name(),
        "version": __version__,
    }
    meta.update(meta_extra)
    text = _dump_json(meta, args.meta)
    if args.meta is None and args.out:
        sys.stdout.write(text)
    return 0


def _print_entries(entries) -> None:
    width = max(len(e["test_name"]) for e in entries)
    for e in entries:
        stat = "" if e["statistic"] is None else f" statistic={e['statistic']:.6g}"
        p = "" if e["p_value"] is None else f" p={e['p_value']:.6g}"
        print(f"{e['verdict'].upper():4s} {e['test_name']:<{width}}{stat}{p}")


def cmd_verify(args) -> int:
    if args.audit:
        seed, entries = run_audit(args.suite)
        failures = sum(1 for e in entries if e["verdict"] != "pass")
        _print_entries(entries)
        print(f"audit seed {seed}: {failures} failure(s); tolerance 1")
        if args.json:
            _dump_json(
                {"suite": args.suite, "seed": seed, "audit": True,
                 "entries": entries},
                args.json,
            )
        return 0 if failures <= 1 else 3
    seed = _resolve_seed(args.seed)
    entries = run_suite(args.suite, seed=seed)
    _print_entries(entries)
    failures = sum(1 for e in entries if e["verdict"] != "pass")
    if args.json:
        _dump_json(
            {"suite": args.suite, "seed": seed, "audit": False,
             "entries": entries},
            args.json,
        )
    return 0 if failures == 0 else 3


def cmd_strauss(args) -> int:
    seed = _resolve_seed(args.seed)
    model = StraussModel(
        lambda_=getattr(args, "lambda_"),
        gamma=args.gamma,
        r=args.radius,
        region=Rectangle(args.width, args.height),
        epsilon_soft=args.epsilon_soft,
    )
    stream = ReadOnceStream(seed)
    report = sample_strauss_report(
        model, stream, args.samples, event_cap=args.event_cap
    )
    if args.svg:
        write_svg(report.samples, args.svg, model.r)
    if args.csv:
        write_csv(report.samples, args.csv)
    counts = [len(c) for c in report.samples]
    meta = {
        "lambda": model.lambda_,
        "gamma": model.gamma,
        "radius": model.r,
        "region": [model.region.width, model.region.height],
        "samples": args.samples,
        "seed": seed,
        "mean_points": sum(counts) / len(counts),
        "composites": report.composites,
        "rejected": report.rejected,
        "final_position": stream.position,
        "version": __version__,
    }
    sys.stdout.write(_dump_json(meta, None))
    return 0


def cmd_tree(args) -> int:
    seed = _resolve_seed(args.seed)
    graph = graph_from_spec(args.graph)
    stream = ReadOnceStream(seed)
    lines = []
    for ix in range(args.samples):
        tree = aldous_broder_tree(graph, stream)
        parents = " ".join(str(p) for p in tree.parent)
        lines.append(f"{ix},{tree.root},{parents}\n")
    text = "".join(lines)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    seed = _resolve_seed(args.seed)
    table = performance_harness(
        args.chain,
        k=args.samples,
        seed=seed,
        chain_kwargs=_chain_kwargs(args),
    )
    print(f"chain: {table['chain']}   measured T_N: {table['t_hat']:.2f}")
    header = (
        f"{'engine':<16}{'samples':>9}{'mean maps':>12}{'median':>9}"
        f"{'p99':>9}{'maps/T_N':>10}{'words':>12}"
    )
    print(header)
    for row in table["rows"]:
        print(
            f"{row['engine']:<16}{row['samples']:>9}{row['mean_maps']:>12.1f}"
            f"{row['median_maps']:>9.0f}{row['p99_maps']:>9.0f}"
            f"{row['maps_per_t']:>10.2f}{row['words']:>12}"
        )
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("engine,samples,mean_maps,median_maps,p99_maps,maps_per_t,words\n")
            for row in table["rows"]:
                fh.write(
                    f"{row['engine']},{row['samples']},{row['mean_maps']:.4f},"
                    f"{row['median_maps']:.1f},{row['p99_maps']:.1f},"
                    f"{row['maps_per_t']:.4f},{row['words']}\n"
                )
    if args.compare_backends:
        _compare_backends(args, seed)
    return 0


def _compare_backends(args, seed) -> None:
    if not backend.have_compiled():
        print("compiled backend unavailable; nothing to compare")
        return
    kwargs = _chain_kwargs(args)
    results = []
    for mode in ("compiled", "pure"):
        backend.set_backend(mode)
        try:
            coupling = make_chain(args.chain, **kwargs)
            t0 = time.perf_counter()
            read_once_cftp(
                coupling, ReadOnceStream(derive_seed(seed, 7100)), args.samples
            )
            results.append((mode, time.perf_counter() - t0))
        finally:
            backend.set_backend("auto")
    print(f"{'backend':<10}{'seconds':>10}")
    for mode, secs in results:
        print(f"{mode:<10}{secs:>10.3f}")
    if results[1][1] > 0:
        print(f"speedup: {results[1][1] / max(results[0][1], 1e-9):.1f}x")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rocftp", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[], help="draw exact samples from a chain")
    p.add_argument("--chain", choices=CHAIN_NAMES, default="lazy-walk")
    p.add_argument("--n", type=int, default=11, help="state count (lazy-walk/sort)")
    p.add_argument("--size", type=int, default=2, help="grid side (ising)")
    p.add_argument("--beta", type=float, default=0.3, help="inverse temperature")
    p.add_argument("--engine", choices=ENGINES, default="read-once")
    p.add_argument("--composite", choices=COMPOSITE_VARIANTS, default="interleaved")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--meta", default=None, help="JSON metadata path")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify", help="run statistical verification suites")
    p.add_argument(
        "--suite",
        choices=("exactness", "performance", "ciaftp", "strauss", "all"),
        default="all",
    )
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--json", default=None, help="machine-readable report path")
    p.add_argument(
        "--audit",
        action="store_true",
        help="rerun with fresh entropy; tolerate one statistical failure",
    )
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("strauss", help="exact point-process samples")
    p.add_argument("--lambda", dest="lambda_", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--width", type=float, required=True)
    p.add_argument("--height", type=float, required=True)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--svg", default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--epsilon-soft", type=float, default=1e-20)
    p.add_argument(
        "--event-cap",
        type=int,
        default=2_000_000_000,
        help="birth-death events allowed per evolution run",
    )
    p.set_defaults(func=cmd_strauss)

    p = sub.add_parser("tree", help="uniform rooted spanning trees")
    p.add_argument(
        "--graph",
        required=True,
        help="path:N, cycle:N, complete:N, or file:PATH with edge lines",
    )
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("bench", help="engine cost comparison table")
    p.add_argument("--chain", choices=CHAIN_NAMES, default="lazy-walk")
    p.add_argument("--n", type=int, default=11)
    p.add_argument("--size", type=int, default=2)
    p.add_argument("--beta", type=float, default=0.3)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--compare-backends", action="store_true")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, NotImplementedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
