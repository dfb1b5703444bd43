"""Command-line front end: encode, decode, compare, bench, analyze, gen-corpus.

Exit codes: 0 success, 2 usage error, 3 I/O or image-format error,
4 corrupt compressed stream.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, codec, corpus, metrics
from .bitstream import CorruptStreamError, FormatError, deserialize
from .image import ImageFormatError, read_image, rgb_to_ycbcr, write_image

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CORRUPT = 4


class UsageError(ValueError):
    pass


def _float_list(raw: str) -> list[float]:
    try:
        return [float(part) for part in raw.split(",") if part]
    except ValueError as exc:
        raise UsageError(f"bad numeric list {raw!r}") from exc


def _int_list(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part]
    except ValueError as exc:
        raise UsageError(f"bad integer list {raw!r}") from exc


def _write_csv(rows: list[dict], out, header: list[str]) -> None:
    writer = csv.DictWriter(out, fieldnames=header)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)


def _print_channel_stats(result: codec.EncodeResult) -> None:
    for ch in result.channels:
        print(
            f"  {ch.name}: {len(ch.elements)} elements, "
            f"E={ch.error_unquantized:.6g} (quantized {ch.error_quantized:.6g}), "
            f"{ch.iterations} iterations, stopped by {ch.terminated_by}"
        )


def cmd_encode(args) -> int:
    if args.tau <= 0:
        raise UsageError("tolerance must be positive")
    img = read_image(args.input)
    result = codec.encode(
        img,
        tolerance=args.tau,
        chroma_tolerance=args.chroma_tau,
        norm_kind=args.norm,
    )
    Path(args.output).write_bytes(result.data)
    print(f"{args.input}: {img.width}x{img.height} -> {result.byte_size} bytes ({args.output})")
    _print_channel_stats(result)
    return EXIT_OK


def cmd_decode(args) -> int:
    data = Path(args.input).read_bytes()
    img = codec.decode(data)
    ci = deserialize(data)
    write_image(img, args.output)
    counts = tuple(len(ch) for ch in ci.channels)
    print(f"{args.input}: {img.width}x{img.height}, elements per channel {counts} -> {args.output}")
    return EXIT_OK


def cmd_compare(args) -> int:
    a = read_image(args.a)
    b = read_image(args.b)
    m = metrics.compare(a, b)
    print(f"l2_error={m.l2_error:.8g}")
    print(f"bv_error={m.bv_error:.8g}")
    print(f"psnr={'inf' if m.psnr == float('inf') else f'{m.psnr:.4f}'}")
    return EXIT_OK


def cmd_gen_corpus(args) -> int:
    paths = corpus.write_corpus(args.directory)
    for path in paths:
        print(path)
    return EXIT_OK


def _bench_one(path: Path, tau: float):
    img = read_image(path)
    adaptive = codec.encode(img, tolerance=tau)
    uniform = codec.encode(img, tolerance=tau, uniform=True)
    psnr_a = metrics.compare(img, codec.decode(adaptive.data)).psnr
    psnr_u = metrics.compare(img, codec.decode(uniform.data)).psnr
    return {
        "image": path.name,
        "tau": tau,
        "adaptive_bytes": adaptive.byte_size,
        "uniform_bytes": uniform.byte_size,
        "adaptive_elements": sum(adaptive.element_counts),
        "uniform_elements": sum(uniform.element_counts),
        "psnr_adaptive": f"{psnr_a:.4f}",
        "psnr_uniform": f"{psnr_u:.4f}",
    }


def cmd_bench(args) -> int:
    taus = _float_list(args.tau)
    if not taus or any(t <= 0 for t in taus):
        raise UsageError("need a comma-separated list of positive tolerances")
    images = sorted(Path(args.corpus).glob("*.ppm")) + sorted(Path(args.corpus).glob("*.png"))
    jobs = [(path, tau) for path in images for tau in taus]
    workers = codec.worker_count()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda j: _bench_one(*j), jobs))
    else:
        rows = [_bench_one(*job) for job in jobs]
    header = [
        "image", "tau", "adaptive_bytes", "uniform_bytes",
        "adaptive_elements", "uniform_elements", "psnr_adaptive", "psnr_uniform",
    ]
    _write_csv(rows, sys.stdout, header)
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.what == "norms":
        sizes = _int_list(args.size)
        rows = []
        for size in sizes:
            op = analysis.ErrorTransferOperator(size, size)
            rows.append({"size": size, "norm": f"{analysis.operator_norm(op):.8f}"})
        _write_csv(rows, sys.stdout, ["size", "norm"])
        return EXIT_OK

    if args.what == "bound":
        if args.eps is None:
            raise UsageError("analyze bound requires --eps")
        rows = []
        for eps in _float_list(args.eps):
            params = analysis.RefinementBoundParams(eps, delta=args.delta, slack=args.slack)
            best = analysis.best_refinement_bound(params)
            rows.append(
                {
                    "eps": eps,
                    "z": f"{best.z:.3f}",
                    "probability": f"{best.probability:.15g}",
                    "gap": f"{best.gap:.6g}",
                }
            )
        _write_csv(rows, sys.stdout, ["eps", "z", "probability", "gap"])
        return EXIT_OK

    if args.what == "mc":
        if args.input:
            img = read_image(args.input)
            y, _, _ = rgb_to_ycbcr(img)
            block = y.values
            h = 1 << (block.shape[0].bit_length() - 1)
            w = 1 << (block.shape[1].bit_length() - 1)
            block = block[:h, :w]
        else:
            block = corpus.single_coefficient_block()
        eps = args.eps if args.eps is not None else 0.0075
        result = analysis.mc_subadditivity(
            block, eps, trials=args.trials, seed=args.seed, factor=args.factor
        )
        _write_csv(
            [
                {
                    "trials": result.trials,
                    "violations": result.violations,
                    "rate": f"{result.rate:.3e}",
                    "eps": eps,
                    "factor": args.factor,
                    "seed": args.seed,
                }
            ],
            sys.stdout,
            ["trials", "violations", "rate", "eps", "factor", "seed"],
        )
        return EXIT_OK

    if args.what == "noise":
        if args.eps is None:
            raise UsageError("analyze noise requires --eps")
        if not args.input or not args.output:
            raise UsageError("analyze noise requires an input image and -o output")
        img = read_image(args.input)
        noised = analysis.add_noise(img, analysis.NoiseModel(args.eps, args.seed))
        write_image(noised, args.output)
        print(f"{args.input} + noise {args.eps} -> {args.output}")
        return EXIT_OK

    raise UsageError(f"unknown analyze subcommand {args.what!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ajpeg", description="Adaptive quadtree image codec and analysis tools"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="compress an image to .ajpg")
    enc.add_argument("-t", "--tau", type=float, required=True, help="error tolerance")
    enc.add_argument("--norm", choices=("l2", "bv"), default="l2")
    enc.add_argument("--chroma-tau", type=float, default=None,
                     help="chroma tolerance (default: 2x tau)")
    enc.add_argument("-o", "--output", required=True)
    enc.add_argument("input")
    enc.set_defaults(func=cmd_encode)

    dec = sub.add_parser("decode", help="decompress an .ajpg file")
    dec.add_argument("-o", "--output", required=True)
    dec.add_argument("input")
    dec.set_defaults(func=cmd_decode)

    cmp_ = sub.add_parser("compare", help="error metrics between two images")
    cmp_.add_argument("a")
    cmp_.add_argument("b")
    cmp_.set_defaults(func=cmd_compare)

    bench = sub.add_parser("bench", help="adaptive vs fixed-grid benchmark (CSV)")
    bench.add_argument("--corpus", required=True, help="directory of images")
    bench.add_argument("--tau", required=True, help="comma-separated tolerances")
    bench.set_defaults(func=cmd_bench)

    ana = sub.add_parser("analyze", help="numerical analysis reports")
    ana.add_argument("what", choices=("norms", "bound", "mc", "noise"))
    ana.add_argument("--size", default="16,32,64", help="element sizes for norms")
    ana.add_argument("--eps", type=str, default=None, help="noise amplitude(s)")
    ana.add_argument("--delta", type=float, default=0.13)
    ana.add_argument("--slack", type=float, default=1.0)
    ana.add_argument("--trials", type=int, default=100000)
    ana.add_argument("--seed", type=int, default=0)
    ana.add_argument("--factor", type=float, default=4.0)
    ana.add_argument("-o", "--output", default=None)
    ana.add_argument("input", nargs="?", default=None)
    ana.set_defaults(func=cmd_analyze)

    gen = sub.add_parser("gen-corpus", help="write the synthetic test images")
    gen.add_argument("directory")
    gen.set_defaults(func=cmd_gen_corpus)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "analyze":
        # --eps doubles as a float list (bound) and a single float (mc/noise)
        if args.what in ("mc", "noise") and args.eps is not None:
            values = _float_list(args.eps)
            if len(values) != 1:
                print("ajpeg: analyze expects a single --eps here", file=sys.stderr)
                return EXIT_USAGE
            args.eps = values[0]
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ajpeg: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CorruptStreamError as exc:
        print(f"ajpeg: corrupt stream: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except (ImageFormatError, FormatError, OSError) as exc:
        print(f"ajpeg: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
