"""Command-line entry point: quantize, gemm, verify, bench, analyze.

Exit codes: 0 success, 1 I/O error, 2 invalid shape/config or corrupt input,
3 verification failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import analyzer
from .errors import ConfigError, ShapeError
from .harness import BENCH_HEADER, bench, random_activations, verify_packed
from .kernels import KERNELS, run_kernel
from .pack import BlockGeometry, PackedWeights, pack
from .quantize import quantize_activations_per_tensor, ternarize_absmean
from .tensors import TernaryMatrix, dequantize
from .tnf import TnfTensor, read_float_matrix, read_tnf, write_tnf

EXIT_IO, EXIT_INVALID, EXIT_VERIFY = 1, 2, 3


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("thread counts must be positive")
    return values


def cmd_quantize(args) -> int:
    weights = read_float_matrix(args.input)
    geometry = BlockGeometry(args.bm, args.bk3)
    ternary = ternarize_absmean(weights)
    # The container stores the scale as f32; keep the in-memory value identical.
    ternary = TernaryMatrix(ternary.values, float(np.float32(ternary.weight_scale)))
    packed = pack(ternary, args.layout, geometry)
    write_tnf(args.output, [TnfTensor(args.name, packed)])
    print(f"beta={ternary.weight_scale:.8g} layout={packed.layout.name} "
          f"payload={packed.nbytes} bpw={packed.bpw:.4f}")
    return 0


def _select(tensors, name):
    if name is None:
        return tensors
    picked = [t for t in tensors if t.name == name]
    if not picked:
        raise ShapeError(f"no tensor named {name!r}")
    return picked


def cmd_gemm(args) -> int:
    tensor = _select(read_tnf(args.tnf), args.tensor)[0]
    m, k = tensor.shape
    if args.act:
        act = quantize_activations_per_tensor(read_float_matrix(args.act))
    else:
        act = random_activations(args.n, k, args.seed)
    if act.k != k:
        raise ShapeError(f"activations have K={act.k}, weights have K={k}")
    packed = tensor.tensor
    if not isinstance(packed, PackedWeights):
        packed = pack(packed, args.layout or "tl1", tensor.geometry)
    names = [n for n, s in KERNELS.items() if s.layout is packed.layout and s.lossless == args.lossless]
    if not names:
        raise ConfigError(f"no {'lossless' if args.lossless else 'lossy'} kernel for {packed.layout.name}")
    result = run_kernel(names[0], packed, act, args.threads[0])
    out = dequantize(result).data
    print(f"# kernel={names[0]} m={m} n={act.n} k={k}")
    for row in out:
        print(",".join(f"{v:.6g}" for v in row))
    return 0


def cmd_verify(args) -> int:
    ok = True
    for t in _select(read_tnf(args.tnf), args.tensor):
        lines = verify_packed(t.name, t.tensor, t.geometry, args.trials, args.seed,
                              args.n, args.threads[0])
        for line in lines:
            print(line)
            ok &= line.endswith("PASS")
    print(f"RESULT {'PASS' if ok else 'FAIL'}")
    return 0 if ok else EXIT_VERIFY


def cmd_bench(args) -> int:
    kernels = args.kernels.split(",") if args.kernels else None
    if kernels:
        unknown = sorted(set(kernels) - set(KERNELS))
        if unknown:
            raise ConfigError(f"unknown kernels: {', '.join(unknown)}")
    print(BENCH_HEADER, flush=True)
    for t in _select(read_tnf(args.tnf), args.tensor):
        for rec in bench(t.tensor, t.geometry, args.n, args.threads, args.reps, kernels, args.seed):
            print(rec.csv(), flush=True)
    return 0


def _fmt(value) -> tuple[str, str]:
    if isinstance(value, bool):
        return str(value).lower(), str(value).lower()
    return f"{float(value):.6g}" if value != int(value) else str(int(value)), str(value)


def cmd_analyze(args) -> int:
    c, g, mirror = args.c, args.g, args.mirror
    rows = [
        ("entries", analyzer.entry_count(c, g, mirror)),
        ("bpw", analyzer.bpw(c, g, mirror)),
        ("bpw_bitwise", analyzer.bpw_bitwise(c)),
        ("g_max", analyzer.max_group_size(c, args.register_bits, mirror)),
    ]
    rows += [(f"mad_{key}", v) for key, v in analyzer.complexity_mad(args.m, args.n, args.k).items()]
    rows += [(f"elut_{key}", v) for key, v in
             analyzer.complexity_elut(args.m, args.n, args.k, c, g, mirror).items()]
    rows.append(("crossover", analyzer.crossover(c, g, args.m)))
    rows.append(("elut_fewer_computations",
                 analyzer.elut_fewer_computations(args.m, args.n, args.k, c, g)))
    print("quantity,value,exact")
    for key, value in rows:
        shown, exact = _fmt(value)
        if key == "bpw":
            shown = f"{float(value):.3f}"
        print(f"{key},{shown},{exact}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ternlut", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, threads_default="1"):
        p.add_argument("--tensor", help="only process the tensor with this name")
        p.add_argument("--threads", type=_int_list, default=_int_list(threads_default),
                       help="comma-separated worker counts")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--n", type=int, default=4, help="activation rows")

    p = sub.add_parser("quantize", help="ternarize raw float32 weights and pack them into TNF")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--layout", choices=["tl1", "tl2", "i2s"], default="tl2")
    p.add_argument("--bm", type=int, choices=[16, 32], default=32)
    p.add_argument("--bk3", type=int, default=96)
    p.add_argument("--name", default="weight")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("gemm", help="one-shot multiply, prints float output as CSV")
    p.add_argument("tnf")
    p.add_argument("--act", help="raw float32 activation file (n x k)")
    p.add_argument("--layout", choices=["tl1", "tl2", "i2s"],
                   help="layout for RAW_TERNARY tensors")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--lossless", dest="lossless", action="store_true", default=True,
                      help="int16 pack-and-unpack tables (TL1_1, TL2_1) or I2_S (default)")
    mode.add_argument("--lossy", dest="lossless", action="store_false",
                      help="int8-requantized tables (TL1_0, TL2_0)")
    common(p)
    p.set_defaults(func=cmd_gemm)

    p = sub.add_parser("verify", help="check kernels against the integer oracle")
    p.add_argument("tnf")
    p.add_argument("--trials", type=int, default=10)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time kernels over a thread sweep, CSV on stdout")
    p.add_argument("tnf")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--kernels", help="comma-separated subset of " + ",".join(KERNELS))
    common(p, "1,2,4")
    p.set_defaults(func=cmd_bench, n=1)

    p = sub.add_parser("analyze", help="complexity, bpw and register-width analysis as CSV")
    p.add_argument("--c", type=int, default=3, help="weight cardinality")
    p.add_argument("--g", type=int, default=3, help="group size")
    p.add_argument("--mirror", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--m", type=int, default=4096)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--k", type=int, default=3072)
    p.add_argument("--register-bits", type=int, default=128)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:  # every library error derives from ValueError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
