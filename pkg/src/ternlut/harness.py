"""Verification and benchmarking drivers behind the ``verify`` and ``bench`` commands."""

from __future__ import annotations

import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .kernels import KERNELS, build_table, kernels_for_layout, run_kernel
from .lut import lossy_error_bound
from .oracle import gemm_int_reference
from .pack import BlockGeometry, PackedWeights, pack, unpack
from .quantize import quantize_activations_per_tensor
from .tensors import QuantizedActivations, TernaryMatrix

DETERMINISM_THREADS = (1, 2, 4, 8)
BENCH_HEADER = "kernel,m,n,k,threads,reps,ns,gbps,bpw"


def random_activations(n: int, k: int, seed) -> QuantizedActivations:
    rng = np.random.default_rng(seed)
    return quantize_activations_per_tensor(rng.standard_normal((n, k)))


def packings(tensor, geometry: BlockGeometry, kernels=None,
             repack: bool = False) -> dict[str, PackedWeights]:
    """Packed weights per kernel name.

    A packed tensor serves only its own layout unless ``repack`` is set, in
    which case it is unpacked and repacked for every layout its shape allows.
    """
    if isinstance(tensor, PackedWeights) and not repack:
        names = kernels_for_layout(tensor.layout)
        return {name: tensor for name in names if kernels is None or name in kernels}
    out, cache = {}, {}
    if isinstance(tensor, PackedWeights):
        cache[tensor.layout] = tensor
        tensor = unpack(tensor)
    for name, spec in KERNELS.items():
        if kernels is not None and name not in kernels:
            continue
        try:
            if spec.layout not in cache:
                cache[spec.layout] = pack(tensor, spec.layout, geometry)
        except ShapeError:
            continue
        out[name] = cache[spec.layout]
    return out


@dataclass
class KernelCheck:
    kernel: str
    lossless: bool
    trials: int
    max_abs_err: int = 0
    err_sum: int = 0
    ref_sum: int = 0
    bound_ok: bool = True
    deterministic: bool = True

    @property
    def passed(self) -> bool:
        ok = self.max_abs_err == 0 if self.lossless else self.bound_ok
        return ok and self.deterministic

    @property
    def mean_rel_err(self) -> float:
        return self.err_sum / self.ref_sum if self.ref_sum else 0.0


def verify_packed(name: str, tensor, geometry: BlockGeometry, trials: int, seed: int,
                  n: int = 4, threads: int = 1) -> list[str]:
    """Check every applicable kernel against the integer oracle; returns report lines.

    Lines carry no timing or thread count, so reports are byte-identical for
    a fixed seed regardless of ``threads``.
    """
    kernels = packings(tensor, geometry)
    ternary = tensor if isinstance(tensor, TernaryMatrix) else unpack(tensor)
    checks = {k: KernelCheck(k, KERNELS[k].lossless, trials) for k in kernels}
    for trial in range(trials):
        act = random_activations(n, ternary.k, [seed, trial])
        ref = gemm_int_reference(ternary, act).accum.astype(np.int64)
        for kname, packed in kernels.items():
            chk = checks[kname]
            got = run_kernel(kname, packed, act, threads).accum.astype(np.int64)
            diff = np.abs(got - ref)
            chk.max_abs_err = max(chk.max_abs_err, int(diff.max()))
            chk.err_sum += int(diff.sum())
            chk.ref_sum += int(np.abs(ref).sum())
            if not chk.lossless:
                bound = lossy_error_bound(build_table(packed, act, False))
                chk.bound_ok &= bool(np.all(diff <= bound[None, :]))
            if trial == 0:
                runs = [run_kernel(kname, packed, act, t).accum for t in DETERMINISM_THREADS]
                chk.deterministic = all(np.array_equal(runs[0], r) for r in runs[1:])

    lines = []
    for chk in checks.values():
        mode = "lossless" if chk.lossless else "lossy"
        extra = "" if chk.lossless else f" mean_rel_err={chk.mean_rel_err:.6f} bound={'ok' if chk.bound_ok else 'violated'}"
        lines.append(
            f"tensor={name} kernel={chk.kernel} mode={mode} trials={trials} "
            f"max_abs_err={chk.max_abs_err}{extra} "
            f"deterministic={'yes' if chk.deterministic else 'no'} "
            f"{'PASS' if chk.passed else 'FAIL'}")
    return lines


@dataclass(frozen=True)
class BenchRecord:
    kernel: str
    m: int
    n: int
    k: int
    threads: int
    reps: int
    ns: int
    gbps: float
    bpw: float

    def csv(self) -> str:
        return (f"{self.kernel},{self.m},{self.n},{self.k},{self.threads},{self.reps},"
                f"{self.ns},{self.gbps:.4f},{self.bpw:.4f}")


def bench(tensor, geometry: BlockGeometry, n: int, threads_list, reps: int,
          kernels=None, seed: int = 0):
    """Yield one BenchRecord per (kernel, threads); time is the median of ``reps`` runs."""
    ternary = tensor if isinstance(tensor, TernaryMatrix) else unpack(tensor)
    act = random_activations(n, ternary.k, seed)
    for kname, packed in packings(tensor, geometry, kernels, repack=True).items():
        for threads in threads_list:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                run_kernel(kname, packed, act, threads, pool)
                times = []
                for _ in range(reps):
                    t0 = time.perf_counter_ns()
                    run_kernel(kname, packed, act, threads, pool)
                    times.append(time.perf_counter_ns() - t0)
            ns = int(statistics.median(times))
            yield BenchRecord(kname, packed.m, n, packed.k, threads, reps, ns,
                              packed.nbytes / max(ns, 1), packed.bpw)
