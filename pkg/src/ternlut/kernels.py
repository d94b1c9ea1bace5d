"""Named kernel variants: TL1_0, TL1_1, TL2_0, TL2_1 and I2_S."""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass

from .lut import gemm_lut, precompute_tl1, precompute_tl2, quantize_lut_int8
from .mad import gemm_i2s
from .pack import Layout, PackedWeights
from .tensors import GemmResult, QuantizedActivations


@dataclass(frozen=True)
class KernelSpec:
    name: str
    layout: Layout
    lossless: bool
    group_size: int


KERNELS = {
    "TL1_0": KernelSpec("TL1_0", Layout.TL1, False, 2),
    "TL1_1": KernelSpec("TL1_1", Layout.TL1, True, 2),
    "TL2_0": KernelSpec("TL2_0", Layout.TL2, False, 3),
    "TL2_1": KernelSpec("TL2_1", Layout.TL2, True, 3),
    "I2_S": KernelSpec("I2_S", Layout.I2S, True, 1),
}


def kernels_for_layout(layout) -> list[str]:
    layout = Layout.parse(layout)
    return [name for name, spec in KERNELS.items() if spec.layout is layout]


def build_table(packed: PackedWeights, act: QuantizedActivations, lossless: bool):
    if packed.layout is Layout.TL1:
        lut = precompute_tl1(act)
    else:
        lut = precompute_tl2(act, packed.geometry)
    return lut if lossless else quantize_lut_int8(lut)


def run_kernel(name: str, packed: PackedWeights, act: QuantizedActivations,
               threads: int = 1, executor: Executor | None = None) -> GemmResult:
    """Table setup (if any) plus accumulation for one named kernel."""
    spec = KERNELS[name]
    if packed.layout is not spec.layout:
        raise ValueError(f"kernel {name} needs {spec.layout.name} weights, got {packed.layout.name}")
    if spec.layout is Layout.I2S:
        return gemm_i2s(packed, act, threads, executor)
    lut = build_table(packed, act, spec.lossless)
    return gemm_lut(packed, lut, spec.lossless, threads, executor)
