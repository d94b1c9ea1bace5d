"""I2_S: multiply-then-add ternary GEMM over 2-bit packed weights.

Codes are decoded on the fly per row partition and multiplied against int8
activations with int32 accumulation, so results are exact for K up to 2**24.
"""

from __future__ import annotations

from concurrent.futures import Executor

import numpy as np

from .errors import ShapeError
from .pack import I2S_K_MULTIPLE, Layout, PackedWeights, decode_i2s_rows
from .parallel import map_rows
from .tensors import GemmResult, QuantizedActivations, dequant_scale


def gemm_i2s(packed: PackedWeights, act: QuantizedActivations, threads: int = 1,
             executor: Executor | None = None) -> GemmResult:
    if packed.layout is not Layout.I2S:
        raise ShapeError(f"gemm_i2s needs I2S weights, got {packed.layout.name}")
    if packed.k % I2S_K_MULTIPLE:
        raise ShapeError(f"I2S needs K to be a multiple of {I2S_K_MULTIPLE}, got {packed.k}")
    if act.k != packed.k:
        raise ShapeError(f"activation K={act.k} does not match weight K={packed.k}")
    a_t = act.data.astype(np.int32).T

    def rows_fn(r0: int, r1: int) -> np.ndarray:
        w = decode_i2s_rows(packed.index_bytes, packed.k, r0, r1)
        return w.astype(np.int32) @ a_t

    accum = map_rows(rows_fn, packed.m, 1, threads, executor)
    return GemmResult(accum, dequant_scale(packed.weight_scale, act.act_scale))
