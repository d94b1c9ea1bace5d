"""Brute-force reference GEMMs.

Kept deliberately naive and free of tables, packing or blocking so that a
kernel bug cannot hide in shared code.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .tensors import FloatMatrix, GemmResult, QuantizedActivations, TernaryMatrix, dequant_scale

_INT32 = np.iinfo(np.int32)


def gemm_int_reference(w, act: QuantizedActivations) -> GemmResult:
    """Exact ``accum[m, n] = sum_k w[m, k] * a[n, k]`` in int64, checked into int32."""
    scale = 1.0
    if isinstance(w, TernaryMatrix):
        scale = w.weight_scale
        w = w.values
    w = np.asarray(w, dtype=np.int64)
    a = act.data.astype(np.int64)
    if w.ndim != 2 or w.shape[1] != a.shape[1]:
        raise ShapeError(f"weights {w.shape} and activations {a.shape} disagree on K")
    accum = np.zeros((w.shape[0], a.shape[0]), dtype=np.int64)
    for i in range(w.shape[0]):
        accum[i] = (a * w[i]).sum(axis=1)
    if accum.size and (accum.min() < _INT32.min or accum.max() > _INT32.max):
        raise OverflowError("reference accumulator exceeds int32")
    return GemmResult(accum.astype(np.int32), dequant_scale(scale, act.act_scale))


def gemm_float_reference(w, a) -> FloatMatrix:
    """``out[m, n] = sum_k w[m, k] * a[n, k]`` accumulated in float64."""
    w = np.asarray(w.data if isinstance(w, FloatMatrix) else w, dtype=np.float64)
    a = np.asarray(a.data if isinstance(a, FloatMatrix) else a, dtype=np.float64)
    if w.ndim != 2 or a.ndim != 2 or w.shape[1] != a.shape[1]:
        raise ShapeError(f"weights {w.shape} and activations {a.shape} disagree on K")
    return FloatMatrix((w @ a.T).astype(np.float32))
