"""Absmean ternary weight quantizer and per-tensor int8 activation quantizer.

Rounding is half away from zero so that ``quantize(-x) == -quantize(x)``.
Activations are clamped to [-127, 127]: -128 has no int8 negation, and both
mirror consolidation and the 1-bit sign operation negate table values.
"""

from __future__ import annotations

import numpy as np

from .errors import AllZeroWeights, ShapeError
from .tensors import FloatMatrix, QuantizedActivations, TernaryMatrix


def round_half_away(x):
    """Round to nearest integer, ties away from zero (numpy rounds ties to even)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _as_float(w) -> np.ndarray:
    if isinstance(w, FloatMatrix):
        return w.data.astype(np.float64)
    arr = np.asarray(w, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def ternarize_absmean(w) -> TernaryMatrix:
    w = _as_float(w)
    if w.size == 0:
        raise ShapeError("cannot ternarize an empty matrix")
    beta = float(np.mean(np.abs(w)))
    if beta == 0.0:
        raise AllZeroWeights("mean(|w|) is zero")
    values = np.clip(round_half_away(w / beta), -1, 1).astype(np.int8)
    return TernaryMatrix(values, beta)


def quantize_activations_per_tensor(a) -> QuantizedActivations:
    a = _as_float(a)
    if a.size == 0:
        raise ShapeError("cannot quantize an empty matrix")
    amax = float(np.max(np.abs(a)))
    scale = 127.0 / amax if amax > 0 else 1.0
    data = np.clip(round_half_away(a * scale), -127, 127).astype(np.int8)
    return QuantizedActivations(data, scale)
