"""Dense matrix containers and scale bookkeeping shared by every kernel.

All matrices are row-major numpy arrays. Containers are frozen and their
arrays are marked read-only, so they can be shared between worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidTernary, ShapeError


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, order="C", copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FloatMatrix:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise ShapeError(f"expected a 2-D matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("matrix contains non-finite values")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class TernaryMatrix:
    """M x K weights in {-1, 0, 1} with one absmean scale."""

    values: np.ndarray
    weight_scale: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise ShapeError(f"expected a 2-D matrix, got shape {values.shape}")
        if values.size and (values.min() < -1 or values.max() > 1):
            raise InvalidTernary("weights must lie in {-1, 0, 1}")
        if not self.weight_scale > 0:
            raise ValueError("weight_scale must be positive")
        object.__setattr__(self, "values", _readonly(values.astype(np.int8)))
        object.__setattr__(self, "weight_scale", float(self.weight_scale))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class QuantizedActivations:
    """N x K int8 activations sharing one per-tensor scale."""

    data: np.ndarray
    act_scale: float = 1.0

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ShapeError(f"expected a 2-D matrix, got shape {data.shape}")
        if data.size and (data.min() < -127 or data.max() > 127):
            raise ValueError("activations must lie in [-127, 127]")
        if not self.act_scale > 0:
            raise ValueError("act_scale must be positive")
        object.__setattr__(self, "data", _readonly(data.astype(np.int8)))
        object.__setattr__(self, "act_scale", float(self.act_scale))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def k(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class GemmResult:
    """M x N int32 accumulators; float output is ``accum * dequant_scale``."""

    accum: np.ndarray
    dequant_scale: float = 1.0

    def __post_init__(self):
        accum = np.asarray(self.accum)
        if accum.ndim != 2:
            raise ShapeError(f"expected a 2-D matrix, got shape {accum.shape}")
        object.__setattr__(self, "accum", _readonly(accum.astype(np.int32)))
        object.__setattr__(self, "dequant_scale", float(self.dequant_scale))

    @property
    def m(self) -> int:
        return self.accum.shape[0]

    @property
    def n(self) -> int:
        return self.accum.shape[1]


def dequant_scale(weight_scale: float, act_scale: float) -> float:
    return float(weight_scale) / float(act_scale)


def dequantize(result: GemmResult) -> FloatMatrix:
    out = result.accum.astype(np.float64) * result.dequant_scale
    return FloatMatrix(out.astype(np.float32))
