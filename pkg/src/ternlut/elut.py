"""Generalized element-wise LUT GEMM for any small weight set, plus a
bit-wise (bit-plane) LUT reference.

A weight group ``(w_1 .. w_g)`` with digit positions ``d_i`` in the sorted
value set is coded as ``D = sum d_i * C**(g-1-i)``. Without mirroring ``D`` is
the table index. With mirroring (value sets closed under negation) the
balanced code ``v = 2*D - (C**g - 1)`` flips sign when the group is negated,
so the table keeps only ``v >= 0`` and a group is served by index ``|v| // 2``
and sign ``v < 0``. For ternary weights and g=3 this is exactly the TL2
encoding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .lut import apply_sign, join_int16, split_int16
from .tensors import GemmResult, QuantizedActivations

DEFAULT_REGISTER_BUDGET = 16


def entry_count(c: int, g: int, mirror: bool) -> int:
    total = c ** g
    return -(-total // 2) if mirror else total


@dataclass(frozen=True)
class ElutConfig:
    value_set: tuple
    g: int
    mirror: bool = False
    register_budget: int = DEFAULT_REGISTER_BUDGET

    def __post_init__(self):
        values = tuple(int(v) for v in self.value_set)
        if len(values) < 1 or list(values) != sorted(set(values)):
            raise ConfigError("value_set must be sorted, distinct and non-empty")
        if self.g < 1:
            raise ConfigError(f"group size must be >= 1, got {self.g}")
        if self.mirror and values != tuple(sorted(-v for v in values)):
            raise ConfigError("mirror consolidation needs a value set closed under negation")
        object.__setattr__(self, "value_set", values)
        if self.entries > self.register_budget:
            raise ConfigError(f"{self.entries} table entries exceed the register budget "
                              f"of {self.register_budget}")

    @property
    def c(self) -> int:
        return len(self.value_set)

    @property
    def entries(self) -> int:
        return entry_count(self.c, self.g, self.mirror)

    def tuples(self) -> np.ndarray:
        """Weight tuple stored at each table index, shape ``(entries, g)``."""
        c, g = self.c, self.g
        vals = np.array(self.value_set, dtype=np.int64)
        every = np.array(list(itertools.product(range(c), repeat=g)), dtype=np.int64).reshape(-1, g)
        if not self.mirror:
            return vals[every]
        # itertools.product enumerates D in increasing order; keep v = 2D - (C^g - 1) >= 0.
        codes = 2 * np.arange(c ** g) - (c ** g - 1)
        keep = codes >= 0
        return vals[every[keep]]

    def encode(self, w: np.ndarray) -> tuple[np.ndarray | None, np.ndarray]:
        """``(sign, index)`` per group for a ``(rows, k)`` weight matrix; sign is None without mirror."""
        rows, k = w.shape
        vals = np.array(self.value_set)
        digits = np.searchsorted(vals, w)
        digits = np.clip(digits, 0, self.c - 1)
        if not np.array_equal(vals[digits], w):
            raise ShapeError("weights contain values outside the configured value set")
        digits = digits.reshape(rows, k // self.g, self.g).astype(np.int64)
        weights = self.c ** np.arange(self.g - 1, -1, -1, dtype=np.int64)
        code = digits @ weights
        if not self.mirror:
            return None, code
        v = 2 * code - (self.c ** self.g - 1)
        return (v < 0).astype(np.int32), np.abs(v) // 2


def _check_inputs(w: np.ndarray, act: QuantizedActivations, g: int):
    if w.ndim != 2 or w.shape[1] != act.k:
        raise ShapeError(f"weights {w.shape} and activations {act.data.shape} disagree on K")
    if act.k % g:
        raise ShapeError(f"K={act.k} is not a multiple of the group size {g}")


def gemm_elut(w, act: QuantizedActivations, cfg: ElutConfig) -> GemmResult:
    """Table setup per (activation row, group), then lookup-accumulate into int32."""
    w = np.asarray(w, dtype=np.int64)
    _check_inputs(w, act, cfg.g)
    n, k = act.data.shape
    peak = cfg.g * max(abs(v) for v in cfg.value_set) * 127
    if peak > np.iinfo(np.int16).max:
        raise ConfigError(f"table entries up to {peak} overflow int16")
    groups = k // cfg.g
    a = act.data.astype(np.int64).reshape(n, groups, cfg.g)
    lo, hi = split_int16(a @ cfg.tuples().T)
    signs, idx = cfg.encode(w)

    gi = np.arange(groups)[None, :]
    accum = np.empty((w.shape[0], n), dtype=np.int32)
    for row in range(n):
        vals = join_int16(lo[row][gi, idx], hi[row][gi, idx]).astype(np.int32)
        if signs is not None:
            vals = apply_sign(vals, signs)
        accum[:, row] = vals.sum(axis=1, dtype=np.int32)
    return GemmResult(accum, 1.0 / act.act_scale)


def gemm_bitwise_ref(w, act: QuantizedActivations, bits: int, g: int = 4,
                     offset: int | None = None) -> GemmResult:
    """Bit-plane LUT GEMM: weights stored offset-binary as ``u = w + offset`` in ``bits`` bits.

    Each group of ``g`` activations gets a table of all ``2**g`` subset sums;
    every bit plane looks up its group pattern, planes are recombined with
    shifts, and ``offset * sum(a)`` is removed at the end. ``offset``
    defaults to ``2**(bits-1)`` for signed weights and 0 otherwise.
    """
    w = np.asarray(w, dtype=np.int64)
    _check_inputs(w, act, g)
    if bits < 1:
        raise ShapeError("bits must be >= 1")
    if offset is None:
        offset = 1 << (bits - 1) if w.size and w.min() < 0 else 0
    u = w + offset
    if u.size and (u.min() < 0 or u.max() >= 1 << bits):
        raise ShapeError(f"weights do not fit {bits}-bit offset-binary with offset {offset}")
    n, k = act.data.shape
    groups = k // g
    a = act.data.astype(np.int64).reshape(n, groups, g)
    patterns = (np.arange(1 << g)[:, None] >> np.arange(g)[None, :]) & 1
    blut = a @ patterns.T                       # (n, groups, 2**g)
    place = 1 << np.arange(g)
    gi = np.arange(groups)[None, :]
    accum = np.zeros((w.shape[0], n), dtype=np.int64)
    for b in range(bits):
        plane = ((u >> b) & 1).reshape(w.shape[0], groups, g)
        index = plane @ place                   # (rows, groups)
        for row in range(n):
            accum[:, row] += blut[row][gi, index].sum(axis=1) << b
    accum -= offset * act.data.astype(np.int64).sum(axis=1)[None, :]
    return GemmResult(accum.astype(np.int32), 1.0 / act.act_scale)


def bitwise_width(value_set) -> int:
    """Smallest bit width whose default offset-binary encoding holds every value."""
    lo, hi = min(value_set), max(value_set)
    bits = 1
    while True:
        offset = 1 << (bits - 1) if lo < 0 else 0
        if lo + offset >= 0 and hi + offset < 1 << bits:
            return bits
        bits += 1
