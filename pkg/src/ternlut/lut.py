"""Element-wise lookup-table mpGEMM kernels (TL1 and TL2).

Tables hold, for every activation row and weight group, the dot product of
the group's activations with each enumerated weight tuple. TL1 enumerates
all 9 pairs; TL2 stores only the 14 triples with a non-negative
balanced-ternary value and recovers the other 13 with the 1-bit sign
operation.

Lossless kernels (TL1_1, TL2_1) keep each int16 entry as a low-byte plane
and a high-byte plane, look both up and reassemble the exact int16 sum.
Lossy kernels (TL1_0, TL2_0) requantize the table to int8 with one scale per
activation row.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from concurrent.futures import Executor

import numpy as np

from .errors import ModeMismatch, ShapeError
from .pack import (TL1_DECODE, TL2_DECODE, BlockGeometry, Layout, PackedWeights,
                   decode_tl1_rows, decode_tl2_rows)
from .parallel import map_rows
from .quantize import round_half_away
from .tensors import GemmResult, QuantizedActivations, dequant_scale

# Upper bound on elements gathered at once (activation rows x weight rows x groups).
_GATHER_BUDGET = 1 << 22


class LutMode(enum.Enum):
    INT16_SPLIT = "int16_split"
    INT8_SCALED = "int8_scaled"


def split_int16(entries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(entries, dtype=np.int16)
    return (e & 0xFF).astype(np.uint8), (e >> 8).astype(np.int8)


def join_int16(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return (hi.astype(np.int16) << 8) | lo.astype(np.int16)


@dataclass(frozen=True, eq=False)
class LookupTable:
    """Per-row, per-group enumerated sums.

    ``planes`` is ``(lo, hi)`` in INT16_SPLIT mode and ``(q,)`` in INT8_SCALED
    mode; every plane has shape ``(n, groups, entries)``. A TL2 table carries
    the TL1 table of its block-fitting remainder in ``tail``.
    """

    kind: Layout
    mode: LutMode
    k: int
    planes: tuple
    act_scale: float = 1.0
    lut_scale: np.ndarray | None = None
    tail: "LookupTable | None" = None
    geometry: BlockGeometry | None = None

    @property
    def n(self) -> int:
        return self.planes[0].shape[0]

    @property
    def groups(self) -> int:
        return self.planes[0].shape[1]

    @property
    def entry_count(self) -> int:
        return self.planes[0].shape[2]

    def values(self) -> np.ndarray:
        """Table entries as int16 (INT16_SPLIT) or int8 (INT8_SCALED)."""
        if self.mode is LutMode.INT16_SPLIT:
            return join_int16(*self.planes)
        return self.planes[0]


def _group_sums(a: np.ndarray, decode: np.ndarray) -> np.ndarray:
    g = decode.shape[1]
    n, cols = a.shape
    grouped = a.astype(np.int16).reshape(n, cols // g, g)
    return grouped @ decode.T.astype(np.int16)


def _tl1_table(a: np.ndarray, act_scale: float) -> LookupTable:
    entries = _group_sums(a, TL1_DECODE)
    return LookupTable(Layout.TL1, LutMode.INT16_SPLIT, a.shape[1], split_int16(entries), act_scale)


def precompute_tl1(act: QuantizedActivations) -> LookupTable:
    if act.k % 2:
        raise ShapeError(f"TL1 needs an even K, got {act.k}")
    return _tl1_table(act.data, act.act_scale)


def precompute_tl2(act: QuantizedActivations, geometry: BlockGeometry | None = None) -> LookupTable:
    geometry = geometry or BlockGeometry()
    three_k, two_k = geometry.split(act.k)
    entries = _group_sums(act.data[:, :three_k], TL2_DECODE)
    tail = _tl1_table(act.data[:, three_k:], act.act_scale) if two_k else None
    return LookupTable(Layout.TL2, LutMode.INT16_SPLIT, act.k, split_int16(entries),
                       act.act_scale, tail=tail, geometry=geometry)


def apply_sign(x, sign):
    """Negate ``x`` where ``sign`` is 1 using ``mask ^ (mask + x)``, mask = -sign.

    ``x`` must not be the most negative value of its integer type.
    """
    if np.isscalar(x) and np.isscalar(sign):
        mask = -int(sign)
        return (mask + int(x)) ^ mask
    x = np.asarray(x)
    mask = -np.asarray(sign).astype(x.dtype)
    return (mask + x) ^ mask


def quantize_lut_int8(lut: LookupTable) -> LookupTable:
    """Requantize an INT16_SPLIT table to int8 with one scale per activation row."""
    if lut.mode is not LutMode.INT16_SPLIT:
        raise ModeMismatch("quantize_lut_int8 expects an INT16_SPLIT table")
    tables = [lut] + ([lut.tail] if lut.tail is not None else [])
    peak = np.zeros(lut.n, dtype=np.float64)
    for t in tables:
        if t.groups:
            peak = np.maximum(peak, np.abs(t.values()).max(axis=(1, 2)))
    scale = np.where(peak > 0, peak / 127.0, 1.0)

    def requant(t: LookupTable) -> LookupTable:
        q = np.clip(round_half_away(t.values() / scale[:, None, None]), -127, 127).astype(np.int8)
        return LookupTable(t.kind, LutMode.INT8_SCALED, t.k, (q,), t.act_scale, scale, None, t.geometry)

    out = requant(lut)
    if lut.tail is not None:
        out = LookupTable(out.kind, out.mode, out.k, out.planes, out.act_scale, scale,
                          requant(lut.tail), out.geometry)
    return out


def lossy_error_bound(lut: LookupTable) -> np.ndarray:
    """Per activation row bound on ``|accum_lossy - accum_exact|``."""
    if lut.lut_scale is None:
        raise ModeMismatch("bound only defined for INT8_SCALED tables")
    groups = lut.groups + (lut.tail.groups if lut.tail is not None else 0)
    return groups * lut.lut_scale / 2 + 0.5


def _lookup_accumulate(table: LookupTable, idx: np.ndarray, signs: np.ndarray | None) -> np.ndarray:
    """Sum of looked-up entries for every (weight row, activation row): shape ``(rows, n)``."""
    rows, groups = idx.shape
    n = table.n
    out = np.zeros((rows, n), dtype=np.int32)
    if groups == 0 or rows == 0:
        return out
    gi = np.arange(groups)[None, :]
    step = max(1, _GATHER_BUDGET // (rows * groups))
    for n0 in range(0, n, step):
        sl = slice(n0, min(n0 + step, n))
        if table.mode is LutMode.INT16_SPLIT:
            lo, hi = table.planes
            vals = join_int16(lo[sl][:, gi, idx], hi[sl][:, gi, idx]).astype(np.int32)
        else:
            vals = table.planes[0][sl][:, gi, idx].astype(np.int32)
        if signs is not None:
            vals = apply_sign(vals, signs[None])
        out[:, sl] = vals.sum(axis=2, dtype=np.int32).T
    return out


def gemm_lut(packed: PackedWeights, lut: LookupTable, lossless: bool = True,
             threads: int = 1, executor: Executor | None = None) -> GemmResult:
    if packed.layout not in (Layout.TL1, Layout.TL2) or lut.kind is not packed.layout:
        raise ModeMismatch(f"{packed.layout.name} weights cannot use a {lut.kind.name} table")
    want = LutMode.INT16_SPLIT if lossless else LutMode.INT8_SCALED
    if lut.mode is not want:
        raise ModeMismatch(f"{'lossless' if lossless else 'lossy'} kernel needs a {want.value} table")
    if lut.k != packed.k:
        raise ShapeError(f"table K={lut.k} does not match weight K={packed.k}")
    geo = packed.geometry
    if packed.layout is Layout.TL2 and lut.geometry.split(lut.k) != geo.split(packed.k):
        raise ShapeError("table and weights use different block-fitting splits")

    def rows_fn(r0: int, r1: int) -> np.ndarray:
        if packed.layout is Layout.TL1:
            idx = decode_tl1_rows(packed.index_bytes, packed.k, geo, r0, r1)
            return _lookup_accumulate(lut, idx, None)
        total = np.zeros((r1 - r0, lut.n), dtype=np.int32)
        if packed.three_k:
            signs, idx = decode_tl2_rows(packed.index_bytes, packed.sign_bits,
                                         packed.three_k, geo, r0, r1)
            total += _lookup_accumulate(lut, idx, signs)
        if packed.two_k:
            idx = decode_tl1_rows(packed.remainder_bytes, packed.two_k, geo, r0, r1)
            total += _lookup_accumulate(lut.tail, idx, None)
        return total

    total = map_rows(rows_fn, packed.m, geo.bm, threads, executor)
    if not lossless:
        total = round_half_away(total * lut.lut_scale[None, :]).astype(np.int32)
    return GemmResult(total, dequant_scale(packed.weight_scale, lut.act_scale))
