"""Weight packing for the TL1, TL2 and I2S layouts.

Byte layouts (the normative payload of the TNF container):

* TL1 -- every pair of weights becomes a 4-bit index ``(w1+1)*3 + (w2+1)``.
  Pairs are emitted in compute-block order and stored two per byte, low
  nibble first.
* TL2 -- the first ``three_k`` columns are split into triples, each stored as
  a 4-bit unsigned index ``|9*w1 + 3*w2 + w3|`` plus a 1-bit sign
  ``(9*w1 + 3*w2 + w3) < 0``. All index nibbles come first, then all sign bits
  (LSB first), both in compute-block order. The remaining ``two_k`` columns
  follow as a TL1 region.
* I2S -- row-major 2-bit codes ``w + 1``, four per byte, first weight in the
  lowest bits. Code 3 is invalid.

Compute blocks are ``bm`` rows by ``by`` columns. Blocks advance along K
inside a band of ``bm`` rows, then move to the next band; inside a block the
groups are row-major. Edge blocks are truncated, never padded.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np

from .errors import CorruptBuffer, InvalidTernary, OddRemainder, ShapeError
from .tensors import TernaryMatrix

I2S_K_MULTIPLE = 128
TL1_ENTRIES = 9
TL2_ENTRIES = 14


class Layout(enum.IntEnum):
    TL1 = 0
    TL2 = 1
    I2S = 2

    @classmethod
    def parse(cls, name) -> "Layout":
        if isinstance(name, Layout):
            return name
        try:
            return cls[str(name).upper()]
        except KeyError:
            raise ValueError(f"unknown layout {name!r}") from None


def split_block_fitting(k: int, bk3: int) -> tuple[int, int]:
    """Split K into a TL2 region (whole BK3 blocks) and a TL1 remainder."""
    if bk3 <= 0 or bk3 % 3:
        raise ShapeError(f"bk3 must be a positive multiple of 3, got {bk3}")
    three_k = (k // bk3) * bk3
    two_k = k - three_k
    if two_k % 2:
        raise OddRemainder(f"K={k} leaves an odd remainder {two_k} after BK3={bk3}")
    return three_k, two_k


@dataclass(frozen=True)
class BlockGeometry:
    bm: int = 32
    bk3: int = 96

    def __post_init__(self):
        if self.bm not in (16, 32):
            raise ShapeError(f"bm must be 16 or 32, got {self.bm}")
        if self.bk3 <= 0 or self.bk3 % 3:
            raise ShapeError(f"bk3 must be a positive multiple of 3, got {self.bk3}")

    @property
    def by_tl1(self) -> int:
        return 256 // self.bm

    @property
    def by_tl2(self) -> int:
        return 192 // self.bm

    def split(self, k: int) -> tuple[int, int]:
        return split_block_fitting(k, self.bk3)


def _check_ternary(*ws):
    for w in ws:
        if w not in (-1, 0, 1):
            raise InvalidTernary(f"{w!r} is not a ternary value")


def pack_tl1_pair(w1: int, w2: int) -> int:
    _check_ternary(w1, w2)
    return (w1 + 1) * 3 + (w2 + 1)


def pack_tl2_triple(w1: int, w2: int, w3: int) -> tuple[int, int]:
    """Signed-unsigned split of one weight triple into ``(sign, index)``."""
    _check_ternary(w1, w2, w3)
    v = 9 * w1 + 3 * w2 + w3
    return int(v < 0), abs(v)


def _tl1_decode_table() -> np.ndarray:
    table = np.empty((TL1_ENTRIES, 2), dtype=np.int8)
    for i in range(TL1_ENTRIES):
        table[i] = (i // 3 - 1, i % 3 - 1)
    return table


def _tl2_decode_table() -> np.ndarray:
    # Row i holds the triple whose balanced-ternary value is +i.
    table = np.empty((TL2_ENTRIES, 3), dtype=np.int8)
    for w1 in (-1, 0, 1):
        for w2 in (-1, 0, 1):
            for w3 in (-1, 0, 1):
                v = 9 * w1 + 3 * w2 + w3
                if v >= 0:
                    table[v] = (w1, w2, w3)
    return table


TL1_DECODE = _tl1_decode_table()
TL2_DECODE = _tl2_decode_table()
TL1_DECODE.flags.writeable = False
TL2_DECODE.flags.writeable = False


@functools.lru_cache(maxsize=128)
def block_order(rows: int, cols: int, bm: int, bc: int) -> np.ndarray:
    """Flat row-major positions of a ``rows x cols`` group grid, in block order.

    ``cols`` counts groups (pairs or triples); ``bc`` is groups per block.
    """
    nb, nc = -(-rows // bm), -(-cols // bc)
    grid = np.full((nb * bm, nc * bc), -1, dtype=np.int64)
    grid[:rows, :cols] = np.arange(rows * cols, dtype=np.int64).reshape(rows, cols)
    order = grid.reshape(nb, bm, nc, bc).transpose(0, 2, 1, 3).ravel()
    order = order[order >= 0]
    order.flags.writeable = False
    return order


def _to_block_stream(grid: np.ndarray, bm: int, bc: int) -> np.ndarray:
    rows, cols = grid.shape
    return grid.ravel()[block_order(rows, cols, bm, bc)]


def _from_block_stream(stream: np.ndarray, rows: int, cols: int, bm: int, bc: int) -> np.ndarray:
    out = np.empty(rows * cols, dtype=stream.dtype)
    out[block_order(rows, cols, bm, bc)] = stream
    return out.reshape(rows, cols)


def pack_nibbles(codes: np.ndarray) -> bytes:
    codes = np.asarray(codes, dtype=np.uint8).ravel()
    if codes.size % 2:
        codes = np.append(codes, np.uint8(0))
    return (codes[0::2] | (codes[1::2] << 4)).astype(np.uint8).tobytes()


def unpack_nibbles(buf, count: int) -> np.ndarray:
    raw = np.frombuffer(buf, dtype=np.uint8)
    out = np.empty(raw.size * 2, dtype=np.uint8)
    out[0::2] = raw & 0x0F
    out[1::2] = raw >> 4
    return out[:count]


def _nibble_bytes(count: int) -> int:
    return -(-count // 2)


def _bit_bytes(count: int) -> int:
    return -(-count // 8)


def _tl1_region_size(m: int, cols: int) -> int:
    return _nibble_bytes(m * cols // 2)


def _tl2_region_sizes(m: int, three_k: int) -> tuple[int, int]:
    triples = m * three_k // 3
    return _nibble_bytes(triples), _bit_bytes(triples)


def _check_shape(layout: Layout, m: int, k: int, geometry: BlockGeometry):
    if m <= 0 or k <= 0:
        raise ShapeError(f"empty weight matrix {m}x{k}")
    if layout is Layout.TL1 and k % 2:
        raise ShapeError(f"TL1 needs an even K, got {k}")
    if layout is Layout.I2S and k % I2S_K_MULTIPLE:
        raise ShapeError(f"I2S needs K to be a multiple of {I2S_K_MULTIPLE}, got {k}")
    if layout is Layout.TL2:
        geometry.split(k)


def packed_size(layout, m: int, k: int, geometry: BlockGeometry | None = None) -> int:
    """Exact payload size in bytes for an ``m x k`` tensor."""
    layout = Layout.parse(layout)
    geometry = geometry or BlockGeometry()
    _check_shape(layout, m, k, geometry)
    if layout is Layout.TL1:
        return _tl1_region_size(m, k)
    if layout is Layout.I2S:
        return m * k // 4
    three_k, two_k = geometry.split(k)
    idx, sign = _tl2_region_sizes(m, three_k)
    return idx + sign + _tl1_region_size(m, two_k)


@dataclass(frozen=True)
class PackedWeights:
    layout: Layout
    m: int
    k: int
    geometry: BlockGeometry
    index_bytes: bytes
    sign_bits: bytes = b""
    remainder_bytes: bytes = b""
    weight_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "layout", Layout.parse(self.layout))
        _check_shape(self.layout, self.m, self.k, self.geometry)
        if self.layout is Layout.TL2:
            idx, sign = _tl2_region_sizes(self.m, self.three_k)
            expected = (idx, sign, _tl1_region_size(self.m, self.two_k))
        else:
            expected = (packed_size(self.layout, self.m, self.k, self.geometry), 0, 0)
        got = (len(self.index_bytes), len(self.sign_bits), len(self.remainder_bytes))
        if got != expected:
            raise CorruptBuffer(f"region sizes {got} do not match expected {expected}")

    @property
    def three_k(self) -> int:
        return self.geometry.split(self.k)[0] if self.layout is Layout.TL2 else 0

    @property
    def two_k(self) -> int:
        return self.geometry.split(self.k)[1] if self.layout is Layout.TL2 else 0

    @property
    def nbytes(self) -> int:
        return len(self.index_bytes) + len(self.sign_bits) + len(self.remainder_bytes)

    @property
    def bpw(self) -> float:
        return self.nbytes * 8 / (self.m * self.k)

    def payload(self) -> bytes:
        return self.index_bytes + self.sign_bits + self.remainder_bytes

    @classmethod
    def from_payload(cls, layout, m, k, geometry, payload: bytes, weight_scale=1.0):
        layout = Layout.parse(layout)
        expected = packed_size(layout, m, k, geometry)
        if len(payload) != expected:
            raise CorruptBuffer(f"payload is {len(payload)} bytes, expected {expected}")
        payload = bytes(payload)
        if layout is not Layout.TL2:
            return cls(layout, m, k, geometry, payload, weight_scale=weight_scale)
        three_k, _ = geometry.split(k)
        idx, sign = _tl2_region_sizes(m, three_k)
        return cls(layout, m, k, geometry, payload[:idx], payload[idx:idx + sign],
                   payload[idx + sign:], weight_scale)


# ---------------------------------------------------------------- encoders

def _tl1_codes(w: np.ndarray) -> np.ndarray:
    w = w.astype(np.int16)
    return ((w[:, 0::2] + 1) * 3 + (w[:, 1::2] + 1)).astype(np.uint8)


def _tl2_codes(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w = w.astype(np.int16)
    v = 9 * w[:, 0::3] + 3 * w[:, 1::3] + w[:, 2::3]
    return (v < 0).astype(np.uint8), np.abs(v).astype(np.uint8)


def _pack_tl1_region(w: np.ndarray, geometry: BlockGeometry) -> bytes:
    if w.shape[1] == 0:
        return b""
    stream = _to_block_stream(_tl1_codes(w), geometry.bm, geometry.by_tl1 // 2)
    return pack_nibbles(stream)


def pack(t: TernaryMatrix, layout, geometry: BlockGeometry | None = None) -> PackedWeights:
    layout = Layout.parse(layout)
    geometry = geometry or BlockGeometry()
    m, k = t.m, t.k
    _check_shape(layout, m, k, geometry)
    w = t.values
    if layout is Layout.I2S:
        codes = (w.astype(np.uint8) + 1).reshape(m, k // 4, 4)
        packed = codes[..., 0] | (codes[..., 1] << 2) | (codes[..., 2] << 4) | (codes[..., 3] << 6)
        return PackedWeights(layout, m, k, geometry, packed.astype(np.uint8).tobytes(),
                             weight_scale=t.weight_scale)
    if layout is Layout.TL1:
        return PackedWeights(layout, m, k, geometry, _pack_tl1_region(w, geometry),
                             weight_scale=t.weight_scale)
    three_k, _ = geometry.split(k)
    index_bytes = sign_bits = b""
    if three_k:
        signs, idx = _tl2_codes(w[:, :three_k])
        bc = geometry.by_tl2 // 3
        index_bytes = pack_nibbles(_to_block_stream(idx, geometry.bm, bc))
        sign_stream = _to_block_stream(signs, geometry.bm, bc)
        sign_bits = np.packbits(sign_stream, bitorder="little").tobytes()
    remainder = _pack_tl1_region(w[:, three_k:], geometry)
    return PackedWeights(layout, m, k, geometry, index_bytes, sign_bits, remainder,
                         t.weight_scale)


# ---------------------------------------------------------------- decoders
# Row ranges passed to the band decoders must start on a multiple of bm so
# that every band begins on a byte boundary in each region.

def decode_tl1_rows(buf: bytes, cols: int, geometry: BlockGeometry,
                    row0: int, row1: int) -> np.ndarray:
    """4-bit TL1 indices for rows ``[row0, row1)`` as a ``(rows, cols/2)`` array."""
    groups = cols // 2
    rows = row1 - row0
    start = row0 * groups // 2
    nib = unpack_nibbles(buf[start:start + _nibble_bytes(rows * groups)], rows * groups)
    if nib.size and nib.max() >= TL1_ENTRIES:
        raise CorruptBuffer(f"TL1 index {int(nib.max())} out of range")
    return _from_block_stream(nib, rows, groups, geometry.bm, geometry.by_tl1 // 2)


def decode_tl2_rows(index_bytes: bytes, sign_bits: bytes, three_k: int,
                    geometry: BlockGeometry, row0: int, row1: int):
    """``(sign, index)`` arrays of shape ``(rows, three_k/3)`` for rows ``[row0, row1)``."""
    groups = three_k // 3
    rows = row1 - row0
    count = rows * groups
    bc = geometry.by_tl2 // 3
    start = row0 * groups
    nib = unpack_nibbles(index_bytes[start // 2:start // 2 + _nibble_bytes(count)], count)
    if nib.size and nib.max() >= TL2_ENTRIES:
        raise CorruptBuffer(f"TL2 index {int(nib.max())} out of range")
    raw = np.frombuffer(sign_bits[start // 8:start // 8 + _bit_bytes(count)], dtype=np.uint8)
    bits = np.unpackbits(raw, count=count, bitorder="little")
    return (_from_block_stream(bits, rows, groups, geometry.bm, bc),
            _from_block_stream(nib, rows, groups, geometry.bm, bc))


def decode_i2s_rows(buf: bytes, k: int, row0: int, row1: int) -> np.ndarray:
    """Ternary weights (int8) for rows ``[row0, row1)`` of an I2S payload."""
    raw = np.frombuffer(buf, dtype=np.uint8)[row0 * k // 4:row1 * k // 4]
    codes = np.empty((raw.size, 4), dtype=np.uint8)
    for j in range(4):
        codes[:, j] = (raw >> (2 * j)) & 0b11
    if codes.size and codes.max() == 3:
        raise CorruptBuffer("I2S code 0b11 is invalid")
    return (codes.astype(np.int8) - 1).reshape(row1 - row0, k)


def unpack(p: PackedWeights) -> TernaryMatrix:
    m, k, geo = p.m, p.k, p.geometry
    if p.layout is Layout.I2S:
        return TernaryMatrix(decode_i2s_rows(p.index_bytes, k, 0, m), p.weight_scale)
    if p.layout is Layout.TL1:
        idx = decode_tl1_rows(p.index_bytes, k, geo, 0, m)
        return TernaryMatrix(TL1_DECODE[idx].reshape(m, k), p.weight_scale)
    three_k, two_k = p.three_k, p.two_k
    out = np.empty((m, k), dtype=np.int8)
    if three_k:
        signs, idx = decode_tl2_rows(p.index_bytes, p.sign_bits, three_k, geo, 0, m)
        triples = TL2_DECODE[idx] * np.where(signs, -1, 1).astype(np.int8)[..., None]
        out[:, :three_k] = triples.reshape(m, three_k)
    if two_k:
        idx = decode_tl1_rows(p.remainder_bytes, two_k, geo, 0, m)
        out[:, three_k:] = TL1_DECODE[idx].reshape(m, two_k)
    return TernaryMatrix(out, p.weight_scale)
