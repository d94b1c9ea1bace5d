"""TNF container: a flat little-endian file of named packed ternary tensors.

    magic "TNF1" | version u16 | tensor_count u32
    per tensor:
        name_len u16 | name (UTF-8) | layout u8 | m u32 | k u32 | bm u16 |
        bk3 u32 | weight_scale f32 | payload_len u64 | payload

Layout codes are 0=TL1, 1=TL2, 2=I2S (payloads as produced by ``pack``) and
3=RAW_TERNARY (one int8 per weight, row-major).

Raw float inputs use an even simpler format: ``m u32 | k u32`` followed by
``m*k`` little-endian float32 values.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptBuffer
from .pack import BlockGeometry, Layout, PackedWeights, packed_size
from .tensors import FloatMatrix, TernaryMatrix

MAGIC = b"TNF1"
VERSION = 1
RAW_TERNARY = 3

_HEADER = struct.Struct("<4sHI")
_NAME_LEN = struct.Struct("<H")
_TENSOR = struct.Struct("<BIIHIfQ")
_SHAPE = struct.Struct("<II")


@dataclass(frozen=True)
class TnfTensor:
    name: str
    tensor: PackedWeights | TernaryMatrix
    geometry: BlockGeometry = BlockGeometry()

    @property
    def layout_code(self) -> int:
        if isinstance(self.tensor, PackedWeights):
            return int(self.tensor.layout)
        return RAW_TERNARY

    @property
    def shape(self) -> tuple[int, int]:
        return self.tensor.m, self.tensor.k

    def payload(self) -> bytes:
        if isinstance(self.tensor, PackedWeights):
            return self.tensor.payload()
        return self.tensor.values.astype(np.int8).tobytes()


def dumps(tensors) -> bytes:
    out = io.BytesIO()
    tensors = list(tensors)
    out.write(_HEADER.pack(MAGIC, VERSION, len(tensors)))
    for t in tensors:
        name = t.name.encode("utf-8")
        geo = t.tensor.geometry if isinstance(t.tensor, PackedWeights) else t.geometry
        payload = t.payload()
        m, k = t.shape
        out.write(_NAME_LEN.pack(len(name)))
        out.write(name)
        out.write(_TENSOR.pack(t.layout_code, m, k, geo.bm, geo.bk3,
                               t.tensor.weight_scale, len(payload)))
        out.write(payload)
    return out.getvalue()


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.buf):
            raise CorruptBuffer("TNF file is truncated")
        chunk = self.buf[self.pos:self.pos + size].tobytes()
        self.pos += size
        return chunk

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))


def loads(buf: bytes) -> list[TnfTensor]:
    r = _Reader(buf)
    magic, version, count = r.unpack(_HEADER)
    if magic != MAGIC:
        raise CorruptBuffer(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptBuffer(f"unsupported TNF version {version}")
    tensors = []
    for _ in range(count):
        (name_len,) = r.unpack(_NAME_LEN)
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptBuffer("tensor name is not UTF-8") from exc
        code, m, k, bm, bk3, scale, payload_len = r.unpack(_TENSOR)
        try:
            geo = BlockGeometry(bm, bk3)
        except ValueError as exc:
            raise CorruptBuffer(str(exc)) from exc
        payload = r.take(payload_len)
        if code == RAW_TERNARY:
            if payload_len != m * k:
                raise CorruptBuffer(f"raw payload is {payload_len} bytes, expected {m * k}")
            values = np.frombuffer(payload, dtype=np.int8).reshape(m, k)
            if values.size and (values.min() < -1 or values.max() > 1):
                raise CorruptBuffer("raw payload holds non-ternary values")
            tensors.append(TnfTensor(name, TernaryMatrix(values, scale), geo))
            continue
        try:
            layout = Layout(code)
        except ValueError:
            raise CorruptBuffer(f"unknown layout code {code}") from None
        if payload_len != packed_size(layout, m, k, geo):
            raise CorruptBuffer(f"payload_len {payload_len} does not match packed size")
        packed = PackedWeights.from_payload(layout, m, k, geo, payload, scale)
        tensors.append(TnfTensor(name, packed, geo))
    if r.pos != len(r.buf):
        raise CorruptBuffer("trailing bytes after last tensor")
    return tensors


def write_tnf(path, tensors) -> None:
    Path(path).write_bytes(dumps(tensors))


def read_tnf(path) -> list[TnfTensor]:
    return loads(Path(path).read_bytes())


def write_float_matrix(path, data) -> None:
    arr = np.asarray(data.data if isinstance(data, FloatMatrix) else data, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    Path(path).write_bytes(_SHAPE.pack(*arr.shape) + arr.tobytes())


def read_float_matrix(path) -> FloatMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < _SHAPE.size:
        raise CorruptBuffer("float file is missing its (m, k) header")
    m, k = _SHAPE.unpack_from(raw)
    body = raw[_SHAPE.size:]
    if len(body) != 4 * m * k:
        raise CorruptBuffer(f"float file holds {len(body)} bytes, expected {4 * m * k}")
    return FloatMatrix(np.frombuffer(body, dtype="<f4").reshape(m, k))
