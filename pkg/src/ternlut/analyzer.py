"""Unit-cost complexity and storage formulas for MAD and element-wise LUT GEMM.

One compute unit is one multiply-add or one table lookup; one memory unit is
one element touched. Quantities are exact ``Fraction``s. Table sizes in the
complexity model use ``C**g / 2`` for mirrored tables (no ceiling), which is
what makes the g=2 vs mirrored g=3 memory comparison an identity; physical
table sizes (``entry_count``) round up.
"""

from __future__ import annotations

from fractions import Fraction

from .elut import entry_count
from .errors import ConfigError, ShapeError


def _positive(**dims):
    for name, v in dims.items():
        if v < 1:
            raise ConfigError(f"{name} must be positive, got {v}")


def model_entries(c: int, g: int, mirror: bool) -> Fraction:
    return Fraction(c ** g, 2) if mirror else Fraction(c ** g)


def complexity_mad(m: int, n: int, k: int) -> dict:
    _positive(m=m, n=n, k=k)
    return {"compute": m * n * k, "memory": m * n * k,
            "pre_compute": n * k, "pre_memory": n * k}


def complexity_elut(m: int, n: int, k: int, c: int, g: int, mirror: bool = False) -> dict:
    _positive(m=m, n=n, k=k, c=c, g=g)
    if k % g:
        raise ShapeError(f"K={k} is not a multiple of g={g}")
    e = model_entries(c, g, mirror)
    pre = n * k * e / g
    acc_compute = Fraction(m * n * k, g)
    return {
        "pre_compute": pre,
        "pre_memory": pre,
        "acc_compute": acc_compute,
        "acc_memory": m * n * k * e / g,
        "overall_compute": max(pre, acc_compute),
    }


def _ceil_log2(x: int) -> int:
    return (x - 1).bit_length()


def bpw(c: int, g: int, mirror: bool = False) -> Fraction:
    """Element-wise bits per weight: one index (plus a sign bit when mirrored) per g weights."""
    _positive(c=c, g=g)
    if mirror:
        return Fraction(1 + _ceil_log2(entry_count(c, g, True)), g)
    return Fraction(_ceil_log2(c ** g), g)


def bpw_bitwise(c: int) -> int:
    """Bit-wise bits per weight: whole bits per element."""
    _positive(c=c)
    return max(1, _ceil_log2(c))


def max_group_size(c: int, register_bits: int, mirror: bool = False) -> int:
    """Largest g whose table of int8 entries fits one register (0 if none)."""
    if register_bits < 8:
        raise ConfigError(f"register_bits must be >= 8, got {register_bits}")
    _positive(c=c)
    budget = register_bits // 8
    if c == 1:
        raise ConfigError("a single-valued weight set has no largest group size")
    g = 0
    while entry_count(c, g + 1, mirror) <= budget:
        g += 1
    return g


def crossover(c: int, g: int, m: int) -> bool:
    """Stated sufficient condition for ELUT to need fewer computations than MAD."""
    return c ** g < m and g > 1


def elut_fewer_computations(m: int, n: int, k: int, c: int, g: int) -> bool:
    """Direct comparison of the two overall compute formulas (no mirroring)."""
    return complexity_elut(m, n, k, c, g)["overall_compute"] < complexity_mad(m, n, k)["compute"]
