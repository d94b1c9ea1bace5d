"""Ternary-weight mixed-precision GEMM: element-wise lookup-table kernels
(TL1, TL2), the 2-bit MAD kernel (I2_S), a generalized ELUT engine and
complexity/bpw analysis."""

from .errors import (AllZeroWeights, ConfigError, CorruptBuffer, InvalidTernary,
                     ModeMismatch, OddRemainder, ShapeError, TernlutError)
from .tensors import FloatMatrix, GemmResult, QuantizedActivations, TernaryMatrix, dequantize
from .quantize import quantize_activations_per_tensor, ternarize_absmean
from .pack import (BlockGeometry, Layout, PackedWeights, pack, pack_tl1_pair, pack_tl2_triple,
                   packed_size, split_block_fitting, unpack)
from .lut import (LookupTable, LutMode, apply_sign, gemm_lut, precompute_tl1, precompute_tl2,
                  quantize_lut_int8)
from .mad import gemm_i2s
from .kernels import KERNELS, run_kernel
from .elut import ElutConfig, gemm_bitwise_ref, gemm_elut
from .oracle import gemm_float_reference, gemm_int_reference

__version__ = "0.1.0"
