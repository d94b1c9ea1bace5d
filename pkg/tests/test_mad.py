import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ternlut import (QuantizedActivations, ShapeError, TernaryMatrix, gemm_i2s,
                     gemm_int_reference, pack)

from conftest import random_acts, random_ternary


def ones(n, k):
    return QuantizedActivations(np.ones((n, k), dtype=np.int8))


def test_alternating_weights_cancel():
    t = TernaryMatrix(np.tile([1, -1], 64)[None, :])
    assert gemm_i2s(pack(t, "i2s"), ones(1, 128)).accum.tolist() == [[0]]


def test_counting_case():
    t = TernaryMatrix(np.ones((1, 128), dtype=np.int8))
    assert gemm_i2s(pack(t, "i2s"), ones(1, 128)).accum.tolist() == [[128]]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 50), st.integers(1, 6), st.sampled_from([128, 256, 640]),
       st.integers(0, 2 ** 32 - 1))
def test_matches_integer_oracle(m, n, k, seed):
    rng = np.random.default_rng(seed)
    t, a = random_ternary(rng, m, k), random_acts(rng, n, k)
    np.testing.assert_array_equal(gemm_i2s(pack(t, "i2s"), a).accum,
                                  gemm_int_reference(t, a).accum)


def test_k_halves_concatenate(rng):
    t, a = random_ternary(rng, 9, 256), random_acts(rng, 3, 256)
    whole = gemm_i2s(pack(t, "i2s"), a).accum
    halves = sum(
        gemm_i2s(pack(TernaryMatrix(t.values[:, s]), "i2s"), QuantizedActivations(a.data[:, s])).accum
        for s in (slice(0, 128), slice(128, 256)))
    np.testing.assert_array_equal(whole, halves)


def test_extreme_accumulation_is_exact():
    k = 128 * 64
    t = TernaryMatrix(-np.ones((2, k), dtype=np.int8))
    a = QuantizedActivations(np.full((1, k), 127, dtype=np.int8))
    assert gemm_i2s(pack(t, "i2s"), a).accum.ravel().tolist() == [-127 * k] * 2


def test_shape_errors(rng):
    p = pack(random_ternary(rng, 2, 128), "i2s")
    with pytest.raises(ShapeError):
        gemm_i2s(p, random_acts(rng, 1, 256))
    with pytest.raises(ShapeError):
        gemm_i2s(pack(random_ternary(rng, 2, 130), "tl1"), random_acts(rng, 1, 130))


def test_thread_determinism_and_scale(rng):
    t = random_ternary(rng, 77, 384, scale=0.5)
    a = QuantizedActivations(rng.integers(-127, 128, size=(4, 384)), 2.0)
    p = pack(t, "i2s")
    runs = [gemm_i2s(p, a, threads=th) for th in (1, 2, 4, 8)]
    for r in runs[1:]:
        np.testing.assert_array_equal(r.accum, runs[0].accum)
    assert runs[0].dequant_scale == 0.25
