import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ternlut import (ConfigError, ElutConfig, QuantizedActivations, ShapeError, TernaryMatrix,
                     gemm_bitwise_ref, gemm_elut, gemm_int_reference, gemm_lut, pack,
                     precompute_tl1)
from ternlut.elut import bitwise_width, entry_count
from ternlut.pack import TL2_DECODE

from conftest import random_acts

VALUE_SETS = {2: (-1, 1), 3: (-1, 0, 1), 4: (-2, -1, 1, 2), 5: (-2, -1, 0, 1, 2)}


def test_ternary_g2_matches_tl1(rng):
    w = rng.integers(-1, 2, size=(20, 64))
    a = random_acts(rng, 3, 64)
    cfg = ElutConfig((-1, 0, 1), 2)
    tl1 = gemm_lut(pack(TernaryMatrix(w), "tl1"), precompute_tl1(a)).accum
    np.testing.assert_array_equal(gemm_elut(w, a, cfg).accum, tl1)


def test_c5_g2_matches_oracle(rng):
    w = rng.choice(VALUE_SETS[5], size=(12, 40))
    a = random_acts(rng, 5, 40)
    cfg = ElutConfig(VALUE_SETS[5], 2, mirror=True)
    np.testing.assert_array_equal(gemm_elut(w, a, cfg).accum, gemm_int_reference(w, a).accum)


def test_g1_is_plain_mad(rng):
    w = rng.choice(VALUE_SETS[4], size=(6, 17))
    a = random_acts(rng, 2, 17)
    np.testing.assert_array_equal(gemm_elut(w, a, ElutConfig(VALUE_SETS[4], 1)).accum,
                                  gemm_int_reference(w, a).accum)


def test_ternary_mirror_table_order_is_tl2():
    np.testing.assert_array_equal(ElutConfig((-1, 0, 1), 3, mirror=True).tuples(), TL2_DECODE)


def test_bitwise_ternary_matches_elut(rng):
    w = rng.integers(-1, 2, size=(10, 48))
    a = random_acts(rng, 4, 48)
    np.testing.assert_array_equal(gemm_bitwise_ref(w, a, bits=2).accum,
                                  gemm_elut(w, a, ElutConfig((-1, 0, 1), 3, mirror=True)).accum)


def test_bitwise_zero_weights(rng):
    assert not gemm_bitwise_ref(np.zeros((3, 8), dtype=int), random_acts(rng, 2, 8), 2).accum.any()


def test_bitwise_single_bit_masked_sum(rng):
    w = rng.integers(0, 2, size=(7, 32))
    a = random_acts(rng, 3, 32)
    expected = np.array([[a.data[n][w[m] == 1].astype(int).sum() for n in range(3)]
                         for m in range(7)])
    np.testing.assert_array_equal(gemm_bitwise_ref(w, a, bits=1).accum, expected)


def test_bitwise_rejects_unrepresentable(rng):
    with pytest.raises(ShapeError):
        gemm_bitwise_ref(np.full((1, 4), 5), random_acts(rng, 1, 4), bits=2)


@pytest.mark.parametrize("c", sorted(VALUE_SETS))
@pytest.mark.parametrize("g", [1, 2, 3])
def test_mirror_halving(rng, c, g):
    vs = VALUE_SETS[c]
    plain = ElutConfig(vs, g, mirror=False, register_budget=1024)
    mirrored = ElutConfig(vs, g, mirror=True, register_budget=1024)
    assert mirrored.entries == -(-c ** g // 2) == len(mirrored.tuples())
    assert plain.entries == c ** g == len(plain.tuples())
    w = rng.choice(vs, size=(8, 6 * g))
    a = random_acts(rng, 3, 6 * g)
    np.testing.assert_array_equal(gemm_elut(w, a, plain).accum, gemm_elut(w, a, mirrored).accum)


def test_mirror_tuples_are_canonical():
    cfg = ElutConfig((-2, -1, 1, 2), 2, mirror=True)
    stored = {tuple(t) for t in cfg.tuples().tolist()}
    for t in stored:
        assert tuple(-x for x in t) not in stored


def test_config_errors():
    with pytest.raises(ConfigError):
        ElutConfig((-1, 0, 1), 3)            # 27 entries > 16
    with pytest.raises(ConfigError):
        ElutConfig((0, 1, 2), 2, mirror=True)
    with pytest.raises(ConfigError):
        ElutConfig((1, 0), 1)
    assert ElutConfig((-1, 0, 1), 3, mirror=True).entries == 14


def test_elut_shape_errors(rng):
    cfg = ElutConfig((-1, 0, 1), 2)
    with pytest.raises(ShapeError):
        gemm_elut(np.zeros((2, 5), dtype=int), random_acts(rng, 1, 5), cfg)
    with pytest.raises(ShapeError):
        gemm_elut(np.full((2, 4), 3), random_acts(rng, 1, 4), cfg)


@pytest.mark.parametrize("vs, bits", [((-1, 1), 2), ((-1, 0, 1), 2), ((-2, -1, 1, 2), 3),
                                      ((-2, -1, 0, 1, 2), 3), ((0, 1), 1), ((0, 1, 2, 3), 2)])
def test_bitwise_width(vs, bits):
    assert bitwise_width(vs) == bits


def test_entry_count():
    assert entry_count(3, 3, True) == 14
    assert entry_count(3, 2, False) == 9


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(sorted(VALUE_SETS)), st.sampled_from([1, 2, 3]), st.booleans(),
       st.integers(1, 9), st.integers(1, 4), st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_three_way_equality(c, g, mirror, m, n, groups, seed):
    rng = np.random.default_rng(seed)
    vs = VALUE_SETS[c]
    k = 12 * groups
    w = rng.choice(vs, size=(m, k))
    a = QuantizedActivations(rng.integers(-127, 128, size=(n, k)))
    ref = gemm_int_reference(w, a).accum
    cfg = ElutConfig(vs, g, mirror, register_budget=128)
    np.testing.assert_array_equal(gemm_elut(w, a, cfg).accum, ref)
    np.testing.assert_array_equal(gemm_bitwise_ref(w, a, bitwise_width(vs)).accum, ref)
