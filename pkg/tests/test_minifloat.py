from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fpverify.formats import FP8, HALF, SINGLE, literal_bits
from fpverify.oracle.minifloat import (UNDEF, MiniFloat, mf_abs, mf_add, mf_cmp, mf_convert,
                                       mf_div, mf_fmod_direct, mf_from_int, mf_mul, mf_neg,
                                       mf_rem, mf_sub, mf_to_int)
from fpverify.formats import IntType


def lit(fmt, text):
    return MiniFloat(fmt, literal_bits(fmt, text))


def fp8_values():
    return st.integers(0, 255).map(lambda b: MiniFloat(FP8, b))


def test_zero_sum_is_positive():
    assert mf_add(lit(HALF, "0.0"), lit(HALF, "-0.0")).bits == HALF.zero()
    assert mf_add(lit(HALF, "-0.0"), lit(HALF, "-0.0")).bits == HALF.zero(True)
    assert mf_sub(lit(HALF, "1.0"), lit(HALF, "1.0")).bits == HALF.zero()


def test_division_by_signed_zero():
    assert mf_div(lit(SINGLE, "1.0"), lit(SINGLE, "-0.0")).bits == SINGLE.inf(True)
    assert mf_div(lit(SINGLE, "0.0"), lit(SINGLE, "0.0")).is_nan


def test_overflow_to_infinity():
    big = MiniFloat.from_fraction(FP8, FP8.max_finite)
    assert mf_mul(big, lit(FP8, "2.0")).bits == FP8.inf()


def test_rne_ties_to_even():
    # 2049 lies halfway between 2048 and 2050 at half precision
    assert MiniFloat.from_fraction(HALF, Fraction(2049)).value == 2048
    assert MiniFloat.from_fraction(HALF, Fraction(2051)).value == 2052


def test_subnormals_are_kept():
    tiny = MiniFloat(HALF, 1)
    assert tiny.is_subnormal and tiny.value == Fraction(1, 2 ** 24)
    assert mf_add(tiny, tiny).value == Fraction(2, 2 ** 24)


@pytest.mark.parametrize("x,y,expect", [("5.0", "2.0", "1.0"), ("-5.0", "2.0", "-1.0"),
                                        ("5.0", "-2.0", "1.0"), ("5.5", "2.0", "1.5")])
def test_fmod_truncates(x, y, expect):
    assert mf_rem(lit(HALF, x), lit(HALF, y)).bits == literal_bits(HALF, expect)


def test_fmod_special_cases():
    x = lit(HALF, "3.0")
    assert mf_rem(x, lit(HALF, "0.0")).is_nan
    assert mf_rem(MiniFloat.inf(HALF), x).is_nan
    assert mf_rem(x, MiniFloat.inf(HALF)).bits == x.bits
    assert mf_rem(lit(HALF, "-4.0"), lit(HALF, "2.0")).bits == HALF.zero(True)


@given(fp8_values(), fp8_values())
def test_fmod_composition_matches_definition(x, y):
    assert mf_rem(x, y).bits == mf_fmod_direct(x, y).bits


@given(fp8_values(), fp8_values())
def test_add_and_mul_commute(x, y):
    assert mf_add(x, y).bits == mf_add(y, x).bits
    assert mf_mul(x, y).bits == mf_mul(y, x).bits


@given(fp8_values())
def test_abs_and_neg(x):
    a = mf_abs(x)
    assert a.is_nan or not a.is_negative
    assert mf_abs(mf_neg(x)).bits == a.bits
    if not x.is_nan:
        assert mf_neg(mf_neg(x)).bits == x.bits


def test_nan_is_canonical():
    assert MiniFloat(FP8, 0xFF).bits == FP8.canonical_nan
    assert MiniFloat(FP8, 0x79).bits == FP8.canonical_nan


def test_comparisons():
    nan, one = MiniFloat.nan(FP8), lit(FP8, "1.0")
    pz, nz = lit(FP8, "0.0"), lit(FP8, "-0.0")
    assert not mf_cmp("oeq", nan, nan)
    assert mf_cmp("uno", nan, one)
    assert mf_cmp("ueq", nan, one)
    assert mf_cmp("oeq", nz, pz)
    assert not mf_cmp("one", nz, pz)
    assert mf_cmp("olt", MiniFloat.inf(FP8, True), one)


def test_conversions():
    i8 = IntType(8)
    assert mf_to_int(lit(HALF, "-2.75"), i8, True) == (-2) & 0xFF
    assert mf_to_int(lit(HALF, "300.0"), i8, True) is UNDEF
    assert mf_to_int(MiniFloat.nan(HALF), i8, False) is UNDEF
    # -4095 is a tie at half precision and rounds to the even neighbour
    assert mf_from_int((-4095) & 0xFFFF, IntType(16), HALF, True).value == -4096
    assert mf_from_int(0xFFFF, IntType(16), HALF, False) is UNDEF
    assert mf_convert(lit(SINGLE, "65520.0"), HALF).is_inf
