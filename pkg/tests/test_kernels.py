import os
import subprocess
import sys

import numpy as np
import pytest

from fpverify.formats import FP8, HALF, IntType
from fpverify.oracle import kernels as K
from fpverify.oracle.minifloat import (UNDEF, MiniFloat, mf_arith, mf_cmp, mf_convert,
                                       mf_from_int, mf_rem, mf_to_int)

ALL = np.arange(256, dtype=np.int64)
XS, YS = (a.ravel() for a in np.meshgrid(ALL, ALL, indexing="ij"))


def reference(op, x, y):
    a, b = MiniFloat(FP8, x), MiniFloat(FP8, y)
    return (mf_rem(a, b) if op == "frem" else mf_arith(op, a, b)).bits


@pytest.mark.parametrize("op", sorted(K.OPS))
def test_binop_matches_softfloat_on_fp8(op):
    got = K.binop(K.OPS[op], XS, YS, FP8.ebits, FP8.sbits)
    want = np.array([reference(op, x, y) for x, y in zip(XS.tolist(), YS.tolist())])
    assert np.array_equal(got, want)


@pytest.mark.parametrize("cc", sorted(K.CC_MASKS))
def test_fcmp_matches_softfloat_on_fp8(cc):
    got = K.fcmp(K.CC_MASKS[cc], XS, YS, FP8.ebits, FP8.sbits)
    want = np.array([mf_cmp(cc, MiniFloat(FP8, x), MiniFloat(FP8, y))
                     for x, y in zip(XS.tolist(), YS.tolist())])
    assert np.array_equal(got.astype(bool), want)


def test_half_sample_matches_softfloat():
    rng = np.random.default_rng(7)
    xs, ys = rng.integers(0, 1 << 16, size=(2, 3000), dtype=np.int64)
    for op in K.OPS:
        got = K.binop(K.OPS[op], xs, ys, HALF.ebits, HALF.sbits)
        for x, y, g in zip(xs.tolist(), ys.tolist(), got.tolist()):
            a, b = MiniFloat(HALF, x), MiniFloat(HALF, y)
            assert g == (mf_rem(a, b) if op == "frem" else mf_arith(op, a, b)).bits, (op, x, y)


def test_format_conversion():
    got = K.fpconv(ALL, FP8.ebits, FP8.sbits, HALF.ebits, HALF.sbits)
    assert got.tolist() == [mf_convert(MiniFloat(FP8, x), HALF).bits for x in ALL.tolist()]
    halves = np.arange(1 << 16, dtype=np.int64)
    got = K.fpconv(halves, HALF.ebits, HALF.sbits, FP8.ebits, FP8.sbits)
    assert got.tolist() == [mf_convert(MiniFloat(HALF, x), FP8).bits for x in halves.tolist()]


@pytest.mark.parametrize("signed", [True, False])
def test_int_conversions(signed):
    i8 = IntType(8)
    bits, ok = K.fptoi(ALL, FP8.ebits, FP8.sbits, 8, signed)
    for x, b, k in zip(ALL.tolist(), bits.tolist(), ok.tolist()):
        want = mf_to_int(MiniFloat(FP8, x), i8, signed)
        assert (want is UNDEF) == (not k)
        if k:
            assert b == want
    bits, ok = K.itofp(ALL, 8, signed, FP8.ebits, FP8.sbits)
    for x, b, k in zip(ALL.tolist(), bits.tolist(), ok.tolist()):
        want = mf_from_int(x, i8, FP8, signed)
        assert (want is UNDEF) == (not k)
        if k:
            assert b == want.bits


def test_fallback_without_numba_matches():
    """The kernels give identical bits with FPVERIFY_DISABLE_JIT=1."""
    code = ("import numpy as np\n"
            "from fpverify.oracle import kernels as K\n"
            "from fpverify.oracle._jit import JIT_ENABLED\n"
            "assert not JIT_ENABLED\n"
            "x = np.arange(256, dtype=np.int64)\n"
            "print(','.join(str(int(v)) for v in K.binop(K.OPS['fdiv'], x, x[::-1].copy(), 4, 4)))\n")
    env = dict(os.environ, FPVERIFY_DISABLE_JIT="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.strip()
    want = K.binop(K.OPS["fdiv"], ALL, ALL[::-1].copy(), FP8.ebits, FP8.sbits)
    assert out == ",".join(map(str, want.tolist()))
