"""Vectorised softfloat kernels for formats of at most 16 bits.

Values are bit patterns in int64 arrays. Finite operands decode to an
integer significand ``m`` and exponent ``e`` (value ``m * 2**e``); for
16-bit formats every aligned sum or product fits comfortably in 62 bits, so
all arithmetic before the single rounding step is exact.
"""

from __future__ import annotations

import numpy as np

from ._jit import njit

MAX_WIDTH = 16

# op codes shared with the array backend
ADD, SUB, MUL, DIV, REM = 0, 1, 2, 3, 4
OPS = {"fadd": ADD, "fsub": SUB, "fmul": MUL, "fdiv": DIV, "frem": REM}

# fcmp predicates: bit 0 = less, bit 1 = equal, bit 2 = greater, bit 3 = unordered
CC_MASKS = {
    "oeq": 0b0010, "ogt": 0b0100, "oge": 0b0110, "olt": 0b0001, "ole": 0b0011,
    "one": 0b0101, "ord": 0b0111,
    "ueq": 0b1010, "ugt": 0b1100, "uge": 0b1110, "ult": 0b1001, "ule": 0b1011,
    "une": 0b1101, "uno": 0b1000,
}


@njit(cache=True)
def _bitlen(m):
    n = 0
    while m > 0:
        m >>= 1
        n += 1
    return n


@njit(cache=True)
def _nan(eb, sb):
    return (((1 << eb) - 1) << (sb - 1)) | (1 << (sb - 2))


@njit(cache=True)
def _inf(eb, sb, sign):
    return (sign << (eb + sb - 1)) | (((1 << eb) - 1) << (sb - 1))


@njit(cache=True)
def _is_nan(x, eb, sb):
    t = sb - 1
    return ((x >> t) & ((1 << eb) - 1)) == (1 << eb) - 1 and (x & ((1 << t) - 1)) != 0


@njit(cache=True)
def _is_inf(x, eb, sb):
    t = sb - 1
    return ((x >> t) & ((1 << eb) - 1)) == (1 << eb) - 1 and (x & ((1 << t) - 1)) == 0


@njit(cache=True)
def _decode(x, eb, sb):
    """(sign, m, e) for a finite pattern; value = (-1)**sign * m * 2**e."""
    t = sb - 1
    bias = (1 << (eb - 1)) - 1
    sign = (x >> (eb + t)) & 1
    be = (x >> t) & ((1 << eb) - 1)
    frac = x & ((1 << t) - 1)
    if be == 0:
        return sign, frac, 1 - bias - t
    return sign, frac | (1 << t), be - bias - t


@njit(cache=True)
def round_pack(sign, m, e, eb, sb):
    """RNE-round (-1)**sign * m * 2**e into (eb, sb); m >= 0, m < 2**62."""
    t = sb - 1
    bias = (1 << (eb - 1)) - 1
    emin = 1 - bias
    if m == 0:
        return sign << (eb + t)
    top = e + _bitlen(m) - 1
    if top < emin:
        top = emin
    qe = top - t
    shift = qe - e
    if shift > 0:
        if shift >= 63:
            r = 0
        else:
            r = m >> shift
            rem = m & ((1 << shift) - 1)
            half = 1 << (shift - 1)
            if rem > half or (rem == half and (r & 1) == 1):
                r += 1
    else:
        r = m << (-shift)
    if r == (1 << sb):
        r >>= 1
        qe += 1
    top = qe + t
    if top > bias:
        return _inf(eb, sb, sign)
    if r >= (1 << t):
        return (sign << (eb + t)) | ((top + bias) << t) | (r - (1 << t))
    return (sign << (eb + t)) | r


@njit(cache=True)
def _add(a, b, eb, sb):
    sign_bit = 1 << (eb + sb - 1)
    if _is_nan(a, eb, sb) or _is_nan(b, eb, sb):
        return _nan(eb, sb)
    ia = _is_inf(a, eb, sb)
    ib = _is_inf(b, eb, sb)
    if ia and ib:
        if (a ^ b) & sign_bit:
            return _nan(eb, sb)
        return a
    if ia:
        return a
    if ib:
        return b
    sa, ma, ea = _decode(a, eb, sb)
    sn, mb, eb_ = _decode(b, eb, sb)
    e = min(ea, eb_)
    va = ma << (ea - e)
    vb = mb << (eb_ - e)
    if sa:
        va = -va
    if sn:
        vb = -vb
    s = va + vb
    if s == 0:
        if ma == 0 and mb == 0 and sa == 1 and sn == 1:
            return sign_bit
        return 0
    if s < 0:
        return round_pack(1, -s, e, eb, sb)
    return round_pack(0, s, e, eb, sb)


@njit(cache=True)
def _mul(a, b, eb, sb):
    if _is_nan(a, eb, sb) or _is_nan(b, eb, sb):
        return _nan(eb, sb)
    sign = ((a ^ b) >> (eb + sb - 1)) & 1
    sa, ma, ea = _decode(a, eb, sb)
    sn, mb, eb_ = _decode(b, eb, sb)
    if _is_inf(a, eb, sb) or _is_inf(b, eb, sb):
        za = (not _is_inf(a, eb, sb)) and ma == 0
        zb = (not _is_inf(b, eb, sb)) and mb == 0
        if za or zb:
            return _nan(eb, sb)
        return _inf(eb, sb, sign)
    return round_pack(sign, ma * mb, ea + eb_, eb, sb)


@njit(cache=True)
def _div(a, b, eb, sb):
    if _is_nan(a, eb, sb) or _is_nan(b, eb, sb):
        return _nan(eb, sb)
    sign = ((a ^ b) >> (eb + sb - 1)) & 1
    ia = _is_inf(a, eb, sb)
    ib = _is_inf(b, eb, sb)
    if ia:
        if ib:
            return _nan(eb, sb)
        return _inf(eb, sb, sign)
    if ib:
        return sign << (eb + sb - 1)
    sa, ma, ea = _decode(a, eb, sb)
    sn, mb, eb_ = _decode(b, eb, sb)
    if mb == 0:
        if ma == 0:
            return _nan(eb, sb)
        return _inf(eb, sb, sign)
    if ma == 0:
        return sign << (eb + sb - 1)
    k = 60 - _bitlen(ma)
    num = ma << k
    q = num // mb
    r = num - q * mb
    # two extra low bits keep the sticky remainder below the rounding point
    q = (q << 2) | (1 if r != 0 else 0)
    return round_pack(sign, q, ea - eb_ - k - 2, eb, sb)


@njit(cache=True)
def _fmod(a, b, eb, sb):
    """C fmod: x - trunc(x/y)*y, exact; the result takes x's sign."""
    if _is_nan(a, eb, sb) or _is_nan(b, eb, sb) or _is_inf(a, eb, sb):
        return _nan(eb, sb)
    sa, ma, ea = _decode(a, eb, sb)
    if _is_inf(b, eb, sb):
        return a
    sn, mb, eb_ = _decode(b, eb, sb)
    if mb == 0:
        return _nan(eb, sb)
    if ma == 0:
        return a
    if ea >= eb_:
        r = (ma << (ea - eb_)) % mb
        e = eb_
    else:
        r = ma % (mb << (eb_ - ea))
        e = ea
    return round_pack(sa, r, e, eb, sb)


@njit(cache=True)
def binop_scalar(op, a, b, eb, sb):
    if op == ADD:
        return _add(a, b, eb, sb)
    if op == SUB:
        if _is_nan(b, eb, sb):
            return _nan(eb, sb)
        return _add(a, b ^ (1 << (eb + sb - 1)), eb, sb)
    if op == MUL:
        return _mul(a, b, eb, sb)
    if op == DIV:
        return _div(a, b, eb, sb)
    return _fmod(a, b, eb, sb)


@njit(cache=True)
def binop(op, a, b, eb, sb):
    out = np.empty(a.shape[0], dtype=np.int64)
    for i in range(a.shape[0]):
        out[i] = binop_scalar(op, a[i], b[i], eb, sb)
    return out


@njit(cache=True)
def _order(x, eb, sb):
    """Monotone integer key for a non-NaN pattern (both zeros map to 0)."""
    sign_bit = 1 << (eb + sb - 1)
    mag = x & (sign_bit - 1)
    if x & sign_bit:
        return -mag
    return mag


@njit(cache=True)
def fcmp(mask, a, b, eb, sb):
    out = np.empty(a.shape[0], dtype=np.int64)
    for i in range(a.shape[0]):
        if _is_nan(a[i], eb, sb) or _is_nan(b[i], eb, sb):
            rel = 8
        else:
            ka = _order(a[i], eb, sb)
            kb = _order(b[i], eb, sb)
            rel = 1 if ka < kb else (2 if ka == kb else 4)
        out[i] = 1 if (mask & rel) != 0 else 0
    return out


@njit(cache=True)
def fpconv(a, eb, sb, eb2, sb2):
    """fpext / fptrunc into (eb2, sb2)."""
    out = np.empty(a.shape[0], dtype=np.int64)
    for i in range(a.shape[0]):
        x = a[i]
        if _is_nan(x, eb, sb):
            out[i] = _nan(eb2, sb2)
        elif _is_inf(x, eb, sb):
            out[i] = _inf(eb2, sb2, (x >> (eb + sb - 1)) & 1)
        else:
            s, m, e = _decode(x, eb, sb)
            out[i] = round_pack(s, m, e, eb2, sb2)
    return out


@njit(cache=True)
def fptoi(a, eb, sb, width, signed):
    """Truncate toward zero; returns (bits, defined)."""
    out = np.zeros(a.shape[0], dtype=np.int64)
    ok = np.zeros(a.shape[0], dtype=np.bool_)
    if signed:
        lo = -(1 << (width - 1))
        hi = (1 << (width - 1)) - 1
    else:
        lo = 0
        hi = (1 << width) - 1
    mask = (1 << width) - 1
    for i in range(a.shape[0]):
        x = a[i]
        if _is_nan(x, eb, sb) or _is_inf(x, eb, sb):
            continue
        s, m, e = _decode(x, eb, sb)
        if e >= 0:
            if e > 40:
                continue
            n = m << e
        elif -e >= 63:
            n = 0
        else:
            n = m >> (-e)
        if s:
            n = -n
        if lo <= n <= hi:
            out[i] = n & mask
            ok[i] = True
    return out, ok


@njit(cache=True)
def itofp(a, width, signed, eb, sb):
    """sitofp / uitofp; returns (bits, defined) with overflow undefined."""
    out = np.empty(a.shape[0], dtype=np.int64)
    ok = np.ones(a.shape[0], dtype=np.bool_)
    mask = (1 << width) - 1
    for i in range(a.shape[0]):
        n = a[i] & mask
        s = 0
        if signed and (n >> (width - 1)) & 1:
            n = (1 << width) - n
            s = 1
        r = round_pack(s, n, 0, eb, sb)
        out[i] = r
        if _is_inf(r, eb, sb):
            ok[i] = False
    return out, ok


def as_array(x, n: int) -> np.ndarray:
    """Broadcast a scalar or array operand to an int64 array of length n."""
    arr = np.asarray(x, dtype=np.int64)
    if arr.ndim == 0:
        return np.full(n, int(arr), dtype=np.int64)
    return arr
