"""Reference softfloat over exact rationals.

Every operation computes the exact result as a ``Fraction`` and rounds once
(RNE). It is slow but works for any format, and it shares no code with the
SMT encoder beyond the format descriptions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..formats import FPFormat, IntType, format_fp, round_fraction


class _Undef:
    """Marker for a conversion result LLVM leaves undefined."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "UNDEF"


UNDEF = _Undef()


@dataclass(frozen=True)
class MiniFloat:
    fmt: FPFormat
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits < 1 << self.fmt.width:
            raise ValueError(f"bit pattern {self.bits:#x} does not fit {self.fmt}")
        if self.is_nan and self.bits != self.fmt.canonical_nan:
            object.__setattr__(self, "bits", self.fmt.canonical_nan)

    # --- fields ---
    @property
    def sign(self) -> int:
        return self.bits >> (self.fmt.width - 1)

    @property
    def exponent(self) -> int:
        return (self.bits >> self.fmt.tbits) & self.fmt.exp_mask

    @property
    def trailing(self) -> int:
        return self.bits & ((1 << self.fmt.tbits) - 1)

    # --- classification ---
    @property
    def is_nan(self) -> bool:
        return self.exponent == self.fmt.exp_mask and self.trailing != 0

    @property
    def is_inf(self) -> bool:
        return self.exponent == self.fmt.exp_mask and self.trailing == 0

    @property
    def is_zero(self) -> bool:
        return self.exponent == 0 and self.trailing == 0

    @property
    def is_subnormal(self) -> bool:
        return self.exponent == 0 and self.trailing != 0

    @property
    def is_normal(self) -> bool:
        return 0 < self.exponent < self.fmt.exp_mask

    @property
    def is_negative(self) -> bool:
        """SMT-LIB ``fp.isNegative``: false for NaN, true for -0."""
        return bool(self.sign) and not self.is_nan

    @property
    def value(self) -> Fraction:
        """Exact value of a finite number."""
        if self.exponent == self.fmt.exp_mask:
            raise ValueError("infinite or NaN has no rational value")
        p = self.fmt.sbits
        frac = Fraction(self.trailing, 2 ** (p - 1))
        if self.exponent == 0:
            mag = frac * Fraction(2) ** self.fmt.emin
        else:
            mag = (1 + frac) * Fraction(2) ** (self.exponent - self.fmt.bias)
        return -mag if self.sign else mag

    # --- construction ---
    @classmethod
    def nan(cls, fmt: FPFormat) -> "MiniFloat":
        return cls(fmt, fmt.canonical_nan)

    @classmethod
    def inf(cls, fmt: FPFormat, negative: bool = False) -> "MiniFloat":
        return cls(fmt, fmt.inf(negative))

    @classmethod
    def zero(cls, fmt: FPFormat, negative: bool = False) -> "MiniFloat":
        return cls(fmt, fmt.zero(negative))

    @classmethod
    def from_fraction(cls, fmt: FPFormat, q: Fraction, negative: bool = False) -> "MiniFloat":
        return cls(fmt, round_fraction(fmt, Fraction(q), negative))

    def __repr__(self):
        return f"MiniFloat({self.fmt}, {format_fp(self.fmt, self.bits)})"


def _check(a: MiniFloat, b: MiniFloat) -> FPFormat:
    if a.fmt != b.fmt:
        raise ValueError(f"format mismatch: {a.fmt} vs {b.fmt}")
    return a.fmt


# ---------------------------------------------------------------------------
# arithmetic

def mf_add(a: MiniFloat, b: MiniFloat) -> MiniFloat:
    fmt = _check(a, b)
    if a.is_nan or b.is_nan:
        return MiniFloat.nan(fmt)
    if a.is_inf or b.is_inf:
        if a.is_inf and b.is_inf and a.sign != b.sign:
            return MiniFloat.nan(fmt)
        return a if a.is_inf else b
    q = a.value + b.value
    if q == 0:
        # exact zero sum is +0 under RNE unless both operands are -0
        return MiniFloat.zero(fmt, negative=bool(a.sign and b.sign and a.is_zero and b.is_zero))
    return MiniFloat.from_fraction(fmt, q)


def mf_neg(a: MiniFloat) -> MiniFloat:
    if a.is_nan:
        return a
    return MiniFloat(a.fmt, a.bits ^ a.fmt.sign_bit)


def mf_abs(a: MiniFloat) -> MiniFloat:
    if a.is_nan:
        return a
    return MiniFloat(a.fmt, a.bits & ~a.fmt.sign_bit)


def mf_sub(a: MiniFloat, b: MiniFloat) -> MiniFloat:
    return mf_add(a, mf_neg(b))


def mf_mul(a: MiniFloat, b: MiniFloat) -> MiniFloat:
    fmt = _check(a, b)
    neg = bool(a.sign ^ b.sign)
    if a.is_nan or b.is_nan:
        return MiniFloat.nan(fmt)
    if a.is_inf or b.is_inf:
        if a.is_zero or b.is_zero:
            return MiniFloat.nan(fmt)
        return MiniFloat.inf(fmt, neg)
    return MiniFloat.from_fraction(fmt, a.value * b.value, negative=neg)


def mf_div(a: MiniFloat, b: MiniFloat) -> MiniFloat:
    fmt = _check(a, b)
    neg = bool(a.sign ^ b.sign)
    if a.is_nan or b.is_nan:
        return MiniFloat.nan(fmt)
    if a.is_inf:
        return MiniFloat.nan(fmt) if b.is_inf else MiniFloat.inf(fmt, neg)
    if b.is_inf:
        return MiniFloat.zero(fmt, neg)
    if b.is_zero:
        return MiniFloat.nan(fmt) if a.is_zero else MiniFloat.inf(fmt, neg)
    return MiniFloat.from_fraction(fmt, a.value / b.value, negative=neg)


_ARITH = {"fadd": mf_add, "fsub": mf_sub, "fmul": mf_mul, "fdiv": mf_div,
          "add": mf_add, "sub": mf_sub, "mul": mf_mul, "div": mf_div}


def mf_arith(op: str, a: MiniFloat, b: MiniFloat) -> MiniFloat:
    return _ARITH[op](a, b)


def _round_half_even(q: Fraction) -> int:
    return round(q)  # Fraction rounds ties to even


def mf_remainder(x: MiniFloat, y: MiniFloat) -> MiniFloat:
    """IEEE 754 remainder: x - n*y with n the integer nearest x/y (ties even)."""
    fmt = _check(x, y)
    if x.is_nan or y.is_nan or x.is_inf or y.is_zero:
        return MiniFloat.nan(fmt)
    if y.is_inf or x.is_zero:
        return x
    n = _round_half_even(x.value / y.value)
    r = x.value - n * y.value
    if r == 0:
        return MiniFloat.zero(fmt, bool(x.sign))
    return MiniFloat.from_fraction(fmt, r)  # exact


def mf_rem(x: MiniFloat, y: MiniFloat) -> MiniFloat:
    """C ``fmod`` built from the IEEE remainder of the magnitudes."""
    abs_y = mf_abs(y)
    r = mf_remainder(mf_abs(x), abs_y)
    if r.is_negative:
        r = mf_add(r, abs_y)
    if x.is_negative != r.is_negative:
        r = mf_neg(r)
    return r


def mf_fmod_direct(x: MiniFloat, y: MiniFloat) -> MiniFloat:
    """C ``fmod`` from its definition (truncated quotient); used as a cross-check."""
    fmt = _check(x, y)
    if x.is_nan or y.is_nan or x.is_inf or y.is_zero:
        return MiniFloat.nan(fmt)
    if y.is_inf or x.is_zero:
        return x
    n = int(x.value / y.value)  # toward zero
    r = x.value - n * y.value
    if r == 0:
        return MiniFloat.zero(fmt, bool(x.sign))
    return MiniFloat.from_fraction(fmt, r)


# ---------------------------------------------------------------------------
# comparisons

def _key(a: MiniFloat):
    if a.is_inf:
        return (1 if not a.sign else -1, Fraction(0))
    return (0, a.value)


def mf_cmp(cc: str, a: MiniFloat, b: MiniFloat) -> bool:
    _check(a, b)
    unordered = a.is_nan or b.is_nan
    if cc == "ord":
        return not unordered
    if cc == "uno":
        return unordered
    if unordered:
        return cc[0] == "u"
    ka, kb = _key(a), _key(b)
    rel = {"eq": ka == kb, "ne": ka != kb, "gt": ka > kb, "ge": ka >= kb,
           "lt": ka < kb, "le": ka <= kb}[cc[1:]]
    return rel


# ---------------------------------------------------------------------------
# conversions

def mf_convert(a: MiniFloat, fmt: FPFormat) -> MiniFloat:
    """fpext / fptrunc."""
    if a.is_nan:
        return MiniFloat.nan(fmt)
    if a.is_inf:
        return MiniFloat.inf(fmt, bool(a.sign))
    return MiniFloat.from_fraction(fmt, a.value, negative=bool(a.sign))


def mf_to_int(a: MiniFloat, ity: IntType, signed: bool):
    """fptosi / fptoui: truncation toward zero; out of range gives UNDEF."""
    if a.is_nan or a.is_inf:
        return UNDEF
    n = int(a.value)
    lo, hi = ((-(1 << (ity.width - 1)), (1 << (ity.width - 1)) - 1) if signed
              else (0, (1 << ity.width) - 1))
    if not lo <= n <= hi:
        return UNDEF
    return n & ity.mask


def mf_from_int(bits: int, ity: IntType, fmt: FPFormat, signed: bool):
    """sitofp / uitofp: RNE; a result that rounds to infinity is UNDEF."""
    n = ity.signed(bits) if signed else bits & ity.mask
    r = MiniFloat.from_fraction(fmt, Fraction(n))
    return UNDEF if r.is_inf else r
