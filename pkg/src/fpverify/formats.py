"""Concrete value types: binary floating-point formats and fixed-width integers.

A format is described by its exponent width and its precision (significand
width *including* the hidden bit), the same pair SMT-LIB uses for
``(_ FloatingPoint eb sb)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction


@dataclass(frozen=True)
class FPFormat:
    ebits: int
    sbits: int
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.ebits < 2 or self.sbits < 2:
            raise ValueError(f"degenerate format ({self.ebits}, {self.sbits})")

    @property
    def width(self) -> int:
        return self.ebits + self.sbits

    @property
    def precision(self) -> int:
        return self.sbits

    @property
    def bias(self) -> int:
        return (1 << (self.ebits - 1)) - 1

    @property
    def emin(self) -> int:
        return 1 - self.bias

    @property
    def emax(self) -> int:
        return self.bias

    @property
    def tbits(self) -> int:
        """Width of the trailing significand field."""
        return self.sbits - 1

    @property
    def exp_mask(self) -> int:
        return (1 << self.ebits) - 1

    @property
    def sign_bit(self) -> int:
        return 1 << (self.width - 1)

    @property
    def canonical_nan(self) -> int:
        return (self.exp_mask << self.tbits) | (1 << (self.tbits - 1))

    def inf(self, negative: bool = False) -> int:
        return (self.sign_bit if negative else 0) | (self.exp_mask << self.tbits)

    def zero(self, negative: bool = False) -> int:
        return self.sign_bit if negative else 0

    @property
    def max_finite(self) -> Fraction:
        return Fraction(2 ** self.sbits - 1) * Fraction(2) ** (self.emax - self.tbits)

    @property
    def overflow_threshold(self) -> Fraction:
        """Smallest magnitude that rounds to infinity under RNE."""
        return Fraction(2) ** self.emax * (2 - Fraction(1, 2 ** self.sbits))

    def sort_key(self):
        return (self.width, self.sbits)

    def __str__(self):
        return self.name or f"fp({self.ebits},{self.sbits})"


@dataclass(frozen=True)
class IntType:
    width: int

    def __post_init__(self):
        if not 1 <= self.width <= 64:
            raise ValueError(f"integer width {self.width} outside 1..64")

    @property
    def mask(self) -> int:
        return (1 << self.width) - 1

    def signed(self, bits: int) -> int:
        bits &= self.mask
        return bits - (1 << self.width) if bits >> (self.width - 1) else bits

    def sort_key(self):
        return (self.width,)

    def __str__(self):
        return f"i{self.width}"


FP8 = FPFormat(4, 4, "fp8")
HALF = FPFormat(5, 11, "half")
SINGLE = FPFormat(8, 24, "float")
DOUBLE = FPFormat(11, 53, "double")
I1 = IntType(1)

DEFAULT_FP_FORMATS = (HALF, SINGLE, DOUBLE)
DEFAULT_INT_WIDTHS = (8, 16, 32, 64)

FP_BY_NAME = {"fp8": FP8, "half": HALF, "float": SINGLE, "single": SINGLE, "double": DOUBLE}

_INT_TYPE = re.compile(r"i([1-9][0-9]*)\Z")


def parse_type(text: str) -> FPFormat | IntType:
    if text in FP_BY_NAME:
        return FP_BY_NAME[text]
    m = _INT_TYPE.match(text)
    if m:
        return IntType(int(m.group(1)))
    raise ValueError(f"unknown type {text!r}")


def is_type_name(text: str) -> bool:
    try:
        parse_type(text)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------------------
# exact value <-> bit pattern

def round_fraction(fmt: FPFormat, q: Fraction, negative: bool = False) -> int:
    """Round the exact value ``q`` to ``fmt`` under RNE and return its bits.

    ``negative`` only matters when ``q`` is zero; otherwise the sign is
    taken from ``q``.
    """
    if q == 0:
        return fmt.zero(negative)
    sign = fmt.sign_bit if q < 0 else 0
    mag = abs(q)
    p = fmt.sbits
    # exponent of the leading bit
    e = mag.numerator.bit_length() - mag.denominator.bit_length()
    if Fraction(2) ** e > mag:
        e -= 1
    elif Fraction(2) ** (e + 1) <= mag:
        e += 1
    e = max(e, fmt.emin)
    n = round(mag / Fraction(2) ** (e - (p - 1)))  # Fraction.__round__ is half-even
    if n == 1 << p:
        n >>= 1
        e += 1
    if e > fmt.emax:
        return sign | fmt.inf()
    if n >> (p - 1):
        return sign | ((e + fmt.bias) << fmt.tbits) | (n - (1 << (p - 1)))
    return sign | n


def bits_to_fraction(fmt: FPFormat, bits: int) -> Fraction:
    """Exact value of a finite bit pattern (zeros map to 0)."""
    e = (bits >> fmt.tbits) & fmt.exp_mask
    t = bits & ((1 << fmt.tbits) - 1)
    if e == fmt.exp_mask:
        raise ValueError("not a finite value")
    if e == 0:
        mag = Fraction(t) * Fraction(2) ** (fmt.emin - fmt.tbits)
    else:
        mag = Fraction((1 << fmt.tbits) | t) * Fraction(2) ** (e - fmt.bias - fmt.tbits)
    return -mag if bits & fmt.sign_bit else mag


def is_nan_bits(fmt: FPFormat, bits: int) -> bool:
    return ((bits >> fmt.tbits) & fmt.exp_mask) == fmt.exp_mask and bits & ((1 << fmt.tbits) - 1) != 0


def canonicalize(fmt: FPFormat, bits: int) -> int:
    return fmt.canonical_nan if is_nan_bits(fmt, bits) else bits


def fp_values(fmt: FPFormat) -> list[int]:
    """All distinct values of ``fmt`` as bit patterns, NaN once (canonical)."""
    out = []
    for bits in range(1 << fmt.width):
        if is_nan_bits(fmt, bits):
            if bits == fmt.canonical_nan:
                out.append(bits)
        else:
            out.append(bits)
    return out


def format_fp(fmt: FPFormat, bits: int) -> str:
    """Decimal rendering (exact for every format up to double)."""
    if is_nan_bits(fmt, bits):
        return "nan"
    neg = bool(bits & fmt.sign_bit)
    if bits & ~fmt.sign_bit == fmt.inf():
        return "-inf" if neg else "inf"
    q = bits_to_fraction(fmt, bits)
    if q == 0:
        return "-0.0" if neg else "0.0"
    if fmt.sbits <= 53 and fmt.emin >= -1022 and fmt.emax <= 1023:
        return repr(float(q))
    return str(q)


def format_bits(width: int, bits: int) -> str:
    return f"0x{bits:0{(width + 3) // 4}x}"


# ---------------------------------------------------------------------------
# literals

_DECIMAL = re.compile(r"[+-]?([0-9]+(\.[0-9]*)?|\.[0-9]+)([eE][+-]?[0-9]+)?\Z")


def literal_bits(fmt: FPFormat, text: str) -> int:
    """Bits of a DSL literal in ``fmt`` (decimal rounds RNE)."""
    t = text.lower()
    if t in ("nan", "+nan", "-nan"):
        return fmt.canonical_nan
    if t in ("inf", "+inf"):
        return fmt.inf()
    if t == "-inf":
        return fmt.inf(negative=True)
    if not _DECIMAL.match(t):
        raise ValueError(f"bad floating-point literal {text!r}")
    return round_fraction(fmt, Fraction(t), negative=t.startswith("-"))


def literal_int(ty: IntType, text: str) -> int:
    return int(text) & ty.mask


# ---------------------------------------------------------------------------
# conversion ranges shared by the encoder and the interpreter

def int_to_fp_can_overflow(ity: IntType, fmt: FPFormat, signed: bool) -> bool:
    """Whether some ``ity`` value rounds past the largest finite ``fmt`` value."""
    biggest = (1 << (ity.width - 1)) if signed else (1 << ity.width) - 1
    if signed and ity.width == 1:
        biggest = 1
    return biggest >= fmt.overflow_threshold


def fp_to_int_bounds(fmt: FPFormat, ity: IntType, signed: bool) -> tuple[int, int]:
    """Bit patterns ``(lo, hi)`` such that truncation of a finite ``x`` fits
    the integer range iff ``lo <= x <= hi`` (IEEE ordering)."""
    if signed:
        lo_excl = -(1 << (ity.width - 1)) - 1
        hi_excl = 1 << (ity.width - 1)
    else:
        lo_excl = -1
        hi_excl = 1 << ity.width
    return _next_up(fmt, Fraction(lo_excl)), _next_down(fmt, Fraction(hi_excl))


def _next_up(fmt: FPFormat, q: Fraction) -> int:
    """Smallest finite value strictly greater than ``q`` (clamped to -max)."""
    if q < -fmt.max_finite:
        return fmt.sign_bit | _max_bits(fmt)
    bits = round_fraction(fmt, q)
    if bits_to_fraction(fmt, bits) <= q:
        bits = _step(fmt, bits, up=True)
    return bits


def _next_down(fmt: FPFormat, q: Fraction) -> int:
    if q > fmt.max_finite:
        return _max_bits(fmt)
    bits = round_fraction(fmt, q)
    if _is_inf(fmt, bits) or bits_to_fraction(fmt, bits) >= q:
        bits = _step(fmt, bits, up=False)
    return bits


def _max_bits(fmt: FPFormat) -> int:
    return fmt.inf() - 1


def _is_inf(fmt: FPFormat, bits: int) -> bool:
    return bits & ~fmt.sign_bit == fmt.inf()


def _step(fmt: FPFormat, bits: int, up: bool) -> int:
    if _is_inf(fmt, bits):
        return bits - 1  # +inf -> max, -inf -> -max
    negative = bool(bits & fmt.sign_bit)
    mag = bits & ~fmt.sign_bit
    if mag == 0:
        return 1 if up else fmt.sign_bit | 1
    if up != negative:
        return bits + 1
    return bits - 1
