"""Sorted, hash-consed SMT-LIB term DAG.

Terms are interned: building the same application twice returns the same
object, so sharing survives into the emitted script (see ``smt.emit``).
"""

from __future__ import annotations

from dataclasses import dataclass

from .formats import FPFormat


@dataclass(frozen=True)
class FPSort:
    ebits: int
    sbits: int

    def smt(self) -> str:
        return f"(_ FloatingPoint {self.ebits} {self.sbits})"


@dataclass(frozen=True)
class BVSort:
    width: int

    def smt(self) -> str:
        return f"(_ BitVec {self.width})"


@dataclass(frozen=True)
class _Atomic:
    name: str

    def smt(self) -> str:
        return self.name


BOOL = _Atomic("Bool")
RM = _Atomic("RoundingMode")


def fp_sort(fmt: FPFormat) -> FPSort:
    return FPSort(fmt.ebits, fmt.sbits)


class Term:
    """One DAG node. ``op`` is the SMT-LIB head symbol (possibly indexed,
    e.g. ``(_ to_fp 5 11)``); leaves carry their payload in ``params``."""

    __slots__ = ("op", "args", "sort", "params", "_hash", "__weakref__")

    def __init__(self, op, args, sort, params):
        self.op = op
        self.args = args
        self.sort = sort
        self.params = params
        self._hash = hash((op, tuple(id(a) for a in args), sort, params))

    def __hash__(self):
        return self._hash

    def __repr__(self):
        from .smt import render_term

        return render_term(self)

    @property
    def is_leaf(self) -> bool:
        return not self.args


_INTERN: dict = {}


def mk(op: str, args=(), sort=BOOL, params=()) -> Term:
    args = tuple(args)
    key = (op, tuple(id(a) for a in args), sort, params)
    t = _INTERN.get(key)
    if t is None:
        t = Term(op, args, sort, params)
        # the key holds ids, so the term must keep its children alive
        _INTERN[key] = t
    return t


def var(name: str, sort) -> Term:
    return mk("var", (), sort, (name,))


def fp_lit(fmt: FPFormat, bits: int) -> Term:
    return mk("fplit", (), fp_sort(fmt), (bits,))


def bv_lit(width: int, value: int) -> Term:
    return mk("bvlit", (), BVSort(width), (value & ((1 << width) - 1),))


TRUE = mk("true")
FALSE = mk("false")
RNE = mk("RNE", sort=RM)
RTZ = mk("RTZ", sort=RM)


def _same_sort(*ts):
    s = ts[0].sort
    for t in ts[1:]:
        if t.sort != s:
            raise TypeError(f"sort mismatch: {s} vs {t.sort}")
    return s


# --- boolean ---------------------------------------------------------------

def not_(a: Term) -> Term:
    if a is TRUE:
        return FALSE
    if a is FALSE:
        return TRUE
    return mk("not", (a,))


def and_(*ts: Term) -> Term:
    flat = []
    for t in ts:
        if t is FALSE:
            return FALSE
        if t is TRUE:
            continue
        flat.extend(t.args if t.op == "and" else (t,))
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return mk("and", flat)


def or_(*ts: Term) -> Term:
    flat = []
    for t in ts:
        if t is TRUE:
            return TRUE
        if t is FALSE:
            continue
        flat.extend(t.args if t.op == "or" else (t,))
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return mk("or", flat)


def xor(a: Term, b: Term) -> Term:
    return mk("xor", (a, b))


def eq(a: Term, b: Term) -> Term:
    _same_sort(a, b)
    if a is b:
        return TRUE
    return mk("=", (a, b))


def ite(c: Term, a: Term, b: Term) -> Term:
    sort = _same_sort(a, b)
    if c is TRUE:
        return a
    if c is FALSE:
        return b
    if a is b:
        return a
    return mk("ite", (c, a, b), sort)


def forall(binders: list[Term], body: Term) -> Term:
    if not binders:
        return body
    return mk("forall", (*binders, body), BOOL)


# --- floating point --------------------------------------------------------

def fp_arith(op: str, a: Term, b: Term) -> Term:
    sort = _same_sort(a, b)
    return mk(op, (RNE, a, b), sort)


def fp_rem(a: Term, b: Term) -> Term:
    return mk("fp.rem", (a, b), _same_sort(a, b))


def fp_abs(a: Term) -> Term:
    return mk("fp.abs", (a,), a.sort)


def fp_neg(a: Term) -> Term:
    return mk("fp.neg", (a,), a.sort)


def fp_pred(op: str, a: Term) -> Term:
    if a.op == "fplit":
        fmt = FPFormat(a.sort.ebits, a.sort.sbits)
        bits = a.params[0]
        e = (bits >> fmt.tbits) & fmt.exp_mask
        t = bits & ((1 << fmt.tbits) - 1)
        nan = e == fmt.exp_mask and t != 0
        value = {
            "fp.isNaN": nan,
            "fp.isInfinite": e == fmt.exp_mask and t == 0,
            "fp.isZero": e == 0 and t == 0,
            "fp.isNormal": 0 < e < fmt.exp_mask,
            "fp.isSubnormal": e == 0 and t != 0,
            "fp.isNegative": bool(bits & fmt.sign_bit) and not nan,
            "fp.isPositive": not bits & fmt.sign_bit and not nan,
        }.get(op)
        if value is not None:
            return TRUE if value else FALSE
    return mk(op, (a,))


def fp_cmp(op: str, a: Term, b: Term) -> Term:
    _same_sort(a, b)
    return mk(op, (a, b))


def to_fp(fmt: FPFormat, a: Term, rm: Term = RNE) -> Term:
    """FP->FP conversion or signed BV->FP conversion."""
    return mk(f"(_ to_fp {fmt.ebits} {fmt.sbits})", (rm, a), fp_sort(fmt))


def to_fp_unsigned(fmt: FPFormat, a: Term, rm: Term = RNE) -> Term:
    return mk(f"(_ to_fp_unsigned {fmt.ebits} {fmt.sbits})", (rm, a), fp_sort(fmt))


def to_bv(width: int, a: Term, signed: bool, rm: Term = RTZ) -> Term:
    op = "fp.to_sbv" if signed else "fp.to_ubv"
    return mk(f"(_ {op} {width})", (rm, a), BVSort(width))


# --- bitvectors ------------------------------------------------------------

def bv_bin(op: str, a: Term, b: Term) -> Term:
    return mk(op, (a, b), _same_sort(a, b))


def bv_cmp(op: str, a: Term, b: Term) -> Term:
    _same_sort(a, b)
    return mk(op, (a, b))


def sign_extend(a: Term, extra: int) -> Term:
    return mk(f"(_ sign_extend {extra})", (a,), BVSort(a.sort.width + extra))


# --- traversal -------------------------------------------------------------

def postorder(root: Term) -> list[Term]:
    """Every distinct node reachable from ``root``, children first."""
    seen: set[int] = set()
    out: list[Term] = []
    stack = [(root, False)]
    while stack:
        t, done = stack.pop()
        if done:
            out.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        for a in reversed(t.args):
            if id(a) not in seen:
                stack.append((a, False))
    return out


def free_vars(root: Term) -> set[Term]:
    return {t for t in postorder(root) if t.op == "var"}
