"""Differential check of the SMT encodings against the oracle.

For each first operand ``x`` the solver gets one query over a bit-vector
``y``: reinterpret ``y`` as a float, apply the encoded operation, and ask
whether the result can differ from a lookup table the oracle computed for
every ``y``. Unsat means every pair in that row agrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import terms as T
from ..formats import FP8, FPFormat
from ..fpsem import encode_binop, encode_fcmp, encode_frem
from ..smt import IncrementalSolver, render_term
from . import kernels as K
from .minifloat import MiniFloat, mf_abs, mf_arith, mf_cmp, mf_rem

BINARY_OPS = ("fadd", "fsub", "fmul", "fdiv", "frem")
UNARY_OPS = ("fabs",)
CMP_OPS = tuple("fcmp " + cc for cc in K.CC_MASKS)
ALL_OPS = BINARY_OPS + UNARY_OPS + CMP_OPS


@dataclass
class DiffResult:
    op: str
    checked: int = 0
    mismatches: list = field(default_factory=list)  # (x, y) bit patterns

    @property
    def ok(self) -> bool:
        return not self.mismatches


def oracle_table(op: str, fmt: FPFormat, xs: np.ndarray, ys: np.ndarray, reference: bool = False):
    """Oracle results for the pairs (xs[i], ys[i]); ``reference`` selects the
    exact-rational softfloat instead of the kernels."""
    if reference:
        out = []
        for x, y in zip(xs.tolist(), ys.tolist()):
            a, b = MiniFloat(fmt, x), MiniFloat(fmt, y)
            if op == "fabs":
                out.append(mf_abs(b).bits)
            elif op.startswith("fcmp"):
                out.append(int(mf_cmp(op.split()[1], a, b)))
            elif op == "frem":
                out.append(mf_rem(a, b).bits)
            else:
                out.append(mf_arith(op, a, b).bits)
        return np.array(out, dtype=np.int64)
    if op == "fabs":
        nan = ((ys >> fmt.tbits) & fmt.exp_mask == fmt.exp_mask) & (ys & ((1 << fmt.tbits) - 1) != 0)
        return np.where(nan, fmt.canonical_nan, ys & ~fmt.sign_bit)
    if op.startswith("fcmp"):
        return K.fcmp(K.CC_MASKS[op.split()[1]], xs, ys, fmt.ebits, fmt.sbits)
    return K.binop(K.OPS[op], xs, ys, fmt.ebits, fmt.sbits)


def _encode(op: str, x: T.Term, y: T.Term) -> T.Term:
    if op == "fabs":
        return T.fp_abs(y)
    if op.startswith("fcmp"):
        return encode_fcmp(op.split()[1], x, y)
    if op == "frem":
        return encode_frem(x, y)
    return encode_binop(op, x, y)


def _result_term(op: str, fmt: FPFormat, bits: int) -> T.Term:
    if op.startswith("fcmp"):
        return T.bv_lit(1, bits)
    return T.fp_lit(fmt, bits)


def _canonical(fmt: FPFormat, arr: np.ndarray) -> np.ndarray:
    nan = ((arr >> fmt.tbits) & fmt.exp_mask == fmt.exp_mask) & (arr & ((1 << fmt.tbits) - 1) != 0)
    return np.where(nan, fmt.canonical_nan, arr)


def differential(op: str, fmt: FPFormat = FP8, pairs: np.ndarray | None = None,
                 solver: str | None = None, reference: bool = False) -> DiffResult:
    """Compare encoding and oracle on ``pairs`` (an (n, 2) array of bit
    patterns); None means every pair of the format."""
    n = 1 << fmt.width
    if pairs is None:
        xs, ys = (a.ravel() for a in np.meshgrid(np.arange(n), np.arange(n), indexing="ij"))
        pairs = np.stack([xs, ys], axis=1).astype(np.int64)
    pairs = np.asarray(pairs, dtype=np.int64)
    if op == "fabs":
        # unary: only the second column matters
        ys = np.unique(pairs[:, 1])
        pairs = np.stack([np.zeros_like(ys), ys], axis=1)
    result = DiffResult(op)
    expect = oracle_table(op, fmt, pairs[:, 0], pairs[:, 1], reference)
    if not op.startswith("fcmp"):
        expect = _canonical(fmt, expect)
    y = T.var("y", T.BVSort(fmt.width))
    yf = T.mk(f"(_ to_fp {fmt.ebits} {fmt.sbits})", (y,), T.fp_sort(fmt))
    with IncrementalSolver(solver) as s:
        for x in np.unique(pairs[:, 0]).tolist():
            rows = np.flatnonzero(pairs[:, 0] == x)
            row_y = pairs[rows, 1].tolist()
            row_expect = expect[rows].tolist()
            table = None
            for yv, ev in zip(row_y, row_expect):
                lit = _result_term(op, fmt, int(ev))
                table = lit if table is None else T.ite(T.eq(y, T.bv_lit(fmt.width, yv)), lit, table)
            enc = _encode(op, T.fp_lit(fmt, int(x)), yf)
            domain = T.or_(*[T.eq(y, T.bv_lit(fmt.width, yv)) for yv in row_y])
            # the last table entry is the ite default, so pin y to the row
            query = T.and_(domain, T.not_(T.eq(enc, table)))
            # a reset per row keeps z3 on its (much faster) one-shot path;
            # push/pop would switch it to the incremental solver
            s.send("(reset)")
            s.send("(set-option :produce-models true)")
            s.send("(set-logic QF_BVFP)")
            s.send(f"(declare-fun |y| () (_ BitVec {fmt.width}))")
            s.send(f"(assert {render_term(query)})")
            answer = s.check_sat()
            if answer == "sat":
                model = s.get_value(["y"])
                result.mismatches.append((int(x), model["y"].value))
            elif answer != "unsat":
                raise RuntimeError(f"solver answered {answer} for {op} x={x:#x}")
            result.checked += len(row_y)
    return result


def sample_pairs(fmt: FPFormat, count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 1 << fmt.width, size=(count, 2), dtype=np.int64)
