"""Concrete interpreter for transforms, brute-force verification and replay.

One evaluator walks the templates; a backend supplies the value semantics.
``ScalarBackend`` works on Python ints through ``MiniFloat`` and handles any
format. ``ArrayBackend`` evaluates a whole batch of environments at once
with the numba kernels and is limited to formats of at most 16 bits.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import prod

import numpy as np

from ..dsl import (CONVERSIONS, Const, ConstExpr, Copy, Instr, Literal, PredApp, PredEq, Reg,
                   Transform, Undef, node_operands, pred_conjuncts)
from ..formats import (FPFormat, IntType, fp_values, int_to_fp_can_overflow, literal_bits,
                       literal_int)
from . import kernels as K
from .minifloat import (UNDEF, MiniFloat, mf_abs, mf_arith, mf_cmp, mf_convert, mf_from_int,
                        mf_neg, mf_rem, mf_to_int)

DEFAULT_BUDGET = 1 << 24
CHUNK = 1 << 18


class InterpError(Exception):
    pass


class BudgetExceeded(Exception):
    pass


# ---------------------------------------------------------------------------
# backends

class ScalarBackend:
    """Values are bit patterns (int); booleans are bool."""

    def binop(self, op, fmt, a, b):
        x, y = MiniFloat(fmt, a), MiniFloat(fmt, b)
        return (mf_rem(x, y) if op == "frem" else mf_arith(op, x, y)).bits

    def fabs(self, fmt, a):
        return mf_abs(MiniFloat(fmt, a)).bits

    def fneg(self, fmt, a):
        return mf_neg(MiniFloat(fmt, a)).bits

    def fcmp(self, cc, fmt, a, b):
        return int(mf_cmp(cc, MiniFloat(fmt, a), MiniFloat(fmt, b)))

    def conv(self, op, src, dst, a):
        if op in ("fpext", "fptrunc"):
            return mf_convert(MiniFloat(src, a), dst).bits, True
        if op in ("fptosi", "fptoui"):
            r = mf_to_int(MiniFloat(src, a), dst, op == "fptosi")
        else:
            r = mf_from_int(a, src, dst, op == "sitofp")
            r = r if r is UNDEF else r.bits
        return (0, False) if r is UNDEF else (r, True)

    def bv(self, op, ty, a, b):
        return (a + b if op == "add" else a - b) & ty.mask

    def classify(self, pred, fmt, a):
        x = MiniFloat(fmt, a)
        return {"nan": x.is_nan, "inf": x.is_inf, "zero": x.is_zero, "normal": x.is_normal}[pred]

    def eq(self, a, b):
        return a == b

    def ite(self, c, a, b):
        return a if c else b

    def and_(self, *xs):
        return all(xs)

    def or_(self, *xs):
        return any(xs)

    def not_(self, x):
        return not x

    def true(self):
        return True

    def const(self, value):
        return value


class ArrayBackend:
    """Values are int64 arrays of length ``n``; booleans are bool arrays."""

    def __init__(self, n: int):
        self.n = n

    @staticmethod
    def supports(ty) -> bool:
        if isinstance(ty, FPFormat):
            return ty.width <= K.MAX_WIDTH
        return ty.width <= 32

    def _a(self, x):
        return K.as_array(x, self.n)

    def binop(self, op, fmt, a, b):
        return K.binop(K.OPS[op], self._a(a), self._a(b), fmt.ebits, fmt.sbits)

    def fabs(self, fmt, a):
        a = self._a(a)
        return np.where(self.classify("nan", fmt, a), a, a & ~fmt.sign_bit)

    def fneg(self, fmt, a):
        a = self._a(a)
        return np.where(self.classify("nan", fmt, a), a, a ^ fmt.sign_bit)

    def fcmp(self, cc, fmt, a, b):
        return K.fcmp(K.CC_MASKS[cc], self._a(a), self._a(b), fmt.ebits, fmt.sbits)

    def conv(self, op, src, dst, a):
        a = self._a(a)
        if op in ("fpext", "fptrunc"):
            return K.fpconv(a, src.ebits, src.sbits, dst.ebits, dst.sbits), self.true()
        if op in ("fptosi", "fptoui"):
            return K.fptoi(a, src.ebits, src.sbits, dst.width, op == "fptosi")
        return K.itofp(a, src.width, op == "sitofp", dst.ebits, dst.sbits)

    def bv(self, op, ty, a, b):
        a, b = self._a(a), self._a(b)
        return ((a + b) if op == "add" else (a - b)) & ty.mask

    def classify(self, pred, fmt, a):
        a = self._a(a)
        e = (a >> fmt.tbits) & fmt.exp_mask
        t = a & ((1 << fmt.tbits) - 1)
        if pred == "nan":
            return (e == fmt.exp_mask) & (t != 0)
        if pred == "inf":
            return (e == fmt.exp_mask) & (t == 0)
        if pred == "zero":
            return (e == 0) & (t == 0)
        return (e != 0) & (e != fmt.exp_mask)

    def eq(self, a, b):
        return self._a(a) == self._a(b)

    def ite(self, c, a, b):
        return np.where(c, self._a(a), self._a(b))

    def and_(self, *xs):
        out = self.true()
        for x in xs:
            out = out & x
        return out

    def or_(self, *xs):
        out = np.zeros(self.n, dtype=bool)
        for x in xs:
            out = out | x
        return out

    def not_(self, x):
        return ~np.asarray(x, dtype=bool)

    def true(self):
        return np.ones(self.n, dtype=bool)

    def const(self, value):
        return np.full(self.n, value, dtype=np.int64)


# ---------------------------------------------------------------------------
# evaluator

@dataclass(frozen=True)
class Variable:
    name: str
    ty: object
    role: str  # input | const | tgt-undef | src-undef

    @property
    def universal(self) -> bool:
        return self.role == "src-undef"


class _Recorder(dict):
    """Environment used for variable discovery: hands out zeros and logs names."""

    def __init__(self):
        super().__init__()
        self.order: list[Variable] = []

    def need(self, name, ty, role):
        if name not in self:
            self[name] = 0
            self.order.append(Variable(name, ty, role))
        return self[name]


class Evaluator:
    def __init__(self, t: Transform, ta, cca: dict | None, backend, env):
        self.t = t
        self.ta = ta
        self.cca = cca or {}
        self.b = backend
        self.env = env
        self.regs = {"src": {}, "tgt": {}}

    # --- leaves ---
    def _get(self, name, ty, role):
        if isinstance(self.env, _Recorder):
            return self.env.need(name, ty, role)
        try:
            return self.env[name]
        except KeyError:
            raise InterpError(f"no value for {name}") from None

    def _fresh(self, name, ty, side):
        return self._get(name, ty, "src-undef" if side == "src" else "tgt-undef")

    def _guarded(self, ok, raw, name, ty, side):
        """``raw`` where ``ok`` holds, else the fresh variable ``name``.

        Scalar evaluation only reads the fresh variable when it is selected,
        so replay can tell which undefined values actually matter.
        """
        if isinstance(self.env, _Recorder):
            self._fresh(name, ty, side)
        if ok is True:
            return raw
        if isinstance(self.b, ScalarBackend):
            return raw if ok else self._fresh(name, ty, side)
        if np.all(ok):
            return raw
        return self.b.ite(ok, raw, self._fresh(name, ty, side))

    def _reg(self, name, side):
        if side == "tgt" and name in self.regs["tgt"]:
            return self.regs["tgt"][name]
        if name in self.regs["src"]:
            return self.regs["src"][name]
        return self._get(name, self.ta[name], "input")

    def _literal(self, op: Literal, ty):
        if isinstance(ty, FPFormat):
            return self.b.const(literal_bits(ty, op.text))
        return self.b.const(literal_int(ty, op.text))

    def operand(self, op, path, side):
        if isinstance(op, Reg):
            return self._reg(op.name, side)
        if isinstance(op, Const):
            return self._get(op.name, self.ta[op.name], "const")
        ty = self.ta[path]
        if isinstance(op, Literal):
            return self._literal(op, ty)
        if isinstance(op, Undef):
            return self._fresh("undef." + ".".join(map(str, path)), ty, side)
        args = [self.operand(a, path + (k,), side) for k, a in enumerate(op.args)]
        raw, ok = self._constfunc(op, args, path)
        if ok is True:
            return raw
        return self._guarded(ok, raw, "cv." + ".".join(map(str, path)), ty, side)

    def _constfunc(self, op: ConstExpr, args, path):
        ty = self.ta[path]
        if op.func == "fneg":
            return self.b.fneg(ty, args[0]), True
        src = self.ta[path + (0,)]
        raw, ok = self.b.conv(op.func, src, ty, args[0])
        if not _may_be_undef(op.func, src, ty):
            ok = True
        return raw, ok

    # --- instructions ---
    def node(self, reg, node, side):
        ty = self.ta[reg]
        ops = node_operands(node)
        args = [self.operand(o, (side, reg, j), side) for j, o in enumerate(ops)]
        if isinstance(node, Copy):
            return args[0]
        if isinstance(node, ConstExpr):
            raw, ok = self._constfunc(node, args, (side, reg))
            if ok is True:
                return raw
            return self._guarded(ok, raw, f"cv.{side}.{reg}", ty, side)
        op = node.opcode
        optys = [self._operand_type(o, (side, reg, j)) for j, o in enumerate(ops)]
        if op in K.OPS:
            raw = self.b.binop(op, ty, *args)
        elif op == "fabs":
            raw = self.b.fabs(ty, args[0])
        elif op == "fcmp":
            raw = self.b.fcmp(self.cca.get(node.cc, node.cc), optys[0], *args)
        elif op in CONVERSIONS:
            raw, ok = self.b.conv(op, optys[0], ty, args[0])
            if _may_be_undef(op, optys[0], ty):
                raw = self._guarded(ok, raw, f"cv.{side}.{reg}", ty, side)
        elif op == "select":
            raw = self.b.ite(self.b.eq(args[0], 1), args[1], args[2])
        elif op in ("add", "sub"):
            raw = self.b.bv(op, ty, *args)
        else:
            raise InterpError(f"unknown opcode {op}")
        flags = set(node.flags) & {"nnan", "ninf"}
        if not flags:
            return raw
        checks = []
        values = [(a, fty) for a, fty in zip(args, optys) if isinstance(fty, FPFormat)]
        if isinstance(ty, FPFormat):
            values.append((raw, ty))
        for flag, pred in (("nnan", "nan"), ("ninf", "inf")):
            if flag in flags:
                checks += [self.b.classify(pred, fty, v) for v, fty in values]
        return self._guarded(self.b.not_(self.b.or_(*checks)), raw, f"fm.{side}.{reg}", ty, side)

    def _operand_type(self, op, path):
        return self.ta[op.name] if isinstance(op, (Reg, Const)) else self.ta[path]

    def run_side(self, side):
        for reg, node in (self.t.src if side == "src" else self.t.tgt):
            self.regs[side][reg] = self.node(reg, node, side)
        return self.regs[side][self.t.root]

    # --- precondition ---
    def _pre_operand(self, op, path):
        """(value, defined) for a precondition operand."""
        if isinstance(op, Reg):
            side = "tgt" if op.name in self.regs["tgt"] and op.name not in self.regs["src"] else "src"
            return self._reg(op.name, side), True
        if not isinstance(op, ConstExpr):
            return self.operand(op, path, "src"), True
        pairs = [self._pre_operand(a, path + (k,)) for k, a in enumerate(op.args)]
        raw, ok = self._constfunc(op, [p[0] for p in pairs], path)
        oks = [x for x in [ok, *(p[1] for p in pairs)] if x is not True]
        return raw, (self.b.and_(*oks) if oks else True)

    def precondition(self):
        parts = []
        for i, atom in enumerate(pred_conjuncts(self.t.pre)):
            path = ("pre", i)
            if isinstance(atom, PredEq):
                lhs, ok_l = self._pre_operand(atom.lhs, path + (0,))
                rhs, ok_r = self._pre_operand(atom.rhs, path + (1,))
                parts.append(self.b.and_(_b(self.b, ok_l), _b(self.b, ok_r), self.b.eq(lhs, rhs)))
                continue
            assert isinstance(atom, PredApp)
            if atom.name in ("ordered", "unordered", "swap", "hasOneUse"):
                continue
            vals = [self._pre_operand(a, path + (j,)) for j, a in enumerate(atom.args)]
            oks = [_b(self.b, ok) for _, ok in vals]
            args = [v for v, _ in vals]
            tys = [self._operand_type(a, path + (j,)) for j, a in enumerate(atom.args)]
            if atom.name == "isNormal":
                body = self.b.classify("normal", tys[0], args[0])
            elif atom.name == "AnyZero":
                body = self.b.classify("zero", tys[0], args[0])
            elif atom.name == "WillNotOverflowSignedAdd":
                body = _no_signed_overflow(self.b, tys[0], args[0], args[1])
            else:
                raise InterpError(f"unknown predicate {atom.name}")
            parts.append(self.b.and_(*oks, body))
        return self.b.and_(*parts)


def _b(backend, ok):
    return backend.true() if ok is True else ok


def _may_be_undef(op, src, dst) -> bool:
    if op in ("fptosi", "fptoui"):
        return True
    if op in ("sitofp", "uitofp"):
        return int_to_fp_can_overflow(src, dst, op == "sitofp")
    return False


def _no_signed_overflow(backend, ty: IntType, a, b):
    half = 1 << (ty.width - 1)
    if isinstance(backend, ArrayBackend):
        sa = np.where(a >= half, a - (1 << ty.width), a)
        sb = np.where(b >= half, b - (1 << ty.width), b)
        s = sa + sb
        return (s >= -half) & (s < half)
    s = ty.signed(a) + ty.signed(b)
    return -half <= s < half


# ---------------------------------------------------------------------------
# public entry points

def discover_variables(t: Transform, ta, cca: dict | None = None) -> list[Variable]:
    """Every input, constant and fresh variable the evaluation consults."""
    env = _Recorder()
    ev = Evaluator(t, ta, cca, ScalarBackend(), env)
    for name in t.inputs():
        env.need(name, ta[name], "input")
    for name in t.constants():
        env.need(name, ta[name], "const")
    ev.run_side("src")
    ev.run_side("tgt")
    ev.precondition()
    return env.order


def interpret(t: Transform, side: str, ta, env: dict, cca: dict | None = None, backend=None):
    """Value of the root register on one side of ``t``."""
    ev = Evaluator(t, ta, cca, backend or ScalarBackend(), env)
    if side == "tgt":
        ev.run_side("src")  # target templates may reuse source registers
    return ev.run_side(side)


def root_has_nsz(t: Transform) -> bool:
    return any(isinstance(n, Instr) and "nsz" in n.flags for n in (t.src[-1][1], t.tgt[-1][1]))


def counterexample_holds(t: Transform, ta, env: dict, cca: dict | None = None, backend=None):
    """pre(env) and src(env) != tgt(env), with the nsz relaxation when it applies."""
    b = backend or ScalarBackend()
    ev = Evaluator(t, ta, cca, b, env)
    src = ev.run_side("src")
    tgt = ev.run_side("tgt")
    pre = ev.precondition()
    differ = b.not_(b.eq(src, tgt))
    rty = ta[t.root]
    if root_has_nsz(t) and isinstance(rty, FPFormat):
        differ = b.and_(differ, b.not_(b.and_(b.classify("zero", rty, src),
                                              b.classify("zero", rty, tgt))))
    return b.and_(pre, differ)


def domain_size(ty) -> int:
    if isinstance(ty, FPFormat):
        # one canonical NaN stands in for every NaN pattern
        return (1 << ty.width) - 2 * ((1 << ty.tbits) - 1) + 1
    return 1 << ty.width


def domain(ty, limit: int = DEFAULT_BUDGET) -> np.ndarray:
    """Every value of ``ty``; refuses (without allocating) beyond ``limit``."""
    if domain_size(ty) > limit:
        raise BudgetExceeded(f"{ty} has too many values to enumerate")
    if isinstance(ty, FPFormat):
        return np.array(fp_values(ty), dtype=np.int64)
    return np.arange(1 << ty.width, dtype=np.int64)


@dataclass
class BruteForceResult:
    verdict: str  # valid | invalid
    witness: dict = field(default_factory=dict)
    evaluations: int = 0


def _grid(domains: list[np.ndarray], start: int, stop: int) -> list[np.ndarray]:
    """Columns of the mixed-radix product for flat indices [start, stop)."""
    idx = np.arange(start, stop, dtype=np.int64)
    cols = []
    for d in reversed(domains):
        cols.append(d[idx % len(d)])
        idx //= len(d)
    return cols[::-1]


def _array_ok(variables, ta) -> bool:
    tys = [v.ty for v in variables] + list(ta.class_types)
    return all(ArrayBackend.supports(ty) for ty in tys)


def brute_force_verify(t: Transform, ta, cca: dict | None = None,
                       budget: int = DEFAULT_BUDGET) -> BruteForceResult:
    """Exhaustive check of the same condition the solver query encodes:
    invalid iff some free assignment makes pre and disagreement hold for
    every choice of source-side undefined values."""
    variables = discover_variables(t, ta, cca)
    free = [v for v in variables if not v.universal]
    univ = [v for v in variables if v.universal]
    nf = prod(domain_size(v.ty) for v in free)
    nu = prod(domain_size(v.ty) for v in univ)
    if nf * nu > budget:
        raise BudgetExceeded(f"{nf * nu} evaluations exceed the budget of {budget}")
    fdoms = [domain(v.ty) for v in free]
    udoms = [domain(v.ty) for v in univ]
    names = [v.name for v in free + univ]
    if not _array_ok(variables, ta):
        return _brute_force_scalar(t, ta, cca, free, univ, fdoms, udoms)
    rows_per_chunk = max(1, CHUNK // nu)
    for r0 in range(0, nf, rows_per_chunk):
        r1 = min(nf, r0 + rows_per_chunk)
        cols = _grid(fdoms + udoms, r0 * nu, r1 * nu)
        env = dict(zip(names, cols))
        b = ArrayBackend((r1 - r0) * nu)
        holds = np.asarray(counterexample_holds(t, ta, env, cca, b), dtype=bool)
        rows = holds.reshape(r1 - r0, nu).all(axis=1)
        hit = np.flatnonzero(rows)
        if hit.size:
            k = int(hit[0]) * nu
            witness = {v.name: int(c[k]) for v, c in zip(free, cols)}
            return BruteForceResult("invalid", witness, r0 * nu + k + nu)
    return BruteForceResult("valid", {}, nf * nu)


def _brute_force_scalar(t, ta, cca, free, univ, fdoms, udoms) -> BruteForceResult:
    count = 0
    for fvals in itertools.product(*[d.tolist() for d in fdoms]):
        env = {v.name: x for v, x in zip(free, fvals)}
        all_hold = True
        for uvals in itertools.product(*[d.tolist() for d in udoms]):
            env.update({v.name: x for v, x in zip(univ, uvals)})
            count += 1
            if not counterexample_holds(t, ta, env, cca):
                all_hold = False
                break
        if all_hold:
            return BruteForceResult("invalid", {v.name: x for v, x in zip(free, fvals)}, count)
    return BruteForceResult("valid", {}, count)


REPLAY_BUDGET = 1 << 20


class _Unassigned(Exception):
    def __init__(self, name):
        super().__init__(name)
        self.name = name


class _ReplayEnv(dict):
    """Free values plus a partial assignment of the universal variables;
    reading an unassigned universal raises ``_Unassigned``."""

    def __init__(self, base, universal):
        super().__init__(base)
        self.universal = universal

    def __missing__(self, name):
        if name in self.universal:
            raise _Unassigned(name)
        raise KeyError(name)


def _replay_batch(t, ta, cca, free, assigned, name, values, univ):
    """All values of one universal at once, if no other one is consulted."""
    if not all(ArrayBackend.supports(ty) for ty in ta.class_types):
        return None
    n = len(values)
    env = {k: np.full(n, x, dtype=np.int64) for k, x in {**free, **assigned}.items()}
    env[name] = values
    try:
        holds = counterexample_holds(t, ta, _ReplayEnv(env, univ), cca, ArrayBackend(n))
    except _Unassigned:
        return None
    return bool(np.all(holds))


def replay(t: Transform, ta, model: dict, cca: dict | None = None,
           budget: int = REPLAY_BUDGET) -> str:
    """Check a solver counterexample against the oracle.

    ``model`` maps free variable names to bit patterns. Returns
    ``confirmed`` when the oracle reproduces the disagreement for every
    value of the source-side undefined variables, ``mismatch`` when it does
    not, and ``unconfirmed`` when that search is out of reach.

    Only undefined values the evaluation actually reads are enumerated:
    a conversion that stays in range never consults its fresh variable.
    """
    variables = discover_variables(t, ta, cca)
    free = {v.name: int(model.get(v.name, 0)) for v in variables if not v.universal}
    univ = {v.name: v.ty for v in variables if v.universal}
    spent = 0

    def holds_for_all(assigned: dict) -> bool:
        nonlocal spent
        spent += 1
        if spent > budget:
            raise BudgetExceeded("replay search")
        env = _ReplayEnv({**free, **assigned}, univ)
        try:
            return bool(counterexample_holds(t, ta, env, cca))
        except _Unassigned as need:
            if spent + domain_size(univ[need.name]) > budget:
                raise BudgetExceeded("replay search") from None
            values = domain(univ[need.name])
            batch = _replay_batch(t, ta, cca, free, assigned, need.name, values, univ)
            if batch is not None:
                spent += len(values)
                return batch
            return all(holds_for_all({**assigned, need.name: int(x)}) for x in values)

    try:
        return "confirmed" if holds_for_all({}) else "mismatch"
    except BudgetExceeded:
        return "unconfirmed"
