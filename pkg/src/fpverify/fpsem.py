"""Floating-point semantics of template instructions as SMT terms.

``build_query`` turns one typed instance of a transform into a
``QueryScript`` whose assertion is satisfiable exactly when some choice of
inputs, constants and target-side undefined values makes the source and
target disagree for every choice of source-side undefined values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import terms as T
from .dsl import (CONVERSIONS, Const, ConstExpr, Copy, Instr, Literal, Reg, Transform, Undef,
                  node_operands)
from .formats import (FPFormat, IntType, fp_to_int_bounds, int_to_fp_can_overflow,
                      literal_bits, literal_int)
from .precond import encode_predicate
from .typer import TypeAssignment

FP_OPS = {"fadd": "fp.add", "fsub": "fp.sub", "fmul": "fp.mul", "fdiv": "fp.div"}


def sort_of(ty) -> T.FPSort | T.BVSort:
    return T.fp_sort(ty) if isinstance(ty, FPFormat) else T.BVSort(ty.width)


# ---------------------------------------------------------------------------
# fresh-variable naming, shared with the interpreter

def undef_name(path) -> str:
    return "undef." + ".".join(map(str, path))


def fastmath_name(side: str, reg: str) -> str:
    return f"fm.{side}.{reg}"


def conversion_name(path) -> str:
    return "cv." + ".".join(map(str, path))


def conversion_may_be_undef(opcode: str, src_ty, dst_ty) -> bool:
    if opcode in ("fptosi", "fptoui"):
        return True
    if opcode in ("sitofp", "uitofp"):
        return int_to_fp_can_overflow(src_ty, dst_ty, signed=opcode == "sitofp")
    return False


# ---------------------------------------------------------------------------
# instruction encoders

def encode_binop(op: str, a: T.Term, b: T.Term) -> T.Term:
    return T.fp_arith(FP_OPS[op], a, b)


def encode_frem(x: T.Term, y: T.Term) -> T.Term:
    """C ``fmod`` built from IEEE remainder: the magnitude of the result is
    ``remainder(|x|, |y|)`` shifted into ``[0, |y|)``, then x's sign is applied."""
    abs_y = T.fp_abs(y)
    r = T.fp_rem(T.fp_abs(x), abs_y)
    r2 = T.ite(T.fp_pred("fp.isNegative", r), T.fp_arith("fp.add", r, abs_y), r)
    flip = T.xor(T.fp_pred("fp.isNegative", x), T.fp_pred("fp.isNegative", r2))
    return T.ite(flip, T.fp_neg(r2), r2)


_REL = {"eq": "fp.eq", "gt": "fp.gt", "ge": "fp.geq", "lt": "fp.lt", "le": "fp.leq"}


def fcmp_bool(cc: str, a: T.Term, b: T.Term) -> T.Term:
    nan_a = T.fp_pred("fp.isNaN", a)
    nan_b = T.fp_pred("fp.isNaN", b)
    if cc == "ord":
        return T.and_(T.not_(nan_a), T.not_(nan_b))
    if cc == "uno":
        return T.or_(nan_a, nan_b)
    rel = cc[1:]
    if rel == "ne":
        body = T.not_(T.fp_cmp("fp.eq", a, b))
    else:
        body = T.fp_cmp(_REL[rel], a, b)
    if cc[0] == "o":
        return T.and_(T.not_(nan_a), T.not_(nan_b), body)
    return T.or_(nan_a, nan_b, body)


def bool_to_bv1(c: T.Term) -> T.Term:
    return T.ite(c, T.bv_lit(1, 1), T.bv_lit(1, 0))


def encode_fcmp(cc: str, a: T.Term, b: T.Term) -> T.Term:
    return bool_to_bv1(fcmp_bool(cc, a, b))


def conversion_parts(op: str, a: T.Term, src_ty, dst_ty) -> tuple[T.Term, T.Term]:
    """Raw converted value and the condition under which it is defined."""
    if op in ("fptrunc", "fpext"):
        return T.to_fp(dst_ty, a), T.TRUE
    if op in ("fptosi", "fptoui"):
        signed = op == "fptosi"
        lo, hi = fp_to_int_bounds(src_ty, dst_ty, signed)
        # NaN fails both comparisons and the bounds are finite, so this also
        # rules out NaN and infinities
        ok = T.and_(T.fp_cmp("fp.leq", T.fp_lit(src_ty, lo), a),
                    T.fp_cmp("fp.leq", a, T.fp_lit(src_ty, hi)))
        return T.to_bv(dst_ty.width, a, signed), ok
    if op in ("sitofp", "uitofp"):
        raw = T.to_fp(dst_ty, a) if op == "sitofp" else T.to_fp_unsigned(dst_ty, a)
        if conversion_may_be_undef(op, src_ty, dst_ty):
            return raw, T.not_(T.fp_pred("fp.isInfinite", raw))
        return raw, T.TRUE
    raise ValueError(f"not a conversion: {op}")


def encode_conversion(op: str, a: T.Term, src_ty, dst_ty, undef: T.Term | None = None) -> T.Term:
    raw, ok = conversion_parts(op, a, src_ty, dst_ty)
    if ok is T.TRUE:
        return raw
    if undef is None:
        raise ValueError(f"{op} from {src_ty} to {dst_ty} needs an undef variable")
    return T.ite(ok, raw, undef)


def encode_misc(op: str, *args: T.Term) -> T.Term:
    if op == "fabs":
        return T.fp_abs(args[0])
    if op == "select":
        c, a, b = args
        return T.ite(T.eq(c, T.bv_lit(1, 1)), a, b)
    if op == "add":
        return T.bv_bin("bvadd", *args)
    if op == "sub":
        return T.bv_bin("bvsub", *args)
    raise ValueError(f"unknown operation {op}")


def fastmath_guard(flags, operands, raw: T.Term) -> T.Term:
    checks = []
    values = [o for o in operands if isinstance(o.sort, T.FPSort)]
    if isinstance(raw.sort, T.FPSort):
        values.append(raw)
    if "nnan" in flags:
        checks += [T.fp_pred("fp.isNaN", v) for v in values]
    if "ninf" in flags:
        checks += [T.fp_pred("fp.isInfinite", v) for v in values]
    return T.or_(*checks)


def apply_fastmath(flags, operands, raw: T.Term, fresh: T.Term | None) -> T.Term:
    """Replace the result by ``fresh`` wherever nnan/ninf assumptions fail."""
    if not ({"nnan", "ninf"} & set(flags)):
        return raw
    return T.ite(fastmath_guard(flags, operands, raw), fresh, raw)


def disagree(src: T.Term, tgt: T.Term, nsz: bool = False) -> T.Term:
    """Bit-precise difference; NaNs are a single value in the FP theory."""
    d = T.not_(T.eq(src, tgt))
    if nsz and isinstance(src.sort, T.FPSort):
        both_zero = T.and_(T.fp_pred("fp.isZero", src), T.fp_pred("fp.isZero", tgt))
        d = T.and_(d, T.not_(both_zero))
    return d


# ---------------------------------------------------------------------------
# whole-instance query

@dataclass(frozen=True)
class VarInfo:
    name: str
    ty: object  # FPFormat | IntType
    role: str   # input | const | tgt-undef | src-undef

    @property
    def sort(self):
        return sort_of(self.ty)

    @property
    def universal(self) -> bool:
        return self.role == "src-undef"


@dataclass
class QueryScript:
    name: str
    types: TypeAssignment
    cca: dict
    variables: list
    assertion: T.Term
    nsz: bool = False
    src_root: T.Term | None = field(default=None, repr=False)
    tgt_root: T.Term | None = field(default=None, repr=False)

    @property
    def free(self) -> list[VarInfo]:
        return [v for v in self.variables if not v.universal]

    @property
    def universal(self) -> list[VarInfo]:
        return [v for v in self.variables if v.universal]

    @property
    def quantified(self) -> bool:
        return bool(self.universal)

    @property
    def logic(self) -> str:
        return "BVFP" if self.quantified else "QF_BVFP"


class _Instance:
    def __init__(self, t: Transform, ta: TypeAssignment, cca: dict):
        self.t = t
        self.ta = ta
        self.cca = cca
        self.vars: dict[str, VarInfo] = {}
        self.src_env: dict[str, T.Term] = {}
        self.tgt_env: dict[str, T.Term] = {}

    def var(self, name, ty, role) -> T.Term:
        if name in self.vars:
            assert self.vars[name].ty == ty, name
        else:
            self.vars[name] = VarInfo(name, ty, role)
        return T.var(name, sort_of(ty))

    def fresh(self, name, ty, side) -> T.Term:
        return self.var(name, ty, "src-undef" if side == "src" else "tgt-undef")

    def lookup(self, name, side):
        if side == "tgt" and name in self.tgt_env:
            return self.tgt_env[name]
        if name in self.src_env:
            return self.src_env[name]
        return self.var(name, self.ta[name], "input")

    def literal(self, op: Literal, ty) -> T.Term:
        if isinstance(ty, FPFormat):
            return T.fp_lit(ty, literal_bits(ty, op.text))
        return T.bv_lit(ty.width, literal_int(ty, op.text))

    def operand(self, op, path, side) -> T.Term:
        if isinstance(op, Reg):
            return self.lookup(op.name, side)
        if isinstance(op, Const):
            return self.var(op.name, self.ta[op.name], "const")
        ty = self.ta[path]
        if isinstance(op, Literal):
            return self.literal(op, ty)
        if isinstance(op, Undef):
            return self.fresh(undef_name(path), ty, side)
        args = [self.operand(a, path + (k,), side) for k, a in enumerate(op.args)]
        return self.constexpr(op, args, path, ty, lambda: self.fresh(conversion_name(path), ty, side))

    def constexpr(self, op: ConstExpr, args, path, ty, undef):
        if op.func == "fneg":
            return T.fp_neg(args[0])
        src_ty = self.ta[path + (0,)]
        fresh = undef() if conversion_may_be_undef(op.func, src_ty, ty) else None
        return encode_conversion(op.func, args[0], src_ty, ty, fresh)

    def encode_const_operand(self, op, path):
        """Operand of a precondition atom: ``(term, defined)``."""
        if isinstance(op, Reg):
            side = "tgt" if op.name in self.tgt_env and op.name not in self.src_env else "src"
            return self.lookup(op.name, side), T.TRUE
        if not isinstance(op, ConstExpr):
            return self.operand(op, path, "src"), T.TRUE
        pairs = [self.encode_const_operand(a, path + (k,)) for k, a in enumerate(op.args)]
        args = [p[0] for p in pairs]
        oks = [p[1] for p in pairs]
        if op.func == "fneg":
            return T.fp_neg(args[0]), T.and_(*oks)
        raw, ok = conversion_parts(op.func, args[0], self.ta[path + (0,)], self.ta[path])
        return raw, T.and_(*oks, ok)

    def node(self, reg, node, side) -> T.Term:
        ty = self.ta[reg]
        ops = node_operands(node)
        args = [self.operand(op, (side, reg, j), side) for j, op in enumerate(ops)]
        if isinstance(node, Copy):
            return args[0]
        if isinstance(node, ConstExpr):
            return self.constexpr(node, args, (side, reg), ty,
                                  lambda: self.fresh(conversion_name((side, reg)), ty, side))
        op = node.opcode
        if op in FP_OPS:
            raw = encode_binop(op, *args)
        elif op == "frem":
            raw = encode_frem(*args)
        elif op == "fcmp":
            raw = encode_fcmp(self.cca.get(node.cc, node.cc), *args)
        elif op in CONVERSIONS:
            src_ty = self.ta[_operand_key(ops[0], (side, reg, 0))]
            fresh = None
            if conversion_may_be_undef(op, src_ty, ty):
                fresh = self.fresh(conversion_name((side, reg)), ty, side)
            raw = encode_conversion(op, args[0], src_ty, ty, fresh)
        else:
            raw = encode_misc(op, *args)
        if {"nnan", "ninf"} & set(node.flags):
            return apply_fastmath(node.flags, args, raw, self.fresh(fastmath_name(side, reg), ty, side))
        return raw


def _operand_key(op, path):
    return op.name if isinstance(op, (Reg, Const)) else path


def root_has_nsz(t: Transform) -> bool:
    return any(isinstance(node, Instr) and "nsz" in node.flags
               for node in (t.src[-1][1], t.tgt[-1][1]))


def build_query(t: Transform, ta: TypeAssignment, cca: dict | None = None) -> QueryScript:
    cca = cca or {}
    missing = [c for c in t.cc_names() if c not in cca]
    if missing:
        raise ValueError(f"unresolved condition codes: {', '.join(missing)}")
    inst = _Instance(t, ta, cca)
    for name in t.inputs():
        inst.var(name, ta[name], "input")
    for name in t.constants():
        inst.var(name, ta[name], "const")
    for reg, node in t.src:
        inst.src_env[reg] = inst.node(reg, node, "src")
    for reg, node in t.tgt:
        inst.tgt_env[reg] = inst.node(reg, node, "tgt")
    src = inst.src_env[t.root]
    tgt = inst.tgt_env[t.root]
    pre = encode_predicate(t, inst)
    nsz = root_has_nsz(t)
    variables = list(inst.vars.values())
    binders = [T.var(v.name, v.sort) for v in variables if v.universal]
    assertion = T.forall(binders, T.and_(pre, disagree(src, tgt, nsz)))
    return QueryScript(t.name, ta, dict(cca), variables, assertion, nsz, src, tgt)
