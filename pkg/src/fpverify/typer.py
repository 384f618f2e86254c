"""Type constraint generation and enumeration of concrete instantiations.

Every value in a transform gets a type variable. Named values (inputs,
registers, symbolic constants) are keyed by name; anonymous operands
(literals, ``undef``, nested constant expressions) by their position::

    ("src", "%a", 1)        second operand of %a in the source
    ("tgt", "%r", 0, 0)     argument of a constant expression operand
    ("pre", 2, 1)           right-hand side of the third precondition atom
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .dsl import (CONVERSIONS, FP_BINOPS, INT_BINOPS, Const, ConstExpr, Copy, Instr, Literal,
                  PredApp, PredEq, Reg, Transform, Undef, pred_conjuncts)
from .formats import DEFAULT_FP_FORMATS, DEFAULT_INT_WIDTHS, FP8, I1, FPFormat, IntType
from .precond import REGISTRY


class UntypeableError(Exception):
    """The transform has no well-typed instantiation."""


@dataclass(frozen=True)
class TypeConfig:
    fp_formats: tuple = DEFAULT_FP_FORMATS
    int_widths: tuple = DEFAULT_INT_WIDTHS

    @classmethod
    def test_mode(cls, int_widths=(8,)):
        """Tiny domain used for exhaustive cross-checking."""
        return cls((FP8,), tuple(int_widths))


def operand_key(op, path):
    if isinstance(op, (Reg, Const)):
        return op.name
    return path


def walk_operands(t: Transform):
    """Yield ``(path, operand)`` for every operand occurrence, nested ones too."""

    def rec(op, path):
        yield path, op
        if isinstance(op, ConstExpr):
            for k, a in enumerate(op.args):
                yield from rec(a, path + (k,))

    for side, binds in (("src", t.src), ("tgt", t.tgt)):
        for reg, node in binds:
            if isinstance(node, Instr):
                ops = node.operands
            elif isinstance(node, Copy):
                ops = (node.operand,)
            else:
                ops = node.args
            for j, op in enumerate(ops):
                yield from rec(op, (side, reg, j))
    for i, atom in enumerate(pred_conjuncts(t.pre)):
        if isinstance(atom, PredEq):
            ops = (atom.lhs, atom.rhs)
        elif REGISTRY[atom.name].kinds[0] == "cc":
            continue
        else:
            ops = atom.args
        for j, op in enumerate(ops):
            yield from rec(op, ("pre", i, j))


# ---------------------------------------------------------------------------

@dataclass
class TypeConstraints:
    transform: Transform
    key_class: dict = field(default_factory=dict)
    kinds: list = field(default_factory=list)   # "fp" | "int" | "any"
    fixed: list = field(default_factory=list)   # exact type or None
    # (a, b): class a is a strictly narrower FP format than class b
    narrower: list = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return len(self.kinds)

    def class_of(self, key) -> int:
        return self.key_class[key]

    def members(self, cls: int) -> list:
        return [k for k, c in self.key_class.items() if c == cls]


class _Builder:
    def __init__(self):
        self.parent: dict = {}
        self.kind: dict = {}
        self.fixed: dict = {}
        self.narrower: list = []

    def find(self, k):
        if k not in self.parent:
            self.parent[k] = k
            self.kind[k] = "any"
            self.fixed[k] = None
            return k
        root = k
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[k] != root:
            self.parent[k], k = root, self.parent[k]
        return root

    def require(self, k, kind, where):
        r = self.find(k)
        old = self.kind[r]
        if old == "any":
            self.kind[r] = kind
        elif old != kind:
            raise UntypeableError(f"{where}: {_show(k)} must be both {old} and {kind}")
        self._check_fixed(r, where)

    def fix(self, k, ty, where):
        r = self.find(k)
        self.require(k, "fp" if isinstance(ty, FPFormat) else "int", where)
        if self.fixed[r] is not None and self.fixed[r] != ty:
            raise UntypeableError(f"{where}: {_show(k)} is both {self.fixed[r]} and {ty}")
        self.fixed[r] = ty

    def same(self, a, b, where):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        ka, kb = self.kind[ra], self.kind[rb]
        if ka != "any" and kb != "any" and ka != kb:
            raise UntypeableError(f"{where}: {_show(a)} ({ka}) and {_show(b)} ({kb}) must have one type")
        fa, fb = self.fixed[ra], self.fixed[rb]
        if fa is not None and fb is not None and fa != fb:
            raise UntypeableError(f"{where}: {_show(a)} ({fa}) and {_show(b)} ({fb}) must have one type")
        self.parent[rb] = ra
        self.kind[ra] = ka if ka != "any" else kb
        self.fixed[ra] = fa if fa is not None else fb

    def _check_fixed(self, r, where):
        ty = self.fixed[r]
        if ty is None:
            return
        kind = "fp" if isinstance(ty, FPFormat) else "int"
        if self.kind[r] not in ("any", kind):
            raise UntypeableError(f"{where}: annotated {ty} used as {self.kind[r]}")


def _show(k) -> str:
    return k if isinstance(k, str) else "operand at " + ".".join(map(str, k))


def gen_constraints(t: Transform) -> TypeConstraints:
    b = _Builder()
    for key in t.inputs() + t.constants():
        b.find(key)

    def expr(op, path, where):
        """Constrain an operand; returns its key."""
        key = operand_key(op, path)
        b.find(key)
        if isinstance(op, Literal) and op.is_float:
            b.require(key, "fp", where)
        elif isinstance(op, ConstExpr):
            args = [expr(a, path + (k,), where) for k, a in enumerate(op.args)]
            apply_op(op.func, key, args, where)
        return key

    def apply_op(opcode, res, args, where, node=None):
        if opcode in FP_BINOPS or opcode in ("fabs", "fneg"):
            for a in args:
                b.same(res, a, where)
            b.require(res, "fp", where)
        elif opcode in INT_BINOPS:
            for a in args:
                b.same(res, a, where)
            b.require(res, "int", where)
        elif opcode == "fcmp":
            b.same(args[0], args[1], where)
            b.require(args[0], "fp", where)
            b.fix(res, I1, where)
        elif opcode == "select":
            b.fix(args[0], I1, where)
            b.same(res, args[1], where)
            b.same(res, args[2], where)
        elif opcode in ("fptrunc", "fpext"):
            b.require(args[0], "fp", where)
            b.require(res, "fp", where)
            pair = (res, args[0]) if opcode == "fptrunc" else (args[0], res)
            b.narrower.append((pair, where))
        elif opcode in ("fptosi", "fptoui"):
            b.require(args[0], "fp", where)
            b.require(res, "int", where)
        elif opcode in ("sitofp", "uitofp"):
            b.require(args[0], "int", where)
            b.require(res, "fp", where)
        else:  # pragma: no cover
            raise UntypeableError(f"{where}: unknown operation {opcode}")
        if node is not None and node.ty is not None:
            if opcode in CONVERSIONS or opcode == "fcmp":
                b.fix(args[0], node.ty, where)
            elif opcode == "select":
                b.fix(res, node.ty, where)
            else:
                b.fix(res, node.ty, where)
        if node is not None and node.dest_ty is not None:
            b.fix(res, node.dest_ty, where)

    for side, binds in (("src", t.src), ("tgt", t.tgt)):
        for reg, node in binds:
            where = f"{reg}"
            b.find(reg)
            if isinstance(node, Instr):
                args = [expr(op, (side, reg, j), where) for j, op in enumerate(node.operands)]
                apply_op(node.opcode, reg, args, where, node)
            elif isinstance(node, Copy):
                k = expr(node.operand, (side, reg, 0), where)
                b.same(reg, k, where)
            else:
                args = [expr(op, (side, reg, j), where) for j, op in enumerate(node.args)]
                apply_op(node.func, reg, args, where)

    for i, atom in enumerate(pred_conjuncts(t.pre)):
        where = f"precondition {i + 1}"
        if isinstance(atom, PredEq):
            lk = expr(atom.lhs, ("pre", i, 0), where)
            rk = expr(atom.rhs, ("pre", i, 1), where)
            b.same(lk, rk, where)
            continue
        assert isinstance(atom, PredApp)
        kinds = REGISTRY[atom.name].kinds
        if kinds[0] == "cc":
            continue
        keys = [expr(a, ("pre", i, j), where) for j, a in enumerate(atom.args)]
        for kind, key in zip(kinds, keys):
            if kind in ("fp", "int"):
                b.require(key, kind, where)
        if atom.name == "WillNotOverflowSignedAdd":
            b.same(keys[0], keys[1], where)

    roots = sorted({b.find(k) for k in b.parent}, key=lambda r: _first_pos(b, r))
    index = {r: i for i, r in enumerate(roots)}
    c = TypeConstraints(t)
    c.kinds = [b.kind[r] for r in roots]
    c.fixed = [b.fixed[r] for r in roots]
    c.key_class = {k: index[b.find(k)] for k in b.parent}
    for (lo, hi), where in b.narrower:
        a, z = c.key_class[lo], c.key_class[hi]
        if a == z:
            raise UntypeableError(f"{where}: conversion between values that must share a type")
        fa, fz = c.fixed[a], c.fixed[z]
        if fa is not None and fz is not None and not _narrower(fa, fz):
            raise UntypeableError(f"{where}: {fa} is not narrower than {fz}")
        if (a, z) not in c.narrower:
            c.narrower.append((a, z))
    if _has_cycle(c.n_classes, c.narrower):
        raise UntypeableError("cyclic fptrunc/fpext constraints")
    return c


def _first_pos(b: _Builder, root) -> int:
    for i, k in enumerate(b.parent):
        if b.find(k) == root:
            return i
    return 0  # pragma: no cover


def _narrower(a: FPFormat, b: FPFormat) -> bool:
    return a.ebits <= b.ebits and a.sbits <= b.sbits and a != b


def _has_cycle(n, edges) -> bool:
    adj = {i: [z for a, z in edges if a == i] for i in range(n)}
    state = [0] * n

    def visit(u):
        state[u] = 1
        for v in adj[u]:
            if state[v] == 1 or (state[v] == 0 and visit(v)):
                return True
        state[u] = 2
        return False

    return any(state[i] == 0 and visit(i) for i in range(n))


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TypeAssignment:
    """Concrete type of every type variable of a transform."""

    class_types: tuple
    key_class: tuple  # sorted ((key, class), ...) for hashing

    def __post_init__(self):
        object.__setattr__(self, "_index", dict(self.key_class))

    def __getitem__(self, key):
        return self.class_types[self._index[key]]

    def get(self, key, default=None):
        return self.class_types[self._index[key]] if key in self._index else default

    def named(self) -> dict:
        """Types of named values only, for reports."""
        return {k: str(self.class_types[c]) for k, c in self.key_class if isinstance(k, str)}

    def label(self) -> str:
        return ", ".join(f"{k}:{v}" for k, v in sorted(self.named().items()))

    def as_dict(self) -> dict:
        return {k: self.class_types[c] for k, c in self.key_class}


def _domain(c: TypeConstraints, i: int, cfg: TypeConfig) -> list:
    kind, fixed = c.kinds[i], c.fixed[i]
    if fixed == I1:
        return [I1]
    fps = sorted(cfg.fp_formats, key=FPFormat.sort_key)
    ints = [IntType(w) for w in sorted(cfg.int_widths)]
    dom = fps if kind == "fp" else ints if kind == "int" else fps + ints
    if fixed is not None:
        dom = [ty for ty in dom if ty == fixed]
    return dom


def enumerate_assignments(c: TypeConstraints, cfg: TypeConfig | None = None) -> list[TypeAssignment]:
    """Every solution over ``cfg``; FP classes vary slowest, ascending."""
    cfg = cfg or TypeConfig()
    order = sorted(range(c.n_classes), key=lambda i: {"fp": 0, "any": 1, "int": 2}[c.kinds[i]])
    domains = [_domain(c, i, cfg) for i in order]
    key_class = tuple(sorted(c.key_class.items(), key=lambda kv: repr(kv[0])))
    out = []
    for combo in itertools.product(*domains):
        types = [None] * c.n_classes
        for i, ty in zip(order, combo):
            types[i] = ty
        if all(isinstance(types[a], FPFormat) and isinstance(types[z], FPFormat)
               and _narrower(types[a], types[z]) for a, z in c.narrower):
            out.append(TypeAssignment(tuple(types), key_class))
    return out


def assignments(t: Transform, cfg: TypeConfig | None = None) -> list[TypeAssignment]:
    return enumerate_assignments(gen_constraints(t), cfg)


def check_assignment(t: Transform, types: dict) -> bool:
    """Direct check of a key->type map against every instruction signature.

    Written without the union-find so it can serve as an independent
    reference for ``enumerate_assignments``.
    """

    def ty(op, path):
        return types[operand_key(op, path)]

    def fp(x):
        return isinstance(x, FPFormat)

    def intt(x):
        return isinstance(x, IntType)

    def sig(opcode, res, args):
        if opcode in FP_BINOPS or opcode in ("fabs", "fneg"):
            return fp(res) and all(a == res for a in args)
        if opcode in INT_BINOPS:
            return intt(res) and all(a == res for a in args)
        if opcode == "fcmp":
            return res == I1 and fp(args[0]) and args[0] == args[1]
        if opcode == "select":
            return args[0] == I1 and args[1] == res and args[2] == res
        if opcode == "fptrunc":
            return fp(res) and fp(args[0]) and _narrower(res, args[0])
        if opcode == "fpext":
            return fp(res) and fp(args[0]) and _narrower(args[0], res)
        if opcode in ("fptosi", "fptoui"):
            return fp(args[0]) and intt(res)
        return intt(args[0]) and fp(res)

    def operand_ok(op, path):
        if isinstance(op, Literal) and op.is_float and not fp(ty(op, path)):
            return False
        if isinstance(op, ConstExpr):
            args = [ty(a, path + (k,)) for k, a in enumerate(op.args)]
            if not sig(op.func, ty(op, path), args):
                return False
            return all(operand_ok(a, path + (k,)) for k, a in enumerate(op.args))
        return True

    for side, binds in (("src", t.src), ("tgt", t.tgt)):
        for reg, node in binds:
            if isinstance(node, Copy):
                ops = [node.operand]
                if ty(node.operand, (side, reg, 0)) != types[reg]:
                    return False
            elif isinstance(node, Instr):
                ops = list(node.operands)
                args = [ty(op, (side, reg, j)) for j, op in enumerate(ops)]
                if not sig(node.opcode, types[reg], args):
                    return False
                if node.ty is not None:
                    annotated = args[0] if node.opcode in CONVERSIONS or node.opcode == "fcmp" else types[reg]
                    if annotated != node.ty:
                        return False
                if node.dest_ty is not None and types[reg] != node.dest_ty:
                    return False
            else:
                ops = list(node.args)
                args = [ty(op, (side, reg, j)) for j, op in enumerate(ops)]
                if not sig(node.func, types[reg], args):
                    return False
            if not all(operand_ok(op, (side, reg, j)) for j, op in enumerate(ops)):
                return False
    for i, atom in enumerate(pred_conjuncts(t.pre)):
        if isinstance(atom, PredEq):
            if ty(atom.lhs, ("pre", i, 0)) != ty(atom.rhs, ("pre", i, 1)):
                return False
            if not (operand_ok(atom.lhs, ("pre", i, 0)) and operand_ok(atom.rhs, ("pre", i, 1))):
                return False
            continue
        kinds = REGISTRY[atom.name].kinds
        if kinds[0] == "cc":
            continue
        arg_types = [ty(a, ("pre", i, j)) for j, a in enumerate(atom.args)]
        for kind, at in zip(kinds, arg_types):
            if (kind == "fp" and not fp(at)) or (kind == "int" and not intt(at)):
                return False
        if atom.name == "WillNotOverflowSignedAdd" and arg_types[0] != arg_types[1]:
            return False
        if not all(operand_ok(a, ("pre", i, j)) for j, a in enumerate(atom.args)):
            return False
    return True
