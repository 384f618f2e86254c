"""Optimization description language: AST, parser and canonical printer.

A corpus file holds blocks separated by blank lines::

    Name: PR26746
    %a = fsub -0.0, %x
    %r = fsub 0.0, %a
      =>
    %r = %x

Comments run from ``;`` to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from .formats import FPFormat, IntType, is_type_name, parse_type

FP_BINOPS = ("fadd", "fsub", "fmul", "fdiv", "frem")
INT_BINOPS = ("add", "sub")
CONVERSIONS = ("fptrunc", "fpext", "fptosi", "fptoui", "sitofp", "uitofp")
OPCODES = FP_BINOPS + INT_BINOPS + CONVERSIONS + ("fabs", "fcmp", "select")
ARITY = {**{op: 2 for op in FP_BINOPS + INT_BINOPS}, **{op: 1 for op in CONVERSIONS},
         "fabs": 1, "fcmp": 2, "select": 3}
FLAG_ORDER = ("nnan", "ninf", "nsz")
FLAGGABLE = FP_BINOPS + ("fabs", "fcmp")
ORDERED_CODES = ("oeq", "ogt", "oge", "olt", "ole", "one", "ord")
UNORDERED_CODES = ("ueq", "ugt", "uge", "ult", "ule", "une", "uno")
COND_CODES = ORDERED_CODES + UNORDERED_CODES
# compile-time functions usable in target bindings and preconditions
CONST_FUNCS = ("fptosi", "fptoui", "sitofp", "uitofp", "fpext", "fptrunc")

_SYMBOLIC_CC = re.compile(r"C[0-9]+\Z")
_CONST_NAME = re.compile(r"C[A-Za-z0-9_]*\Z")


class DSLError(Exception):
    """Syntax or semantic error with a 1-based source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0, kind: str = "syntax"):
        self.message = message
        self.line = line
        self.col = col
        self.kind = kind
        super().__init__(f"{line}:{col}: {kind} error: {message}")


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Reg:
    """Reference to a register: an input, or a value defined in a template."""
    name: str


@dataclass(frozen=True)
class Const:
    """Symbolic compile-time constant such as ``C`` or ``C0``."""
    name: str


@dataclass(frozen=True)
class Literal:
    text: str

    @property
    def is_float(self) -> bool:
        return not re.fullmatch(r"[+-]?[0-9]+", self.text)


@dataclass(frozen=True)
class Undef:
    pass


@dataclass(frozen=True)
class ConstExpr:
    """Compile-time function application; ``fneg`` prints as ``-C``."""
    func: str
    args: tuple


Operand = Union[Reg, Const, Literal, Undef, ConstExpr]


@dataclass(frozen=True)
class Instr:
    opcode: str
    operands: tuple
    flags: tuple = ()
    cc: str | None = None
    ty: FPFormat | IntType | None = None
    dest_ty: FPFormat | IntType | None = None

    @property
    def symbolic_cc(self) -> bool:
        return self.cc is not None and self.cc not in COND_CODES


@dataclass(frozen=True)
class Copy:
    operand: Operand


Node = Union[Instr, Copy, ConstExpr]


@dataclass(frozen=True)
class PredTrue:
    pass


@dataclass(frozen=True)
class PredApp:
    name: str
    args: tuple


@dataclass(frozen=True)
class PredEq:
    lhs: Operand
    rhs: Operand


@dataclass(frozen=True)
class PredAnd:
    terms: tuple


Pred = Union[PredTrue, PredApp, PredEq, PredAnd]


@dataclass(frozen=True)
class Transform:
    name: str
    pre: Pred
    src: tuple  # ((register, Node), ...)
    tgt: tuple
    line: int = field(default=0, compare=False)

    @property
    def root(self) -> str:
        return self.src[-1][0]

    def source_defs(self) -> dict:
        return dict(self.src)

    def target_defs(self) -> dict:
        return dict(self.tgt)

    def inputs(self) -> list[str]:
        """Registers that are read but never defined, in order of first use."""
        src_defs = {name for name, _ in self.src}
        seen: list[str] = []
        for side in (self.src, self.tgt):
            defined = set(src_defs)
            for name, node in side:
                for op in node_operands(node):
                    for reg in operand_regs(op):
                        if reg not in defined and reg not in seen:
                            seen.append(reg)
                if side is self.tgt:
                    defined.add(name)
        return seen

    def constants(self) -> list[str]:
        seen: list[str] = []
        for _, node in self.src + self.tgt:
            for op in node_operands(node):
                for c in operand_consts(op):
                    if c not in seen:
                        seen.append(c)
        for op in pred_operands(self.pre, include_cc=False):
            for c in operand_consts(op):
                if c not in seen:
                    seen.append(c)
        return seen

    def cc_names(self) -> list[str]:
        seen: list[str] = []
        for _, node in self.src + self.tgt:
            if isinstance(node, Instr) and node.symbolic_cc and node.cc not in seen:
                seen.append(node.cc)
        return seen


def node_operands(node: Node) -> tuple:
    if isinstance(node, Instr):
        return node.operands
    if isinstance(node, Copy):
        return (node.operand,)
    return node.args


def operand_regs(op) -> Iterator[str]:
    if isinstance(op, Reg):
        yield op.name
    elif isinstance(op, ConstExpr):
        for a in op.args:
            yield from operand_regs(a)


def operand_consts(op) -> Iterator[str]:
    if isinstance(op, Const):
        yield op.name
    elif isinstance(op, ConstExpr):
        for a in op.args:
            yield from operand_consts(a)


def pred_conjuncts(p: Pred) -> list:
    if isinstance(p, PredTrue):
        return []
    if isinstance(p, PredAnd):
        out = []
        for t in p.terms:
            out.extend(pred_conjuncts(t))
        return out
    return [p]


def pred_operands(p: Pred, include_cc: bool = True) -> Iterator:
    from .precond import REGISTRY

    for atom in pred_conjuncts(p):
        if isinstance(atom, PredEq):
            yield atom.lhs
            yield atom.rhs
        elif include_cc or REGISTRY[atom.name].kinds[0] != "cc":
            yield from atom.args


# ---------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<reg>%[A-Za-z0-9_.]+)
  | (?P<num>[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<punct>==|&&|=>|[(),=\-!])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    col: int
    line: int = 0


def _lex(text: str, line: int, col0: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise DSLError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), col0 + pos, line))
        pos = m.end()
    return toks


class _Cursor:
    def __init__(self, toks: list[_Tok], line: int, end_col: int):
        self.toks = toks
        self.i = 0
        self.line = line
        self.end_col = end_col

    def peek(self, k: int = 0) -> _Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of line")
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text and tok.kind in ("punct", "ident"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok is None or tok.text != text:
            raise self.error(f"expected {text!r}", tok)
        self.i += 1
        return tok

    def at_end(self) -> bool:
        return self.i >= len(self.toks)

    def error(self, msg: str, tok: _Tok | None = None, kind: str = "syntax") -> DSLError:
        if tok is None:
            tok = self.peek()
        col = tok.col if tok is not None else self.end_col
        return DSLError(msg, self.line, col, kind)


# ---------------------------------------------------------------------------
# parser

def _parse_operand(cur: _Cursor) -> Operand:
    tok = cur.next()
    if tok.kind == "reg":
        return Reg(tok.text)
    if tok.kind == "num":
        return Literal(tok.text)
    if tok.kind == "punct" and tok.text == "-":
        nxt = cur.peek()
        if nxt is not None and nxt.kind == "ident" and nxt.text in ("inf", "nan"):
            cur.next()
            return Literal("-" + nxt.text)
        return ConstExpr("fneg", (_parse_operand(cur),))
    if tok.kind == "ident":
        if tok.text == "undef":
            return Undef()
        if tok.text in ("inf", "nan"):
            return Literal(tok.text)
        if tok.text in CONST_FUNCS and cur.peek() is not None and cur.peek().text == "(":
            cur.next()
            args = [_parse_operand(cur)]
            while cur.accept(","):
                args.append(_parse_operand(cur))
            cur.expect(")")
            if len(args) != 1:
                raise cur.error(f"{tok.text} takes one argument", tok, "semantic")
            return ConstExpr(tok.text, tuple(args))
        if _CONST_NAME.match(tok.text):
            return Const(tok.text)
    raise cur.error(f"unexpected {tok.text!r}", tok)


def _parse_type(cur: _Cursor):
    tok = cur.next()
    if tok.kind != "ident" or not is_type_name(tok.text):
        raise cur.error(f"expected a type, got {tok.text!r}", tok)
    try:
        return parse_type(tok.text)
    except ValueError as exc:
        raise cur.error(str(exc), tok, "semantic") from None


def _parse_instr(cur: _Cursor, opcode_tok: _Tok) -> Instr:
    opcode = opcode_tok.text
    flags: list[str] = []
    while True:
        tok = cur.peek()
        if tok is None or tok.kind != "ident" or is_type_name(tok.text):
            break
        if tok.text in FLAG_ORDER:
            if opcode not in FLAGGABLE:
                raise cur.error(f"flag {tok.text!r} not allowed on {opcode}", tok, "semantic")
            if tok.text in flags:
                raise cur.error(f"duplicate flag {tok.text!r}", tok, "semantic")
            flags.append(tok.text)
            cur.next()
            continue
        if tok.text in ("undef", "nan", "inf") or _CONST_NAME.match(tok.text) or tok.text in CONST_FUNCS:
            break
        if opcode == "fcmp" and tok.text in COND_CODES:
            break
        raise cur.error(f"unknown flag or condition code {tok.text!r}", tok, "semantic")
    ty = None
    tok = cur.peek()
    if tok is not None and tok.kind == "ident" and is_type_name(tok.text):
        ty = _parse_type(cur)
    cc = None
    if opcode == "fcmp":
        tok = cur.next()
        if tok.kind != "ident" or not (tok.text in COND_CODES or _SYMBOLIC_CC.match(tok.text)):
            raise cur.error(f"unknown condition code {tok.text!r}", tok, "semantic")
        cc = tok.text
    operands = [_parse_operand(cur)]
    while cur.accept(","):
        operands.append(_parse_operand(cur))
    dest_ty = None
    if cur.accept("to"):
        if opcode not in CONVERSIONS:
            raise cur.error(f"'to' only applies to conversions, not {opcode}", kind="semantic")
        dest_ty = _parse_type(cur)
    if not cur.at_end():
        raise cur.error(f"unexpected {cur.peek().text!r}")
    if len(operands) != ARITY[opcode]:
        raise cur.error(f"{opcode} takes {ARITY[opcode]} operands, got {len(operands)}",
                        opcode_tok, "semantic")
    ordered = tuple(f for f in FLAG_ORDER if f in flags)
    return Instr(opcode, tuple(operands), ordered, cc, ty, dest_ty)


def _parse_binding(cur: _Cursor) -> tuple[str, Node, _Tok]:
    reg = cur.next()
    if reg.kind != "reg":
        raise cur.error("expected a register definition", reg)
    cur.expect("=")
    tok = cur.peek()
    if tok is None:
        raise cur.error("missing right-hand side")
    if tok.kind == "ident" and tok.text in OPCODES:
        nxt = cur.peek(1)
        if not (tok.text in CONST_FUNCS and nxt is not None and nxt.text == "("):
            cur.next()
            return reg.text, _parse_instr(cur, tok), reg
    operand = _parse_operand(cur)
    if not cur.at_end():
        raise cur.error(f"unexpected {cur.peek().text!r}")
    if isinstance(operand, ConstExpr) and operand.func != "fneg":
        return reg.text, operand, reg
    return reg.text, Copy(operand), reg


def _parse_pred_atom(cur: _Cursor):
    from .precond import REGISTRY

    if cur.accept("("):
        p = _parse_pred(cur)
        cur.expect(")")
        return p
    tok = cur.peek()
    if tok is not None and tok.kind == "ident" and tok.text in REGISTRY:
        name_tok = cur.next()
        cur.expect("(")
        args = []
        if not cur.accept(")"):
            args.append(_parse_operand(cur))
            while cur.accept(","):
                args.append(_parse_operand(cur))
            cur.expect(")")
        entry = REGISTRY[name_tok.text]
        if len(args) != entry.arity:
            raise cur.error(f"{name_tok.text} takes {entry.arity} argument(s), got {len(args)}",
                            name_tok, "semantic")
        for kind, arg in zip(entry.kinds, args):
            if kind == "cc" and not (isinstance(arg, Const) and _SYMBOLIC_CC.match(arg.name)):
                raise cur.error(f"{name_tok.text} expects a condition-code name", name_tok, "semantic")
            if kind != "cc" and isinstance(arg, Undef):
                raise cur.error("undef is not allowed in preconditions", name_tok, "semantic")
        return PredApp(name_tok.text, tuple(args))
    if tok is not None and tok.kind == "ident" and not _CONST_NAME.match(tok.text) \
            and tok.text not in CONST_FUNCS and tok.text not in ("nan", "inf"):
        raise cur.error(f"unknown predicate {tok.text!r}", tok, "semantic")
    lhs = _parse_operand(cur)
    cur.expect("==")
    rhs = _parse_operand(cur)
    for side in (lhs, rhs):
        if isinstance(side, Undef):
            raise cur.error("undef is not allowed in preconditions", tok, "semantic")
    return PredEq(lhs, rhs)


def _parse_pred(cur: _Cursor):
    terms = []
    while True:
        atom = _parse_pred_atom(cur)
        terms.extend(atom.terms if isinstance(atom, PredAnd) else [atom])
        if not cur.accept("&&"):
            break
    return terms[0] if len(terms) == 1 else PredAnd(tuple(terms))


def _strip_comment(line: str) -> str:
    i = line.find(";")
    return line if i < 0 else line[:i]


def _blocks(text: str) -> Iterator[list[tuple[int, str]]]:
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            if block:
                yield block
                block = []
            continue
        body = _strip_comment(raw)
        if body.strip():
            block.append((lineno, body))
    if block:
        yield block


_HEADER = re.compile(r"\s*(Name|Pre|Precondition)\s*:(.*)\Z")


def _parse_block(lines: list[tuple[int, str]]) -> Transform:
    name = ""
    pre: Pred = PredTrue()
    src: list = []
    tgt: list = []
    src_toks: list = []
    tgt_toks: list = []
    side = None
    first_line = lines[0][0]
    i = 0
    while i < len(lines):
        lineno, body = lines[i]
        i += 1
        header = _HEADER.match(body)
        if header and side is None and not src:
            key, rest = header.group(1), header.group(2)
            if key == "Name":
                name = rest.strip()
                continue
            col = body.index(":") + 2
            # join continuation lines of a multi-line precondition
            while (rest.rstrip().endswith("&&") or rest.count("(") > rest.count(")")) and i < len(lines):
                rest = rest + " " + lines[i][1]
                i += 1
            toks = _lex(rest, lineno, col)
            cur = _Cursor(toks, lineno, col + len(rest))
            if cur.at_end():
                raise DSLError("empty precondition", lineno, col)
            pre = _parse_pred(cur)
            if not cur.at_end():
                raise cur.error(f"unexpected {cur.peek().text!r}")
            continue
        if header:
            raise DSLError(f"{header.group(1)}: must precede the source template", lineno, 1)
        stripped = body.strip()
        if stripped == "=>":
            if side == "tgt":
                raise DSLError("second '=>' delimiter", lineno, body.index("=>") + 1)
            side = "tgt"
            continue
        toks = _lex(body, lineno, 1)
        cur = _Cursor(toks, lineno, len(body) + 1)
        reg, node, tok = _parse_binding(cur)
        if side == "tgt":
            tgt.append((reg, node))
            tgt_toks.append(tok)
        else:
            src.append((reg, node))
            src_toks.append(tok)
    if side != "tgt":
        raise DSLError("missing '=>' delimiter", lines[-1][0], 1)
    if not src:
        raise DSLError("empty source template", first_line, 1, "semantic")
    if not tgt:
        raise DSLError("empty target template", lines[-1][0], 1, "semantic")
    t = Transform(name, pre, tuple(src), tuple(tgt), line=first_line)
    _check(t, src_toks, tgt_toks)
    return t


def _check(t: Transform, src_toks, tgt_toks) -> None:
    """Semantic checks: definitions before use, unique names, shared root."""

    def fail(msg, tok):
        raise DSLError(msg, tok.line, tok.col, "semantic")

    src_defined: dict[str, int] = {}
    for idx, ((reg, node), tok) in enumerate(zip(t.src, src_toks)):
        pos = tok
        if reg in src_defined:
            fail(f"duplicate register {reg}", pos)
        if isinstance(node, ConstExpr) or _has_constexpr(node):
            fail("constant expressions are only allowed in the target and precondition", pos)
        src_defined[reg] = idx
    # a source register used before (or by) its own definition
    for idx, ((reg, node), tok) in enumerate(zip(t.src, src_toks)):
        for op in node_operands(node):
            for r in operand_regs(op):
                if r in src_defined and src_defined[r] >= idx:
                    fail(f"{r} used before its definition", tok)
    root = t.root
    inputs = {r for _, node in t.src for op in node_operands(node) for r in operand_regs(op)} - set(src_defined)
    tgt_defined: set[str] = set()
    for (reg, node), tok in zip(t.tgt, tgt_toks):
        pos = tok
        for op in node_operands(node):
            for r in operand_regs(op):
                if r == root and r not in tgt_defined:
                    fail(f"{r} used before its definition in the target", pos)
                if r not in tgt_defined and r not in src_defined and r not in inputs:
                    fail(f"{r} is not defined", pos)
        if reg in tgt_defined or (reg in src_defined and reg != root) or reg in inputs:
            fail(f"duplicate register {reg}", pos)
        tgt_defined.add(reg)
    if t.tgt[-1][0] != root:
        fail(f"target root {t.tgt[-1][0]} does not match source root {root}", tgt_toks[-1])
    known = set(src_defined) | tgt_defined | inputs
    cc_names = set(t.cc_names())
    for atom in pred_conjuncts(t.pre):
        ops = (atom.lhs, atom.rhs) if isinstance(atom, PredEq) else atom.args
        for op in ops:
            for r in operand_regs(op):
                if r not in known:
                    raise DSLError(f"{r} in precondition is not defined", t.line, 1, "semantic")
        if isinstance(atom, PredApp):
            from .precond import REGISTRY

            if REGISTRY[atom.name].kinds[0] == "cc":
                for a in atom.args:
                    if a.name not in cc_names:
                        raise DSLError(f"{a.name} is not a condition code of any fcmp", t.line, 1, "semantic")


def _has_constexpr(node) -> bool:
    return any(isinstance(op, ConstExpr) for op in node_operands(node))


def parse_blocks(text: str) -> list[Transform | DSLError]:
    """Parse every block independently; failures come back as ``DSLError``."""
    out: list = []
    try:
        blocks = list(_blocks(text))
    except Exception as exc:  # pragma: no cover - splitlines cannot fail on str
        return [DSLError(str(exc))]
    for block in blocks:
        try:
            out.append(_parse_block(block))
        except DSLError as exc:
            out.append(exc)
        except (ValueError, RecursionError) as exc:
            out.append(DSLError(str(exc), block[0][0], 1))
    return out


def parse_corpus(text: str) -> list[Transform]:
    """Parse a whole corpus, raising the first ``DSLError``."""
    out = []
    for item in parse_blocks(text):
        if isinstance(item, DSLError):
            raise item
        out.append(item)
    return out


def parse_transform(text: str) -> Transform:
    ts = parse_corpus(text)
    if len(ts) != 1:
        raise DSLError(f"expected one transform, found {len(ts)}")
    return ts[0]


# ---------------------------------------------------------------------------
# printer

def format_operand(op: Operand) -> str:
    if isinstance(op, (Reg, Const)):
        return op.name
    if isinstance(op, Literal):
        return op.text
    if isinstance(op, Undef):
        return "undef"
    if op.func == "fneg":
        return "-" + format_operand(op.args[0])
    return f"{op.func}({', '.join(format_operand(a) for a in op.args)})"


def format_node(node: Node) -> str:
    if isinstance(node, Copy):
        return format_operand(node.operand)
    if isinstance(node, ConstExpr):
        return format_operand(node)
    parts = [node.opcode, *node.flags]
    if node.ty is not None:
        parts.append(str(node.ty))
    if node.cc is not None:
        parts.append(node.cc)
    text = " ".join(parts) + " " + ", ".join(format_operand(o) for o in node.operands)
    if node.dest_ty is not None:
        text += f" to {node.dest_ty}"
    return text


def format_pred(p: Pred) -> str:
    if isinstance(p, PredAnd):
        return " && ".join(format_pred(t) for t in p.terms)
    if isinstance(p, PredEq):
        return f"{format_operand(p.lhs)} == {format_operand(p.rhs)}"
    if isinstance(p, PredApp):
        return f"{p.name}({', '.join(format_operand(a) for a in p.args)})"
    return "true"


def pretty_print(t: Transform) -> str:
    lines = []
    if t.name:
        lines.append(f"Name: {t.name}")
    if not isinstance(t.pre, PredTrue):
        lines.append(f"Pre: {format_pred(t.pre)}")
    lines += [f"{reg} = {format_node(node)}" for reg, node in t.src]
    lines.append("  =>")
    lines += [f"{reg} = {format_node(node)}" for reg, node in t.tgt]
    return "\n".join(lines) + "\n"


def pretty_print_corpus(ts) -> str:
    return "\n".join(pretty_print(t) for t in ts)
