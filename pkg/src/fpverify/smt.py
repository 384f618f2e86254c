"""SMT-LIB rendering, solver process driver and model parsing."""

from __future__ import annotations

import os
import re
import resource
import shlex
import signal
import subprocess
import tempfile
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import terms as T
from .formats import FPFormat
from .fpsem import QueryScript

DEFAULT_SOLVER = "z3 -in"
SOLVER_ENV = "FPVERIFY_SOLVER"


# ---------------------------------------------------------------------------
# rendering

def quote(name: str) -> str:
    return f"|{name}|"


def _bin(value: int, width: int) -> str:
    return "#b" + format(value, f"0{width}b") if width else ""


def render_fp(ebits: int, sbits: int, bits: int) -> str:
    fmt = FPFormat(ebits, sbits)
    exp = (bits >> fmt.tbits) & fmt.exp_mask
    trail = bits & ((1 << fmt.tbits) - 1)
    if exp == fmt.exp_mask and trail:
        return f"(_ NaN {ebits} {sbits})"
    sign = bits >> (fmt.width - 1) & 1
    return f"(fp {_bin(sign, 1)} {_bin(exp, ebits)} {_bin(trail, fmt.tbits)})"


def _atom(t: T.Term) -> str:
    if t.op == "var":
        return quote(t.params[0])
    if t.op == "fplit":
        return render_fp(t.sort.ebits, t.sort.sbits, t.params[0])
    if t.op == "bvlit":
        return _bin(t.params[0], t.sort.width)
    return t.op


def render_term(root: T.Term, names: dict | None = None) -> str:
    """Plain rendering; nodes found in ``names`` print as their let name."""
    names = names or {}
    cache: dict[int, str] = {}
    for t in T.postorder(root):
        if id(t) in names and t is not root:
            cache[id(t)] = names[id(t)]
        elif t.is_leaf:
            cache[id(t)] = _atom(t)
        elif t.op == "forall":
            *binders, body = t.args
            bs = " ".join(f"({quote(b.params[0])} {b.sort.smt()})" for b in binders)
            cache[id(t)] = f"(forall ({bs}) {cache[id(body)]})"
        else:
            cache[id(t)] = f"({t.op} {' '.join(cache[id(a)] for a in t.args)})"
    return cache[id(root)]


def _letify(root: T.Term) -> str:
    order = T.postorder(root)
    uses = Counter(id(a) for t in order for a in t.args)
    shared = [t for t in order if not t.is_leaf and uses[id(t)] > 1]
    names: dict[int, str] = {}
    bindings = []
    for i, t in enumerate(shared):
        bindings.append((f"?t{i}", render_term(t, names)))
        names[id(t)] = f"?t{i}"
    body = render_term(root, names)
    for name, text in reversed(bindings):
        body = f"(let (({name} {text}))\n {body})"
    return body


# Quantified FP queries: z3's default strategy gives up ("incomplete
# quantifiers") on some tiny formats where bit-blasting into the ufbv solver
# succeeds, while ufbv alone is slow on wider formats. Try both.
QUANTIFIED_CHECK = "(check-sat-using (or-else (then simplify smt) (then simplify fpa2bv simplify ufbv)))"


def emit(q: QueryScript, quantified_check: str | None = QUANTIFIED_CHECK) -> str:
    """Deterministic solver script for ``q``.

    ``quantified_check`` replaces ``(check-sat)`` for quantified queries;
    pass None for solvers that do not understand z3 tactics.
    """
    lines = [f"; transform: {q.name or '(unnamed)'}",
             f"; types: {q.types.label()}"]
    if q.cca:
        lines.append("; condition codes: " + ", ".join(f"{k}={v}" for k, v in sorted(q.cca.items())))
    if q.quantified:
        lines.append("; quantified over source-side undefined values")
    lines += [f"(set-logic {q.logic})", "(set-option :produce-models true)"]
    for v in q.free:
        lines.append(f"(declare-fun {quote(v.name)} () {v.sort.smt()})")
    a = q.assertion
    if a.op == "forall":
        *binders, body = a.args
        bs = " ".join(f"({quote(b.params[0])} {b.sort.smt()})" for b in binders)
        text = f"(forall ({bs})\n {_letify(body)})"
    else:
        text = _letify(a)
    lines.append(f"(assert {text})")
    lines.append(quantified_check if q.quantified and quantified_check else "(check-sat)")
    if q.free:
        lines.append(f"(get-value ({' '.join(quote(v.name) for v in q.free)}))")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# s-expressions

_SEXP_TOKEN = re.compile(r'\s+|;[^\n]*|\(|\)|\|[^|]*\||"(?:[^"]|"")*"|[^\s()|";]+')


class SexpError(ValueError):
    pass


@dataclass(frozen=True)
class Sym:
    """A quoted or plain symbol (kept apart from literal atoms)."""
    name: str


def parse_sexps(text: str) -> list:
    stack: list[list] = [[]]
    pos = 0
    while pos < len(text):
        m = _SEXP_TOKEN.match(text, pos)
        if not m:
            raise SexpError(f"bad character at offset {pos}")
        tok = m.group()
        pos = m.end()
        if tok[0].isspace() or tok[0] == ";":
            continue
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise SexpError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        elif tok[0] == "|":
            stack[-1].append(Sym(tok[1:-1]))
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise SexpError("unbalanced '('")
    return stack[0]


# ---------------------------------------------------------------------------
# model values

@dataclass(frozen=True)
class FPValue:
    ebits: int
    sbits: int
    bits: int

    def render(self) -> str:
        return render_fp(self.ebits, self.sbits, self.bits)


@dataclass(frozen=True)
class BVValue:
    width: int
    value: int

    def render(self) -> str:
        return _bin(self.value, self.width)


def _bv_literal(tok: str) -> tuple[int, int]:
    if tok.startswith("#b"):
        return int(tok[2:], 2), len(tok) - 2
    if tok.startswith("#x"):
        return int(tok[2:], 16), 4 * (len(tok) - 2)
    raise SexpError(f"not a bit-vector literal: {tok}")


def parse_value(sx) -> FPValue | BVValue:
    """Decode one model value in any of the common solver spellings."""
    if isinstance(sx, str):
        value, width = _bv_literal(sx)
        return BVValue(width, value)
    if not isinstance(sx, list) or not sx:
        raise SexpError(f"unrecognised value {sx!r}")
    head = sx[0]
    if head == "fp" and len(sx) == 4:
        s, _ = _bv_literal(sx[1])
        e, ew = _bv_literal(sx[2])
        t, tw = _bv_literal(sx[3])
        if sx[2].startswith("#x") or sx[3].startswith("#x"):
            raise SexpError("hex fields in fp triples are ambiguous without a sort")
        return FPValue(ew, tw + 1, (s << (ew + tw)) | (e << tw) | t)
    if head == "_" and len(sx) == 4 and sx[1] in ("+zero", "-zero", "+oo", "-oo", "NaN"):
        eb, sb = int(sx[2]), int(sx[3])
        fmt = FPFormat(eb, sb)
        bits = {"+zero": 0, "-zero": fmt.sign_bit, "+oo": fmt.inf(), "-oo": fmt.inf(True),
                "NaN": fmt.canonical_nan}[sx[1]]
        return FPValue(eb, sb, bits)
    if head == "_" and len(sx) == 3 and isinstance(sx[1], str) and sx[1].startswith("bv"):
        width = int(sx[2])
        return BVValue(width, int(sx[1][2:]) & ((1 << width) - 1))
    if isinstance(head, list) and head[:2] == ["_", "to_fp"] and len(sx) == 2:
        eb, sb = int(head[2]), int(head[3])
        value, _ = _bv_literal(sx[1])
        return FPValue(eb, sb, value)
    raise SexpError(f"unrecognised value {sx!r}")


def parse_value_as(sx, sort) -> FPValue | BVValue:
    """Like ``parse_value`` but resolves hex fields using the known sort."""
    if isinstance(sort, T.FPSort) and isinstance(sx, list) and sx and sx[0] == "fp":
        s, _ = _bv_literal(sx[1])
        e, _ = _bv_literal(sx[2])
        t, _ = _bv_literal(sx[3])
        tw = sort.sbits - 1
        return FPValue(sort.ebits, sort.sbits, (s << (sort.ebits + tw)) | (e << tw) | t)
    v = parse_value(sx)
    if isinstance(sort, T.FPSort) and isinstance(v, BVValue):
        return FPValue(sort.ebits, sort.sbits, v.value)
    return v


# ---------------------------------------------------------------------------
# solving

@dataclass
class SolverResult:
    status: str  # sat | unsat | unknown | timeout | solver-error
    model: dict | None = None
    transcript: str = ""
    seconds: float = 0.0
    message: str = ""


def solver_command(solver: str | None = None) -> str:
    return solver or os.environ.get(SOLVER_ENV) or DEFAULT_SOLVER


def _kill(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def _cap_memory(proc: subprocess.Popen, memory_mb: int | None) -> None:
    if not memory_mb or not hasattr(resource, "prlimit"):
        return
    limit = memory_mb << 20
    try:
        resource.prlimit(proc.pid, resource.RLIMIT_AS, (limit, limit))
    except (ProcessLookupError, PermissionError, ValueError, OSError):
        pass


def _out_of_memory(res: "SolverResult", err: str, code: int) -> bool:
    if res.status != "solver-error":
        return False
    text = (res.transcript + err + res.message).lower()
    return "memory" in text or "bad_alloc" in text or code in (-signal.SIGSEGV, -signal.SIGABRT)


def solve(text: str, timeout: float = 300.0, solver: str | None = None, *,
          sorts: dict | None = None, dump_dir: str | Path | None = None,
          tag: str = "query", memory_mb: int | None = None) -> SolverResult:
    """Run one script through a fresh solver process.

    ``solver`` is a shell-style command; a ``{file}`` placeholder makes the
    script go through a temporary file instead of stdin. ``sorts`` maps
    variable names to term sorts for exact model decoding. ``memory_mb``
    caps the solver's address space; running out counts as ``unknown``.
    """
    argv = shlex.split(solver_command(solver))
    tmp = None
    stdin_text: str | None = text
    if any("{file}" in a for a in argv):
        tmp = tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False)
        tmp.write(text)
        tmp.close()
        argv = [a.replace("{file}", tmp.name) for a in argv]
        stdin_text = None
    start = time.monotonic()
    try:
        proc = subprocess.Popen(argv, stdin=subprocess.PIPE if stdin_text is not None else subprocess.DEVNULL,
                                stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
                                start_new_session=True)
    except OSError as exc:
        if tmp:
            os.unlink(tmp.name)
        return SolverResult("solver-error", message=f"cannot start solver {argv[0]!r}: {exc}")
    _cap_memory(proc, memory_mb)
    try:
        out, err = proc.communicate(stdin_text, timeout=timeout)
    except subprocess.TimeoutExpired:
        _kill(proc)
        try:
            out, err = proc.communicate(timeout=1.0)
        except subprocess.TimeoutExpired:  # pragma: no cover - unkillable child
            out, err = "", ""
        result = SolverResult("timeout", transcript=out or "", seconds=time.monotonic() - start,
                              message=f"no answer within {timeout:g}s")
    else:
        result = _interpret(out, err, proc.returncode, sorts)
        result.seconds = time.monotonic() - start
        if memory_mb and _out_of_memory(result, err, proc.returncode):
            result.status = "unknown"
            result.message = f"solver ran out of memory (limit {memory_mb} MB)"
    finally:
        if tmp:
            os.unlink(tmp.name)
    if dump_dir is not None:
        d = Path(dump_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{tag}.smt2").write_text(text)
        (d / f"{tag}.out").write_text(result.transcript + ("\n; " + result.message if result.message else ""))
    return result


def _interpret(out: str, err: str, code: int, sorts: dict | None) -> SolverResult:
    transcript = out + (("\n; stderr:\n" + err) if err.strip() else "")
    try:
        sexps = parse_sexps(out)
    except SexpError as exc:
        return SolverResult("solver-error", transcript=transcript, message=f"garbled output: {exc}")
    status = None
    rest: list = []
    for i, sx in enumerate(sexps):
        if isinstance(sx, str) and sx in ("sat", "unsat", "unknown", "timeout"):
            status = sx
            rest = sexps[i + 1:]
            break
        if isinstance(sx, list) and sx and sx[0] == "error":
            return SolverResult("solver-error", transcript=transcript, message=" ".join(map(str, sx[1:])))
    if status is None:
        return SolverResult("solver-error", transcript=transcript,
                            message=f"no verdict (exit status {code})")
    if status != "sat":
        # errors after unsat/unknown come from the model request and are expected
        return SolverResult(status, transcript=transcript)
    model: dict = {}
    for sx in rest:
        if isinstance(sx, list) and sx and sx[0] == "error":
            return SolverResult("solver-error", transcript=transcript, message=" ".join(map(str, sx[1:])))
        if isinstance(sx, list) and all(isinstance(p, list) and len(p) == 2 for p in sx):
            for name, value in sx:
                key = name.name if isinstance(name, Sym) else name
                try:
                    sort = (sorts or {}).get(key)
                    model[key] = parse_value_as(value, sort) if sort is not None else parse_value(value)
                except SexpError as exc:
                    return SolverResult("solver-error", transcript=transcript,
                                        message=f"cannot read value of {key}: {exc}")
    return SolverResult("sat", model=model, transcript=transcript)


def solve_query(q: QueryScript, timeout: float = 300.0, solver: str | None = None,
                quantified_check: str | None = QUANTIFIED_CHECK, **kw) -> SolverResult:
    return solve(emit(q, quantified_check), timeout, solver,
                 sorts={v.name: v.sort for v in q.free}, **kw)


# ---------------------------------------------------------------------------
# incremental session (throughput path for the differential harness)

class IncrementalSolver:
    """Long-lived solver process driven command by command."""

    def __init__(self, solver: str | None = None):
        argv = shlex.split(solver_command(solver))
        self.proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                     stderr=subprocess.STDOUT, text=True, bufsize=1)

    def send(self, text: str) -> None:
        self.proc.stdin.write(text if text.endswith("\n") else text + "\n")
        self.proc.stdin.flush()

    def _read_sexp(self) -> str:
        buf = ""
        depth = 0
        while True:
            line = self.proc.stdout.readline()
            if not line:
                raise RuntimeError("solver exited: " + buf)
            buf += line
            depth += line.count("(") - line.count(")")
            if depth <= 0 and buf.strip():
                return buf

    def check_sat(self) -> str:
        self.send("(check-sat)")
        answer = self._read_sexp().strip()
        if answer not in ("sat", "unsat", "unknown"):
            raise RuntimeError(f"unexpected solver answer: {answer}")
        return answer

    def get_value(self, names: list[str], sorts: dict | None = None) -> dict:
        self.send(f"(get-value ({' '.join(quote(n) for n in names)}))")
        (pairs,) = parse_sexps(self._read_sexp())
        out = {}
        for name, value in pairs:
            key = name.name if isinstance(name, Sym) else name
            sort = (sorts or {}).get(key)
            out[key] = parse_value_as(value, sort) if sort is not None else parse_value(value)
        return out

    def close(self) -> None:
        try:
            self.send("(exit)")
            self.proc.wait(timeout=5)
        except (BrokenPipeError, subprocess.TimeoutExpired, OSError):
            self.proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
