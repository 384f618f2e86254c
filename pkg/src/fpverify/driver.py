"""Verification driver: corpus in, report out.

Each transform fans out into instances (type assignment x condition-code
assignment). Instances run on a thread pool, since the work happens in
solver subprocesses, and the report is assembled from results keyed by
position so the output never depends on scheduling.
"""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .dsl import DSLError, Transform, parse_blocks
from .formats import (DEFAULT_FP_FORMATS, DEFAULT_INT_WIDTHS, FP8, FPFormat, IntType,
                      format_bits, format_fp)
from .fpsem import build_query
from .oracle.interp import (BudgetExceeded, InterpError, brute_force_verify, interpret, replay)
from .precond import PreconditionError, enumerate_cc
from .smt import QUANTIFIED_CHECK, FPValue, emit, solve
from .typer import TypeConfig, UntypeableError, assignments

SCHEMA = "fpverify.report/v1"

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_TIMEOUT = 2
EXIT_FAILURE = 3


@dataclass
class Config:
    timeout: float = 300.0
    solver: str | None = None
    fp_formats: tuple = DEFAULT_FP_FORMATS
    int_widths: tuple = DEFAULT_INT_WIDTHS
    jobs: int = 0  # 0: one per CPU
    brute_force: bool = False
    brute_force_int_widths: tuple = (8,)
    dump_smt: str | None = None
    quantified_check: str | None = QUANTIFIED_CHECK
    memory_mb: int | None = 4096  # per solver process; None disables the cap

    def describe(self) -> dict:
        return {
            "timeout": self.timeout,
            "solver": self.solver or os.environ.get("FPVERIFY_SOLVER") or "z3 -in",
            "fp_formats": [str(f) for f in self.fp_formats],
            "int_widths": list(self.int_widths),
            "brute_force": self.brute_force,
            "memory_mb": self.memory_mb,
        }


# ---------------------------------------------------------------------------
# report types

@dataclass
class Value:
    type: str
    decimal: str
    bits: str


@dataclass
class Counterexample:
    values: dict  # name -> Value, for inputs, constants and target-side choices
    source: Value | None = None
    target: Value | None = None
    replay: str = "unconfirmed"  # confirmed | unconfirmed | mismatch
    note: str = ""


@dataclass
class InstanceResult:
    types: dict
    cc: dict
    status: str  # valid | invalid | timeout | unknown | solver-error
    seconds: float = 0.0
    quantified: bool = False
    counterexample: Counterexample | None = None
    message: str = ""


@dataclass
class CrossCheck:
    """Solver verdict against the brute-force oracle at a tiny format."""
    types: dict
    cc: dict
    solver: str
    oracle: str  # valid | invalid | skipped
    agree: bool
    message: str = ""


@dataclass
class TransformReport:
    name: str
    line: int
    status: str  # correct | incorrect | unverified | error | skipped
    instances: list = field(default_factory=list)
    cross_checks: list = field(default_factory=list)
    message: str = ""


@dataclass
class FileReport:
    path: str
    transforms: list = field(default_factory=list)
    errors: list = field(default_factory=list)  # parse errors: {line, col, message}


@dataclass
class Report:
    files: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    tool: str = f"fpverify {__version__}"
    schema: str = SCHEMA

    def transforms(self):
        for f in self.files:
            yield from f.transforms

    def totals(self) -> dict:
        out = {k: 0 for k in ("transforms", "correct", "incorrect", "unverified", "error", "skipped")}
        inst = {k: 0 for k in ("valid", "invalid", "timeout", "unknown", "solver-error")}
        for t in self.transforms():
            out["transforms"] += 1
            out[t.status] += 1
            for i in t.instances:
                inst[i.status] += 1
        out["parse_errors"] = sum(len(f.errors) for f in self.files)
        out["instances"] = inst
        return out

    def exit_code(self) -> int:
        ts = list(self.transforms())
        if any(f.errors for f in self.files) or any(t.status == "error" for t in ts):
            return EXIT_FAILURE
        if any(t.status == "incorrect" for t in ts):
            return EXIT_INVALID
        if any(t.status == "unverified" for t in ts):
            return EXIT_TIMEOUT
        return EXIT_OK


def transform_status(instances: list, cross_checks: list) -> str:
    statuses = {i.status for i in instances}
    if "solver-error" in statuses or any(not c.agree for c in cross_checks):
        return "error"
    if any(i.counterexample and i.counterexample.replay == "mismatch" for i in instances):
        return "error"
    if "invalid" in statuses:
        return "incorrect"
    if statuses & {"timeout", "unknown"}:
        return "unverified"
    if not instances:
        return "skipped"
    return "correct"


# ---------------------------------------------------------------------------
# value rendering

def render_value(ty, bits: int) -> Value:
    if isinstance(ty, FPFormat):
        return Value(str(ty), format_fp(ty, bits), format_bits(ty.width, bits))
    shown = bits if ty.width == 1 else ty.signed(bits)
    return Value(str(ty), str(shown), format_bits(ty.width, bits))


def _model_bits(model: dict) -> dict:
    return {k: (v.bits if isinstance(v, FPValue) else v.value) for k, v in model.items()}


# ---------------------------------------------------------------------------
# verification

@dataclass
class _Task:
    transform: Transform
    ta: object
    cca: dict
    tag: str


def _tag(path: Path, index: int, name: str, k: int) -> str:
    safe = re.sub(r"[^A-Za-z0-9_.-]+", "_", name or "unnamed")
    return f"{path.stem}.{index:03d}.{safe}.{k:03d}"


def run_instance(task: _Task, cfg: Config) -> InstanceResult:
    t, ta, cca = task.transform, task.ta, task.cca
    q = build_query(t, ta, cca)
    sorts = {v.name: v.sort for v in q.free}
    res = solve(emit(q, cfg.quantified_check), cfg.timeout, cfg.solver, sorts=sorts,
                dump_dir=cfg.dump_smt, tag=task.tag, memory_mb=cfg.memory_mb)
    status = {"sat": "invalid", "unsat": "valid"}.get(res.status, res.status)
    out = InstanceResult(ta.named(), dict(cca), status, round(res.seconds, 4), q.quantified,
                         message=res.message)
    if status == "invalid":
        out.counterexample = _counterexample(t, ta, cca, q, _model_bits(res.model or {}))
    return out


def _counterexample(t: Transform, ta, cca, q, model: dict) -> Counterexample:
    values = {}
    for v in q.free:
        values[v.name] = render_value(v.ty, model.get(v.name, 0))
    cex = Counterexample(values)
    env = {v.name: model.get(v.name, 0) for v in q.free}
    rty = ta[t.root]
    try:
        cex.replay = replay(t, ta, model, cca)
        if not q.universal:
            cex.source = render_value(rty, int(interpret(t, "src", ta, env, cca)))
            cex.target = render_value(rty, int(interpret(t, "tgt", ta, env, cca)))
    except (InterpError, BudgetExceeded) as exc:
        cex.replay = "unconfirmed"
        cex.note = str(exc)
    if cex.replay == "unconfirmed" and not cex.note:
        cex.note = "too many source-side undefined values to enumerate"
    return cex


def _cross_check(t: Transform, cfg: Config) -> list:
    tiny = TypeConfig((FP8,), tuple(cfg.brute_force_int_widths))
    out = []
    try:
        tas = assignments(t, tiny)
    except UntypeableError:
        return out
    for ta in tas:
        for cca in enumerate_cc(t):
            q = build_query(t, ta, cca)
            res = solve(emit(q, cfg.quantified_check), cfg.timeout, cfg.solver,
                        sorts={v.name: v.sort for v in q.free}, memory_mb=cfg.memory_mb)
            solver = {"sat": "invalid", "unsat": "valid"}.get(res.status, res.status)
            try:
                oracle = brute_force_verify(t, ta, cca).verdict
            except BudgetExceeded as exc:
                out.append(CrossCheck(ta.named(), dict(cca), solver, "skipped", True, str(exc)))
                continue
            agree = solver == oracle or solver in ("timeout", "unknown")
            out.append(CrossCheck(ta.named(), dict(cca), solver, oracle, agree, res.message))
    return out


def _plan(t: Transform, cfg: Config) -> list:
    tas = assignments(t, TypeConfig(tuple(cfg.fp_formats), tuple(cfg.int_widths)))
    ccas = enumerate_cc(t)
    return [(ta, cca) for ta in tas for cca in ccas]


def verify_paths(paths, cfg: Config | None = None) -> Report:
    cfg = cfg or Config()
    report = Report(config=cfg.describe())
    tasks: list[tuple] = []  # (file index, transform index, instance index, task)
    pending: dict = {}
    for fi, p in enumerate(paths):
        path = Path(p)
        fr = FileReport(str(p))
        report.files.append(fr)
        for item in parse_blocks(path.read_text()):
            if isinstance(item, DSLError):
                fr.errors.append({"line": item.line, "col": item.col, "message": item.message,
                                  "kind": item.kind})
                continue
            ti = len(fr.transforms)
            tr = TransformReport(item.name, item.line, "skipped")
            fr.transforms.append(tr)
            try:
                plan = _plan(item, cfg)
            except (UntypeableError, PreconditionError) as exc:
                tr.status = "error"
                tr.message = str(exc)
                continue
            if not plan:
                tr.message = "no type assignment in the configured domain"
            pending[(fi, ti)] = item
            for k, (ta, cca) in enumerate(plan):
                tasks.append((fi, ti, k, _Task(item, ta, cca, _tag(path, ti, item.name, k))))
    jobs = cfg.jobs or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {(fi, ti, k): pool.submit(run_instance, task, cfg) for fi, ti, k, task in tasks}
        checks = {key: pool.submit(_cross_check, t, cfg) for key, t in pending.items()} \
            if cfg.brute_force else {}
        results = {key: f.result() for key, f in futures.items()}
        checked = {key: f.result() for key, f in checks.items()}
    for key in sorted(results):
        fi, ti, _ = key
        report.files[fi].transforms[ti].instances.append(results[key])
    for (fi, ti) in pending:
        tr = report.files[fi].transforms[ti]
        tr.cross_checks = checked.get((fi, ti), [])
        tr.status = transform_status(tr.instances, tr.cross_checks)
    return report


def verify_file(path, cfg: Config | None = None) -> Report:
    return verify_paths([path], cfg)


# ---------------------------------------------------------------------------
# rendering

def to_dict(report: Report) -> dict:
    d = asdict(report)
    d["totals"] = report.totals()
    d["exit_code"] = report.exit_code()
    return d


def render_json(report: Report) -> str:
    return json.dumps(to_dict(report), indent=2, sort_keys=False) + "\n"


def _value(d) -> Value | None:
    return None if d is None else Value(**d)


def from_dict(d: dict) -> Report:
    if d.get("schema") != SCHEMA:
        raise ValueError(f"unsupported report schema {d.get('schema')!r}")
    files = []
    for f in d["files"]:
        trs = []
        for t in f["transforms"]:
            insts = []
            for i in t["instances"]:
                cex = i.get("counterexample")
                if cex is not None:
                    cex = Counterexample({k: Value(**v) for k, v in cex["values"].items()},
                                         _value(cex["source"]), _value(cex["target"]), cex["replay"],
                                         cex["note"])
                insts.append(InstanceResult(i["types"], i["cc"], i["status"], i["seconds"],
                                            i["quantified"], cex, i["message"]))
            checks = [CrossCheck(**c) for c in t["cross_checks"]]
            trs.append(TransformReport(t["name"], t["line"], t["status"], insts, checks, t["message"]))
        files.append(FileReport(f["path"], trs, f["errors"]))
    return Report(files, d["config"], d["tool"], d["schema"])


def parse_json(text: str) -> Report:
    return from_dict(json.loads(text))


_LABEL = {"correct": "verified", "incorrect": "INVALID", "unverified": "unverified (timeout)",
          "error": "ERROR", "skipped": "skipped"}


def render_text(report: Report) -> str:
    lines = []
    for f in report.files:
        lines.append(f"== {f.path}")
        for e in f.errors:
            lines.append(f"  parse error at {e['line']}:{e['col']}: {e['message']}")
        for t in f.transforms:
            lines.append(f"  {t.name or '(unnamed)'}: {_LABEL[t.status]}"
                         f"  [{len(t.instances)} instance{'s' if len(t.instances) != 1 else ''}]")
            if t.message:
                lines.append(f"    {t.message}")
            for i in t.instances:
                if i.status == "valid":
                    continue
                label = ", ".join(f"{k}:{v}" for k, v in sorted(i.types.items()))
                if i.cc:
                    label += "; " + ", ".join(f"{k}={v}" for k, v in sorted(i.cc.items()))
                lines.append(f"    {i.status} at {label}"
                             + (" (quantified)" if i.quantified else "")
                             + (f": {i.message}" if i.message else ""))
                if i.counterexample:
                    lines.extend(_cex_lines(i.counterexample))
            for c in t.cross_checks:
                if not c.agree:
                    lines.append(f"    brute-force disagreement at {c.types}: solver {c.solver},"
                                 f" oracle {c.oracle}")
    lines.append("")
    lines.append(f"{'File':<40} {'Verified':>8} {'Timeouts':>8} {'Bugs':>5} {'Errors':>6}")
    tot = [0, 0, 0, 0]
    for f in report.files:
        row = [sum(t.status == s for t in f.transforms)
               for s in ("correct", "unverified", "incorrect", "error")]
        row[3] += len(f.errors)
        tot = [a + b for a, b in zip(tot, row)]
        lines.append(f"{Path(f.path).name:<40} {row[0]:>8} {row[1]:>8} {row[2]:>5} {row[3]:>6}")
    lines.append(f"{'Total':<40} {tot[0]:>8} {tot[1]:>8} {tot[2]:>5} {tot[3]:>6}")
    return "\n".join(lines) + "\n"


def _cex_lines(cex: Counterexample) -> list:
    out = ["      counterexample:"]
    for name, v in cex.values.items():
        out.append(f"        {name} = {v.decimal} ({v.bits})")
    if cex.source is not None:
        out.append(f"        source = {cex.source.decimal} ({cex.source.bits})")
        out.append(f"        target = {cex.target.decimal} ({cex.target.bits})")
    out.append(f"        oracle replay: {cex.replay}" + (f" ({cex.note})" if cex.note else ""))
    return out


def render(report: Report, fmt: str = "text") -> str:
    if fmt == "json":
        return render_json(report)
    if fmt == "text":
        return render_text(report)
    raise ValueError(f"unknown report format {fmt!r}")
