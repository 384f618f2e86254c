"""The eight acceptance criteria, one test each.

Each test prints a PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".
"""

import json
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from fpverify import CORPUS, cli
from fpverify import terms as T
from fpverify.driver import (EXIT_FAILURE, EXIT_INVALID, EXIT_OK, EXIT_TIMEOUT, Config,
                             from_dict, parse_json, render_json, to_dict, verify_paths)
from fpverify.dsl import parse_corpus, pretty_print_corpus
from fpverify.formats import DOUBLE, FP8, HALF, SINGLE, IntType, literal_bits
from fpverify.fpsem import build_query, encode_fcmp
from fpverify.oracle.differential import differential, sample_pairs
from fpverify.oracle.interp import brute_force_verify
from fpverify.oracle.kernels import CC_MASKS
from fpverify.oracle.minifloat import MiniFloat, mf_cmp
from fpverify.precond import enumerate_cc
from fpverify.smt import render_term, solve, solve_query
from fpverify.typer import TypeConfig, assignments

pytestmark = pytest.mark.solver

BUGS = ["pr26746.opt", "pr26958.opt", "pr26943.opt", "pr27036.opt"]


def by_name(report):
    return {t.name: t for t in report.transforms()}


def invalid_instances(tr):
    return [i for i in tr.instances if i.status == "invalid"]


def bits(value):
    return int(value.bits, 16)


def subset(tmp_path, corpus_file, *names):
    """Write the named transforms of a bundled file to a scratch corpus."""
    ts = [t for t in parse_corpus((CORPUS / corpus_file).read_text()) if t.name in names]
    assert [t.name for t in ts] == list(names)
    out = tmp_path / corpus_file
    out.write_text(pretty_print_corpus(ts))
    return out


# -- 1 ---------------------------------------------------------------------

def test_bug_reconstructions(criterion):
    with criterion(1, "PR26746/PR26958/PR26943/PR27036 invalid at half, replays confirmed", 300):
        report = verify_paths([CORPUS / f for f in BUGS], Config(fp_formats=(HALF,), timeout=120))
        ts = by_name(report)
        assert all(ts[n].status == "incorrect" for n in ("PR26746", "PR26958", "PR26943", "PR27036")), \
            {n: t.status for n, t in ts.items()}
        for t in ts.values():
            for inst in invalid_instances(t):
                assert inst.counterexample.replay == "confirmed", (t.name, inst.types)

        # 0 - (-0 - x) at x = -0.0
        (inst,) = invalid_instances(ts["PR26746"])
        assert bits(inst.counterexample.values["%x"]) == literal_bits(HALF, "-0.0")

        # (0 - x) + x with a NaN or infinite x
        for inst in invalid_instances(ts["PR26958"]):
            x = MiniFloat(HALF, bits(inst.counterexample.values["%x"]))
            assert x.is_nan or x.is_inf

        # the source's divisor is zero: select picks 0.0, or C itself is a zero
        for inst in invalid_instances(ts["PR26943"]):
            v = inst.counterexample.values
            divisor_zero = int(v["%c"].decimal) == 1 or MiniFloat(HALF, bits(v["C"])).is_zero
            assert divisor_zero
            assert inst.counterexample.source.decimal == "nan"

        # two roundings on the left, one on the right, and the results differ
        checked = 0
        for inst in invalid_instances(ts["PR27036"]):
            cex = inst.counterexample
            if cex.source is None:
                continue  # overflow case: the disagreement is with an undefined conversion
            ity = IntType(int(inst.types["%x"][1:]))
            x, y = (ity.signed(bits(cex.values[r])) for r in ("%x", "%y"))
            fx = MiniFloat.from_fraction(HALF, Fraction(x))
            fy = MiniFloat.from_fraction(HALF, Fraction(y))
            inexact = fx.value != x or fy.value != y or \
                MiniFloat.from_fraction(HALF, fx.value + fy.value).value != fx.value + fy.value
            assert inexact, (x, y)
            assert cex.source.bits != cex.target.bits
            checked += 1
        assert checked


# -- 2 ---------------------------------------------------------------------

def test_undef_target(criterion, tmp_path):
    with criterion(2, "NaN-forcing source => undef is invalid, => nan is valid", 300):
        path = subset(tmp_path, "undef.opt", "fadd-undef-to-undef", "fadd-undef-to-nan")
        report = verify_paths([path], Config(fp_formats=(HALF, SINGLE, DOUBLE)))
        ts = by_name(report)
        assert ts["fadd-undef-to-undef"].status == "incorrect"
        assert ts["fadd-undef-to-nan"].status == "correct"
        for inst in invalid_instances(ts["fadd-undef-to-undef"]):
            assert inst.quantified and inst.counterexample.replay != "mismatch"


# -- 3 ---------------------------------------------------------------------

def test_nsz_differential(criterion, tmp_path):
    with criterion(3, "fadd nsz %x, C with AnyZero(C) valid at half/float/double; without nsz invalid", 60):
        path = subset(tmp_path, "fastmath.opt", "fadd-nsz-anyzero", "fadd-anyzero")
        report = verify_paths([path], Config())
        ts = by_name(report)
        with_nsz, without = ts["fadd-nsz-anyzero"], ts["fadd-anyzero"]
        assert with_nsz.status == "correct"
        assert sorted(i.types["%r"] for i in with_nsz.instances) == ["double", "float", "half"]
        assert without.status == "incorrect"
        for inst in invalid_instances(without):
            cex = inst.counterexample
            src, tgt = cex.source, cex.target
            zeros = {src.decimal, tgt.decimal}
            assert zeros == {"0.0", "-0.0"}, zeros


# -- 4 ---------------------------------------------------------------------

def test_verdict_equivalence(criterion):
    with criterion(4, "brute force and solver agree on >= 20 transforms at fp8", 600):
        ts = parse_corpus((CORPUS / "suite.opt").read_text())
        compared, disagreements = 0, []
        for t in ts:
            seen = False
            for ta in assignments(t, TypeConfig.test_mode()):
                for cca in enumerate_cc(t):
                    res = solve_query(build_query(t, ta, cca), timeout=120)
                    solver = {"sat": "invalid", "unsat": "valid"}.get(res.status, res.status)
                    oracle = brute_force_verify(t, ta, cca).verdict
                    if solver != oracle:
                        disagreements.append((t.name, ta.label(), cca, solver, oracle))
                    seen = True
            compared += seen
        assert compared >= 20, compared
        assert not disagreements, disagreements


# -- 5 ---------------------------------------------------------------------

def test_encoding_differential(criterion):
    with criterion(5, "encodings match the oracle: fadd/frem exhaustive, others on 2000 pairs", 900):
        for op in ("fadd", "frem"):
            r = differential(op, FP8)
            assert r.checked == 65536 and r.ok, (op, r.mismatches[:5])
        pairs = sample_pairs(FP8, 2000, seed=1)
        for op in ("fsub", "fmul", "fdiv") + tuple("fcmp " + cc for cc in CC_MASKS):
            r = differential(op, FP8, pairs)
            assert r.checked == 2000 and r.ok, (op, r.mismatches[:5])
        # unary: the sample's second column has at most 256 distinct values,
        # so check every fp8 operand instead
        every = np.stack([np.zeros(256, dtype=np.int64), np.arange(256)], axis=1)
        r = differential("fabs", FP8, every)
        assert r.checked == 256 and r.ok, r.mismatches[:5]


# -- 6 ---------------------------------------------------------------------

def solver_fcmp(cc, a, b):
    # operands are variables pinned by equations, so nothing folds before the solver
    x, y = T.var("a", T.fp_sort(FP8)), T.var("b", T.fp_sort(FP8))
    term = encode_fcmp(cc, x, y)
    text = (f"(set-logic QF_BVFP)\n(declare-fun r () (_ BitVec 1))\n"
            f"(declare-fun a () (_ FloatingPoint 4 4))\n(declare-fun b () (_ FloatingPoint 4 4))\n"
            f"(assert (= a {render_term(T.fp_lit(FP8, a))}))\n"
            f"(assert (= b {render_term(T.fp_lit(FP8, b))}))\n"
            f"(assert (= r {render_term(term)}))\n(check-sat)\n(get-value (r))\n")
    res = solve(text, timeout=30, sorts={"r": T.BVSort(1)})
    assert res.status == "sat"
    return bool(res.model["r"].value)


def test_fcmp_table(criterion):
    with criterion(6, "all 14 fcmp codes exhaustive on fp8 plus NaN/signed-zero cases", 600):
        assert len(CC_MASKS) == 14
        for cc in CC_MASKS:
            r = differential("fcmp " + cc, FP8)
            assert r.checked == 65536 and r.ok, (cc, r.mismatches[:5])
        nan, one = FP8.canonical_nan, literal_bits(FP8, "1.0")
        pz, nz = literal_bits(FP8, "0.0"), literal_bits(FP8, "-0.0")
        for cc, a, b, want in [("oeq", nan, nan, False), ("uno", nan, one, True),
                               ("uno", one, nan, True), ("oeq", nz, pz, True),
                               ("ueq", nan, one, True), ("one", nz, pz, False),
                               ("ord", nan, one, False)]:
            assert mf_cmp(cc, MiniFloat(FP8, a), MiniFloat(FP8, b)) is want, (cc, a, b)
            assert solver_fcmp(cc, a, b) is want, (cc, a, b)


# -- 7 ---------------------------------------------------------------------

def test_timeout(criterion, tmp_path):
    with criterion(7, "sleeping solver gives Timeout within timeout + 1 s, transform unverified"):
        stub = tmp_path / "sleepy.py"
        stub.write_text("import time\ntime.sleep(60)\n")
        opt = tmp_path / "one.opt"
        opt.write_text("Name: neg-zero-identity\n%r = fadd %x, -0.0\n  =>\n%r = %x\n")
        timeout = 2.0
        start = time.monotonic()
        report = verify_paths([opt], Config(fp_formats=(HALF,), timeout=timeout,
                                            solver=f"{sys.executable} {stub}"))
        took = time.monotonic() - start
        (tr,) = report.transforms()
        (inst,) = tr.instances
        assert inst.status == "timeout"
        assert inst.seconds <= timeout + 1.0
        assert took <= timeout + 1.0, took
        assert tr.status == "unverified"
        assert report.exit_code() == EXIT_TIMEOUT


# -- 8 ---------------------------------------------------------------------

def test_round_trips(criterion, tmp_path):
    with criterion(8, "corpus print/parse, JSON render/parse and exit codes round-trip"):
        files = sorted(CORPUS.glob("*.opt"))
        assert len(files) >= 8
        for f in files:
            ts = parse_corpus(f.read_text())
            assert parse_corpus(pretty_print_corpus(ts)) == ts, f.name

        report = verify_paths([CORPUS / "pr26746.opt", CORPUS / "fastmath.opt"],
                              Config(fp_formats=(HALF,)))
        text = render_json(report)
        again = parse_json(text)
        assert again == report
        assert to_dict(again) == json.loads(text)
        assert from_dict(json.loads(text)) == report

        valid = tmp_path / "valid.opt"
        valid.write_text("%r = fadd %x, -0.0\n  =>\n%r = %x\n")
        invalid = tmp_path / "invalid.opt"
        invalid.write_text("%r = fadd %x, 0.0\n  =>\n%r = %x\n")
        broken = tmp_path / "broken.opt"
        broken.write_text("%r = fadd %x\n  =>\n%r = %x\n")
        empty = tmp_path / "empty.opt"
        empty.write_text("")
        stub = tmp_path / "sleepy.py"
        stub.write_text("import time\ntime.sleep(60)\n")
        run = lambda *a: cli.main(["verify", "--fp-widths", "half", "--format", "json", *map(str, a)])
        assert run(valid) == EXIT_OK
        assert run(empty) == EXIT_OK
        assert run(invalid) == EXIT_INVALID
        assert run(valid, invalid) == EXIT_INVALID
        assert run(broken) == EXIT_FAILURE
        assert run(broken, invalid) == EXIT_FAILURE
        assert run("--timeout", "1", "--solver", f"{sys.executable} {stub}", valid) == EXIT_TIMEOUT
        assert run("--solver", "/nonexistent/solver", valid) == EXIT_FAILURE
