import json
import re

import pytest

from fpverify import CORPUS, cli
from fpverify.driver import (EXIT_FAILURE, EXIT_INVALID, EXIT_OK, EXIT_TIMEOUT, Config,
                             Counterexample, CrossCheck, FileReport, InstanceResult, Report,
                             TransformReport, Value, parse_json, render, render_json,
                             transform_status, verify_paths)
from fpverify.dsl import parse_corpus
from fpverify.formats import FP8, HALF


def inst(status, **kw):
    return InstanceResult({"%x": "half"}, {}, status, **kw)


@pytest.mark.parametrize("statuses,expect", [
    (["valid", "valid"], "correct"),
    (["valid", "invalid", "timeout"], "incorrect"),
    (["valid", "timeout"], "unverified"),
    (["valid", "unknown"], "unverified"),
    (["invalid", "solver-error"], "error"),
    ([], "skipped"),
])
def test_transform_status(statuses, expect):
    assert transform_status([inst(s) for s in statuses], []) == expect


def test_disagreeing_cross_check_is_an_error():
    cc = CrossCheck({}, {}, "valid", "invalid", False)
    assert transform_status([inst("valid")], [cc]) == "error"


def test_replay_mismatch_is_an_error():
    bad = inst("invalid", counterexample=Counterexample({}, replay="mismatch"))
    assert transform_status([bad], []) == "error"


def sample_report():
    v = Value("half", "-0.0", "0x8000")
    cex = Counterexample({"%x": v}, Value("half", "0.0", "0x0000"), v, "confirmed")
    tr = TransformReport("t", 3, "incorrect", [inst("invalid", counterexample=cex, seconds=0.5),
                                               inst("timeout", quantified=True, message="slow")],
                         [CrossCheck({"%x": "fp8"}, {"C1": "oeq"}, "invalid", "invalid", True)])
    files = [FileReport("a.opt", [tr], [{"line": 9, "col": 1, "message": "bad", "kind": "syntax"}]),
             FileReport("b.opt", [TransformReport("u", 1, "unverified", [inst("timeout")])])]
    return Report(files, {"timeout": 300})


def test_json_round_trip():
    r = sample_report()
    text = render_json(r)
    assert parse_json(text) == r
    d = json.loads(text)
    assert d["schema"] == "fpverify.report/v1"
    assert d["totals"]["incorrect"] == 1 and d["totals"]["parse_errors"] == 1
    assert d["exit_code"] == EXIT_FAILURE


def test_exit_code_priority():
    r = sample_report()
    assert r.exit_code() == EXIT_FAILURE
    r.files[0].errors = []
    assert r.exit_code() == EXIT_INVALID
    r.files = r.files[1:]
    assert r.exit_code() == EXIT_TIMEOUT
    r.files = []
    assert r.exit_code() == EXIT_OK


def test_text_report_has_table_and_counterexample():
    text = render(sample_report(), "text")
    assert "counterexample" in text and "%x = -0.0 (0x8000)" in text
    assert re.search(r"Total\s+0\s+1\s+1\s+1", text), text


def test_empty_file(tmp_path):
    p = tmp_path / "empty.opt"
    p.write_text("; nothing here\n")
    r = verify_paths([p])
    assert r.exit_code() == EXIT_OK and list(r.transforms()) == []


def test_parse_error_keeps_other_transforms(tmp_path):
    p = tmp_path / "mixed.opt"
    p.write_text("%r = fadd %x\n=>\n%r = %x\n\n%r = fadd %x, %y\n=>\n%r = fadd %y, %x\n")
    r = verify_paths([p], Config(fp_formats=(FP8,)))
    assert len(r.files[0].errors) == 1
    assert [t.status for t in r.transforms()] == ["correct"]
    assert r.exit_code() == EXIT_FAILURE


def test_jobs_do_not_change_the_report(tmp_path):
    p = CORPUS / "compares.opt"
    strip = lambda r: [(t.name, t.status, [(i.types, i.cc, i.status) for i in t.instances])
                       for t in r.transforms()]
    one = verify_paths([p], Config(fp_formats=(FP8,), jobs=1))
    four = verify_paths([p], Config(fp_formats=(FP8,), jobs=4))
    assert strip(one) == strip(four)


def test_dump_smt(tmp_path):
    p = tmp_path / "one.opt"
    p.write_text("Name: z\n%r = fadd %x, 0.0\n=>\n%r = %x\n")
    verify_paths([p], Config(fp_formats=(FP8,), dump_smt=str(tmp_path / "dump")))
    names = sorted(f.name for f in (tmp_path / "dump").iterdir())
    assert names == ["one.000.z.000.out", "one.000.z.000.smt2"]


def expectations(path):
    text = path.read_text()
    out = {}
    for m in re.finditer(r"; expect: (valid|invalid)\nName: (\S+)", text):
        out[m.group(2)] = "correct" if m.group(1) == "valid" else "incorrect"
    return out


@pytest.mark.slow
@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.opt")), ids=lambda p: p.stem)
def test_corpus_expectations_at_fp8(path):
    """Every bundled verdict, checked at fp8 with the brute-force cross-check."""
    want = expectations(path)
    assert set(want) == {t.name for t in parse_corpus(path.read_text())}
    cfg = Config(fp_formats=(FP8,), int_widths=(8,), brute_force=True, timeout=120)
    got = {t.name: t.status for t in verify_paths([path], cfg).transforms()}
    if "skipped" in got.values():
        # conversions between two formats need a second, wider one
        cfg.fp_formats = (FP8, HALF)
        wide = {t.name: t.status for t in verify_paths([path], cfg).transforms()}
        got = {k: wide[k] if v == "skipped" else v for k, v in got.items()}
    assert got == want


def test_cli_json(tmp_path, capsys):
    p = tmp_path / "one.opt"
    p.write_text("%r = fadd %x, 0.0\n=>\n%r = %x\n")
    assert cli.main(["verify", "--fp-widths", "fp8", "--format", "json", str(p)]) == EXIT_INVALID
    d = json.loads(capsys.readouterr().out)
    (t,) = d["files"][0]["transforms"]
    cex = t["instances"][0]["counterexample"]
    assert cex["values"]["%x"] == {"type": "fp8", "decimal": "-0.0", "bits": "0x80"}
    assert cex["replay"] == "confirmed"


def test_cli_widths():
    assert cli.parse_fp_widths("+fp8")[-1] == FP8
    assert [str(f) for f in cli.parse_fp_widths("half,double")] == ["half", "double"]
    assert cli.parse_int_widths("64,8") == (8, 64)
    assert cli.main(["verify", "--fp-widths", "quad", "x.opt"]) == EXIT_FAILURE
    assert cli.main(["verify", "/nonexistent/file.opt"]) == EXIT_FAILURE
