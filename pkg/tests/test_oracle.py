import numpy as np
import pytest

from fpverify.dsl import parse_transform
from fpverify.formats import FP8, HALF, literal_bits
from fpverify.oracle.interp import (ArrayBackend, BudgetExceeded, ScalarBackend,
                                    brute_force_verify, discover_variables, domain, domain_size,
                                    interpret, replay)
from fpverify.typer import TypeConfig, assignments


def first(text, fmts=(FP8,), ints=(8,)):
    t = parse_transform(text)
    return t, assignments(t, TypeConfig(fmts, ints))[0]


def test_interpret_both_sides():
    t, ta = first("%a = fsub -0.0, %x\n%r = fsub 0.0, %a\n=>\n%r = %x", (HALF,))
    x = literal_bits(HALF, "-0.0")
    assert interpret(t, "src", ta, {"%x": x}) == literal_bits(HALF, "0.0")
    assert interpret(t, "tgt", ta, {"%x": x}) == x


def test_backends_agree():
    t, ta = first("%a = fmul %x, %y\n%r = fadd %a, C\n=>\n%r = %a")
    rng = np.random.default_rng(3)
    xs, ys, cs = rng.integers(0, 256, size=(3, 500))
    env = {"%x": xs, "%y": ys, "C": cs}
    arr = interpret(t, "src", ta, env, backend=ArrayBackend(500))
    for i in range(500):
        one = {k: int(v[i]) for k, v in env.items()}
        assert interpret(t, "src", ta, one, backend=ScalarBackend()) == arr[i]


@pytest.mark.parametrize("text,verdict,witness", [
    ("%r = fadd %x, -0.0\n=>\n%r = %x", "valid", None),
    ("%a = fsub -0.0, %x\n%r = fsub 0.0, %a\n=>\n%r = %x", "invalid", {"%x": 0x80}),
    ("%r = fadd nsz %x, 0.0\n=>\n%r = %x", "valid", None),
    ("%r = fadd %x, 0.0\n=>\n%r = %x", "invalid", {"%x": 0x80}),
    ("%r = fadd %x, undef\n=>\n%r = undef", "invalid", None),
    ("%r = fadd %x, undef\n=>\n%r = %x", "valid", None),
])
def test_brute_force_verdicts(text, verdict, witness):
    t, ta = first(text)
    res = brute_force_verify(t, ta)
    assert res.verdict == verdict
    if witness is not None:
        assert res.witness == witness


def test_undef_roles():
    t, ta = first("%r = fadd %x, undef\n=>\n%r = undef")
    roles = {v.name: v.role for v in discover_variables(t, ta)}
    assert roles["%x"] == "input"
    assert sorted(r for r in roles.values() if r != "input") == ["src-undef", "tgt-undef"]


def test_budget():
    t, ta = first("%r = fadd %x, %y\n=>\n%r = fadd %y, %x", (HALF,))
    with pytest.raises(BudgetExceeded):
        brute_force_verify(t, ta, budget=1000)


def test_domains():
    assert domain_size(FP8) == len(domain(FP8)) == 256 - 14 + 1
    from fpverify.formats import DOUBLE
    with pytest.raises(BudgetExceeded):
        domain(DOUBLE)


def test_replay_statuses():
    t, ta = first("%a = fsub -0.0, %x\n%r = fsub 0.0, %a\n=>\n%r = %x", (HALF,))
    assert replay(t, ta, {"%x": literal_bits(HALF, "-0.0")}) == "confirmed"
    assert replay(t, ta, {"%x": literal_bits(HALF, "1.0")}) == "mismatch"


def test_replay_searches_source_undef():
    t, ta = first("%a = fsub nnan ninf 0.0, %x\n%r = fadd %a, %x\n=>\n%r = 0.0", (HALF,))
    assert replay(t, ta, {"%x": HALF.canonical_nan}) == "confirmed"
    assert replay(t, ta, {"%x": literal_bits(HALF, "2.0")}) == "mismatch"
