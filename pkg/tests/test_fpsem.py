import pytest

from fpverify.dsl import parse_transform
from fpverify.formats import FP8, HALF, SINGLE, IntType
from fpverify.fpsem import build_query, conversion_may_be_undef
from fpverify.smt import emit
from fpverify.typer import TypeConfig, assignments


def q(text, fmts=(HALF,), ints=(16,), cca=None):
    t = parse_transform(text)
    return build_query(t, assignments(t, TypeConfig(fmts, ints))[0], cca)


def roles(query):
    return {v.name: v.role for v in query.variables}


def test_plain_query_is_quantifier_free():
    query = q("%r = fadd %x, C\n=>\n%r = %x")
    assert roles(query) == {"%x": "input", "C": "const"}
    assert not query.quantified and query.logic == "QF_BVFP"


def test_undef_sides():
    query = q("%r = fadd %x, undef\n=>\n%r = undef")
    assert sorted(roles(query).values()) == ["input", "src-undef", "tgt-undef"]
    assert query.quantified and query.logic == "BVFP"
    assert query.assertion.op == "forall"


def test_fast_math_flags_add_fresh_values():
    query = q("%a = fsub nnan 0.0, %x\n%r = fadd %a, %x\n=>\n%r = 0.0")
    assert roles(query)["fm.src.%a"] == "src-undef"
    query = q("%r = fmul %x, 0.0\n=>\n%r = fmul ninf %x, 0.0")
    assert roles(query)["fm.tgt.%r"] == "tgt-undef"


def test_nsz_relaxes_only_at_the_root():
    assert q("%r = fadd nsz %x, 0.0\n=>\n%r = %x").nsz
    assert not q("%a = fadd nsz %x, 0.0\n%r = fmul %a, %a\n=>\n%r = fmul %x, %x").nsz


def test_conversions_get_fresh_values_only_when_needed():
    assert conversion_may_be_undef("fptosi", HALF, IntType(8))
    assert not conversion_may_be_undef("sitofp", IntType(16), SINGLE)
    assert conversion_may_be_undef("uitofp", IntType(16), HALF)
    query = q("%r = sitofp %x\n=>\n%r = sitofp %x", fmts=(SINGLE,), ints=(16,))
    assert set(roles(query)) == {"%x"}


def test_condition_codes_must_be_resolved():
    t = parse_transform("%r = fcmp C1 %x, %y\n=>\n%r = fcmp C1 %y, %x")
    ta = assignments(t, TypeConfig((FP8,), (8,)))[0]
    with pytest.raises(ValueError):
        build_query(t, ta)
    text = emit(build_query(t, ta, {"C1": "olt"}))
    assert "fp.lt" in text and "condition codes: C1=olt" in text


def test_precondition_is_conjoined():
    text = emit(q("Pre: isNormal(C)\n%r = fdiv %x, C\n=>\n%r = fmul %x, 1.0"))
    assert "fp.isNormal" in text
