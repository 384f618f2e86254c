from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from fpverify.dsl import (DSLError, Instr, Literal, Reg, parse_blocks, parse_corpus,
                          parse_transform, pretty_print, pretty_print_corpus)

CORPUS = sorted((Path(__file__).parents[1] / "src" / "fpverify" / "corpus").glob("*.opt"))


def test_parses_basic_transform():
    t = parse_transform("""
Name: PR26746
%a = fsub -0.0, %x
%r = fsub 0.0, %a
  =>
%r = %x
""")
    assert t.name == "PR26746"
    assert t.inputs() == ["%x"]
    op, node = t.src[0]
    assert isinstance(node, Instr) and node.opcode == "fsub"
    assert node.operands == (Literal("-0.0"), Reg("%x"))


def test_flags_and_precondition():
    t = parse_transform("""
Name: z
Pre: AnyZero(C)
%r = fadd nsz %x, C
  =>
%r = %x
""")
    assert t.src[0][1].flags == ("nsz",)
    assert t.constants() == ["C"]


def test_target_only_registers_are_not_inputs():
    t = parse_transform("""
%a = sitofp %x
%b = sitofp %y
%r = fadd %a, %b
  =>
%c = add %x, %y
%r = sitofp %c
""")
    assert t.inputs() == ["%x", "%y"]


@pytest.mark.parametrize("text,kind", [
    ("%r = fadd %x\n=>\n%r = %x", "semantic"),
    ("%r = fadd %x, %y\n=>\n%s = %x", "semantic"),
    ("%r = fadd %x, %y\n=>\n%r = fadd %x, %q", "semantic"),
    ("%r = bogus %x, %y\n=>\n%r = %x", "syntax"),
    ("%r = fadd %x, %y", "syntax"),
])
def test_errors_carry_positions(text, kind):
    with pytest.raises(DSLError) as info:
        parse_transform(text)
    assert info.value.kind == kind
    assert info.value.line >= 1


def test_one_bad_block_does_not_poison_the_rest():
    items = parse_blocks("%r = fadd %x,\n=>\n%r = %x\n\n%r = fadd %x, %y\n=>\n%r = fadd %y, %x\n")
    assert isinstance(items[0], DSLError)
    assert not isinstance(items[1], DSLError)


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.name)
def test_corpus_round_trip(path):
    ts = parse_corpus(path.read_text())
    assert ts
    again = parse_corpus(pretty_print_corpus(ts))
    assert again == ts


# -- generated transforms --------------------------------------------------

OPERANDS = st.sampled_from(["%x", "%y", "C", "C1", "0.0", "-0.0", "1.5", "undef"])
BINOPS = st.sampled_from(["fadd", "fsub", "fmul", "fdiv", "frem"])
FLAGS = st.lists(st.sampled_from(["nnan", "ninf", "nsz"]), unique=True, max_size=3)


@st.composite
def transforms(draw):
    lines, regs = [], []
    for i in range(draw(st.integers(1, 4))):
        pool = OPERANDS if not regs else st.one_of(OPERANDS, st.sampled_from(regs))
        flags = " ".join(draw(FLAGS))
        a, b = draw(pool), draw(pool)
        lines.append(f"%t{i} = {draw(BINOPS)} {flags} {a}, {b}".replace("  ", " "))
        regs.append(f"%t{i}")
    root = regs[-1]
    lines[-1] = lines[-1].replace(f"%t{len(regs) - 1} =", "%r =", 1)
    tgt = draw(st.sampled_from(["%x", "C", "0.0", "undef", f"fadd %x, {draw(OPERANDS)}"]))
    return "\n".join(lines) + "\n  =>\n%r = " + tgt + "\n"


@settings(max_examples=200, deadline=None)
@given(transforms())
def test_print_parse_round_trip(text):
    try:
        t = parse_transform(text)
    except DSLError:
        return
    assert parse_transform(pretty_print(t)) == t


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(list("%rxyC0.=>,;\n -fadusbnzi()&")
                                + ["fadd", "Pre:", "Name:", "=>", "nsz", "half", "\n"]),
                max_size=40).map("".join))
def test_parser_is_total(text):
    for item in parse_blocks(text):
        assert isinstance(item, DSLError) or item.src
