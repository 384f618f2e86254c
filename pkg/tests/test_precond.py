import pytest

from fpverify.dsl import DSLError

from fpverify.dsl import parse_transform
from fpverify.precond import SWAP, enumerate_cc


def test_no_codes_gives_one_assignment():
    assert enumerate_cc(parse_transform("%r = fadd %x, %y\n=>\n%r = %x")) == [{}]


def test_free_code_ranges_over_all_fourteen():
    t = parse_transform("%r = fcmp C1 %x, %y\n=>\n%r = fcmp C1 %y, %x")
    assert len(enumerate_cc(t)) == 14


def test_swap_and_ordered():
    t = parse_transform("Pre: swap(C1, C2) && ordered(C1)\n"
                        "%r = fcmp C1 %x, %y\n=>\n%r = fcmp C2 %y, %x")
    got = enumerate_cc(t)
    assert len(got) == 7
    assert all(SWAP[a["C1"]] == a["C2"] and a["C1"].startswith("o") for a in got)


def test_unknown_code_in_predicate():
    with pytest.raises(DSLError):
        parse_transform("Pre: ordered(C3)\n%r = fcmp C1 %x, %y\n=>\n%r = fcmp C1 %x, %y")
