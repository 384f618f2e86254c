"""Precondition predicates, constant functions and condition-code enumeration."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import terms as T
from .dsl import (COND_CODES, ORDERED_CODES, UNORDERED_CODES, PredApp, PredEq, Transform,
                  pred_conjuncts)


@dataclass(frozen=True)
class PredicateInfo:
    arity: int
    # per argument: "fp" / "int" / "value" (any register or constant) / "cc"
    kinds: tuple


REGISTRY = {
    "isNormal": PredicateInfo(1, ("fp",)),
    "AnyZero": PredicateInfo(1, ("fp",)),
    "hasOneUse": PredicateInfo(1, ("value",)),
    "WillNotOverflowSignedAdd": PredicateInfo(2, ("int", "int")),
    "ordered": PredicateInfo(1, ("cc",)),
    "unordered": PredicateInfo(1, ("cc",)),
    "swap": PredicateInfo(2, ("cc", "cc")),
}
CC_PREDICATES = ("ordered", "unordered", "swap")

# condition code obtained by exchanging the operands
SWAP = {
    "oeq": "oeq", "one": "one", "ogt": "olt", "olt": "ogt", "oge": "ole", "ole": "oge",
    "ord": "ord",
    "ueq": "ueq", "une": "une", "ugt": "ult", "ult": "ugt", "uge": "ule", "ule": "uge",
    "uno": "uno",
}


class PreconditionError(Exception):
    pass


def enumerate_cc(t: Transform) -> list[dict]:
    """All concrete condition-code assignments admitted by the cc predicates.

    A transform without symbolic codes yields one empty assignment.
    """
    names = t.cc_names()
    atoms = [a for a in pred_conjuncts(t.pre) if isinstance(a, PredApp) and a.name in CC_PREDICATES]
    for atom in atoms:
        for arg in atom.args:
            if arg.name not in names:
                raise PreconditionError(f"{atom.name}: {arg.name} is not a condition code")
    out = []
    for combo in itertools.product(COND_CODES, repeat=len(names)):
        cca = dict(zip(names, combo))
        if all(_cc_holds(atom, cca) for atom in atoms):
            out.append(cca)
    return out


def _cc_holds(atom: PredApp, cca: dict) -> bool:
    codes = [cca[a.name] for a in atom.args]
    if atom.name == "ordered":
        return codes[0] in ORDERED_CODES
    if atom.name == "unordered":
        return codes[0] in UNORDERED_CODES
    return SWAP[codes[0]] == codes[1]


def encode_predicate(t: Transform, query) -> T.Term:
    """Boolean term for the precondition of ``t``.

    ``query`` resolves operands to terms (registers, constants, constant
    expressions); it is the instance builder in ``fpsem``. A constant
    expression that LLVM could not fold (an out-of-range conversion) makes
    its atom false.
    """
    parts = []
    for i, atom in enumerate(pred_conjuncts(t.pre)):
        parts.append(_encode_atom(atom, ("pre", i), query))
    return T.and_(*parts)


def _encode_atom(atom, path, query) -> T.Term:
    if isinstance(atom, PredEq):
        lhs, ok_l = query.encode_const_operand(atom.lhs, path + (0,))
        rhs, ok_r = query.encode_const_operand(atom.rhs, path + (1,))
        return T.and_(ok_l, ok_r, T.eq(lhs, rhs))
    if atom.name in CC_PREDICATES or atom.name == "hasOneUse":
        # condition codes are enumerated up front; use counts are a profitability hint
        return T.TRUE
    args = []
    oks = []
    for j, a in enumerate(atom.args):
        term, ok = query.encode_const_operand(a, path + (j,))
        args.append(term)
        oks.append(ok)
    if atom.name == "isNormal":
        body = T.fp_pred("fp.isNormal", args[0])
    elif atom.name == "AnyZero":
        body = T.fp_pred("fp.isZero", args[0])
    elif atom.name == "WillNotOverflowSignedAdd":
        body = will_not_overflow_signed_add(args[0], args[1])
    else:  # pragma: no cover - the parser rejects unknown names
        raise PreconditionError(f"unknown predicate {atom.name}")
    return T.and_(*oks, body)


def will_not_overflow_signed_add(a: T.Term, b: T.Term) -> T.Term:
    wide = T.bv_bin("bvadd", T.sign_extend(a, 1), T.sign_extend(b, 1))
    return T.eq(wide, T.sign_extend(T.bv_bin("bvadd", a, b), 1))
