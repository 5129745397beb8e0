"""Tests for visibly pushdown automata, nesting predicates and factorizations"""

import itertools
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis.strategies import just, lists, recursive, sampled_from, tuples

from errors import AutomatonError, BudgetExceeded, FormatError
from grammar_core import as_word
from precedence import LetterClass, VpPartition
from vpda_core import (BOTTOM, Call, Configuration, Internal, Return, VpAlphabet, Vpda, accepts,
                       canonical_factorization, enumerate_accepted, factorize, format_vpda, frontiers,
                       is_well_balanced, is_well_closed, is_well_parenthesized, load_vpda, parse_vpda, rho, run)

P = VpPartition({"c"}, {"r"}, {"s"})
TWO_CALLS = VpPartition({"c", "c0"}, {"r"}, {"s"})
NESTED_WORD = "s c s r r c c r s r s c0 c s r c c s c r r s"
# strings over P whose calls and returns all match
BALANCED = recursive(
    just([]) | just(["s"]),
    lambda inner: tuples(inner, inner).map(lambda p: p[0] + p[1]) | inner.map(lambda w: ["c"] + w + ["r"]),
    max_leaves=8,
)
AUTOMATA = {p.name: load_vpda(p) for p in (Path(__file__).resolve().parent.parent / "presets").glob("*.vpda")}


def words(*texts):
    return {as_word(t) for t in texts}


###################################################################################################
# Runs
###################################################################################################

def test_run_dyck(a_dyck):
    assert run(a_dyck, "c c r r") == {Configuration("q0", (BOTTOM,))}
    assert run(a_dyck, "r") == frozenset()
    assert run(a_dyck, "c c") == {Configuration("q0", (BOTTOM, "Z", "Z"))}


def test_accepts_dyck(a_dyck):
    assert accepts(a_dyck, "c r")
    assert accepts(a_dyck, "c c")
    assert not accepts(a_dyck, "r c")
    assert accepts(a_dyck, "")


def test_return_on_bottom_keeps_bottom(automaton):
    a = automaton("internals.vpda")
    assert run(a, "b b s") == {Configuration("q1", (BOTTOM,))}


def test_unknown_letter(a_dyck):
    with pytest.raises(AutomatonError):
        run(a_dyck, "c x")


def test_letter_class(a_dyck):
    assert a_dyck.letter_class("c") is LetterClass.CALL
    assert a_dyck.letter_class("r") is LetterClass.RETURN


@given(sampled_from(["dyck.vpda", "unmatched.vpda", "multiret.vpda", "internals.vpda", "twostack.vpda"]),
       lists(sampled_from(["a", "b", "c", "r", "s", "t"]), max_size=10))
def test_frontier_shares_one_height(name, letters):
    a = AUTOMATA[name]
    w = [x for x in letters if x in a.alphabet.letters]
    for configs in frontiers(a, w):
        assert len({conf.height for conf in configs}) <= 1


###################################################################################################
# Validation and text format
###################################################################################################

def test_call_cannot_push_bottom():
    with pytest.raises(AutomatonError):
        Vpda(VpAlphabet.of(["c"], ["r"]), {"q"}, "q", set(), set(), {Call("q", "c", "q", BOTTOM)})


def test_transition_letter_class_checked():
    with pytest.raises(AutomatonError):
        Vpda(VpAlphabet.of(["c"], ["r"]), {"q"}, "q", set(), {"Z"}, {Internal("q", "c", "q")})


def test_undeclared_state():
    with pytest.raises(AutomatonError):
        Vpda(VpAlphabet.of(["c"], ["r"]), {"q"}, "q", {"f"}, set(), set())


def test_empty_alphabet():
    with pytest.raises(AutomatonError):
        VpAlphabet.of()


def test_text_round_trip(automaton):
    for name in ["dyck.vpda", "internals.vpda", "twostack.vpda", "empty.vpda"]:
        a = automaton(name)
        assert parse_vpda(format_vpda(a)) == a


def test_text_errors():
    with pytest.raises(FormatError) as info:
        parse_vpda("%calls c\n%states q\n%initial q\njump q c q\n", "x.vpda")
    assert info.value.line == 4
    assert info.value.token == "jump"
    with pytest.raises(FormatError):
        parse_vpda("%calls c\n%states q\n")
    with pytest.raises(FormatError):
        parse_vpda("%calls c\n%states q\n%initial q\ncall q c q\n")


def test_bad_transition_reported_at_its_line():
    text = "%calls c\n%returns r\n%states q0\n%initial q0\n%stack Z\ncall q0 c q9 Z\n"
    with pytest.raises(FormatError) as info:
        parse_vpda(text, "x.vpda")
    assert info.value.line == 6
    assert info.value.token == "q9"
    assert "call q0 c q9 Z" in str(info.value)
    assert "Call(" not in str(info.value)


@pytest.mark.parametrize("line, token", [
    ("ret q0 x Z q0", "x"),
    ("int q0 c q0", "c"),
    ("call q0 c q0 Y", "Y"),
    ("ret q0 r Y q0", "Y"),
    ("call q0 c q0 _bot", "_bot"),
])
def test_transition_problems_name_the_token(line, token):
    text = f"%calls c\n%returns r\n%states q0\n%initial q0\n%stack Z\n{line}\n"
    with pytest.raises(FormatError) as info:
        parse_vpda(text)
    assert info.value.line == 6
    assert info.value.token == token


def test_undeclared_final_reported_at_header():
    with pytest.raises(FormatError) as info:
        parse_vpda("%calls c\n%states q0\n%initial q0\n%final f\n")
    assert info.value.line == 4
    assert info.value.token == "f"


def test_transitions_print_in_file_syntax():
    assert str(Call("q0", "c", "q1", "Z")) == "call q0 c q1 Z"
    assert str(Return("q1", "r", BOTTOM, "q0")) == "ret q1 r _bot q0"
    assert str(Internal("q0", "s", "q0")) == "int q0 s q0"


###################################################################################################
# Enumeration
###################################################################################################

def test_enumerate_dyck(a_dyck):
    assert enumerate_accepted(a_dyck, 2) == words("", "c", "c c", "c r")
    assert enumerate_accepted(a_dyck, 0) == {()}


def test_enumerate_empty_language(automaton):
    assert enumerate_accepted(automaton("empty.vpda"), 6) == set()


def test_enumerate_matches_accepts(automaton):
    for name in ["unmatched.vpda", "multiret.vpda", "internals.vpda", "twostack.vpda"]:
        a = automaton(name)
        found = enumerate_accepted(a, 5)
        for n in range(6):
            for w in itertools.product(a.alphabet.letters, repeat=n):
                assert accepts(a, w) == (w in found), (name, w)


def test_enumerate_budget(a_dyck):
    with pytest.raises(BudgetExceeded):
        enumerate_accepted(a_dyck, 8, budget=3)


###################################################################################################
# Nesting structure
###################################################################################################

def test_rho():
    assert rho(P, "c s r") == "cr"
    assert rho(P, "s s s") == ""
    assert rho(P, "c c r s r") == "ccrr"


def test_well_parenthesized():
    assert is_well_parenthesized("ccrr")
    assert is_well_parenthesized("crcr")
    assert not is_well_parenthesized("rc")


def test_well_balanced_and_closed():
    assert is_well_balanced(P, "c s r") and is_well_closed(P, "c s r")
    assert is_well_balanced(P, "s c r s") and not is_well_closed(P, "s c r s")
    assert not is_well_balanced(P, "c c r")
    assert not is_well_closed(P, "")


@given(BALANCED, BALANCED)
def test_well_balanced_closed_under_concatenation(x, y):
    assert is_well_balanced(P, x) and is_well_balanced(P, y)
    assert is_well_balanced(P, x + y)
    assert is_well_balanced(P, ["c"] + x + ["r"])


@given(lists(sampled_from(["c", "r", "s"]), max_size=10), lists(sampled_from(["c", "r", "s"]), max_size=10))
def test_concatenation_of_arbitrary_strings(x, y):
    if is_well_balanced(P, x) and is_well_balanced(P, y):
        assert is_well_balanced(P, x + y)


###################################################################################################
# Factorization
###################################################################################################

def test_factorization_of_nested_word():
    fact = canonical_factorization(TWO_CALLS, NESTED_WORD)
    assert str(fact) == "u1=s w1=c s r u2=r w2=c c r s r u3=s c0=c0 v1=c s r c1=c v2=c s c r r s"
    assert fact.canonical
    assert " ".join(fact.word()) == NESTED_WORD


def test_factorization_without_call():
    fact = canonical_factorization(P, "s")
    assert fact.c0 is None
    assert fact.y_parts == ((("s",), ()),)
    assert fact.z_parts == ()


def test_factorization_lone_call():
    fact = canonical_factorization(P, "c")
    assert fact.y == ()
    assert fact.c0 == "c"
    assert fact.z == ()


def test_all_factorizations_reassemble():
    facts = factorize(P, "c r s c r c s")
    assert facts[0].canonical
    assert len(facts) == 2
    for fact in facts:
        assert " ".join(fact.word()) == "c r s c r c s"
        for _, w in fact.y_parts:
            assert not w or is_well_closed(P, w)
        for v, _ in fact.z_parts:
            assert is_well_balanced(P, v)


@given(lists(sampled_from(["c", "r", "s"]), max_size=12))
def test_factorizations_reassemble(letters):
    for fact in factorize(P, letters):
        assert list(fact.word()) == letters
        for u, w in fact.y_parts:
            assert rho(P, u) == "r" * len(rho(P, u))
            assert not w or is_well_closed(P, w)
        for v, _ in fact.z_parts:
            assert is_well_balanced(P, v)


def test_alphabet_accessors():
    alphabet = VpAlphabet.of(["c"], ["r"], ["s"])
    assert alphabet.letters == ("c", "r", "s")
    assert alphabet.calls == {"c"}
    assert Return("q", "r", "Z", "q") < Return("q", "r", "Z", "r")
