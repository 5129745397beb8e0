"""Tests for terminal sets, precedence matrices and VP classification"""

import pytest
from hypothesis import given
from hypothesis.strategies import dictionaries, sampled_from

from errors import (ConflictingMatrix, EmptyString, FormatError, NotFloyd, NotFloydGrammar, NotOperatorForm,
                    UnknownNonterminal, UnpairedAlphabet)
from grammar_core import reverse_rules
from precedence import (LetterClass, PrecedenceMatrix, PrecRel, VpPartition, build_opm, check_balanced_restrictions,
                        classify_vp, compatible, enumerate_vp_partitions, floyd_opm, format_matrix, is_floyd,
                        left_terminal_set, matrix_subset, matrix_union, parse_matrix, rhs_stencil,
                        right_terminal_set, terminal_sets_of_string, total_vp_matrix)

Y, E, T = PrecRel.YIELDS, PrecRel.EQUAL, PrecRel.TAKES

G3_RELATIONS = [
    ("b", E, "c"), ("f", E, "d"), ("e", E, "f"), ("f", E, "b"), ("b", Y, "b"),
    ("f", Y, "f"), ("e", Y, "e"), ("c", T, "c"), ("d", T, "d"), ("b", T, "f"),
]

PARTITION = VpPartition({"c"}, {"r"}, {"s"})


def matrix(*relations, alphabet=()):
    return PrecedenceMatrix.from_relations(alphabet, relations)


###################################################################################################
# Terminal sets
###################################################################################################

def test_left_terminal_sets(g3):
    assert left_terminal_set(g3, "A") == {"b"}
    assert left_terminal_set(g3, "C") == {"e"}
    assert left_terminal_set(g3, "S") == {"b", "f", "e"}


def test_right_terminal_sets(g3):
    assert right_terminal_set(g3, "A") == {"c"}
    assert right_terminal_set(g3, "C") == {"b"}
    assert right_terminal_set(g3, "S") == {"c", "d", "b"}


def test_unknown_nonterminal(g3):
    with pytest.raises(UnknownNonterminal):
        left_terminal_set(g3, "Q")


def test_terminal_sets_of_string(g3):
    # D -> b A: b leads, and b also precedes the trailing A on the right
    assert terminal_sets_of_string(g3, "b A") == ({"b"}, {"b", "c"})
    assert terminal_sets_of_string(g3, "e C f b") == ({"e"}, {"b"})
    assert terminal_sets_of_string(g3, "c") == ({"c"}, {"c"})


def test_terminal_sets_of_string_errors(g3):
    with pytest.raises(EmptyString):
        terminal_sets_of_string(g3, "")
    with pytest.raises(NotOperatorForm):
        terminal_sets_of_string(g3, "A B")


def test_terminal_sets_grow_with_rules(make_grammar):
    small = make_grammar("%axiom S\n%terminals a b\nS -> a S | b\n")
    large = make_grammar("%axiom S\n%terminals a b\nS -> a S | b | S a\n")
    assert left_terminal_set(small, "S") <= left_terminal_set(large, "S")
    assert right_terminal_set(small, "S") <= right_terminal_set(large, "S")


###################################################################################################
# Operator precedence matrix
###################################################################################################

def test_opm_of_g3(g3):
    build = build_opm(g3)
    assert build.matrix.relations() == matrix(*G3_RELATIONS).relations()
    assert len(build.matrix) == 10
    assert build.conflicts == []
    assert is_floyd(g3)


def test_opm_single_letter(make_grammar):
    g = make_grammar("%axiom S\n%terminals s\nS -> s\n")
    assert len(build_opm(g).matrix) == 0


def test_opm_conflict_with_provenance(make_grammar):
    g = make_grammar("%axiom S\n%terminals a b\nS -> a S b | a b | a S\n")
    build = build_opm(g)
    # a S b gives a = b, a S gives a < a, and b > b from S b; S -> a S puts a into R(S), so a > b
    assert ("a", "b") in build.conflicts
    assert build.matrix.get("a", "b") == {E, T}
    report = build.conflict_report()
    assert any("S -> a S b" in line for line in report)
    assert not is_floyd(g)
    with pytest.raises(NotFloyd):
        floyd_opm(g)
    assert NotFloydGrammar is NotFloyd


def test_opm_needs_operator_form(make_grammar):
    g = make_grammar("%axiom S\n%terminals a b\nS -> A B\nA -> a\nB -> b\n")
    with pytest.raises(NotOperatorForm):
        build_opm(g)
    assert not is_floyd(g)


def test_opm_of_reversed_grammar_is_dual(grammar):
    for name in ["g3.fg", "l1.fg", "unmatched.fg", "prefix.fg", "eps_dyck.fg"]:
        g = grammar(name)
        assert build_opm(reverse_rules(g)).matrix == build_opm(g).matrix.dual()


def test_right_parts_are_short_for_vp_matrices(grammar):
    for name in ["dyck_cr.fg", "unmatched.fg", "prefix.fg", "eps_dyck.fg"]:
        g = grammar(name)
        if classify_vp(build_opm(g).matrix) is not None:
            assert g.max_rhs_length <= 4


###################################################################################################
# Matrix algebra
###################################################################################################

def test_union_and_subset(g3):
    m = build_opm(g3).matrix
    empty = PrecedenceMatrix(m.alphabet)
    assert matrix_union(m, empty) == m
    assert matrix_union(m, m) == m
    assert matrix_subset(empty, m)
    assert matrix_subset(m, m)


def test_union_creates_conflict():
    yields, takes = matrix(("a", Y, "b")), matrix(("a", T, "b"))
    assert matrix_union(yields, takes).get("a", "b") == {Y, T}
    assert not matrix_subset(yields, takes)
    assert not compatible(yields, takes)
    assert compatible(yields, matrix(("b", T, "a")))


def test_union_over_different_alphabets():
    m = matrix_union(matrix(("a", Y, "b")), matrix(("c", E, "d")))
    assert m.alphabet == ("a", "b", "c", "d")
    assert len(m) == 2


@given(dictionaries(sampled_from([("a", "b"), ("b", "a"), ("a", "a"), ("b", "c")]), sampled_from([Y, E, T])),
       dictionaries(sampled_from([("a", "b"), ("c", "c"), ("b", "c")]), sampled_from([Y, E, T])))
def test_subset_of_union(left, right):
    m1 = matrix(*[(a, rel, b) for (a, b), rel in left.items()], alphabet="abc")
    m2 = matrix(*[(a, rel, b) for (a, b), rel in right.items()], alphabet="abc")
    assert matrix_subset(m1, matrix_union(m1, m2))
    assert matrix_subset(m2, matrix_union(m1, m2))


def test_relation_on_conflict_cell_raises():
    m = matrix(("a", Y, "b"), ("a", E, "b"))
    with pytest.raises(ConflictingMatrix):
        m.relation("a", "b")
    assert m.relation("b", "a") is None


def test_dual_swaps_relations():
    m = matrix(("a", Y, "b"), ("b", E, "c"))
    assert m.dual().relations() == [("b", T, "a"), ("c", E, "b")]


def test_matrix_text_format(g3):
    m = build_opm(g3).matrix
    text = format_matrix(m)
    assert text.splitlines()[0].split() == ["b", "c", "d", "e", "f"]
    assert text.splitlines()[1].split() == ["b", "<", "=", ".", ".", ">"]
    assert parse_matrix(text) == m


def test_matrix_text_format_with_conflict():
    m = matrix(("a", Y, "b"), ("a", T, "b"))
    text = format_matrix(m)
    assert "!<>!" in text
    assert parse_matrix(text) == m


def test_matrix_text_errors():
    with pytest.raises(FormatError) as info:
        parse_matrix("  a b\na < ?\nb . .\n", "m.opm")
    assert info.value.line == 2
    with pytest.raises(FormatError):
        parse_matrix("  a b\na < .\n")


###################################################################################################
# VP matrices
###################################################################################################

def test_total_vp_matrix():
    m = total_vp_matrix(PARTITION)
    assert m.get("c", "c") == {Y}
    assert m.get("c", "r") == {E}
    assert m.get("c", "s") == {Y}
    for b in "crs":
        assert m.get("r", b) == {T}
        assert m.get("s", b) == {T}
    assert m.is_conflict_free


def test_total_vp_matrix_degenerate():
    m = total_vp_matrix(VpPartition(internals={"s"}))
    assert m.relations() == [("s", T, "s")]
    m = total_vp_matrix(VpPartition({"c1", "c2"}, {"r"}))
    for c in ("c1", "c2"):
        assert [m.relation(c, b) for b in ("c1", "c2", "r")] == [Y, Y, E]


def test_classify_total_matrix():
    assert classify_vp(total_vp_matrix(PARTITION)) == PARTITION


def test_classify_g3_is_not_vp(g3):
    assert classify_vp(build_opm(g3).matrix) is None


def test_classify_empty_matrix_prefers_internal():
    assert classify_vp(PrecedenceMatrix(["a"])) == VpPartition(internals={"a"})
    assert len(list(enumerate_vp_partitions(PrecedenceMatrix(["a"])))) == 3


def test_classify_conflicting_matrix():
    with pytest.raises(ConflictingMatrix):
        classify_vp(matrix(("a", Y, "b"), ("a", T, "b")))


@given(dictionaries(sampled_from("abcd"), sampled_from(list(LetterClass)), min_size=1))
def test_classify_round_trip(classes):
    p = VpPartition.from_classes(classes)
    q = classify_vp(total_vp_matrix(p))
    assert q is not None
    assert matrix_subset(total_vp_matrix(p), total_vp_matrix(q))
    assert p in list(enumerate_vp_partitions(total_vp_matrix(p)))


def test_partition_rejects_overlap():
    with pytest.raises(ValueError):
        VpPartition({"a"}, {"a"})


###################################################################################################
# Balanced grammars
###################################################################################################

def test_rhs_stencil(grammar):
    g = grammar("prefix.fg")
    stencils = {rhs_stencil(r, PARTITION) for r in g.rules}
    assert stencils == {"r", "Nr", "s", "Ns", "cr", "Ncr", "cNr", "NcNr"}


def test_balanced_nested_pairs(dyck_cr):
    report = check_balanced_restrictions(dyck_cr, VpPartition({"c"}, {"r"}), {"c": "r"})
    assert report.ok
    assert report.violations == []


def test_balanced_violation_names_stencil(make_grammar):
    g = make_grammar("%axiom S\n%terminals c r\nS -> c S r | c r | c S\n")
    report = check_balanced_restrictions(g, VpPartition({"c"}, {"r"}), {"c": "r"})
    assert not report
    assert any("cN" in v and "S -> c S" in v for v in report.violations)


def test_balanced_rejects_lone_return(make_grammar):
    g = make_grammar("%axiom S\n%terminals c r\nS -> c S r | c r | r\n")
    report = check_balanced_restrictions(g, VpPartition({"c"}, {"r"}), {"c": "r"})
    assert not report.ok
    assert "rule S -> r has forbidden stencil r" in report.violations


def test_balanced_off_diagonal(make_grammar):
    g = make_grammar("%axiom S\n%terminals c1 c2 r1 r2\nS -> c1 S r1 | c1 r2 | c2 r2\n")
    p = VpPartition({"c1", "c2"}, {"r1", "r2"})
    report = check_balanced_restrictions(g, p, {"c1": "r1", "c2": "r2"})
    assert not report.ok
    assert "off-diagonal c1 ≐ r2" in report.violations


def test_balanced_needs_bijection(dyck_cr):
    with pytest.raises(UnpairedAlphabet):
        check_balanced_restrictions(dyck_cr, VpPartition({"c"}, {"r"}), {})
