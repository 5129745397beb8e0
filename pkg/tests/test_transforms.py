"""Tests for the automaton/grammar conversions and grammar reversal"""

import pytest

from errors import NotFloyd, NotVpMatrix
from grammar_core import enumerate_language, rightmost_nonterminals
from precedence import VpPartition, build_opm, classify_vp, matrix_subset, total_vp_matrix
from transforms import SUPPORTED_STENCILS, fg_to_vpda, phase_split, reverse_fg, vpda_to_fg
from vpda_core import accepts, enumerate_accepted

LIMIT = 8
AUTOMATA = ["dyck.vpda", "unmatched.vpda", "multiret.vpda", "internals.vpda", "twostack.vpda", "empty.vpda"]
VP_GRAMMARS = ["dyck_cr.fg", "unmatched.fg", "prefix.fg", "eps.fg", "eps_dyck.fg"]


###################################################################################################
# Automaton -> grammar
###################################################################################################

@pytest.mark.parametrize("name", AUTOMATA)
def test_vpda_to_fg_same_language(automaton, name):
    a = automaton(name)
    g, _ = vpda_to_fg(a)
    assert enumerate_language(g, LIMIT) == enumerate_accepted(a, LIMIT)


@pytest.mark.parametrize("name", AUTOMATA)
def test_vpda_to_fg_report(automaton, name):
    a = automaton(name)
    g, report = vpda_to_fg(a)
    assert report.conflict_free
    assert report.vp_matrix
    assert matrix_subset(build_opm(g).matrix, total_vp_matrix(a.alphabet.partition))
    assert g.max_rhs_length <= 4
    assert report.final_count == len(g.rules)
    assert sum(report.sections.values()) == report.emitted
    assert g.terminals == set(a.alphabet.letters)


def test_vpda_to_fg_empty_language(automaton):
    g, report = vpda_to_fg(automaton("empty.vpda"))
    assert g.rules == ()
    assert report.notes
    assert "note:" in report.render()


def test_vpda_to_fg_report_dict(a_dyck):
    _, report = vpda_to_fg(a_dyck)
    data = report.to_dict()
    assert data["construction"] == "vpda_to_fg"
    assert data["unit"] == "rules"
    assert data["final"] == data["emitted"] - data["removed"]
    assert data["partition"] is not None


@pytest.mark.parametrize("name", AUTOMATA)
def test_phase_split_keeps_language(automaton, name):
    a = automaton(name)
    split = phase_split(a)
    assert enumerate_accepted(split, 6) == enumerate_accepted(a, 6)
    assert split.initial not in a.states


###################################################################################################
# Grammar -> automaton
###################################################################################################

@pytest.mark.parametrize("name", VP_GRAMMARS)
def test_fg_to_vpda_same_language(grammar, name):
    g = grammar(name)
    a, report = fg_to_vpda(g)
    assert enumerate_accepted(a, LIMIT) == enumerate_language(g, LIMIT)
    assert report.partition == classify_vp(build_opm(g).matrix)


def test_fg_to_vpda_nested_pairs(dyck_cr):
    a, report = fg_to_vpda(dyck_cr)
    assert accepts(a, "c r")
    assert accepts(a, "c c r r")
    assert not accepts(a, "c r r")
    assert not accepts(a, "")
    assert report.final_count == len(a.transitions)


def test_fg_to_vpda_empty_string(grammar):
    a, _ = fg_to_vpda(grammar("eps.fg"))
    assert enumerate_accepted(a, 4) == {()}


def test_fg_to_vpda_with_partition(dyck_cr):
    a, _ = fg_to_vpda(dyck_cr, VpPartition({"c"}, {"r"}))
    assert accepts(a, "c c r r")
    with pytest.raises(NotVpMatrix):
        fg_to_vpda(dyck_cr, VpPartition({"r"}, {"c"}))
    with pytest.raises(NotVpMatrix):
        fg_to_vpda(dyck_cr, VpPartition({"c"}, {"r"}, {"s"}))


def test_fg_to_vpda_rejects_non_vp(g3, grammar):
    with pytest.raises(NotVpMatrix):
        fg_to_vpda(g3)
    with pytest.raises(NotVpMatrix):
        fg_to_vpda(grammar("l1.fg"))


def test_fg_to_vpda_rejects_conflicts(make_grammar):
    g = make_grammar("%axiom S\n%terminals a b\nS -> a S b | a b | a S\n")
    with pytest.raises(NotFloyd):
        fg_to_vpda(g)


@pytest.mark.parametrize("name", VP_GRAMMARS)
def test_fg_to_vpda_finals_close_rightmost_segments(grammar, name):
    g = grammar(name)
    a, _ = fg_to_vpda(g)
    right = rightmost_nonterminals(g)
    for final in a.finals - {"q0", "qF"}:
        node, ctx = final.split("/")
        assert node == ctx
        assert node in right


@pytest.mark.parametrize("name", VP_GRAMMARS)
def test_fg_to_vpda_states_reach_a_final(grammar, name):
    a, _ = fg_to_vpda(grammar(name))
    alive = set(a.finals)
    grown = True
    while grown:
        grown = False
        for t in a.transitions:
            if t.target in alive and t.source not in alive:
                alive.add(t.source)
                grown = True
    assert {t.source for t in a.transitions} <= alive
    assert {t.target for t in a.transitions} <= alive


def test_fg_to_vpda_prunes_dead_ends(make_grammar):
    # B derives no string, and a completed S inside a matched pair has no way on
    g = make_grammar("%axiom S\n%terminals c r s\nS -> c r | c B r\nB -> B s\n")
    a, report = fg_to_vpda(g)
    assert report.removed > 0
    assert "S/-" not in a.states
    assert enumerate_accepted(a, 6) == {("c", "r")}


def test_supported_stencils():
    assert len(SUPPORTED_STENCILS) == 12
    assert "cNr" in SUPPORTED_STENCILS
    assert "rN" not in SUPPORTED_STENCILS


@pytest.mark.parametrize("name", ["dyck.vpda", "unmatched.vpda", "internals.vpda"])
def test_round_trip_through_grammar(automaton, name):
    a = automaton(name)
    g, report = vpda_to_fg(a)
    back, _ = fg_to_vpda(g, report.partition)
    assert enumerate_accepted(back, 6) == enumerate_accepted(a, 6)


###################################################################################################
# Reversal
###################################################################################################

@pytest.mark.parametrize("name", ["g3.fg", "l1.fg", "unmatched.fg", "prefix.fg", "eps_dyck.fg"])
def test_reverse_fg(grammar, name):
    g = grammar(name)
    mirrored, m = reverse_fg(g)
    assert m == build_opm(g).matrix.dual()
    assert enumerate_language(mirrored, 6) == {w[::-1] for w in enumerate_language(g, 6)}


def test_reverse_fg_rejects_conflicts(make_grammar):
    g = make_grammar("%axiom S\n%terminals a b\nS -> a S b | a b | a S\n")
    with pytest.raises(NotFloyd):
        reverse_fg(g)
