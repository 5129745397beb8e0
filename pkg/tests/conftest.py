"""Shared fixtures: the bundled grammars and automata under presets/."""

from pathlib import Path

import pytest

from grammar_core import load_grammar, parse_grammar
from vpda_core import load_vpda

PRESETS = Path(__file__).resolve().parent.parent / "presets"

# grammars whose matrix is a VP-matrix
VP_GRAMMARS = ["dyck_cr.fg", "unmatched.fg", "prefix.fg", "eps.fg", "eps_dyck.fg"]
FLOYD_GRAMMARS = VP_GRAMMARS + ["g3.fg", "l1.fg"]
AUTOMATA = ["dyck.vpda", "unmatched.vpda", "multiret.vpda", "internals.vpda", "twostack.vpda", "empty.vpda"]


@pytest.fixture
def presets_dir():
    return PRESETS


@pytest.fixture
def grammar():
    """Loader: grammar('g3.fg')."""
    return lambda name: load_grammar(PRESETS / name)


@pytest.fixture
def automaton():
    return lambda name: load_vpda(PRESETS / name)


@pytest.fixture
def g3():
    return load_grammar(PRESETS / "g3.fg")


@pytest.fixture
def dyck_cr():
    return load_grammar(PRESETS / "dyck_cr.fg")


@pytest.fixture
def a_dyck():
    return load_vpda(PRESETS / "dyck.vpda")


@pytest.fixture
def make_grammar():
    """Inline grammar text -> Grammar."""
    return parse_grammar
