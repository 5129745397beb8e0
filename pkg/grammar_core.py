"""
Context-free grammar core.

Grammar representation, the line-oriented grammar file format, structural
predicates (operator form, invertibility, Fischer normal form), reduction, rule
reversal and two independent bounded-membership oracles:

 - enumerate_language: length-bounded derivation search memoized per
   (nonterminal, length)
 - membership_oracle: CYK over a binarized copy of the grammar

leftmost_derivation returns the DerivationStep list behind a member string.

Neither oracle shares code with the precedence parser.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

from errors import (AxiomUnproductive, BudgetExceeded, FormatError, GrammarError,
                    UnknownNonterminal, UnknownTerminal)
from settings import DEFAULTS

logger = logging.getLogger(__name__)

Word = Tuple[str, ...]
EMPTY_MARK = "%empty"


def as_word(w: Union[str, Sequence[str]]) -> Word:
    """Whitespace-separated text or a token sequence -> tuple of tokens."""
    if isinstance(w, str):
        return tuple(w.split())
    return tuple(w)


def format_word(w: Sequence[str]) -> str:
    return " ".join(w) if w else "ε"


# -----------------------
# Symbols, rules, grammar
# -----------------------
@dataclass(frozen=True, order=True)
class Terminal:
    letter: str

    def __str__(self):
        return self.letter


@dataclass(frozen=True, order=True)
class Nonterminal:
    name: str

    def __str__(self):
        return self.name


Symbol = Union[Terminal, Nonterminal]


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: Tuple[Symbol, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'rhs', tuple(self.rhs))

    def __str__(self):
        right = " ".join(str(s) for s in self.rhs) or EMPTY_MARK
        return f"{self.lhs} -> {right}"

    @property
    def is_empty(self) -> bool:
        return not self.rhs

    @property
    def is_renaming(self) -> bool:
        return len(self.rhs) == 1 and isinstance(self.rhs[0], Nonterminal)

    @property
    def letters(self) -> Word:
        return tuple(s.letter for s in self.rhs if isinstance(s, Terminal))

    @property
    def nonterminal_names(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.rhs if isinstance(s, Nonterminal))

    def reversed(self) -> "Rule":
        return Rule(self.lhs, tuple(reversed(self.rhs)))


@dataclass(frozen=True)
class DerivationStep:
    """One leftmost-derivation step: apply rules[rule_index] at `position`."""
    rule_index: int
    position: int


@dataclass(frozen=True)
class Grammar:
    terminals: FrozenSet[str]
    nonterminals: FrozenSet[str]
    rules: Tuple[Rule, ...]
    axiom: str

    def __post_init__(self):
        object.__setattr__(self, 'terminals', frozenset(self.terminals))
        object.__setattr__(self, 'nonterminals', frozenset(self.nonterminals))
        object.__setattr__(self, 'rules', tuple(self.rules))
        self._validate()

    def _validate(self):
        if self.axiom not in self.nonterminals:
            raise GrammarError(f"axiom {self.axiom!r} is not a declared nonterminal")
        overlap = self.terminals & self.nonterminals
        if overlap:
            raise GrammarError(f"symbols declared both terminal and nonterminal: {sorted(overlap)}")
        seen = set()
        axiom_in_rhs = False
        for rule in self.rules:
            if rule.lhs not in self.nonterminals:
                raise UnknownNonterminal(rule.lhs)
            for sym in rule.rhs:
                if isinstance(sym, Terminal):
                    if sym.letter not in self.terminals:
                        raise UnknownTerminal(sym.letter)
                elif sym.name not in self.nonterminals:
                    raise UnknownNonterminal(sym.name)
                elif sym.name == self.axiom:
                    axiom_in_rhs = True
            if rule in seen:
                raise GrammarError(f"duplicate rule {rule}")
            seen.add(rule)
        for rule in self.rules:
            if rule.is_empty:
                if rule.lhs != self.axiom:
                    raise GrammarError(f"empty rule allowed only for the axiom: {rule}")
                if axiom_in_rhs:
                    raise GrammarError("axiom has an empty rule but occurs in a right part")

    @classmethod
    def from_rules(cls, axiom: str, terminals: Iterable[str], rules: Iterable[Rule]) -> "Grammar":
        """Build a grammar whose nonterminals are the axiom plus every name the rules mention."""
        rules = tuple(rules)
        names = {axiom}
        for rule in rules:
            names.add(rule.lhs)
            names.update(rule.nonterminal_names)
        return cls(frozenset(terminals), frozenset(names), rules, axiom)

    @cached_property
    def rules_by_lhs(self) -> Dict[str, Tuple[Rule, ...]]:
        table: Dict[str, List[Rule]] = {name: [] for name in self.nonterminals}
        for rule in self.rules:
            table[rule.lhs].append(rule)
        return {name: tuple(rs) for name, rs in table.items()}

    def rules_for(self, name: str) -> Tuple[Rule, ...]:
        if name not in self.nonterminals:
            raise UnknownNonterminal(name)
        return self.rules_by_lhs[name]

    @property
    def has_empty_rule(self) -> bool:
        return any(rule.is_empty and rule.lhs == self.axiom for rule in self.rules)

    @property
    def max_rhs_length(self) -> int:
        return max((len(rule.rhs) for rule in self.rules), default=0)

    def symbol(self, token: str) -> Symbol:
        return Terminal(token) if token in self.terminals else Nonterminal(token)

    def __str__(self):
        return format_grammar(self)


# -----------------------
# Text format
# -----------------------
def _strip_comment(line: str) -> str:
    return line.split('#', 1)[0].strip()


def parse_grammar(text: str, path: Optional[str] = None) -> Grammar:
    """
    Read the line-oriented grammar format.

        # comment
        %axiom S
        %terminals b c d e f
        S -> A | B | C
        A -> b A c | b c
          | f d             (continuation of the previous left part)

    Symbols not listed in %terminals are nonterminals.
    """
    axiom = None
    terminals: List[str] = []
    raw_rules: List[Tuple[int, str, List[str]]] = []
    last_lhs = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        tokens = line.split()
        if tokens[0].startswith('%'):
            directive = tokens[0]
            if directive == '%axiom':
                if len(tokens) != 2:
                    raise FormatError("%axiom takes exactly one name", path, lineno, line)
                axiom = tokens[1]
            elif directive == '%terminals':
                terminals.extend(tokens[1:])
            elif directive == EMPTY_MARK:
                raise FormatError("rule line expected", path, lineno, directive)
            else:
                raise FormatError("unknown directive", path, lineno, directive)
            continue

        if tokens[0] == '|':
            if last_lhs is None:
                raise FormatError("continuation line without a left part", path, lineno, '|')
            lhs, body = last_lhs, tokens[1:]
            alternatives = _split_alternatives(body, path, lineno)
        else:
            if len(tokens) < 2 or tokens[1] != '->':
                raise FormatError("expected '<LHS> -> ...'", path, lineno, tokens[1] if len(tokens) > 1 else tokens[0])
            lhs = tokens[0]
            alternatives = _split_alternatives(tokens[2:], path, lineno)
        last_lhs = lhs
        for alt in alternatives:
            raw_rules.append((lineno, lhs, alt))

    if axiom is None:
        raise FormatError("missing %axiom header", path)
    if len(set(terminals)) != len(terminals):
        dup = next(t for t in terminals if terminals.count(t) > 1)
        raise FormatError("terminal declared twice", path, None, dup)

    terminal_set = frozenset(terminals)
    rules = []
    seen = {}
    for lineno, lhs, alt in raw_rules:
        if lhs in terminal_set:
            raise FormatError("left part is a terminal", path, lineno, lhs)
        rhs = tuple(Terminal(t) if t in terminal_set else Nonterminal(t) for t in alt)
        rule = Rule(lhs, rhs)
        if rule in seen:
            raise FormatError(f"duplicate rule (first on line {seen[rule]})", path, lineno, str(rule))
        seen[rule] = lineno
        rules.append(rule)
        if not alt and lhs != axiom:
            raise FormatError("empty rule allowed only for the axiom", path, lineno, EMPTY_MARK)

    empty_axiom = next((lineno for lineno, lhs, alt in raw_rules if lhs == axiom and not alt), None)
    if empty_axiom is not None:
        for lineno, _, alt in raw_rules:
            if axiom in alt:
                raise FormatError(f"axiom has an empty rule (line {empty_axiom}) but occurs in a right part",
                                  path, lineno, axiom)

    try:
        return Grammar.from_rules(axiom, terminal_set, rules)
    except GrammarError as e:
        raise FormatError(str(e), path)


def _split_alternatives(body: List[str], path, lineno) -> List[List[str]]:
    alternatives: List[List[str]] = [[]]
    for tok in body:
        if tok == '|':
            alternatives.append([])
        elif tok == '->':
            raise FormatError("unexpected '->'", path, lineno, tok)
        else:
            alternatives[-1].append(tok)
    result = []
    for alt in alternatives:
        if not alt:
            raise FormatError(f"empty alternative (write {EMPTY_MARK})", path, lineno, '|')
        if EMPTY_MARK in alt:
            if alt != [EMPTY_MARK]:
                raise FormatError(f"{EMPTY_MARK} must stand alone", path, lineno, EMPTY_MARK)
            alt = []
        result.append(alt)
    return result


def load_grammar(path) -> Grammar:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise FormatError(f"cannot read grammar: {e.strerror}", str(path))
    return parse_grammar(text, str(path))


def format_grammar(g: Grammar) -> str:
    """Canonical text; consecutive rules with the same left part share a line."""
    lines = [f"%axiom {g.axiom}", "%terminals " + " ".join(sorted(g.terminals))]
    groups: List[Tuple[str, List[Rule]]] = []
    for rule in g.rules:
        if groups and groups[-1][0] == rule.lhs:
            groups[-1][1].append(rule)
        else:
            groups.append((rule.lhs, [rule]))
    for lhs, rules in groups:
        alts = [" ".join(str(s) for s in r.rhs) or EMPTY_MARK for r in rules]
        lines.append(f"{lhs} -> " + " | ".join(alts))
    return "\n".join(lines) + "\n"


# -----------------------
# Structural predicates
# -----------------------
def is_operator_form(g: Grammar) -> bool:
    """No right part has two adjacent nonterminals."""
    for rule in g.rules:
        for left, right in zip(rule.rhs, rule.rhs[1:]):
            if isinstance(left, Nonterminal) and isinstance(right, Nonterminal):
                return False
    return True


def is_invertible(g: Grammar) -> bool:
    """No two rules have identical right parts."""
    owners: Dict[Tuple[Symbol, ...], str] = {}
    for rule in g.rules:
        other = owners.setdefault(rule.rhs, rule.lhs)
        if other != rule.lhs:
            return False
    return True


def is_fischer_normal_form(g: Grammar) -> bool:
    if not is_invertible(g):
        return False
    for rule in g.rules:
        if g.axiom in rule.nonterminal_names:
            return False
        if rule.is_renaming and rule.lhs != g.axiom:
            return False
    return True


# -----------------------
# Closures and reduction
# -----------------------
def renaming_closure(g: Grammar) -> Dict[str, FrozenSet[str]]:
    """For each A, the nonterminals B with B =>* A through renaming rules only (A included)."""
    parents: Dict[str, Set[str]] = {name: set() for name in g.nonterminals}
    for rule in g.rules:
        if rule.is_renaming:
            parents[rule.rhs[0].name].add(rule.lhs)
    closure = {}
    for name in g.nonterminals:
        seen = {name}
        todo = [name]
        while todo:
            for parent in parents[todo.pop()]:
                if parent not in seen:
                    seen.add(parent)
                    todo.append(parent)
        closure[name] = frozenset(seen)
    return closure


def productive_nonterminals(g: Grammar) -> Set[str]:
    productive: Set[str] = set()
    changed = True
    while changed:
        changed = False
        for rule in g.rules:
            if rule.lhs not in productive and all(n in productive for n in rule.nonterminal_names):
                productive.add(rule.lhs)
                changed = True
    return productive


def reachable_nonterminals(g: Grammar) -> Set[str]:
    reached = {g.axiom}
    todo = [g.axiom]
    while todo:
        for rule in g.rules_by_lhs.get(todo.pop(), ()):
            for name in rule.nonterminal_names:
                if name not in reached:
                    reached.add(name)
                    todo.append(name)
    return reached


def rightmost_nonterminals(g: Grammar) -> Set[str]:
    """{A : S =>* beta A}, the axiom itself included."""
    found = {g.axiom}
    todo = [g.axiom]
    while todo:
        for rule in g.rules_by_lhs.get(todo.pop(), ()):
            if rule.rhs and isinstance(rule.rhs[-1], Nonterminal):
                name = rule.rhs[-1].name
                if name not in found:
                    found.add(name)
                    todo.append(name)
    return found


def _collapse_renaming_cycles(rules: Sequence[Rule], axiom: str) -> List[Rule]:
    forward: Dict[str, Set[str]] = {}
    for rule in rules:
        if rule.is_renaming:
            forward.setdefault(rule.lhs, set()).add(rule.rhs[0].name)

    def reach(start):
        seen = {start}
        todo = [start]
        while todo:
            for nxt in forward.get(todo.pop(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
        return seen

    reach_sets = {name: reach(name) for name in forward}
    rename = {}
    for name, reached in reach_sets.items():
        cycle = {other for other in reached if name in reach_sets.get(other, ())}
        if len(cycle) > 1:
            rename[name] = axiom if axiom in cycle else min(cycle)
    if not rename:
        return [r for r in rules if not (r.is_renaming and r.rhs[0].name == r.lhs)]

    logger.debug("collapsing renaming cycles: %s", rename)

    def sub(sym):
        if isinstance(sym, Nonterminal) and sym.name in rename:
            return Nonterminal(rename[sym.name])
        return sym

    collapsed = []
    seen = set()
    for rule in rules:
        new = Rule(rename.get(rule.lhs, rule.lhs), tuple(sub(s) for s in rule.rhs))
        if new.is_renaming and new.rhs[0].name == new.lhs:
            continue
        if new not in seen:
            seen.add(new)
            collapsed.append(new)
    return collapsed


def reduce(g: Grammar) -> Grammar:
    """
    Keep exactly the productive rules reachable from the axiom; renaming
    cycles are collapsed onto one representative (the axiom if it is in the
    cycle, else the smallest name). The terminal alphabet is kept.

    Raises:
        AxiomUnproductive: the axiom derives no terminal string; the empty
            reduct is attached to the exception.
    """
    productive = productive_nonterminals(g)
    if g.axiom not in productive:
        raise AxiomUnproductive(Grammar(g.terminals, frozenset({g.axiom}), (), g.axiom))

    rules = [r for r in g.rules if all(n in productive for n in r.nonterminal_names)]
    rules = _collapse_renaming_cycles(rules, g.axiom)
    trimmed = Grammar.from_rules(g.axiom, g.terminals, rules)
    reachable = reachable_nonterminals(trimmed)
    result = Grammar.from_rules(g.axiom, g.terminals, [r for r in rules if r.lhs in reachable])
    logger.debug("reduce: %d -> %d rules", len(g.rules), len(result.rules))
    return result


def reverse_rules(g: Grammar) -> Grammar:
    """Mirror every right part."""
    return Grammar(g.terminals, g.nonterminals, tuple(r.reversed() for r in g.rules), g.axiom)


# -----------------------
# Oracle 1: bounded derivation search
# -----------------------
def _expand(rhs: Tuple[Symbol, ...], n: int, table: Dict[str, List[Set[Word]]], counter: List[int],
            budget: int) -> Iterator[Word]:
    if not rhs:
        if n == 0:
            yield ()
        return
    head, rest = rhs[0], rhs[1:]
    if isinstance(head, Terminal):
        if n >= 1:
            for tail in _expand(rest, n - 1, table, counter, budget):
                yield (head.letter,) + tail
        return
    # every symbol of `rest` consumes at least one letter
    for k in range(1, n - len(rest) + 1):
        parts = table[head.name][k]
        if not parts:
            continue
        for tail in _expand(rest, n - k, table, counter, budget):
            for part in parts:
                counter[0] += 1
                if counter[0] > budget:
                    raise BudgetExceeded("language enumeration", budget)
                yield part + tail


def enumerate_language(g: Grammar, max_len: int, budget: Optional[int] = None) -> Set[Word]:
    """
    All terminal strings of length <= max_len derived from the axiom.

    Strings are built bottom-up per length; for a fixed length, non-renaming
    rules only consult strictly shorter lengths of their nonterminals, and
    renaming rules are closed by a fixpoint at that length.
    """
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    budget = DEFAULTS['node_budget'] if budget is None else budget
    counter = [0]
    table: Dict[str, List[Set[Word]]] = {name: [] for name in g.nonterminals}
    renamings = [r for r in g.rules if r.is_renaming]
    others = [r for r in g.rules if not r.is_renaming]

    for n in range(max_len + 1):
        current: Dict[str, Set[Word]] = {name: set() for name in g.nonterminals}
        for rule in others:
            if n == 0:
                if rule.is_empty:
                    current[rule.lhs].add(())
                continue
            if len(rule.rhs) > n:
                continue
            current[rule.lhs].update(_expand(rule.rhs, n, table, counter, budget))
        changed = bool(renamings)
        while changed:
            changed = False
            for rule in renamings:
                src = current[rule.rhs[0].name]
                dst = current[rule.lhs]
                if not src <= dst:
                    counter[0] += len(src)
                    if counter[0] > budget:
                        raise BudgetExceeded("language enumeration", budget)
                    dst |= src
                    changed = True
        for name in g.nonterminals:
            table[name].append(current[name])

    words: Set[Word] = set()
    for layer in table[g.axiom]:
        words |= layer
    logger.debug("enumerate_language: %d strings up to length %d (%d nodes)", len(words), max_len, counter[0])
    return words


# -----------------------
# Oracle 2: CYK over a binarized copy
# -----------------------
class _BinarizedGrammar:
    """Chomsky-like copy: A -> a, A -> X Y, plus renaming edges closed per cell."""

    def __init__(self, g: Grammar):
        self.axiom = ('N', g.axiom)
        self.lexical: Dict[str, Set[tuple]] = {}
        self.binary: Dict[Tuple[tuple, tuple], Set[tuple]] = {}
        parents: Dict[tuple, Set[tuple]] = {}
        self.accepts_empty = g.has_empty_rule

        def node(sym):
            if isinstance(sym, Terminal):
                self.lexical.setdefault(sym.letter, set()).add(('T', sym.letter))
                return ('T', sym.letter)
            return ('N', sym.name)

        for index, rule in enumerate(g.rules):
            lhs = ('N', rule.lhs)
            if len(rule.rhs) == 1:
                sym = rule.rhs[0]
                if isinstance(sym, Terminal):
                    self.lexical.setdefault(sym.letter, set()).add(lhs)
                else:
                    parents.setdefault(('N', sym.name), set()).add(lhs)
            elif len(rule.rhs) >= 2:
                symbols = [node(s) for s in rule.rhs]
                left = lhs
                for i, sym in enumerate(symbols[:-2]):
                    chain = ('B', index, i)
                    self.binary.setdefault((sym, chain), set()).add(left)
                    left = chain
                self.binary.setdefault((symbols[-2], symbols[-1]), set()).add(left)

        self.parents = parents

    def close(self, cell: Set[tuple]) -> Set[tuple]:
        todo = list(cell)
        while todo:
            for parent in self.parents.get(todo.pop(), ()):
                if parent not in cell:
                    cell.add(parent)
                    todo.append(parent)
        return cell

    def recognizes(self, w: Word) -> bool:
        n = len(w)
        if n == 0:
            return self.accepts_empty
        # table[i][l] = symbols deriving w[i:i+l]
        table = [[set() for _ in range(n + 1)] for _ in range(n)]
        for i, letter in enumerate(w):
            table[i][1] = self.close(set(self.lexical.get(letter, ())))
        for length in range(2, n + 1):
            for i in range(n - length + 1):
                cell = set()
                for split in range(1, length):
                    left = table[i][split]
                    right = table[i + split][length - split]
                    if not left or not right:
                        continue
                    for x in left:
                        for y in right:
                            heads = self.binary.get((x, y))
                            if heads:
                                cell |= heads
                table[i][length] = self.close(cell)
        return self.axiom in table[0][n]


def membership_oracle(g: Grammar, w: Union[str, Sequence[str]]) -> bool:
    """CYK membership on a binarized copy of g."""
    word = as_word(w)
    for letter in word:
        if letter not in g.terminals:
            raise UnknownTerminal(letter)
    return _BinarizedGrammar(g).recognizes(word)


# -----------------------
# Derivations
# -----------------------
def _match(rhs: Tuple[Symbol, ...], i: int, j: int, word: Word,
           found: Dict[Tuple[str, int, int], tuple]) -> Optional[List[Tuple[str, int, int]]]:
    """Spans for the nonterminals of rhs so that rhs covers word[i:j]."""
    if not rhs:
        return [] if i == j else None
    head, rest = rhs[0], rhs[1:]
    if isinstance(head, Terminal):
        if i < j and word[i] == head.letter:
            return _match(rest, i + 1, j, word, found)
        return None
    for k in range(i + 1, j - len(rest) + 1):
        if (head.name, i, k) in found:
            tail = _match(rest, k, j, word, found)
            if tail is not None:
                return [(head.name, i, k)] + tail
    return None


def leftmost_derivation(g: Grammar, w: Union[str, Sequence[str]]) -> Optional[List[DerivationStep]]:
    """
    A leftmost derivation of w from the axiom, or None when w is not derived.

    Every (nonterminal, span) pair gets the first rule found for it, span
    lengths in increasing order; renaming rules are closed per span. Since the
    nonterminal expanded by a leftmost step only has letters to its left, its
    position is the start of its span.
    """
    word = as_word(w)
    for letter in word:
        if letter not in g.terminals:
            raise UnknownTerminal(letter)
    n = len(word)
    if n == 0:
        for index, rule in enumerate(g.rules):
            if rule.is_empty and rule.lhs == g.axiom:
                return [DerivationStep(index, 0)]
        return None

    found: Dict[Tuple[str, int, int], tuple] = {}
    renamings = [(index, r) for index, r in enumerate(g.rules) if r.is_renaming]
    others = [(index, r) for index, r in enumerate(g.rules) if not r.is_renaming and not r.is_empty]
    for length in range(1, n + 1):
        for i in range(n - length + 1):
            j = i + length
            for index, rule in others:
                if len(rule.rhs) > length or (rule.lhs, i, j) in found:
                    continue
                spans = _match(rule.rhs, i, j, word, found)
                if spans is not None:
                    found[(rule.lhs, i, j)] = (index, spans)
            changed = True
            while changed:
                changed = False
                for index, rule in renamings:
                    key = (rule.lhs, i, j)
                    child = (rule.rhs[0].name, i, j)
                    if key not in found and child in found:
                        found[key] = (index, [child])
                        changed = True

    if (g.axiom, 0, n) not in found:
        return None
    steps: List[DerivationStep] = []
    todo = [(g.axiom, 0, n)]
    while todo:
        name, i, j = todo.pop()
        index, children = found[(name, i, j)]
        steps.append(DerivationStep(index, i))
        todo.extend(reversed(children))
    return steps


def apply_derivation(g: Grammar, steps: Iterable[DerivationStep]) -> Tuple[Symbol, ...]:
    """Sentential form reached from the axiom by applying steps in order."""
    form: Tuple[Symbol, ...] = (Nonterminal(g.axiom),)
    for step in steps:
        rule = g.rules[step.rule_index]
        if not 0 <= step.position < len(form):
            raise GrammarError(f"derivation step at {step.position} is outside the sentential form")
        target = form[step.position]
        if not isinstance(target, Nonterminal) or target.name != rule.lhs:
            raise GrammarError(f"rule {rule} does not apply at position {step.position}")
        form = form[:step.position] + rule.rhs + form[step.position + 1:]
    return form
