"""
Operator precedence machinery.

Left/right terminal sets, the operator precedence matrix (OPM) of an operator
grammar, matrix algebra, the total VP matrix of a call/return/internal
partition, VP classification of a matrix and the balanced-grammar checks.

Matrix cells are stored as a numpy uint8 array of relation bit flags so
union, containment and conflict counting run on whole arrays.
"""

import enum
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from errors import (ConflictingMatrix, EmptyString, FormatError, NotFloyd, NotOperatorForm,
                    UnknownNonterminal, UnpairedAlphabet)
from grammar_core import Grammar, Nonterminal, Rule, Symbol, Terminal, is_operator_form

logger = logging.getLogger(__name__)


class PrecRel(enum.Enum):
    """a ⋖ b (YIELDS), a ≐ b (EQUAL), a ⋗ b (TAKES)."""
    YIELDS = '<'
    EQUAL = '='
    TAKES = '>'

    @property
    def bit(self) -> int:
        return _BITS[self]

    @property
    def glyph(self) -> str:
        return self.value

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]

    def swapped(self) -> "PrecRel":
        if self is PrecRel.YIELDS:
            return PrecRel.TAKES
        if self is PrecRel.TAKES:
            return PrecRel.YIELDS
        return self

    @classmethod
    def from_glyph(cls, glyph: str) -> "PrecRel":
        return cls(glyph)

    def __lt__(self, other):
        return RELATION_ORDER.index(self) < RELATION_ORDER.index(other)


RELATION_ORDER = (PrecRel.YIELDS, PrecRel.EQUAL, PrecRel.TAKES)
_BITS = {PrecRel.YIELDS: 1, PrecRel.EQUAL: 2, PrecRel.TAKES: 4}
_SYMBOLS = {PrecRel.YIELDS: '⋖', PrecRel.EQUAL: '≐', PrecRel.TAKES: '⋗'}
EMPTY_CELL = '.'


def _popcount(cells: np.ndarray) -> np.ndarray:
    return (cells & 1) + ((cells >> 1) & 1) + ((cells >> 2) & 1)


def _swap_bits(cells: np.ndarray) -> np.ndarray:
    return ((cells & 1) << 2) | (cells & 2) | ((cells >> 2) & 1)


def _relations_of(flags: int) -> FrozenSet[PrecRel]:
    return frozenset(rel for rel in RELATION_ORDER if flags & rel.bit)


# -----------------------
# VP partition
# -----------------------
class LetterClass(enum.Enum):
    CALL = 'call'
    RETURN = 'return'
    INTERNAL = 'internal'


@dataclass(frozen=True)
class VpPartition:
    calls: FrozenSet[str] = frozenset()
    returns: FrozenSet[str] = frozenset()
    internals: FrozenSet[str] = frozenset()

    def __post_init__(self):
        for name in ('calls', 'returns', 'internals'):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        shared = (self.calls & self.returns) | (self.calls & self.internals) | (self.returns & self.internals)
        if shared:
            raise ValueError(f"letters in more than one class: {sorted(shared)}")

    @property
    def alphabet(self) -> FrozenSet[str]:
        return self.calls | self.returns | self.internals

    def letter_class(self, letter: str) -> LetterClass:
        if letter in self.calls:
            return LetterClass.CALL
        if letter in self.returns:
            return LetterClass.RETURN
        if letter in self.internals:
            return LetterClass.INTERNAL
        raise KeyError(letter)

    @classmethod
    def from_classes(cls, classes: Mapping[str, LetterClass]) -> "VpPartition":
        return cls(
            frozenset(a for a, k in classes.items() if k is LetterClass.CALL),
            frozenset(a for a, k in classes.items() if k is LetterClass.RETURN),
            frozenset(a for a, k in classes.items() if k is LetterClass.INTERNAL),
        )

    def to_dict(self) -> dict:
        return {
            'calls': sorted(self.calls),
            'returns': sorted(self.returns),
            'internals': sorted(self.internals),
        }

    def __str__(self):
        return "calls={%s} returns={%s} internals={%s}" % (
            " ".join(sorted(self.calls)), " ".join(sorted(self.returns)), " ".join(sorted(self.internals)))


# -----------------------
# Precedence matrix
# -----------------------
class PrecedenceMatrix:
    """Immutable map (a, b) -> subset of {⋖, ≐, ⋗} over an ordered alphabet."""

    def __init__(self, alphabet: Iterable[str], cells: Optional[np.ndarray] = None):
        self.alphabet: Tuple[str, ...] = tuple(sorted(set(alphabet)))
        self._index = {a: i for i, a in enumerate(self.alphabet)}
        n = len(self.alphabet)
        if cells is None:
            cells = np.zeros((n, n), dtype=np.uint8)
        else:
            cells = np.array(cells, dtype=np.uint8)
            if cells.shape != (n, n):
                raise ValueError(f"cells must have shape {(n, n)}, got {cells.shape}")
        cells.setflags(write=False)
        self.cells = cells

    @classmethod
    def from_relations(cls, alphabet: Iterable[str],
                       relations: Iterable[Tuple[str, PrecRel, str]]) -> "PrecedenceMatrix":
        alphabet = set(alphabet)
        relations = list(relations)
        for a, _, b in relations:
            alphabet.update((a, b))
        matrix = cls(alphabet)
        cells = matrix.cells.copy()
        for a, rel, b in relations:
            cells[matrix._index[a], matrix._index[b]] |= rel.bit
        return cls(alphabet, cells)

    def get(self, a: str, b: str) -> FrozenSet[PrecRel]:
        i, j = self._index.get(a), self._index.get(b)
        if i is None or j is None:
            return frozenset()
        return _relations_of(int(self.cells[i, j]))

    def relation(self, a: str, b: str) -> Optional[PrecRel]:
        """The single relation of a conflict-free cell, or None when empty."""
        rels = self.get(a, b)
        if len(rels) > 1:
            raise ConflictingMatrix([(a, b)])
        return next(iter(rels), None)

    def relations(self) -> List[Tuple[str, PrecRel, str]]:
        result = []
        for i, j in zip(*np.nonzero(self.cells)):
            for rel in _relations_of(int(self.cells[i, j])):
                result.append((self.alphabet[i], rel, self.alphabet[j]))
        return sorted(result, key=lambda t: (t[0], t[2], RELATION_ORDER.index(t[1])))

    def __len__(self):
        return int(_popcount(self.cells).sum())

    def conflicts(self) -> List[Tuple[str, str]]:
        rows, cols = np.nonzero(_popcount(self.cells) > 1)
        return [(self.alphabet[i], self.alphabet[j]) for i, j in zip(rows, cols)]

    @property
    def is_conflict_free(self) -> bool:
        return not bool((_popcount(self.cells) > 1).any())

    def expanded(self, alphabet: Iterable[str]) -> "PrecedenceMatrix":
        """Same relations over a larger alphabet (new cells empty)."""
        target = PrecedenceMatrix(set(alphabet) | set(self.alphabet))
        if target.alphabet == self.alphabet:
            return self
        idx = [target._index[a] for a in self.alphabet]
        cells = target.cells.copy()
        cells[np.ix_(idx, idx)] = self.cells
        return PrecedenceMatrix(target.alphabet, cells)

    def union(self, other: "PrecedenceMatrix") -> "PrecedenceMatrix":
        letters = set(self.alphabet) | set(other.alphabet)
        left, right = self.expanded(letters), other.expanded(letters)
        return PrecedenceMatrix(left.alphabet, left.cells | right.cells)

    def issubset(self, other: "PrecedenceMatrix") -> bool:
        letters = set(self.alphabet) | set(other.alphabet)
        left, right = self.expanded(letters), other.expanded(letters)
        return bool(((left.cells & ~right.cells) == 0).all())

    def compatible(self, other: "PrecedenceMatrix") -> bool:
        return self.union(other).is_conflict_free

    def dual(self) -> "PrecedenceMatrix":
        """Transpose with ⋖ and ⋗ interchanged: the matrix of the mirrored grammar."""
        return PrecedenceMatrix(self.alphabet, _swap_bits(self.cells.T))

    def __eq__(self, other):
        if not isinstance(other, PrecedenceMatrix):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.alphabet, self.cells.tobytes()))

    def __repr__(self):
        rels = ", ".join(f"{a}{rel.symbol}{b}" for a, rel, b in self.relations())
        return f"PrecedenceMatrix({{{rels}}})"

    def __str__(self):
        return format_matrix(self)


def matrix_union(m1: PrecedenceMatrix, m2: PrecedenceMatrix) -> PrecedenceMatrix:
    return m1.union(m2)


def matrix_subset(m1: PrecedenceMatrix, m2: PrecedenceMatrix) -> bool:
    return m1.issubset(m2)


def compatible(m1: PrecedenceMatrix, m2: PrecedenceMatrix) -> bool:
    return m1.compatible(m2)


def _cell_text(flags: int) -> str:
    rels = _relations_of(flags)
    if not rels:
        return EMPTY_CELL
    glyphs = "".join(r.glyph for r in RELATION_ORDER if r in rels)
    return glyphs if len(rels) == 1 else f"!{glyphs}!"


def format_matrix(m: PrecedenceMatrix) -> str:
    """
    Header row of letters, then one row per letter:

           b  c  d
        b  <  =  .
        c  .  >  .
        d  .  .  >

    Conflict cells print their glyphs between bangs, e.g. !=>!.
    """
    if not m.alphabet:
        return "\n"
    texts = [[_cell_text(int(m.cells[i, j])) for j in range(len(m.alphabet))] for i in range(len(m.alphabet))]
    width = max([len(a) for a in m.alphabet] + [len(t) for row in texts for t in row])
    lines = [" ".join([" " * width] + [a.ljust(width) for a in m.alphabet]).rstrip()]
    for a, row in zip(m.alphabet, texts):
        lines.append(" ".join([a.ljust(width)] + [t.ljust(width) for t in row]).rstrip())
    return "\n".join(lines) + "\n"


def parse_matrix(text: str, path: Optional[str] = None) -> PrecedenceMatrix:
    lines = [(n, line.split('#', 1)[0].split()) for n, line in enumerate(text.splitlines(), start=1)]
    lines = [(n, toks) for n, toks in lines if toks]
    if not lines:
        return PrecedenceMatrix(())
    header_line, header = lines[0]
    if len(set(header)) != len(header):
        raise FormatError("letter repeated in header", path, header_line)
    rows = {}
    for lineno, toks in lines[1:]:
        letter, cells = toks[0], toks[1:]
        if letter not in header:
            raise FormatError("row letter missing from header", path, lineno, letter)
        if letter in rows:
            raise FormatError("row given twice", path, lineno, letter)
        if len(cells) != len(header):
            raise FormatError(f"expected {len(header)} cells, got {len(cells)}", path, lineno)
        rows[letter] = (lineno, cells)
    missing = [a for a in header if a not in rows]
    if missing:
        raise FormatError("missing rows", path, None, " ".join(missing))

    relations = []
    for a, (lineno, cells) in rows.items():
        for b, cell in zip(header, cells):
            if cell == EMPTY_CELL:
                continue
            glyphs = cell[1:-1] if len(cell) > 2 and cell.startswith('!') and cell.endswith('!') else cell
            if len(glyphs) > 1 and not cell.startswith('!'):
                raise FormatError("multi-relation cell must be written !...!", path, lineno, cell)
            for glyph in glyphs:
                try:
                    relations.append((a, PrecRel.from_glyph(glyph), b))
                except ValueError:
                    raise FormatError("unknown relation", path, lineno, cell)
    return PrecedenceMatrix.from_relations(header, relations)


# -----------------------
# Terminal sets
# -----------------------
def _require_operator_form(g: Grammar):
    if not is_operator_form(g):
        for rule in g.rules:
            if any(isinstance(x, Nonterminal) and isinstance(y, Nonterminal) for x, y in zip(rule.rhs, rule.rhs[1:])):
                raise NotOperatorForm(rule)


def _terminal_set_fixpoint(g: Grammar, leftmost: bool) -> Dict[str, Set[str]]:
    sets: Dict[str, Set[str]] = {name: set() for name in g.nonterminals}
    max_passes = len(g.nonterminals) * max(len(g.terminals), 1) + 1
    for passes in range(1, max_passes + 1):
        changed = False
        for rule in g.rules:
            rhs = rule.rhs if leftmost else tuple(reversed(rule.rhs))
            if not rhs:
                continue
            target = sets[rule.lhs]
            before = len(target)
            head = rhs[0]
            if isinstance(head, Terminal):
                target.add(head.letter)
            else:
                target |= sets[head.name]
                if len(rhs) > 1 and isinstance(rhs[1], Terminal):
                    target.add(rhs[1].letter)
            changed = changed or len(target) != before
        if not changed:
            logger.debug("%s terminal sets stable after %d passes", "left" if leftmost else "right", passes)
            break
    return sets


def left_terminal_sets(g: Grammar) -> Dict[str, FrozenSet[str]]:
    _require_operator_form(g)
    return {a: frozenset(s) for a, s in _terminal_set_fixpoint(g, leftmost=True).items()}


def right_terminal_sets(g: Grammar) -> Dict[str, FrozenSet[str]]:
    _require_operator_form(g)
    return {a: frozenset(s) for a, s in _terminal_set_fixpoint(g, leftmost=False).items()}


def left_terminal_set(g: Grammar, name: str) -> FrozenSet[str]:
    """Terminals a with A =>* B a alpha or A =>* a alpha."""
    if name not in g.nonterminals:
        raise UnknownNonterminal(name)
    return left_terminal_sets(g)[name]


def right_terminal_set(g: Grammar, name: str) -> FrozenSet[str]:
    """Terminals a with A =>* alpha a B or A =>* alpha a."""
    if name not in g.nonterminals:
        raise UnknownNonterminal(name)
    return right_terminal_sets(g)[name]


def terminal_sets_of_string(g: Grammar, beta: Sequence) -> Tuple[FrozenSet[str], FrozenSet[str]]:
    """
    Left and right terminal sets of a symbol string, i.e. those of a fresh
    nonterminal D whose only rule is D -> beta.

    Args:
        g: operator grammar
        beta: Symbols or tokens (tokens are classified by g's terminal set)

    Raises:
        EmptyString: beta is empty
    """
    if isinstance(beta, str):
        beta = beta.split()
    symbols: Tuple[Symbol, ...] = tuple(s if isinstance(s, (Terminal, Nonterminal)) else g.symbol(s) for s in beta)
    if not symbols:
        raise EmptyString()
    for sym in symbols:
        if isinstance(sym, Nonterminal) and sym.name not in g.nonterminals:
            raise UnknownNonterminal(sym.name)
    probe = Rule("<string>", symbols)
    for x, y in zip(symbols, symbols[1:]):
        if isinstance(x, Nonterminal) and isinstance(y, Nonterminal):
            raise NotOperatorForm(probe)
    lefts, rights = left_terminal_sets(g), right_terminal_sets(g)

    def edge(seq, table):
        found = set()
        if isinstance(seq[0], Terminal):
            found.add(seq[0].letter)
        else:
            found |= table[seq[0].name]
            if len(seq) > 1:
                found.add(seq[1].letter)
        return frozenset(found)

    return edge(symbols, lefts), edge(tuple(reversed(symbols)), rights)


# -----------------------
# OPM construction
# -----------------------
@dataclass
class OpmBuild:
    """Result of build_opm; unpacks as (matrix, conflicts)."""
    matrix: PrecedenceMatrix
    conflicts: List[Tuple[str, str]]
    provenance: Dict[Tuple[str, str, PrecRel], List[Rule]] = field(default_factory=dict)

    def __iter__(self):
        return iter((self.matrix, self.conflicts))

    @property
    def is_floyd(self) -> bool:
        return not self.conflicts

    def conflict_report(self) -> List[str]:
        lines = []
        for a, b in self.conflicts:
            parts = []
            for rel in RELATION_ORDER:
                rules = self.provenance.get((a, b, rel))
                if rules:
                    parts.append(f"{a} {rel.symbol} {b} from " + "; ".join(str(r) for r in rules))
            lines.append(f"cell ({a},{b}): " + " | ".join(parts))
        return lines


def build_opm(g: Grammar) -> OpmBuild:
    """
    The three defining clauses, read off every right part:

        a ≐ b  when a b or a B b occurs in a right part
        a ⋖ b  when a B occurs and b is in L(B)
        a ⋗ b  when A b occurs and a is in R(A)
    """
    _require_operator_form(g)
    lefts = _terminal_set_fixpoint(g, leftmost=True)
    rights = _terminal_set_fixpoint(g, leftmost=False)
    provenance: Dict[Tuple[str, str, PrecRel], List[Rule]] = {}

    def note(a, b, rel, rule):
        rules = provenance.setdefault((a, b, rel), [])
        if rule not in rules:
            rules.append(rule)

    for rule in g.rules:
        rhs = rule.rhs
        for i, sym in enumerate(rhs):
            nxt = rhs[i + 1] if i + 1 < len(rhs) else None
            if nxt is None:
                break
            if isinstance(sym, Terminal):
                if isinstance(nxt, Terminal):
                    note(sym.letter, nxt.letter, PrecRel.EQUAL, rule)
                else:
                    for b in lefts[nxt.name]:
                        note(sym.letter, b, PrecRel.YIELDS, rule)
                    if i + 2 < len(rhs):
                        note(sym.letter, rhs[i + 2].letter, PrecRel.EQUAL, rule)
            else:
                for a in rights[sym.name]:
                    note(a, nxt.letter, PrecRel.TAKES, rule)

    matrix = PrecedenceMatrix.from_relations(g.terminals, [(a, rel, b) for (a, b, rel) in provenance])
    conflicts = matrix.conflicts()
    logger.debug("build_opm: %d relations, %d conflicts", len(matrix), len(conflicts))
    return OpmBuild(matrix, conflicts, provenance)


def floyd_opm(g: Grammar) -> PrecedenceMatrix:
    """OPM of g, raising NotFloyd when a cell holds two relations."""
    build = build_opm(g)
    if build.conflicts:
        raise NotFloyd(build.conflicts)
    return build.matrix


def is_floyd(g: Grammar) -> bool:
    return is_operator_form(g) and build_opm(g).is_floyd


# -----------------------
# VP matrices
# -----------------------
def total_vp_matrix(p: VpPartition) -> PrecedenceMatrix:
    """Calls ⋖ calls and internals, calls ≐ returns, returns and internals ⋗ everything."""
    matrix = PrecedenceMatrix(p.alphabet)
    cells = matrix.cells.copy()
    index = matrix._index
    for a in matrix.alphabet:
        i = index[a]
        if a in p.calls:
            for b in matrix.alphabet:
                cells[i, index[b]] = PrecRel.EQUAL.bit if b in p.returns else PrecRel.YIELDS.bit
        else:
            cells[i, :] = PrecRel.TAKES.bit
    return PrecedenceMatrix(matrix.alphabet, cells)


# canonical preference: internal, then return, then call
_CLASS_PREFERENCE = (LetterClass.INTERNAL, LetterClass.RETURN, LetterClass.CALL)


def _class_domains(m: PrecedenceMatrix) -> Dict[str, List[LetterClass]]:
    if not m.is_conflict_free:
        raise ConflictingMatrix(m.conflicts())
    allowed: Dict[str, Set[LetterClass]] = {a: set(_CLASS_PREFERENCE) for a in m.alphabet}
    for a, rel, b in m.relations():
        if rel is PrecRel.YIELDS:
            allowed[a] &= {LetterClass.CALL}
            allowed[b] &= {LetterClass.CALL, LetterClass.INTERNAL}
        elif rel is PrecRel.EQUAL:
            allowed[a] &= {LetterClass.CALL}
            allowed[b] &= {LetterClass.RETURN}
        else:
            allowed[a] &= {LetterClass.RETURN, LetterClass.INTERNAL}
    return {a: [k for k in _CLASS_PREFERENCE if k in allowed[a]] for a in m.alphabet}


def enumerate_vp_partitions(m: PrecedenceMatrix) -> Iterator[VpPartition]:
    """Every partition p with m ⊆ total_vp_matrix(p), canonical one first."""
    domains = _class_domains(m)
    letters = list(m.alphabet)
    for choice in itertools.product(*(domains[a] for a in letters)):
        yield VpPartition.from_classes(dict(zip(letters, choice)))


def classify_vp(m: PrecedenceMatrix) -> Optional[VpPartition]:
    """
    The canonical partition making m a VP-matrix, or None.

    Every relation constrains its two letters independently (a ⋖ b: a call,
    b call or internal; a ≐ b: a call, b return; a ⋗ b: a return or
    internal), so a letter's admissible classes are an intersection and the
    canonical answer picks internal, then return, then call per letter.

    Raises:
        ConflictingMatrix: m is not conflict-free
    """
    domains = _class_domains(m)
    if any(not d for d in domains.values()):
        blocked = sorted(a for a, d in domains.items() if not d)
        logger.debug("classify_vp: no class fits %s", blocked)
        return None
    return VpPartition.from_classes({a: d[0] for a, d in domains.items()})


# -----------------------
# Balanced grammars
# -----------------------
# calls left open, and returns with no call before them; "r" alone is the lone-return case of "Nr"
FORBIDDEN_STENCILS = ("NcN", "Nc", "cN", "c", "Nr", "r")


def rhs_stencil(rule: Rule, p: VpPartition) -> str:
    """Right part skeleton: N for nonterminals, c / r / s for letter classes."""
    out = []
    for sym in rule.rhs:
        if isinstance(sym, Nonterminal):
            out.append('N')
        else:
            kind = p.letter_class(sym.letter)
            out.append({LetterClass.CALL: 'c', LetterClass.RETURN: 'r', LetterClass.INTERNAL: 's'}[kind])
    return "".join(out)


@dataclass
class BalancedReport:
    ok: bool
    violations: List[str]

    def __bool__(self):
        return self.ok


def check_pairing(p: VpPartition, pairing: Mapping[str, str]) -> None:
    if set(pairing) != set(p.calls):
        raise UnpairedAlphabet(f"paired calls {sorted(pairing)} differ from calls {sorted(p.calls)}")
    if set(pairing.values()) != set(p.returns) or len(set(pairing.values())) != len(pairing):
        raise UnpairedAlphabet(f"paired returns {sorted(pairing.values())} differ from returns {sorted(p.returns)}")


def check_balanced_restrictions(g: Grammar, p: VpPartition, pairing: Mapping[str, str]) -> BalancedReport:
    """
    A grammar is balanced when no right part matches a forbidden stencil
    (NcN, Nc, cN, c, Nr, r) and calls are ≐ only to their own paired return.

    Violations are collected rather than raised; a matrix that is not a
    VP-matrix for p is reported as one more violation.

    Raises:
        UnpairedAlphabet: pairing is not a bijection between p's calls and returns
    """
    check_pairing(p, pairing)
    missing = g.terminals - p.alphabet
    if missing:
        raise UnpairedAlphabet(f"letters outside the partition: {sorted(missing)}")
    violations = []
    for rule in g.rules:
        if rule.is_empty:
            continue
        stencil = rhs_stencil(rule, p)
        if stencil in FORBIDDEN_STENCILS:
            violations.append(f"rule {rule} has forbidden stencil {stencil}")

    build = build_opm(g)
    if build.conflicts:
        violations.append("precedence matrix has conflicts: " +
                          ", ".join(f"({a},{b})" for a, b in build.conflicts))
    elif not build.matrix.issubset(total_vp_matrix(p)):
        violations.append("precedence matrix is not a VP-matrix for the partition")
    for c in sorted(p.calls):
        for r in sorted(p.returns):
            if PrecRel.EQUAL in build.matrix.get(c, r) and pairing[c] != r:
                violations.append(f"off-diagonal {c} ≐ {r}")
    return BalancedReport(not violations, violations)
