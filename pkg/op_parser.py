"""
Operator precedence shift-reduce parser for Floyd grammars.

The parser only looks at terminals: the relation between the topmost stacked
terminal and the lookahead decides between shifting (⋖, ≐) and reducing (⋗).
A handle runs from the topmost terminal stacked with ⋖ up to the stack top,
plus the nonterminal just below it, if any. Reductions label the new node with
every left part whose right part fits the handle, so non-invertible grammars
still yield one tree shape per string.
"""

import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple, Union

from errors import NoMatchingRule, ParseError, PrecedenceGap, UnknownTerminal
from grammar_core import Grammar, Nonterminal, Rule, Terminal, Word, as_word, renaming_closure
from precedence import PrecedenceMatrix, PrecRel, floyd_opm

logger = logging.getLogger(__name__)

LEFT_DELIMITER = '|-'
RIGHT_DELIMITER = '-|'
GAP = '.'


@dataclass(frozen=True)
class Leaf:
    letter: str
    position: int

    @property
    def span(self) -> Tuple[int, int]:
        return (self.position, self.position + 1)


@dataclass(frozen=True)
class ParseNode:
    label: FrozenSet[str]
    children: Tuple[Union["ParseNode", Leaf], ...]
    span: Tuple[int, int]

    def leaves(self) -> Iterator[Leaf]:
        for child in self.children:
            if isinstance(child, Leaf):
                yield child
            else:
                yield from child.leaves()

    def frontier(self) -> Word:
        return tuple(leaf.letter for leaf in self.leaves())

    def shape(self) -> tuple:
        """Nested spans, labels left out."""
        return (self.span, tuple(c.shape() if isinstance(c, ParseNode) else c.span for c in self.children))


# -----------------------
# Trace events
# -----------------------
@dataclass(frozen=True)
class Compare:
    left: str
    rel: Optional[PrecRel]
    right: str


@dataclass(frozen=True)
class Shift:
    letter: str
    position: int


@dataclass(frozen=True)
class Reduce:
    length: int
    label: FrozenSet[str]
    span: Tuple[int, int]


TraceEvent = Union[Compare, Shift, Reduce]


@dataclass(frozen=True)
class ParseResult:
    accept: bool
    tree: Optional[ParseNode]
    trace: Tuple[TraceEvent, ...]
    error: Optional[ParseError] = None

    def __iter__(self):
        return iter((self.accept, self.tree, self.trace))

    def __bool__(self):
        return self.accept


@dataclass(frozen=True)
class _Marker:
    """A terminal on the parser stack with the relation it was shifted under."""
    letter: str
    position: int
    rel: Optional[PrecRel]


def _delimited_relation(m: PrecedenceMatrix, a: str, b: str) -> Optional[PrecRel]:
    if a == LEFT_DELIMITER:
        return PrecRel.YIELDS
    if b == RIGHT_DELIMITER:
        return PrecRel.TAKES
    return m.relation(a, b)


class OperatorPrecedenceParser:
    """Parser bound to one grammar; reusable across input strings."""

    def __init__(self, g: Grammar, matrix: Optional[PrecedenceMatrix] = None):
        self.grammar = g
        self.matrix = floyd_opm(g) if matrix is None else matrix
        self.closure = renaming_closure(g)
        self.rules_by_length: Dict[int, List[Rule]] = {}
        for rule in g.rules:
            if rule.is_empty or rule.is_renaming:
                continue
            self.rules_by_length.setdefault(len(rule.rhs), []).append(rule)

    def _names(self, node: ParseNode) -> FrozenSet[str]:
        names = set()
        for label in node.label:
            names |= self.closure[label]
        return frozenset(names)

    def _match(self, handle: Sequence[Union[_Marker, ParseNode]]) -> FrozenSet[str]:
        labels = set()
        for rule in self.rules_by_length.get(len(handle), ()):
            for sym, entry in zip(rule.rhs, handle):
                if isinstance(sym, Terminal):
                    if not isinstance(entry, _Marker) or entry.letter != sym.letter:
                        break
                elif not isinstance(entry, ParseNode) or sym.name not in self._names(entry):
                    break
            else:
                labels.add(rule.lhs)
        return frozenset(labels)

    def parse(self, w: Union[str, Sequence[str]]) -> ParseResult:
        word = as_word(w)
        for letter in word:
            if letter not in self.grammar.terminals:
                raise UnknownTerminal(letter)
        if not word:
            accept = self.grammar.has_empty_rule
            tree = ParseNode(frozenset({self.grammar.axiom}), (), (0, 0)) if accept else None
            return ParseResult(accept, tree, ())

        trace: List[TraceEvent] = []
        stack: List[Union[_Marker, ParseNode]] = [_Marker(LEFT_DELIMITER, -1, None)]
        n = len(word)
        i = 0
        while True:
            top = next(e for e in reversed(stack) if isinstance(e, _Marker))
            look = word[i] if i < n else RIGHT_DELIMITER
            if top.letter == LEFT_DELIMITER and look == RIGHT_DELIMITER:
                break
            rel = _delimited_relation(self.matrix, top.letter, look)
            trace.append(Compare(top.letter, rel, look))
            if rel is None:
                error = PrecedenceGap(i, top.letter, look)
                logger.debug("reject: %s", error)
                return ParseResult(False, None, tuple(trace), error)
            if rel is not PrecRel.TAKES:
                stack.append(_Marker(look, i, rel))
                trace.append(Shift(look, i))
                i += 1
                continue

            handle: List[Union[_Marker, ParseNode]] = []
            while True:
                entry = stack.pop()
                handle.append(entry)
                if isinstance(entry, _Marker) and entry.rel is PrecRel.YIELDS:
                    break
            if isinstance(stack[-1], ParseNode):
                handle.append(stack.pop())
            handle.reverse()

            children = tuple(Leaf(e.letter, e.position) if isinstance(e, _Marker) else e for e in handle)
            span = (children[0].span[0], children[-1].span[1])
            label = self._match(handle)
            if not label:
                error = NoMatchingRule(span, [e.letter if isinstance(e, _Marker) else "N" for e in handle])
                logger.debug("reject: %s", error)
                return ParseResult(False, None, tuple(trace), error)
            stack.append(ParseNode(label, children, span))
            trace.append(Reduce(len(handle), label, span))

        accept = (len(stack) == 2 and isinstance(stack[1], ParseNode)
                  and self.grammar.axiom in self._names(stack[1]))
        tree = stack[1] if accept else None
        return ParseResult(accept, tree, tuple(trace))


def parse(g: Grammar, w: Union[str, Sequence[str]]) -> ParseResult:
    """
    Recognize w with the precedence matrix of g.

    Returns:
        ParseResult; a rejected string carries PrecedenceGap or
        NoMatchingRule in `error` (no exception for input strings)

    Raises:
        NotFloyd: the matrix of g has a conflict
    """
    return OperatorPrecedenceParser(g).parse(w)


# -----------------------
# Relation chains and rendering
# -----------------------
def precedence_trace(m: PrecedenceMatrix, w: Union[str, Sequence[str]]) -> List[Tuple[str, Optional[PrecRel], str]]:
    """Relations between consecutive letters of |- w -|; None marks an empty cell."""
    letters = (LEFT_DELIMITER,) + as_word(w) + (RIGHT_DELIMITER,)
    chain = []
    for a, b in zip(letters, letters[1:]):
        if a == LEFT_DELIMITER and b == RIGHT_DELIMITER:
            chain.append((a, None, b))
        else:
            chain.append((a, _delimited_relation(m, a, b), b))
    return chain


def format_trace(chain: Sequence[Tuple[str, Optional[PrecRel], str]]) -> str:
    if not chain:
        return ""
    parts = [chain[0][0]]
    for _, rel, b in chain:
        parts.append(rel.glyph if rel is not None else GAP)
        parts.append(b)
    return " ".join(parts)


def format_tree(node: Union[ParseNode, Leaf], indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(node, Leaf):
        return f"{pad}{node.letter}"
    lines = [f"{pad}{{{', '.join(sorted(node.label))}}}"]
    lines.extend(format_tree(child, indent + 1) for child in node.children)
    return "\n".join(lines)
