"""
Visibly pushdown automata.

A move is fixed by the class of the letter read: calls push one symbol,
returns pop one (or read the bottom symbol without removing it), internals
leave the stack alone. Runs are computed as frontier sets of configurations;
acceptance is by final state with any stack.
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

from errors import AutomatonError, BudgetExceeded, FormatError, NoFactorization
from grammar_core import Word, as_word
from precedence import LetterClass, VpPartition
from settings import DEFAULTS

logger = logging.getLogger(__name__)

BOTTOM = '_bot'


@dataclass(frozen=True)
class VpAlphabet:
    partition: VpPartition

    def __post_init__(self):
        if not self.partition.alphabet:
            raise AutomatonError("alphabet is empty")

    @classmethod
    def of(cls, calls: Iterable[str] = (), returns: Iterable[str] = (), internals: Iterable[str] = ()) -> "VpAlphabet":
        try:
            return cls(VpPartition(frozenset(calls), frozenset(returns), frozenset(internals)))
        except ValueError as e:
            raise AutomatonError(str(e))

    @property
    def calls(self) -> FrozenSet[str]:
        return self.partition.calls

    @property
    def returns(self) -> FrozenSet[str]:
        return self.partition.returns

    @property
    def internals(self) -> FrozenSet[str]:
        return self.partition.internals

    @property
    def letters(self) -> Tuple[str, ...]:
        return tuple(sorted(self.partition.alphabet))

    def letter_class(self, letter: str) -> LetterClass:
        return self.partition.letter_class(letter)


def _partition_of(p: Union[VpPartition, VpAlphabet]) -> VpPartition:
    return p.partition if isinstance(p, VpAlphabet) else p


# -----------------------
# Transitions and automaton
# -----------------------
@dataclass(frozen=True, order=True)
class Call:
    source: str
    letter: str
    target: str
    push: str

    def __str__(self):
        return f"call {self.source} {self.letter} {self.target} {self.push}"


@dataclass(frozen=True, order=True)
class Return:
    source: str
    letter: str
    top: str
    target: str

    def __str__(self):
        return f"ret {self.source} {self.letter} {self.top} {self.target}"


@dataclass(frozen=True, order=True)
class Internal:
    source: str
    letter: str
    target: str

    def __str__(self):
        return f"int {self.source} {self.letter} {self.target}"


VpdaTransition = Union[Call, Return, Internal]

_EXPECTED_CLASS = {Call: LetterClass.CALL, Return: LetterClass.RETURN, Internal: LetterClass.INTERNAL}


def _transition_problem(t: VpdaTransition, states, alphabet, stack_alphabet) -> Optional[Tuple[str, str]]:
    """(message, offending token) for an ill-formed transition, None when it is well formed."""
    for state in (t.source, t.target):
        if state not in states:
            return f"'{t}' uses an undeclared state", state
    try:
        kind = alphabet.letter_class(t.letter)
    except KeyError:
        return f"'{t}' reads a letter outside the alphabet", t.letter
    if kind is not _EXPECTED_CLASS[type(t)]:
        return f"'{t}' reads a {kind.value} letter", t.letter
    if isinstance(t, Call):
        if t.push == BOTTOM:
            return f"'{t}' pushes the bottom symbol", t.push
        if t.push not in stack_alphabet:
            return f"'{t}' pushes an undeclared stack symbol", t.push
    if isinstance(t, Return) and t.top not in stack_alphabet:
        return f"'{t}' pops an undeclared stack symbol", t.top
    return None


@dataclass(frozen=True)
class Configuration:
    state: str
    stack: Tuple[str, ...] = (BOTTOM,)

    @property
    def height(self) -> int:
        return len(self.stack) - 1

    def __str__(self):
        return f"({self.state}, {' '.join(self.stack)})"


@dataclass(frozen=True)
class Vpda:
    alphabet: VpAlphabet
    states: FrozenSet[str]
    initial: str
    finals: FrozenSet[str]
    stack_alphabet: FrozenSet[str]
    transitions: FrozenSet[VpdaTransition]

    def __post_init__(self):
        object.__setattr__(self, 'states', frozenset(self.states))
        object.__setattr__(self, 'finals', frozenset(self.finals))
        object.__setattr__(self, 'stack_alphabet', frozenset(self.stack_alphabet) | {BOTTOM})
        object.__setattr__(self, 'transitions', frozenset(self.transitions))
        self._validate()

    def _validate(self):
        if self.initial not in self.states:
            raise AutomatonError(f"initial state {self.initial!r} is not a state")
        stray = self.finals - self.states
        if stray:
            raise AutomatonError(f"final states not declared: {sorted(stray)}")
        for t in self.transitions:
            problem = _transition_problem(t, self.states, self.alphabet, self.stack_alphabet)
            if problem is not None:
                raise AutomatonError(problem[0])

    @cached_property
    def _calls(self) -> Dict[Tuple[str, str], List[Tuple[str, str]]]:
        table: Dict[Tuple[str, str], List[Tuple[str, str]]] = {}
        for t in sorted(x for x in self.transitions if isinstance(x, Call)):
            table.setdefault((t.source, t.letter), []).append((t.target, t.push))
        return table

    @cached_property
    def _returns(self) -> Dict[Tuple[str, str, str], List[str]]:
        table: Dict[Tuple[str, str, str], List[str]] = {}
        for t in sorted(x for x in self.transitions if isinstance(x, Return)):
            table.setdefault((t.source, t.letter, t.top), []).append(t.target)
        return table

    @cached_property
    def _internals(self) -> Dict[Tuple[str, str], List[str]]:
        table: Dict[Tuple[str, str], List[str]] = {}
        for t in sorted(x for x in self.transitions if isinstance(x, Internal)):
            table.setdefault((t.source, t.letter), []).append(t.target)
        return table

    def letter_class(self, letter: str) -> LetterClass:
        return self.alphabet.letter_class(letter)

    def step(self, configs: Iterable[Configuration], letter: str) -> FrozenSet[Configuration]:
        kind = self.letter_class(letter)
        out: Set[Configuration] = set()
        for conf in configs:
            if kind is LetterClass.CALL:
                for target, push in self._calls.get((conf.state, letter), ()):
                    out.add(Configuration(target, conf.stack + (push,)))
            elif kind is LetterClass.RETURN:
                top = conf.stack[-1]
                rest = conf.stack if top == BOTTOM else conf.stack[:-1]
                for target in self._returns.get((conf.state, letter, top), ()):
                    out.add(Configuration(target, rest))
            else:
                for target in self._internals.get((conf.state, letter), ()):
                    out.add(Configuration(target, conf.stack))
        return frozenset(out)

    def __str__(self):
        return format_vpda(self)


def _check_letters(a: Vpda, word: Word):
    for letter in word:
        try:
            a.letter_class(letter)
        except KeyError:
            raise AutomatonError(f"letter {letter!r} is not in the automaton's alphabet")


def frontiers(a: Vpda, w: Union[str, Sequence[str]]) -> Iterator[FrozenSet[Configuration]]:
    """Frontier before each letter and after the last one."""
    word = as_word(w)
    _check_letters(a, word)
    configs = frozenset({Configuration(a.initial)})
    yield configs
    for letter in word:
        configs = a.step(configs, letter) if configs else configs
        yield configs


def run(a: Vpda, w: Union[str, Sequence[str]]) -> FrozenSet[Configuration]:
    """All configurations reachable from (initial, ⊥) on w."""
    configs = frozenset()
    for configs in frontiers(a, w):
        pass
    return configs


def accepts(a: Vpda, w: Union[str, Sequence[str]]) -> bool:
    return any(conf.state in a.finals for conf in run(a, w))


def enumerate_accepted(a: Vpda, max_len: int, budget: Optional[int] = None) -> Set[Word]:
    """
    Every accepted string of length <= max_len.

    Prefixes reaching the same configuration set share one successor
    computation; prefixes with an empty frontier are dropped.
    """
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    budget = DEFAULTS['config_budget'] if budget is None else budget
    letters = a.alphabet.letters
    spent = 0
    accepted: Set[Word] = set()
    level: Dict[FrozenSet[Configuration], List[Word]] = {frozenset({Configuration(a.initial)}): [()]}
    for length in range(max_len + 1):
        for configs, prefixes in level.items():
            if any(conf.state in a.finals for conf in configs):
                accepted.update(prefixes)
        if length == max_len:
            break
        successors: Dict[FrozenSet[Configuration], List[Word]] = {}
        for configs, prefixes in level.items():
            for letter in letters:
                nxt = a.step(configs, letter)
                if not nxt:
                    continue
                spent += len(nxt)
                if spent > budget:
                    raise BudgetExceeded("accepted-string enumeration", budget)
                successors.setdefault(nxt, []).extend(p + (letter,) for p in prefixes)
        level = successors
        if not level:
            break
    logger.debug("enumerate_accepted: %d strings up to length %d", len(accepted), max_len)
    return accepted


# -----------------------
# Nesting structure of strings
# -----------------------
def rho(p: Union[VpPartition, VpAlphabet], x: Union[str, Sequence[str]]) -> str:
    """Calls -> 'c', returns -> 'r', internals dropped."""
    p = _partition_of(p)
    out = []
    for letter in as_word(x):
        kind = p.letter_class(letter)
        if kind is LetterClass.CALL:
            out.append('c')
        elif kind is LetterClass.RETURN:
            out.append('r')
    return "".join(out)


def is_well_parenthesized(s: str) -> bool:
    depth = 0
    for ch in s:
        if ch == 'c':
            depth += 1
        elif ch == 'r':
            depth -= 1
            if depth < 0:
                return False
        else:
            raise ValueError(f"expected a string over {{c, r}}, got {ch!r}")
    return depth == 0


def is_well_balanced(p: Union[VpPartition, VpAlphabet], x: Union[str, Sequence[str]]) -> bool:
    return is_well_parenthesized(rho(p, x))


def is_well_closed(p: Union[VpPartition, VpAlphabet], x: Union[str, Sequence[str]]) -> bool:
    p = _partition_of(p)
    word = as_word(x)
    return (bool(word) and word[0] in p.calls and word[-1] in p.returns
            and is_well_balanced(p, word))


@dataclass(frozen=True)
class Factorization:
    """
    x = u1 w1 u2 w2 ... uk wk c0 v1 c1 ... v_r, or x = y when c0 is None.

    y_parts holds (u_j, w_j) pairs, w_j empty only in a trailing pair;
    z_parts holds (v_j, c_j) pairs with c_j None in the last pair.
    """
    y_parts: Tuple[Tuple[Word, Word], ...]
    c0: Optional[str]
    z_parts: Tuple[Tuple[Word, Optional[str]], ...]
    canonical: bool = field(default=False, compare=False)

    @property
    def y(self) -> Word:
        return tuple(itertools.chain.from_iterable(u + w for u, w in self.y_parts))

    @property
    def z(self) -> Word:
        out: List[str] = []
        for v, c in self.z_parts:
            out.extend(v)
            if c is not None:
                out.append(c)
        return tuple(out)

    def word(self) -> Word:
        if self.c0 is None:
            return self.y
        return self.y + (self.c0,) + self.z

    def to_dict(self) -> dict:
        return {
            'y': [{'u': " ".join(u), 'w': " ".join(w)} for u, w in self.y_parts],
            'c0': self.c0,
            'z': [{'v': " ".join(v), 'c': c} for v, c in self.z_parts],
            'canonical': self.canonical,
        }

    def __str__(self):
        parts = []
        for j, (u, w) in enumerate(self.y_parts, start=1):
            if u:
                parts.append(f"u{j}={' '.join(u)}")
            if w:
                parts.append(f"w{j}={' '.join(w)}")
        if self.c0 is not None:
            parts.append(f"c0={self.c0}")
            for j, (v, c) in enumerate(self.z_parts, start=1):
                if v:
                    parts.append(f"v{j}={' '.join(v)}")
                if c is not None:
                    parts.append(f"c{j}={c}")
        return " ".join(parts) if parts else "ε"


def _unmatched_calls(p: VpPartition, word: Word) -> List[int]:
    pending: List[int] = []
    for i, letter in enumerate(word):
        kind = p.letter_class(letter)
        if kind is LetterClass.CALL:
            pending.append(i)
        elif kind is LetterClass.RETURN and pending:
            pending.pop()
    return pending


def _top_level_items(p: VpPartition, y: Word) -> List[Tuple[str, Word]]:
    """y split into single loose letters ('u') and minimal closed pieces ('w')."""
    items: List[Tuple[str, Word]] = []
    depth = 0
    start = 0
    for i, letter in enumerate(y):
        kind = p.letter_class(letter)
        if depth == 0 and kind is not LetterClass.CALL:
            items.append(('u', (letter,)))
            continue
        if depth == 0:
            start = i
        depth += 1 if kind is LetterClass.CALL else -1 if kind is LetterClass.RETURN else 0
        if depth == 0:
            items.append(('w', y[start:i + 1]))
    return items


def _assemble_y(items: List[Tuple[str, Word]], merges: Dict[int, bool]) -> Tuple[Tuple[Word, Word], ...]:
    """merges[k] joins piece k with piece k+1 together with the internals between them."""
    pairs: List[Tuple[Word, Word]] = []
    u: List[str] = []
    w: List[str] = []
    gap: List[str] = []
    piece = -1
    open_group = False
    for kind, text in items:
        if kind == 'w':
            piece += 1
            if open_group:
                w.extend(gap)
                w.extend(text)
            else:
                u.extend(gap)
                w = list(text)
            gap = []
            open_group = merges.get(piece, False)
            if not open_group:
                pairs.append((tuple(u), tuple(w)))
                u, w = [], []
        elif open_group:
            gap.append(text[0])
        else:
            u.extend(text)
    if u:
        pairs.append((tuple(u), ()))
    return tuple(pairs)


def factorize(p: Union[VpPartition, VpAlphabet], x: Union[str, Sequence[str]]) -> List[Factorization]:
    """
    Every decomposition x = y c0 z (or x = y), canonical one first.

    c0 is the first unmatched call and z splits at the later unmatched calls,
    so only the grouping of y is ambiguous: neighbouring closed pieces with
    nothing but internals between them may form one w or several. The
    canonical decomposition uses one minimal closed piece per w.
    """
    p = _partition_of(p)
    word = as_word(x)
    for letter in word:
        try:
            p.letter_class(letter)
        except KeyError:
            raise AutomatonError(f"letter {letter!r} is not in the alphabet")

    unmatched = _unmatched_calls(p, word)
    if unmatched:
        cut = unmatched[0]
        y, c0 = word[:cut], word[cut]
        z_parts = []
        prev = cut + 1
        for pos in unmatched[1:]:
            z_parts.append((word[prev:pos], word[pos]))
            prev = pos + 1
        z_parts.append((word[prev:], None))
        z_parts = tuple(z_parts)
    else:
        y, c0, z_parts = word, None, ()

    items = _top_level_items(p, y)
    piece_positions = [k for k, (kind, _) in enumerate(items) if kind == 'w']
    mergeable = []
    for j in range(len(piece_positions) - 1):
        between = items[piece_positions[j] + 1:piece_positions[j + 1]]
        if all(p.letter_class(text[0]) is LetterClass.INTERNAL for _, text in between):
            mergeable.append(j)

    results = []
    for choice in itertools.product((False, True), repeat=len(mergeable)):
        merges = dict(zip(mergeable, choice))
        fact = Factorization(_assemble_y(items, merges), c0, z_parts, canonical=not any(choice))
        if fact.word() != word:
            raise NoFactorization(word)
        results.append(fact)
    return results


def canonical_factorization(p: Union[VpPartition, VpAlphabet], x: Union[str, Sequence[str]]) -> Factorization:
    return factorize(p, x)[0]


# -----------------------
# Text format
# -----------------------
_HEADERS = ('%calls', '%returns', '%internals', '%states', '%initial', '%final', '%stack')


def parse_vpda(text: str, path: Optional[str] = None) -> Vpda:
    """
    Read the automaton format:

        %calls c
        %returns r
        %internals s
        %states q0 q1
        %initial q0
        %final q0
        %stack Z
        call q0 c q1 Z
        ret q1 r Z q0        (_bot for the bottom symbol)
        int q0 s q0
    """
    headers: Dict[str, List[str]] = {}
    header_lines: Dict[str, int] = {}
    transitions: List[Tuple[int, VpdaTransition]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split('#', 1)[0].split()
        if not tokens:
            continue
        head = tokens[0]
        if head.startswith('%'):
            if head not in _HEADERS:
                raise FormatError("unknown directive", path, lineno, head)
            if head in headers:
                raise FormatError("directive repeated", path, lineno, head)
            headers[head] = tokens[1:]
            header_lines[head] = lineno
            continue
        arity = {'call': 5, 'ret': 5, 'int': 4}.get(head)
        if arity is None:
            raise FormatError("expected a directive or call/ret/int line", path, lineno, head)
        if len(tokens) != arity:
            raise FormatError(f"'{head}' line takes {arity - 1} fields", path, lineno, raw.strip())
        kind = {'call': Call, 'ret': Return, 'int': Internal}[head]
        transitions.append((lineno, kind(*tokens[1:])))

    for required in ('%states', '%initial'):
        if required not in headers:
            raise FormatError(f"missing {required} header", path)
    if len(headers['%initial']) != 1:
        raise FormatError("%initial takes exactly one state", path, header_lines['%initial'],
                          " ".join(headers['%initial']))

    try:
        alphabet = VpAlphabet.of(headers.get('%calls', ()), headers.get('%returns', ()), headers.get('%internals', ()))
    except AutomatonError as e:
        raise FormatError(str(e), path, header_lines.get('%calls'))
    states = frozenset(headers['%states'])
    for head in ('%initial', '%final'):
        for state in headers.get(head, ()):
            if state not in states:
                raise FormatError(f"{head} names an undeclared state", path, header_lines[head], state)
    stack = frozenset(headers.get('%stack', ()))
    for lineno, t in transitions:
        problem = _transition_problem(t, states, alphabet, stack | {BOTTOM})
        if problem is not None:
            raise FormatError(problem[0], path, lineno, problem[1])

    try:
        return Vpda(
            alphabet=alphabet,
            states=states,
            initial=headers['%initial'][0],
            finals=frozenset(headers.get('%final', ())),
            stack_alphabet=stack,
            transitions=frozenset(t for _, t in transitions),
        )
    except AutomatonError as e:
        raise FormatError(str(e), path)


def load_vpda(path) -> Vpda:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise FormatError(f"cannot read automaton: {e.strerror}", str(path))
    return parse_vpda(text, str(path))


def format_vpda(a: Vpda) -> str:
    lines = [
        "%calls " + " ".join(sorted(a.alphabet.calls)),
        "%returns " + " ".join(sorted(a.alphabet.returns)),
        "%internals " + " ".join(sorted(a.alphabet.internals)),
        "%states " + " ".join(sorted(a.states)),
        f"%initial {a.initial}",
        "%final " + " ".join(sorted(a.finals)),
        "%stack " + " ".join(sorted(a.stack_alphabet - {BOTTOM})),
    ]
    lines = [line.rstrip() for line in lines]
    for kind in (Call, Return, Internal):
        lines.extend(str(t) for t in sorted(x for x in a.transitions if isinstance(x, kind)))
    return "\n".join(lines) + "\n"
