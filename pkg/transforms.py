"""
Conversions between visibly pushdown automata and Floyd grammars.

vpda_to_fg
    The automaton is first split into phases: a fresh initial state, a copy
    of every state for the part of the input before the first unmatched call
    (q-phase) and a copy for the part after it (p-phase). Calls may jump from
    the q-phase into the p-phase, and p-phase calls may stay unmatched; both
    push a dedicated symbol that no return pops. Grammar nonterminals then
    stand for pairs of states (balanced segments), triples (segments between
    a call pushing a given symbol and its return) and tails (the part after
    the first unmatched call). The result is reduced.

fg_to_vpda
    The automaton reads a string segment by segment. A state records the
    nonterminal just completed and the context of the segment: the
    nonterminal the segment must end up deriving, or '-' inside a matched
    call/return pair. Stack symbols remember the rule prefix pushed at a call
    together with the context to restore when it is popped.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

from errors import AxiomUnproductive, NotFloyd, NotVpMatrix
from grammar_core import (Grammar, Nonterminal, Rule, Terminal, reduce, renaming_closure, reverse_rules,
                          rightmost_nonterminals)
from precedence import (PrecedenceMatrix, VpPartition, build_opm, classify_vp, format_matrix, rhs_stencil,
                        total_vp_matrix)
from vpda_core import BOTTOM, Call, Internal, Return, VpAlphabet, Vpda

logger = logging.getLogger(__name__)


# -----------------------
# Construction report
# -----------------------
@dataclass
class ConstructionReport:
    construction: str
    unit: str
    sections: Dict[str, int] = field(default_factory=dict)
    emitted: int = 0
    removed: int = 0
    matrix: Optional[PrecedenceMatrix] = None
    conflict_free: bool = True
    vp_matrix: bool = True
    partition: Optional[VpPartition] = None
    reconciliations: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def final_count(self) -> int:
        return self.emitted - self.removed

    def to_dict(self) -> dict:
        return {
            'construction': self.construction,
            'unit': self.unit,
            'sections': dict(self.sections),
            'emitted': self.emitted,
            'removed': self.removed,
            'final': self.final_count,
            'matrix': format_matrix(self.matrix) if self.matrix is not None else None,
            'conflict_free': self.conflict_free,
            'vp_matrix': self.vp_matrix,
            'partition': self.partition.to_dict() if self.partition is not None else None,
            'reconciliations': list(self.reconciliations),
            'notes': list(self.notes),
        }

    def render(self) -> str:
        lines = [f"== {self.construction} =="]
        for name, count in self.sections.items():
            lines.append(f"  {name:<16} {count:>6} {self.unit}")
        lines.append(f"  {'emitted':<16} {self.emitted:>6}")
        lines.append(f"  {'removed':<16} {self.removed:>6}")
        lines.append(f"  {'final':<16} {self.final_count:>6}")
        if self.partition is not None:
            lines.append(f"  partition: {self.partition}")
        verdict = "conflict-free" if self.conflict_free else "has conflicts"
        verdict += ", VP-matrix" if self.vp_matrix else ", not a VP-matrix"
        lines.append(f"  matrix: {verdict}")
        if self.matrix is not None and self.matrix.alphabet:
            lines.extend("    " + row for row in format_matrix(self.matrix).rstrip("\n").split("\n"))
        for item in self.reconciliations:
            lines.append(f"  reconciled: {item}")
        for item in self.notes:
            lines.append(f"  note: {item}")
        return "\n".join(lines)


def _fresh(base: str, taken: Iterable[str]) -> str:
    taken = set(taken)
    name = base
    while name in taken:
        name += "'"
    return name


def _closure(start: Set[str], edges: Iterable[Tuple[str, str]]) -> Set[str]:
    """Nodes reachable from `start` along directed (from, to) edges."""
    following: Dict[str, List[str]] = {}
    for a, b in edges:
        following.setdefault(a, []).append(b)
    seen = set(start)
    todo = list(start)
    while todo:
        for nxt in following.get(todo.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return seen


# -----------------------
# Phase splitting
# -----------------------
class Phase(enum.Enum):
    START = 'Q0'
    BEFORE = 'q'    # before the first unmatched call
    AFTER = 'p'     # after it


@dataclass(frozen=True)
class PhaseTaggedState:
    base: str
    phase: Phase

    def __str__(self):
        return f"{self.phase.value}:{self.base}"


@dataclass
class PhaseSplit:
    vpda: Vpda
    start: str
    before: List[str]
    after: List[str]
    unmatched: str

    def group(self, state: str) -> str:
        return 'p' if state in self._after_set else 'q'

    def __post_init__(self):
        self._after_set = set(self.after)


def _split(a: Vpda) -> PhaseSplit:
    unmatched = _fresh("Z_U", a.stack_alphabet)
    start = str(PhaseTaggedState(a.initial, Phase.START))

    def q(s):
        return str(PhaseTaggedState(s, Phase.BEFORE))

    def p(s):
        return str(PhaseTaggedState(s, Phase.AFTER))

    transitions: Set = set()
    for t in a.transitions:
        if isinstance(t, Call):
            transitions.add(Call(q(t.source), t.letter, q(t.target), t.push))
            transitions.add(Call(q(t.source), t.letter, p(t.target), unmatched))
            transitions.add(Call(p(t.source), t.letter, p(t.target), t.push))
            transitions.add(Call(p(t.source), t.letter, p(t.target), unmatched))
            if t.source == a.initial:
                transitions.add(Call(start, t.letter, q(t.target), t.push))
                transitions.add(Call(start, t.letter, p(t.target), unmatched))
        elif isinstance(t, Return):
            transitions.add(Return(q(t.source), t.letter, t.top, q(t.target)))
            if t.top != BOTTOM:
                transitions.add(Return(p(t.source), t.letter, t.top, p(t.target)))
            elif t.source == a.initial:
                transitions.add(Return(start, t.letter, BOTTOM, q(t.target)))
        else:
            transitions.add(Internal(q(t.source), t.letter, q(t.target)))
            transitions.add(Internal(p(t.source), t.letter, p(t.target)))
            if t.source == a.initial:
                transitions.add(Internal(start, t.letter, q(t.target)))

    before = [q(s) for s in sorted(a.states)]
    after = [p(s) for s in sorted(a.states)]
    finals = {q(f) for f in a.finals} | {p(f) for f in a.finals}
    if a.initial in a.finals:
        finals.add(start)
    vpda = Vpda(
        alphabet=a.alphabet,
        states=frozenset([start] + before + after),
        initial=start,
        finals=frozenset(finals),
        stack_alphabet=a.stack_alphabet | {unmatched},
        transitions=frozenset(transitions),
    )
    return PhaseSplit(vpda, start, before, after, unmatched)


def phase_split(a: Vpda) -> Vpda:
    """Equivalent automaton with a fresh initial state and before/after phase copies."""
    return _split(a).vpda


# -----------------------
# VPDA -> grammar
# -----------------------
@dataclass(frozen=True)
class Pair:
    left: str
    right: str

    @property
    def name(self) -> str:
        return f"<{self.left},{self.right}>"


@dataclass(frozen=True)
class Triple:
    left: str
    stack: str
    right: str

    @property
    def name(self) -> str:
        return f"<{self.left},{self.stack},{self.right}>"


@dataclass(frozen=True)
class Tail:
    left: str
    right: str

    @property
    def name(self) -> str:
        return f"{{{self.left},{self.right}}}"


@dataclass(frozen=True)
class Axiom:
    label: str = "S"

    @property
    def name(self) -> str:
        return self.label


GrammarNonterminal = Union[Pair, Triple, Tail, Axiom]

VPDA_TO_FG_RECONCILIATIONS = [
    "tail nonterminals (after the first unmatched call) are kept apart from balanced pairs",
    "pairs and triples extend on the right with internal moves and start with a bare internal letter",
    "a call/return pair with empty content yields its own 'c r' rules",
    "the prefix pair in front of a call/return pair starts at the state of the enclosing nonterminal",
]


class _RuleSink:
    def __init__(self):
        self.rules: List[Rule] = []
        self.sections: Dict[str, int] = {}
        self._seen: Set[Rule] = set()

    def emit(self, section: str, head: GrammarNonterminal, body: Sequence[Union[GrammarNonterminal, str]]):
        rhs = tuple(Terminal(x) if isinstance(x, str) else Nonterminal(x.name) for x in body)
        rule = Rule(head.name, rhs)
        self.sections.setdefault(section, 0)
        if rule not in self._seen:
            self._seen.add(rule)
            self.rules.append(rule)
            self.sections[section] += 1


def vpda_to_fg(a: Vpda) -> Tuple[Grammar, ConstructionReport]:
    """
    A reduced Floyd grammar with the language of a.

    Every right part has at most four symbols, and the precedence matrix of
    the result is contained in the total VP matrix of a's alphabet. An
    automaton accepting nothing yields the grammar with no rules.
    """
    split = _split(a)
    sp = split.vpda
    letters = set(a.alphabet.letters)
    axiom = Axiom(_fresh("S", letters))

    internals = sorted(t for t in sp.transitions if isinstance(t, Internal))
    matched_calls = sorted(t for t in sp.transitions if isinstance(t, Call) and t.push != split.unmatched)
    unmatched_calls = sorted(t for t in sp.transitions if isinstance(t, Call) and t.push == split.unmatched)
    returns_by_top: Dict[str, List[Return]] = {}
    bottom_returns = []
    for t in sorted(x for x in sp.transitions if isinstance(x, Return)):
        if t.top == BOTTOM:
            bottom_returns.append(t)
        else:
            returns_by_top.setdefault(t.top, []).append(t)

    def balanced(left: str) -> List[Tuple[List, str]]:
        """(right part, right state) of every balanced segment rule anchored at `left`."""
        out = []
        group = split.group(left)
        for t in internals:
            if t.source == left:
                out.append(([t.letter], t.target))
            if t.source != split.start and split.group(t.source) == group:
                out.append(([Pair(left, t.source), t.letter], t.target))
        for call in matched_calls:
            direct = call.source == left
            prefixed = call.source != split.start and split.group(call.source) == group
            if not (direct or prefixed):
                continue
            for ret in returns_by_top.get(call.push, ()):
                if split.group(ret.source) != split.group(call.target):
                    continue
                bodies = [[call.letter, Triple(call.target, call.push, ret.source), ret.letter]]
                if ret.source == call.target:
                    bodies.append([call.letter, ret.letter])
                for body in bodies:
                    if direct:
                        out.append((body, ret.target))
                    if prefixed:
                        out.append(([Pair(left, call.source)] + body, ret.target))
        return out

    sink = _RuleSink()

    # axiom
    if split.start in sp.finals:
        sink.emit("axiom", axiom, [])
    for f in split.before:
        if f in sp.finals:
            sink.emit("axiom", axiom, [Pair(split.start, f)])
    after_finals = [f for f in split.after if f in sp.finals]
    for call in unmatched_calls:
        if split.group(call.source) != 'q':
            continue
        prefix = [] if call.source == split.start else [Pair(split.start, call.source)]
        for f in after_finals:
            sink.emit("axiom", axiom, prefix + [call.letter, Tail(call.target, f)])
        if call.target in sp.finals:
            sink.emit("axiom", axiom, prefix + [call.letter])

    # prefix segments from the fresh initial state (unmatched returns allowed)
    for body, target in balanced(split.start):
        sink.emit("prefix", Pair(split.start, target), body)
    for t in bottom_returns:
        if t.source == split.start:
            sink.emit("prefix", Pair(split.start, t.target), [t.letter])
        else:
            sink.emit("prefix", Pair(split.start, t.target), [Pair(split.start, t.source), t.letter])

    # balanced pairs and triples
    for left in split.before + split.after:
        for body, target in balanced(left):
            sink.emit("balanced", Pair(left, target), body)
    for source, push in sorted({(c.target, c.push) for c in matched_calls}):
        for body, target in balanced(source):
            sink.emit("balanced", Triple(source, push, target), body)

    # tails
    for left in split.after:
        for f in after_finals:
            head = Tail(left, f)
            for call in unmatched_calls:
                if split.group(call.source) != 'p':
                    continue
                prefixes = [[Pair(left, call.source)]]
                if call.source == left:
                    prefixes.append([])
                for prefix in prefixes:
                    sink.emit("tail", head, prefix + [call.letter, Tail(call.target, f)])
                    if call.target == f:
                        sink.emit("tail", head, prefix + [call.letter])
            for body, target in balanced(left):
                if target == f:
                    sink.emit("tail", head, body)

    raw = Grammar.from_rules(axiom.name, letters, sink.rules)
    report = ConstructionReport("vpda_to_fg", "rules", dict(sink.sections), emitted=len(sink.rules),
                                reconciliations=list(VPDA_TO_FG_RECONCILIATIONS))
    try:
        g = reduce(raw)
    except AxiomUnproductive as e:
        g = e.grammar
        report.notes.append("the automaton accepts no string; the grammar has no rules")
    report.removed = report.emitted - len(g.rules)

    build = build_opm(g)
    report.matrix = build.matrix
    report.conflict_free = build.is_floyd
    report.vp_matrix = build.matrix.issubset(total_vp_matrix(a.alphabet.partition))
    report.partition = a.alphabet.partition
    logger.info("vpda_to_fg: %d rules emitted, %d kept", report.emitted, len(g.rules))
    return g, report


# -----------------------
# Grammar -> VPDA
# -----------------------
SUPPORTED_STENCILS = frozenset({
    "s", "Ns",                    # internal moves
    "r", "Nr",                    # returns on the bottom symbol
    "cr", "cNr", "Ncr", "NcNr",   # matched call/return pairs
    "c", "cN", "Nc", "NcN",       # unmatched calls
})

FG_TO_VPDA_RECONCILIATIONS = [
    "states carry the nonterminal the current segment must derive ('-' inside a call/return pair)",
    "matched-call stack symbols carry the context restored when they are popped",
    "unmatched calls are allowed only when the rule's left part renames up to the segment target",
]

NO_CONTEXT = '-'


def fg_to_vpda(g: Grammar, partition: Optional[VpPartition] = None) -> Tuple[Vpda, ConstructionReport]:
    """
    Nondeterministic VPDA accepting the language of a Floyd grammar whose
    precedence matrix is a VP-matrix.

    Args:
        g: Floyd grammar
        partition: letter classes to use; the canonical classification of
            the grammar's matrix when None

    Raises:
        NotFloyd: the matrix has conflicts
        NotVpMatrix: no partition (or not the given one) contains the matrix
    """
    build = build_opm(g)
    if build.conflicts:
        raise NotFloyd(build.conflicts)
    if partition is None:
        partition = classify_vp(build.matrix)
        if partition is None:
            raise NotVpMatrix("precedence matrix is not contained in any total VP matrix")
    else:
        if partition.alphabet != g.terminals:
            raise NotVpMatrix("partition letters differ from the grammar's terminals")
        if not build.matrix.issubset(total_vp_matrix(partition)):
            raise NotVpMatrix("precedence matrix is not contained in the total VP matrix of the partition")

    by_stencil: Dict[str, List[Rule]] = {}
    for rule in g.rules:
        if rule.is_empty or rule.is_renaming:
            continue
        stencil = rhs_stencil(rule, partition)
        if stencil not in SUPPORTED_STENCILS:
            raise NotVpMatrix(f"rule {rule} has stencil {stencil}")
        by_stencil.setdefault(stencil, []).append(rule)

    up = renaming_closure(g)
    S = g.axiom
    seg = _fresh("p", g.nonterminals)
    q0, qF, zu = "q0", "qF", "Z_U"

    targets: List[str] = []
    for stencil in ("cN", "NcN"):
        for rule in by_stencil.get(stencil, ()):
            target = rule.rhs[-1].name
            if target not in targets:
                targets.append(target)
    contexts = [S] + [t for t in targets if t != S] + [NO_CONTEXT]

    def state(node: str, ctx: str) -> str:
        return f"{node}/{ctx}"

    def symbol(left: Optional[str], call: str, content: Optional[str], ctx: str) -> str:
        return f"[{left or NO_CONTEXT},{call},{content or NO_CONTEXT},{ctx}]"

    def ancestors(name: str) -> List[str]:
        return sorted(up[name])

    sections: Dict[str, List] = {name: [] for name in
                                 ("internal", "bottom return", "matched call", "matched return", "unmatched call")}
    pushed: Dict[str, Tuple[Optional[str], str, Optional[str], str]] = {}

    def push(source: str, call: str, left: Optional[str], content: Optional[str], ctx: str):
        sym = symbol(left, call, content, ctx)
        pushed[sym] = (left, call, content, ctx)
        sections["matched call"].append(Call(source, call, state(seg, NO_CONTEXT), sym))

    def unmatched(source: str, rule: Rule, ctx: str):
        if ctx == NO_CONTEXT or ctx not in up[rule.lhs]:
            return
        call = next(s.letter for s in rule.rhs if isinstance(s, Terminal))
        last = rule.rhs[-1]
        target = state(seg, last.name) if isinstance(last, Nonterminal) else qF
        sections["unmatched call"].append(Call(source, call, target, zu))

    def letter(rule: Rule, index: int) -> str:
        return rule.rhs[index].letter

    # segment starts
    starts = [(q0, S, True)] + [(state(seg, t), t, False) for t in targets] + [(state(seg, NO_CONTEXT), NO_CONTEXT, False)]
    for source, ctx, top in starts:
        for rule in by_stencil.get("s", ()):
            for parent in ancestors(rule.lhs):
                sections["internal"].append(Internal(source, letter(rule, 0), state(parent, ctx)))
        if top:
            for rule in by_stencil.get("r", ()):
                for parent in ancestors(rule.lhs):
                    sections["bottom return"].append(Return(source, letter(rule, 0), BOTTOM, state(parent, ctx)))
        for rule in by_stencil.get("cNr", ()):
            push(source, letter(rule, 0), None, rule.rhs[1].name, ctx)
        for rule in by_stencil.get("cr", ()):
            push(source, letter(rule, 0), None, None, ctx)
        for rule in by_stencil.get("cN", []) + by_stencil.get("c", []):
            unmatched(source, rule, ctx)

    # after a completed nonterminal
    for node in sorted(g.nonterminals):
        for ctx in contexts:
            source = state(node, ctx)
            for rule in by_stencil.get("Ns", ()):
                if rule.rhs[0].name == node:
                    for parent in ancestors(rule.lhs):
                        sections["internal"].append(Internal(source, letter(rule, 1), state(parent, ctx)))
            if ctx == S:
                for rule in by_stencil.get("Nr", ()):
                    if rule.rhs[0].name == node:
                        for parent in ancestors(rule.lhs):
                            sections["bottom return"].append(
                                Return(source, letter(rule, 1), BOTTOM, state(parent, ctx)))
            for rule in by_stencil.get("NcNr", ()):
                if rule.rhs[0].name == node:
                    push(source, letter(rule, 1), node, rule.rhs[2].name, ctx)
            for rule in by_stencil.get("Ncr", ()):
                if rule.rhs[0].name == node:
                    push(source, letter(rule, 1), node, None, ctx)
            for rule in by_stencil.get("NcN", []) + by_stencil.get("Nc", []):
                if rule.rhs[0].name == node:
                    unmatched(source, rule, ctx)

    # pops of matched calls
    closers: Dict[Tuple[Optional[str], str, Optional[str]], List[Tuple[str, str]]] = {}
    for stencil in ("cNr", "cr", "NcNr", "Ncr"):
        for rule in by_stencil.get(stencil, ()):
            rhs = rule.rhs
            if stencil.startswith('N'):
                left, call, content = rhs[0].name, rhs[1].letter, rhs[2].name if stencil == "NcNr" else None
            else:
                left, call, content = None, rhs[0].letter, rhs[1].name if stencil == "cNr" else None
            closers.setdefault((left, call, content), []).append((rule.lhs, rule.rhs[-1].letter))
    for sym in sorted(pushed):
        left, call, content, ctx = pushed[sym]
        source = state(content, NO_CONTEXT) if content else state(seg, NO_CONTEXT)
        for lhs, ret in closers.get((left, call, content), ()):
            for parent in ancestors(lhs):
                sections["matched return"].append(Return(source, ret, sym, state(parent, ctx)))

    # a segment ends the input once its context target is complete; only rightmost nonterminals end a string
    right = rightmost_nonterminals(g)
    finals = {qF} | {state(t, t) for t in [S] + targets if t in right}
    if g.has_empty_rule:
        finals.add(q0)

    # keep only what q0 reaches and what still reaches a final state
    emitted: Dict[str, List] = {name: list(dict.fromkeys(ts)) for name, ts in sections.items()}
    all_transitions = [t for ts in emitted.values() for t in ts]
    kept = all_transitions
    while True:
        reached = _closure({q0}, [(t.source, t.target) for t in kept])
        productive = _closure(finals & (reached | {qF}), [(t.target, t.source) for t in kept])
        pushes = {t.push for t in kept if isinstance(t, Call) and t.source in reached}
        pruned = [t for t in kept
                  if t.source in reached and t.source in productive and t.target in productive
                  and (not isinstance(t, Return) or t.top == BOTTOM or t.top in pushes)]
        if len(pruned) == len(kept):
            break
        kept = pruned

    finals &= reached | {qF}
    states = {q0} | {t.source for t in kept} | {t.target for t in kept} | finals
    vpda = Vpda(VpAlphabet(partition), frozenset(states), q0, frozenset(finals), frozenset(pushes), frozenset(kept))

    report = ConstructionReport(
        "fg_to_vpda", "transitions",
        sections={name: len(ts) for name, ts in emitted.items()},
        emitted=len(all_transitions),
        removed=len(all_transitions) - len(kept),
        matrix=build.matrix,
        conflict_free=True,
        vp_matrix=True,
        partition=partition,
        reconciliations=list(FG_TO_VPDA_RECONCILIATIONS),
    )
    logger.info("fg_to_vpda: %d states, %d transitions", len(states), len(kept))
    return vpda, report


# -----------------------
# Reversal
# -----------------------
def reverse_fg(g: Grammar) -> Tuple[Grammar, PrecedenceMatrix]:
    """Mirrored Floyd grammar and its matrix (the dual of the original)."""
    original = build_opm(g)
    if original.conflicts:
        raise NotFloyd(original.conflicts)
    mirrored = reverse_rules(g)
    build = build_opm(mirrored)
    if build.conflicts:
        raise NotFloyd(build.conflicts)
    return mirrored, build.matrix
