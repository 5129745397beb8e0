"""
Command-line front end for the Floyd grammar / VPDA toolkit.

    python main.py check presets/g3.fg
    python main.py parse presets/g3.fg --input "e f b d"
    python main.py from-vpda presets/dyck.vpda -o dyck.fg
    python main.py equiv --max-len 8 dyck.fg presets/dyck.vpda

Artifacts are typed by extension: .vpda is an automaton, .opm a precedence
matrix, anything else a grammar. Exit status is 0 for affirmative outcomes,
1 for negative ones and 2 for unreadable input.
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from errors import ConflictingMatrix, FormatError, NotOperatorForm, NotVpMatrix, ToolkitError
from grammar_core import (Grammar, Word, as_word, enumerate_language, format_grammar, format_word,
                          is_fischer_normal_form, is_invertible, parse_grammar)
from op_parser import Leaf, ParseNode, format_trace, format_tree, parse, precedence_trace
from precedence import (PrecedenceMatrix, VpPartition, build_opm, check_balanced_restrictions, classify_vp,
                        format_matrix, parse_matrix)
from settings import Settings, load_settings
from transforms import fg_to_vpda, reverse_fg, vpda_to_fg
from vpda_core import Vpda, accepts, canonical_factorization, enumerate_accepted, format_vpda, parse_vpda, run

logger = logging.getLogger(__name__)

COMMANDS = ('check', 'opm', 'classify', 'parse', 'trace', 'enum', 'run', 'factorize',
            'to-vpda', 'from-vpda', 'reverse', 'equiv')

Artifact = Union[Grammar, Vpda, PrecedenceMatrix]


@dataclass
class Command:
    name: str
    paths: List[str]
    input: Optional[str] = None
    max_len: Optional[int] = None
    output: Optional[str] = None
    json: bool = False
    pairing: Optional[str] = None
    balanced: bool = False
    # artifact texts keyed by path, used instead of reading the file system
    sources: Dict[str, str] = field(default_factory=dict)


@dataclass
class CommandResult:
    status: int
    summary: str
    text: str = ""
    data: dict = field(default_factory=dict)
    artifact: Optional[str] = None


# -----------------------
# Artifact loading
# -----------------------
def artifact_kind(path: str) -> str:
    suffix = Path(path).suffix
    if suffix == '.vpda':
        return 'vpda'
    if suffix == '.opm':
        return 'matrix'
    return 'grammar'


def _read(cmd: Command, path: str) -> str:
    if path in cmd.sources:
        return cmd.sources[path]
    try:
        return Path(path).read_text()
    except OSError as e:
        raise FormatError(f"cannot read file: {e.strerror}", path)


def load_artifact(cmd: Command, path: str) -> Artifact:
    text = _read(cmd, path)
    kind = artifact_kind(path)
    if kind == 'vpda':
        return parse_vpda(text, path)
    if kind == 'matrix':
        return parse_matrix(text, path)
    return parse_grammar(text, path)


def _expect(cmd: Command, count: int, kinds: Tuple[type, ...]) -> List[Artifact]:
    if len(cmd.paths) != count:
        raise FormatError(f"'{cmd.name}' takes {count} file argument(s), got {len(cmd.paths)}")
    artifacts = []
    for path in cmd.paths:
        artifact = load_artifact(cmd, path)
        if not isinstance(artifact, kinds):
            names = " or ".join(_KIND_NAMES[k] for k in kinds)
            raise FormatError(f"'{cmd.name}' expects a {names}", path)
        artifacts.append(artifact)
    return artifacts


_KIND_NAMES = {Grammar: 'grammar', Vpda: 'automaton', PrecedenceMatrix: 'precedence matrix'}


def parse_pairing(text: str) -> Dict[str, str]:
    """'c1:r1,c2:r2' -> {'c1': 'r1', 'c2': 'r2'}"""
    pairing: Dict[str, str] = {}
    for item in text.split(','):
        item = item.strip()
        if not item:
            continue
        call, sep, ret = item.partition(':')
        if not sep or not call.strip() or not ret.strip():
            raise FormatError("pairing items are written call:return", "--pairing", None, item)
        call, ret = call.strip(), ret.strip()
        if call in pairing:
            raise FormatError("call paired twice", "--pairing", None, call)
        pairing[call] = ret
    return pairing


def pairing_partition(pairing: Dict[str, str], alphabet) -> VpPartition:
    """Paired calls and returns; every other letter is internal."""
    calls = frozenset(pairing)
    returns = frozenset(pairing.values())
    try:
        return VpPartition(calls, returns, frozenset(alphabet) - calls - returns)
    except ValueError as e:
        raise FormatError(str(e), "--pairing")


def _input_word(cmd: Command) -> Word:
    if cmd.input is None:
        raise FormatError(f"'{cmd.name}' needs --input")
    return as_word(cmd.input)


def _max_len(cmd: Command, settings: Settings) -> int:
    n = settings.default_max_len if cmd.max_len is None else cmd.max_len
    if n < 0:
        raise FormatError("--max-len must be non-negative", None, None, str(n))
    return n


def _matrix_of(artifact: Artifact) -> PrecedenceMatrix:
    if isinstance(artifact, PrecedenceMatrix):
        return artifact
    return build_opm(artifact).matrix


def tree_to_dict(node: Union[ParseNode, Leaf]) -> dict:
    if isinstance(node, Leaf):
        return {'letter': node.letter, 'position': node.position}
    return {
        'label': sorted(node.label),
        'span': list(node.span),
        'children': [tree_to_dict(child) for child in node.children],
    }


def _language(artifact: Artifact, max_len: int, settings: Settings) -> set:
    if isinstance(artifact, Vpda):
        return enumerate_accepted(artifact, max_len, budget=settings.config_budget)
    return enumerate_language(artifact, max_len, budget=settings.node_budget)


def _sorted_words(words) -> List[Word]:
    return sorted(words, key=lambda w: (len(w), w))


# -----------------------
# Commands
# -----------------------
def _check(cmd: Command, settings: Settings) -> CommandResult:
    artifact, = _expect(cmd, 1, (Grammar, PrecedenceMatrix))
    lines = []
    data = {}
    if isinstance(artifact, PrecedenceMatrix):
        matrix, conflicts, report = artifact, artifact.conflicts(), []
    else:
        try:
            build = build_opm(artifact)
        except NotOperatorForm as e:
            return CommandResult(1, "not an operator grammar", str(e), {'floyd': False, 'error': str(e)})
        matrix, conflicts, report = build.matrix, build.conflicts, build.conflict_report()
        data['invertible'] = is_invertible(artifact)
        data['fischer_normal_form'] = is_fischer_normal_form(artifact)

    relations = matrix.relations()
    lines.append(f"relations ({len(relations)}):")
    lines.extend(f"  {a} {rel.symbol} {b}" for a, rel, b in relations)
    if conflicts:
        lines.append(f"conflicts ({len(conflicts)}):")
        lines.extend(f"  {line}" for line in report or [f"cell ({a},{b})" for a, b in conflicts])
    for key in ('invertible', 'fischer_normal_form'):
        if key in data:
            lines.append(f"{key.replace('_', ' ')}: {'yes' if data[key] else 'no'}")
    data.update({
        'floyd': not conflicts,
        'relations': [[a, rel.glyph, b] for a, rel, b in relations],
        'conflicts': [[a, b] for a, b in conflicts],
    })
    floyd = not conflicts
    summary = "Floyd grammar" if floyd else "not a Floyd grammar"
    if isinstance(artifact, PrecedenceMatrix):
        summary = "conflict-free matrix" if floyd else "matrix has conflicts"

    if cmd.balanced:
        if not isinstance(artifact, Grammar):
            raise FormatError("--balanced needs a grammar", cmd.paths[0])
        if cmd.pairing is None:
            raise FormatError("--balanced needs --pairing")
        pairing = parse_pairing(cmd.pairing)
        partition = pairing_partition(pairing, artifact.terminals)
        report = check_balanced_restrictions(artifact, partition, pairing)
        lines.append(f"partition: {partition}")
        lines.append("balanced: yes" if report.ok else "balanced: no")
        lines.extend(f"  {v}" for v in report.violations)
        data['balanced'] = report.ok
        data['violations'] = list(report.violations)
        data['partition'] = partition.to_dict()
        if not report.ok:
            floyd = False
            summary = "grammar violates the balanced restrictions"
        elif floyd:
            summary = "balanced Floyd grammar"
    return CommandResult(0 if floyd else 1, summary, "\n".join(lines), data)


def _opm(cmd: Command, settings: Settings) -> CommandResult:
    artifact, = _expect(cmd, 1, (Grammar, PrecedenceMatrix))
    matrix = _matrix_of(artifact)
    conflicts = matrix.conflicts()
    text = format_matrix(matrix)
    data = {'matrix': text, 'conflicts': [[a, b] for a, b in conflicts]}
    if conflicts:
        return CommandResult(1, f"{len(conflicts)} conflicting cell(s)", text.rstrip("\n"), data, text)
    return CommandResult(0, "conflict-free matrix", text.rstrip("\n"), data, text)


def _classify(cmd: Command, settings: Settings) -> CommandResult:
    artifact, = _expect(cmd, 1, (Grammar, PrecedenceMatrix))
    partition = classify_vp(_matrix_of(artifact))
    if partition is None:
        return CommandResult(1, "not a VP-matrix", "not a VP-matrix", {'vp_matrix': False, 'partition': None})
    return CommandResult(0, "VP-matrix", str(partition), {'vp_matrix': True, 'partition': partition.to_dict()})


def _parse(cmd: Command, settings: Settings) -> CommandResult:
    g, = _expect(cmd, 1, (Grammar,))
    word = _input_word(cmd)
    result = parse(g, word)
    data = {
        'accept': result.accept,
        'tree': tree_to_dict(result.tree) if result.tree is not None else None,
        'error': str(result.error) if result.error is not None else None,
    }
    if result.accept:
        return CommandResult(0, f"accepted {format_word(word)}", format_tree(result.tree), data)
    reason = str(result.error) if result.error is not None else "stack does not reduce to the axiom"
    return CommandResult(1, f"rejected {format_word(word)}", f"reject: {reason}", data)


def _trace(cmd: Command, settings: Settings) -> CommandResult:
    artifact, = _expect(cmd, 1, (Grammar, PrecedenceMatrix))
    chain = precedence_trace(_matrix_of(artifact), _input_word(cmd))
    text = format_trace(chain)
    gaps = sum(1 for a, rel, b in chain if rel is None)
    data = {'trace': text, 'gaps': gaps}
    if gaps:
        return CommandResult(1, f"{gaps} empty cell(s) on the chain", text, data)
    return CommandResult(0, "every adjacent pair is related", text, data)


def _enum(cmd: Command, settings: Settings) -> CommandResult:
    artifact, = _expect(cmd, 1, (Grammar, Vpda))
    n = _max_len(cmd, settings)
    words = _sorted_words(_language(artifact, n, settings))
    rendered = [format_word(w) for w in words]
    data = {'max_len': n, 'count': len(words), 'strings': [" ".join(w) for w in words]}
    return CommandResult(0, f"{len(words)} string(s) up to length {n}", "\n".join(rendered), data)


def _run(cmd: Command, settings: Settings) -> CommandResult:
    a, = _expect(cmd, 1, (Vpda,))
    word = _input_word(cmd)
    configs = sorted(run(a, word), key=lambda c: (c.state, c.stack))
    accepted = accepts(a, word)
    lines = [str(c) for c in configs] or ["no reachable configuration"]
    data = {
        'accept': accepted,
        'configurations': [{'state': c.state, 'stack': list(c.stack)} for c in configs],
    }
    summary = f"{'accepted' if accepted else 'rejected'} {format_word(word)}"
    return CommandResult(0 if accepted else 1, summary, "\n".join(lines), data)


def _factorize(cmd: Command, settings: Settings) -> CommandResult:
    artifact, = _expect(cmd, 1, (Vpda, Grammar, PrecedenceMatrix))
    if isinstance(artifact, Vpda):
        partition = artifact.alphabet.partition
    elif cmd.pairing is not None:
        alphabet = artifact.terminals if isinstance(artifact, Grammar) else artifact.alphabet
        partition = pairing_partition(parse_pairing(cmd.pairing), alphabet)
    else:
        partition = classify_vp(_matrix_of(artifact))
        if partition is None:
            raise NotVpMatrix()
    fact = canonical_factorization(partition, _input_word(cmd))
    data = {'partition': partition.to_dict(), 'factorization': fact.to_dict()}
    return CommandResult(0, "canonical factorization", str(fact), data)


def _with_artifact(cmd: Command, summary: str, report_text: str, artifact: str, data: dict) -> CommandResult:
    data['artifact'] = artifact
    text = report_text if cmd.output else f"{report_text}\n{artifact.rstrip()}"
    return CommandResult(0, summary, text, data, artifact)


def _to_vpda(cmd: Command, settings: Settings) -> CommandResult:
    g, = _expect(cmd, 1, (Grammar,))
    partition = None
    if cmd.pairing is not None:
        partition = pairing_partition(parse_pairing(cmd.pairing), g.terminals)
    a, report = fg_to_vpda(g, partition)
    return _with_artifact(cmd, f"automaton with {len(a.states)} states", report.render(), format_vpda(a),
                          {'report': report.to_dict()})


def _from_vpda(cmd: Command, settings: Settings) -> CommandResult:
    a, = _expect(cmd, 1, (Vpda,))
    g, report = vpda_to_fg(a)
    return _with_artifact(cmd, f"grammar with {len(g.rules)} rules", report.render(), format_grammar(g),
                          {'report': report.to_dict()})


def _reverse(cmd: Command, settings: Settings) -> CommandResult:
    g, = _expect(cmd, 1, (Grammar,))
    mirrored, matrix = reverse_fg(g)
    text = format_matrix(matrix).rstrip("\n")
    return _with_artifact(cmd, "reversed grammar", text, format_grammar(mirrored), {'matrix': format_matrix(matrix)})


def _equiv(cmd: Command, settings: Settings) -> CommandResult:
    first, second = _expect(cmd, 2, (Grammar, Vpda))
    n = _max_len(cmd, settings)
    left, right = _language(first, n, settings), _language(second, n, settings)
    diff = _sorted_words(left ^ right)
    data = {'max_len': n, 'equivalent': not diff, 'counts': [len(left), len(right)], 'witness': None}
    if not diff:
        return CommandResult(0, f"equivalent up to length {n}", f"{len(left)} string(s) in both", data)
    witness = diff[0]
    owner = cmd.paths[0] if witness in left else cmd.paths[1]
    data['witness'] = " ".join(witness)
    data['witness_in'] = owner
    return CommandResult(1, f"languages differ up to length {n}",
                         f"first divergent string: {format_word(witness)} (only in {owner})", data)


_HANDLERS = {
    'check': _check,
    'opm': _opm,
    'classify': _classify,
    'parse': _parse,
    'trace': _trace,
    'enum': _enum,
    'run': _run,
    'factorize': _factorize,
    'to-vpda': _to_vpda,
    'from-vpda': _from_vpda,
    'reverse': _reverse,
    'equiv': _equiv,
}


def execute(cmd: Command, settings: Optional[Settings] = None) -> CommandResult:
    """
    Run one command.

    Precondition failures that answer the question negatively (conflicting
    matrix, not a VP-matrix) come back as status 1; malformed input raises
    ToolkitError for the caller to report with status 2.
    """
    settings = settings or load_settings()
    handler = _HANDLERS.get(cmd.name)
    if handler is None:
        raise FormatError(f"unknown command; expected one of {', '.join(COMMANDS)}", None, None, cmd.name)
    try:
        result = handler(cmd, settings)
    except (ConflictingMatrix, NotVpMatrix) as e:
        result = CommandResult(1, str(e), str(e), {'error': str(e)})
    result.data = {'command': cmd.name, 'status': result.status, **result.data}
    logger.debug("%s -> %d (%s)", cmd.name, result.status, result.summary)
    return result


# -----------------------
# Entry point
# -----------------------
def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="floyd",
        description="Floyd grammars, precedence matrices and visibly pushdown automata.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("paths", nargs="+", help="grammar (.fg), automaton (.vpda) or matrix (.opm) files")
    parser.add_argument("--input", dest="input", help="whitespace-separated input tokens")
    parser.add_argument("--max-len", dest="max_len", type=int)
    parser.add_argument("-o", dest="output", help="write the converted artifact here")
    parser.add_argument("--json", action="store_true")
    parser.add_argument("--pairing", help="call:return pairs, e.g. c1:r1,c2:r2")
    parser.add_argument("--balanced", action="store_true", help="check the balanced-grammar restrictions")
    parser.add_argument("--config", help="settings JSON file")
    parser.add_argument("--log-level", dest="log_level")
    return parser.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    args = _parse_args(argv)
    try:
        settings = load_settings(args.config)
    except ToolkitError as e:
        print(f"❌ {e}", file=sys.stderr)
        return 2
    logging.basicConfig(level=(args.log_level or settings.log_level).upper(),
                        format="%(levelname)s %(name)s: %(message)s")

    cmd = Command(
        name=args.command,
        paths=list(args.paths),
        input=args.input,
        max_len=args.max_len,
        output=args.output,
        json=args.json,
        pairing=args.pairing,
        balanced=args.balanced,
    )
    try:
        result = execute(cmd, settings)
    except ToolkitError as e:
        if args.json:
            print(json.dumps({'command': cmd.name, 'status': 2, 'error': str(e)}, indent=settings.json_indent))
        else:
            print(f"❌ {e}", file=sys.stderr)
        return 2

    if cmd.output and result.artifact is not None:
        out = Path(cmd.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(result.artifact)

    if args.json:
        print(json.dumps(result.data, indent=settings.json_indent, ensure_ascii=False))
    else:
        if result.text:
            print(result.text)
        marker = "✅" if result.status == 0 else "⚠️"
        print(f"{marker} {result.summary}")
        if cmd.output and result.artifact is not None:
            print(f"📁 Written: {cmd.output}")
    return result.status


if __name__ == "__main__":
    raise SystemExit(main())
