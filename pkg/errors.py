"""
Exception hierarchy for the Floyd grammar / VPDA toolkit.

Every error raised on purpose by the library derives from ToolkitError so the
command line and the web API can tell input problems (exit status 2 / HTTP 400)
apart from genuine crashes.
"""

from typing import Optional


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ToolkitError, ValueError):
    """Unknown or malformed configuration value."""


class FormatError(ToolkitError, ValueError):
    """A grammar, automaton or matrix file could not be read."""

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, token: Optional[str] = None):
        self.path = path
        self.line = line
        self.token = token
        where = path or "<text>"
        if line is not None:
            where = f"{where}:{line}"
        if token is not None:
            message = f"{message} (token {token!r})"
        super().__init__(f"{where}: {message}")


# -----------------------
# Grammars
# -----------------------
class GrammarError(ToolkitError, ValueError):
    """Ill-formed grammar."""


class UnknownNonterminal(GrammarError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown nonterminal {name!r}")


class UnknownTerminal(GrammarError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown terminal {name!r}")


class AxiomUnproductive(GrammarError):
    """The axiom derives no terminal string; `.grammar` is the empty reduct."""

    def __init__(self, grammar):
        self.grammar = grammar
        super().__init__(f"axiom {grammar.axiom!r} derives no terminal string")


class BudgetExceeded(ToolkitError, RuntimeError):
    def __init__(self, what: str, budget: int):
        self.budget = budget
        super().__init__(f"{what} exceeded its budget of {budget}")


# -----------------------
# Precedence
# -----------------------
class PrecedenceError(ToolkitError):
    """Precondition of a precedence operation does not hold."""


class NotOperatorForm(PrecedenceError, GrammarError):
    def __init__(self, rule):
        self.rule = rule
        super().__init__(f"rule {rule} has adjacent nonterminals")


class EmptyString(PrecedenceError, ValueError):
    def __init__(self):
        super().__init__("terminal sets of the empty string are undefined")


class ConflictingMatrix(PrecedenceError):
    def __init__(self, conflicts):
        self.conflicts = list(conflicts)
        cells = ", ".join(f"({a},{b})" for a, b in self.conflicts)
        super().__init__(f"precedence matrix has conflicts in cells {cells}")


class NotFloyd(ConflictingMatrix):
    """The grammar's precedence matrix is not conflict-free."""


NotFloydGrammar = NotFloyd


class NotVpMatrix(PrecedenceError):
    def __init__(self, reason: str = "matrix is not contained in any total VP matrix"):
        super().__init__(reason)


class UnpairedAlphabet(PrecedenceError, ValueError):
    def __init__(self, reason: str):
        super().__init__(f"call/return pairing is not a bijection: {reason}")


# -----------------------
# Parsing
# -----------------------
class ParseError(ToolkitError):
    """Reason a string was rejected by the precedence parser."""


class PrecedenceGap(ParseError):
    def __init__(self, position: int, left: str, right: str):
        self.position = position
        self.left = left
        self.right = right
        super().__init__(f"no precedence relation between {left!r} and {right!r} at position {position}")


class NoMatchingRule(ParseError):
    def __init__(self, span, handle):
        self.span = span
        self.handle = tuple(handle)
        super().__init__(f"handle {' '.join(self.handle)} at {span} matches no rule")


# -----------------------
# Automata
# -----------------------
class AutomatonError(ToolkitError, ValueError):
    """Ill-formed visibly pushdown automaton or alphabet."""


class NoFactorization(AutomatonError):
    def __init__(self, word):
        super().__init__(f"string {' '.join(word)!r} admits no factorization")
