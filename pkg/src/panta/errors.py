"""Exception hierarchy for the panta kernel.

Everything raised on purpose derives from PantaError so callers (CLI,
server dispatch) can catch one base and turn it into a user-facing
message instead of a traceback.
"""


class PantaError(Exception):
    """Base class for all kernel errors."""


# ── store ─────────────────────────────────────────────────────────────────────

class StoreError(PantaError):
    pass


class DeadSymbol(StoreError):
    """A referenced symbol is not live in the version being read."""

    def __init__(self, symbol: int):
        super().__init__(f"symbol #{symbol} is not live")
        self.symbol = symbol


class DuplicateName(StoreError):
    """The name is already bound to a sibling in the same naming scope."""

    def __init__(self, name: str):
        super().__init__(f"name {name!r} already bound in this scope")
        self.name = name


class StoreViolation(StoreError):
    """A delta breaks a store invariant (referential integrity, disjointness)."""


# ── language ──────────────────────────────────────────────────────────────────

class FonalError(PantaError):
    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


class UnterminatedQuote(FonalError):
    pass


class IllegalCharacter(FonalError):
    pass


class SyntaxError_(FonalError):
    """Parse failure; carries the offset and the categories that were legal there."""

    def __init__(self, message: str, offset: int, expected: tuple = ()):
        super().__init__(message, offset)
        self.expected = expected


class UnknownWord(FonalError):
    """A word resolved to no symbol in a position that cannot introduce names."""

    def __init__(self, word: str, offset: int):
        super().__init__(f"unknown word {word!r}", offset)
        self.word = word


class NotAnUtterance(FonalError):
    def __init__(self, symbol: int):
        super().__init__(f"symbol #{symbol} is not a stored utterance")
        self.symbol = symbol


# ── evaluation ────────────────────────────────────────────────────────────────

class EvalError(PantaError):
    pass


class UnresolvedNoun(EvalError):
    pass


class UnresolvedVariable(EvalError):
    pass


class MissingContext(EvalError):
    """A query used the context selection but the binding has none."""


class TypeMismatch(EvalError):
    pass


class ArityMismatch(EvalError):
    pass


class ExecutionError(EvalError):
    """Runtime failure inside a procedure (depth cap, bad instruction)."""


# ── commit protocol ───────────────────────────────────────────────────────────

class CommitError(PantaError):
    pass


class GuardViolation(CommitError):
    """The delta removes self-definition data or the last entree to a function."""

    def __init__(self, restriction: str, symbols: frozenset = frozenset()):
        syms = ", ".join(f"#{s}" for s in sorted(symbols)) or "-"
        super().__init__(f"guard: {restriction} (offending: {syms})")
        self.restriction = restriction
        self.symbols = symbols


class CrawlBack(PantaError):
    """Internal signal: the session's path was invalidated; unwind to main entry."""


# ── ui model ──────────────────────────────────────────────────────────────────

class UiError(PantaError):
    pass


class InvalidParentKind(UiError):
    pass


class CategoryMismatch(UiError):
    pass


class ContextCycle(UiError):
    pass


# ── protocol / bootstrap ──────────────────────────────────────────────────────

class MalformedMessage(PantaError):
    pass


class AuthFailed(PantaError):
    pass


class BootstrapParseError(PantaError):
    def __init__(self, file: str, offset: int, message: str):
        super().__init__(f"{file}:{offset}: {message}")
        self.file = file
        self.offset = offset
