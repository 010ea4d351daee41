"""
Exception hierarchy for the RFL codec.

Everything raised on purpose by the codec derives from ``RflError``, which is
itself a ``ValueError`` so callers that only care about "bad input" can keep
catching that.  The CLI maps the four families below onto exit codes:

    graph / input problems   -> 2
    budget problems          -> 3
    branch bookkeeping       -> 4
"""

from __future__ import annotations


class RflError(ValueError):
    """Base class for every codec error."""


class PositionalError(RflError):
    """An error tied to a character offset in a text input."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class FileLineError(RflError):
    """An error tied to a 1-based line in a named file."""

    def __init__(self, message: str, path: str, line: int):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


# ── graph construction ───────────────────────────────────────────────────────

class UnknownVertex(RflError):
    pass


class DuplicateAtom(RflError):
    pass


class DuplicateBond(RflError):
    pass


class SelfLoop(RflError):
    pass


class MalformedGraph(RflError):
    pass


# ── input parsing ────────────────────────────────────────────────────────────

class MgfParseError(FileLineError):
    pass


class FileFormatError(FileLineError):
    pass


class IdMismatch(RflError):
    pass


class LexError(PositionalError):
    pass


class GrammarError(PositionalError):
    def __init__(self, message: str, position: int, expected: frozenset[str] = frozenset()):
        if expected:
            message = f"{message}; expected one of {', '.join(sorted(expected))}"
        super().__init__(message, position)
        self.expected = expected


class ReservedTokenMisuse(PositionalError):
    pass


class SmilesParseError(PositionalError):
    pass


class UnsupportedFeature(PositionalError):
    pass


# ── budgets ──────────────────────────────────────────────────────────────────

class BudgetExceeded(RflError):
    pass


class GenerationStall(RflError):
    pass


# ── branch bookkeeping ───────────────────────────────────────────────────────

class DanglingBranch(RflError):
    pass


class LeftoverBranch(RflError):
    pass


class UnknownSuper(RflError):
    pass


class UnresolvedSuperRef(RflError):
    pass


class BranchArityMismatch(RflError):
    pass


INPUT_ERRORS: tuple[type[RflError], ...] = (
    UnknownVertex, DuplicateAtom, DuplicateBond, SelfLoop, MalformedGraph,
    MgfParseError, FileFormatError, IdMismatch, LexError, GrammarError,
    ReservedTokenMisuse, SmilesParseError, UnsupportedFeature,
)
BUDGET_ERRORS: tuple[type[RflError], ...] = (BudgetExceeded, GenerationStall)
BRANCH_ERRORS: tuple[type[RflError], ...] = (
    DanglingBranch, LeftoverBranch, UnknownSuper, UnresolvedSuperRef, BranchArityMismatch,
)


def exit_code_for(exc: BaseException) -> int:
    """Exit status the CLI uses for *exc* (1 for anything unclassified)."""
    if isinstance(exc, BRANCH_ERRORS):
        return 4
    if isinstance(exc, BUDGET_ERRORS):
        return 3
    if isinstance(exc, INPUT_ERRORS):
        return 2
    return 1
