"""Exceptions raised by pseudogroup."""
from typing_extensions import Any, List, Optional


class PseudogroupError(Exception):
    """Base class of every error raised by this package."""


class ParseError(PseudogroupError, ValueError):
    def __init__(self, text: str, offset: int, expected: str):
        self.text = text
        self.offset = offset
        self.expected = expected
        super().__init__(f"syntax error at offset {offset}: expected {expected} in {text!r}")


class DomainError(PseudogroupError, ArithmeticError):
    def __init__(self, reason: str, x: float):
        self.reason = reason
        self.x = x
        super().__init__(f"{reason} at x={x!r}")


class OutOfDomain(PseudogroupError):
    """A word left the region where its letters are defined."""
    def __init__(self, letter: int, value: float, word: Any = None):
        self.letter = letter
        self.value = value
        self.word = word
        super().__init__(f"input {value!r} outside the domain of letter {letter}" + (f" of {word}" if word is not None else ""))


class NotInRange(PseudogroupError):
    def __init__(self, name: str, y: float, lo: float, hi: float):
        self.y = y
        super().__init__(f"{y!r} is not in the range ({lo!r}, {hi!r}) of {name}")


class EmptyDomain(PseudogroupError):
    pass


class NotDegreeOne(PseudogroupError):
    pass


class FixedPointInput(PseudogroupError):
    pass


class CommutatorNotFixed(PseudogroupError):
    pass


class IterationEscaped(PseudogroupError):
    """The relative translation iteration left [x0, f1(x0)); the construction guarantees it never does."""


class EstimatorDivergence(PseudogroupError):
    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ResolutionFailure(PseudogroupError):
    pass


class RationalityMismatch(PseudogroupError):
    pass


class ChainInconsistent(PseudogroupError):
    pass


class AmbiguousResolution(PseudogroupError):
    def __init__(self, message: str, report: Any = None):
        self.report = report
        super().__init__(message)


class HypothesisFailure(PseudogroupError):
    def __init__(self, message: str, report: Any = None):
        self.report = report
        super().__init__(message)


class UnknownGenerator(PseudogroupError, ValueError):
    pass


class InvalidGenerator(PseudogroupError, ValueError):
    """A generator is not an increasing near-identity map on (-1, 1)."""


class ConfigError(PseudogroupError, ValueError):
    """An invalid config file; `diagnostics` holds one line per problem, with its location."""
    def __init__(self, source: str, diagnostics: List[str]):
        self.source = source
        self.diagnostics = diagnostics
        super().__init__(f"invalid config {source}:\n  " + "\n  ".join(diagnostics))
