"""Exception types raised by the toolkit.

All of them derive from :class:`PseudoStrongError` so callers (the CLI in
particular) can separate bad input from programming errors.
"""


class PseudoStrongError(Exception):
    """Base class for input and validation errors."""


class MalformedAnnotation(PseudoStrongError, ValueError):
    pass


class UnknownClass(PseudoStrongError, ValueError):
    pass


class InvalidBox(PseudoStrongError, ValueError):
    pass


class MalformedLine(PseudoStrongError, ValueError):
    pass


class MissingAnnotation(PseudoStrongError, FileNotFoundError):
    pass


class MalformedRecord(PseudoStrongError, ValueError):
    pass


class ScoreOutOfRange(PseudoStrongError, ValueError):
    pass


class UnknownImage(PseudoStrongError, KeyError):
    def __str__(self):
        # KeyError quotes its argument; keep the message readable.
        return str(self.args[0]) if self.args else ""


class ClassSetMismatch(PseudoStrongError, ValueError):
    pass


class InvalidParams(PseudoStrongError, ValueError):
    pass


class ManifestMismatch(PseudoStrongError):
    pass
