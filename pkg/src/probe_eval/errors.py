"""Exception hierarchy shared across the toolkit.

ValidationError covers bad inputs, bad configuration, and contract
violations (CLI exit code 1).  I/O failures are left to the builtin
OSError family (CLI exit code 2).
"""

from __future__ import annotations


class ValidationError(ValueError):
    """Invalid input data, configuration, or argument."""


class ParseError(ValidationError):
    """Malformed file content; carries the offending location."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
            if line is not None:
                loc += f"{line}:"
            loc += " "
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line
