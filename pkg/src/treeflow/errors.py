"""Error types shared across the package.

Two failure families are kept apart on purpose: bad input data raises
InputError (CLI exit code 1), while a broken internal invariant raises
ContractViolation (CLI exit code 3, always a bug).
"""


class TreeflowError(Exception):
    pass


class InputError(TreeflowError):
    """Malformed or inconsistent problem data supplied by the caller."""

    def __init__(self, message, code="invalid-input"):
        super().__init__(message)
        self.code = code


class ContractViolation(TreeflowError):
    """An internal invariant failed; indicates a bug, not bad input."""
