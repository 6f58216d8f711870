"""Exception types shared by all modules."""


class InputError(ValueError):
    """Malformed or out-of-domain input (maps to CLI exit code 2)."""


class UnsupportedInput(Exception):
    """Input is valid but outside what the structured algebra can certify (exit code 4)."""


class PreconditionError(ValueError):
    """An operation was called on an object that violates its contract."""


class CapReached(RuntimeError):
    """A search or truncation cap was exhausted before the target was met (exit code 3)."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
