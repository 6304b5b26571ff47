"""Exception hierarchy shared across the package.

Each class carries the CLI exit code it maps to.
"""


class TlnavError(Exception):
    exit_code = 4


class InputError(TlnavError, ValueError):
    """Malformed input: map file, formula text, parameters."""

    exit_code = 2


class MapParseError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SyntaxErrorAt(InputError):
    """Formula syntax error at a character offset."""

    def __init__(self, message, pos, text=""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


class UnsupportedFragment(InputError):
    def __init__(self, message, subformula=None):
        self.subformula = subformula
        super().__init__(message)


class NoPathError(TlnavError):
    exit_code = 3

    def __init__(self, message="no path satisfies specification", leg=None):
        self.leg = leg
        super().__init__(message)


class InfeasibleError(TlnavError):
    exit_code = 3


class NearSingular(TlnavError, ArithmeticError):
    exit_code = 4


class NumericalError(TlnavError, ArithmeticError):
    exit_code = 4
