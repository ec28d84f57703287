"""Exception hierarchy. The CLI maps these onto exit codes."""


class TeamsortError(Exception):
    pass


class InputError(TeamsortError, ValueError):
    """Bad parameters, out-of-domain skills, malformed configs."""


class DegenerateError(InputError):
    """Parameters that collapse the model (zero variance, flat production)."""


class UnsupportedCaseError(TeamsortError):
    """Valid input the closed forms do not cover."""


class SizeError(InputError):
    """Instance too large for an exact solver."""


class NumericalError(TeamsortError, ArithmeticError):
    """A numerical certificate failed (duality gap, non-convergence)."""


class ConfigError(InputError):
    """Scenario file problems, located by field path and line when known."""

    def __init__(self, message: str, path: str = "", line: int | None = None, source: str = ""):
        self.path, self.line, self.source = path, line, source
        where = source
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        loc = f"{where}: " if where else ""
        field_ = f"field '{path}': " if path else ""
        super().__init__(f"{loc}{field_}{message}")
