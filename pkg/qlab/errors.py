from typing import Any


class QlabError(Exception):
    """
    Base class of every error raised by qlab.

    Each subclass carries the process exit code the command line maps it to, and an
    optional diagnostic payload that ends up in ``error.json``.
    """

    exit_code: int = 1

    def __init__(self, message: str, payload: dict[str, Any] | None = None):
        super().__init__(message)
        self.payload: dict[str, Any] = payload or {}

    def to_dict(self) -> dict[str, Any]:
        return {"error": self.__class__.__name__, "message": str(self), "exit_code": self.exit_code, **self.payload}


class MeasureError(QlabError, ValueError):
    """Invalid Lévy measure, or an operation that does not apply to the given measure."""

    exit_code = 3


class DomainError(QlabError, ValueError):
    """An argument lies outside the set on which the operation is defined."""

    exit_code = 3


class ConfigError(QlabError, ValueError):
    """Scenario configuration could not be parsed or validated."""

    exit_code = 3


class ConditionViolatedError(QlabError):
    """The truncated jump operator has norm Ω or more and is not nilpotent."""

    exit_code = 2


class NumericalError(QlabError, ArithmeticError):
    """Singular solves, non-convergence and statistically underpopulated fits."""

    exit_code = 4
