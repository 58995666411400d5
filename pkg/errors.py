from typing import Any, Dict, Optional


class EipError(Exception):
    """Base error; `exit_code` is what the CLI returns when this escapes a run."""

    exit_code = 1


class DomainViolationError(EipError, ValueError):
    exit_code = 2


class InterfaceTraceError(DomainViolationError):
    """Raised when a branch quantity is requested exactly on the interface."""


class ConfigurationError(EipError, ValueError):
    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None) -> None:
        self.reason = message
        self.key = key
        self.line = line
        self.column = column
        where = ''
        if key:
            where = f" [key: {key}]"
        if line is not None:
            where += f" [line {line}, column {column}]"
        super().__init__(f"{message}{where}")


class NumericalFailureError(EipError, ArithmeticError):
    exit_code = 3


class InternalInconsistencyError(NumericalFailureError):
    pass


class DiscreteInstabilityError(NumericalFailureError):
    exit_code = 4

    def __init__(self, message: str, mesh_info: Optional[Dict[str, Any]] = None) -> None:
        self.mesh_info = dict(mesh_info or {})
        detail = ', '.join(f"{k}={v}" for k, v in sorted(self.mesh_info.items()))
        super().__init__(f"{message} ({detail})" if detail else message)
