"""
Exception hierarchy for the airflow manipulation library.

Every error carries a stable snake_case ``code`` and an optional context
dictionary so the CLI can render it as one machine-readable line.
"""

from typing import Any, Optional


class AirflowError(Exception):
    """Base class for all domain errors raised by this package."""

    code: str = "airflow_error"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: dict[str, Any] = context

    def to_dict(self) -> dict[str, Any]:
        return {"error": self.code, "message": self.message, **self.context}


class DomainError(AirflowError):
    """A geometric or field quantity lies outside its valid domain."""

    code = "domain_error"


class FieldFitError(AirflowError):
    """Radial profile fitting is underdetermined or degenerate."""

    code = "field_fit_error"


class SolverError(AirflowError):
    """The ODE integrator failed; context holds the last known state."""

    code = "solver_error"


class IdentificationError(AirflowError):
    """System identification could not produce a model."""

    code = "identification_error"


class TaskError(AirflowError):
    """A task description is inconsistent."""

    code = "task_error"


class ConfigError(AirflowError):
    """The run configuration is missing or violates an invariant."""

    code = "config_error"


class InputFileError(AirflowError):
    """A data file is missing or malformed."""

    code = "input_file_error"

    def __init__(self, message: str, file: str, line: Optional[int] = None):
        context: dict[str, Any] = {"file": file}
        if line is not None:
            context["line"] = line
        super().__init__(message, **context)
