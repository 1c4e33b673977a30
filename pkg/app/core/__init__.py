"""
Airflow Manipulation Core Module.

Exports the error hierarchy. Configuration and logging are imported from
their own modules (``app.core.config``, ``app.core.logging``) because the run
configuration depends on the domain models.
"""

from app.core.errors import (
    AirflowError,
    ConfigError,
    DomainError,
    FieldFitError,
    IdentificationError,
    InputFileError,
    SolverError,
    TaskError,
)

__all__ = [
    "AirflowError",
    "ConfigError",
    "DomainError",
    "FieldFitError",
    "IdentificationError",
    "InputFileError",
    "SolverError",
    "TaskError",
]
