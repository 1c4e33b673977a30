"""
Airflow manipulation domain models.

Exports all model classes for easy importing.
"""

from app.models.cem import (
    LINE_CEM,
    PLANE_CEM,
    CemConfig,
    CemOutcome,
    SamplingMode,
    SamplingSpace,
)
from app.models.dynamics import (
    COTTON_WAD,
    TRACER,
    DynamicsModel,
    ObjectState,
    SimConfig,
    Trajectory,
)
from app.models.field import (
    FieldGeometry,
    FitSettings,
    GridSource,
    NozzleOrientation,
    ProfileFit,
    RadialProfile,
    SyntheticFieldSpec,
    VelocityGrid,
)
from app.models.sindy import (
    AirSample,
    Conversion,
    LibrarySpec,
    SindyConfig,
    SindyResult,
    SnapshotData,
    ThresholdMode,
)
from app.models.task import (
    StepAction,
    StepRecord,
    SwitchRule,
    TaskKind,
    TaskObject,
    TaskReport,
    TaskSpec,
    Workspace,
    Zone,
)

__all__ = [
    # Field
    "FieldGeometry",
    "FitSettings",
    "GridSource",
    "NozzleOrientation",
    "ProfileFit",
    "RadialProfile",
    "SyntheticFieldSpec",
    "VelocityGrid",
    # Dynamics
    "DynamicsModel",
    "ObjectState",
    "SimConfig",
    "Trajectory",
    "TRACER",
    "COTTON_WAD",
    # Identification
    "AirSample",
    "Conversion",
    "LibrarySpec",
    "SindyConfig",
    "SindyResult",
    "SnapshotData",
    "ThresholdMode",
    # Controller
    "CemConfig",
    "CemOutcome",
    "SamplingMode",
    "SamplingSpace",
    "LINE_CEM",
    "PLANE_CEM",
    # Tasks
    "StepAction",
    "StepRecord",
    "SwitchRule",
    "TaskKind",
    "TaskObject",
    "TaskReport",
    "TaskSpec",
    "Workspace",
    "Zone",
]
