import numpy as np
import pytest

from app.models import (
    TRACER,
    FieldGeometry,
    NozzleOrientation,
    ObjectState,
    SimConfig,
    SyntheticFieldSpec,
)
from app.services import synthetic

TILT_NODES = [0.0, 22.5, 45.0, 60.0]


@pytest.fixture(scope="session")
def geometry() -> FieldGeometry:
    return FieldGeometry()


@pytest.fixture(scope="session")
def field_spec() -> SyntheticFieldSpec:
    return SyntheticFieldSpec()


@pytest.fixture(scope="session")
def field_model(field_spec, geometry):
    """Synthetic field tabulated at the default tilt nodes."""
    return synthetic.build_field_model(field_spec, geometry, TILT_NODES)


@pytest.fixture
def orientation() -> NozzleOrientation:
    return NozzleOrientation(pan_deg=90.0, tilt_deg=22.5)


@pytest.fixture
def sim() -> SimConfig:
    return SimConfig()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def tracer_at(x: float, y: float, object_id: int = 0, speed: float = 0.0) -> ObjectState:
    return ObjectState(object_id=object_id, position=(x, y), speed=speed, dynamics=TRACER)
