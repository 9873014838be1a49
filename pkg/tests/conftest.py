"""Shared pytest fixtures."""

from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from had_shock_lab.had_engine import BoxParams
from had_shock_lab.randgen import PlanarPoints, PointSet1D, StreamKey, derive_stream


def make_stream(seed: int = 7, replica: int = 0, role: str = "fixture") -> np.random.Generator:
    """Deterministic generator for tests."""
    return derive_stream(StreamKey(seed).child("tests", replica, role))


@pytest.fixture
def stream() -> np.random.Generator:
    """A fixed random stream."""
    return make_stream()


@pytest.fixture
def unit_box() -> BoxParams:
    """The box [0, 1] x [0, 1]."""
    return BoxParams(1.0, 1.0)


@pytest.fixture
def empty_sinks() -> PointSet1D:
    """No sinks on [0, 1]."""
    return PointSet1D((), 1.0)


@pytest.fixture
def empty_bulk() -> PlanarPoints:
    """No planar points in the unit box."""
    return PlanarPoints((), 1.0, 1.0)


@pytest.fixture
def workspace_dir(tmp_path: Path) -> Path:
    """Create a temporary workspace directory."""
    return tmp_path


@pytest.fixture
def decorated_file(workspace_dir: Path) -> Path:
    """Decorated point file with S={0.3, 0.6} and P={(0.4, 0.5)}."""
    path = workspace_dir / "points.csv"
    path.write_text("kind,y,s\nsource,0.3,0\nsource,0.6,0\ninterior,0.4,0.5\n", encoding="utf-8")
    return path


@pytest.fixture
def stream_factory() -> Callable[..., np.random.Generator]:
    """Build further independent streams keyed by role."""
    return make_stream
