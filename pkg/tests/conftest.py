"""Общие фикстуры: модель H³ и эталонные поверхности с известной кривизной."""
from __future__ import annotations

import numpy as np
import pytest

from ambient_geometry import AmbientModel, make_model
from disk_mesh import MeshKind, make_disk_mesh
from model_surfaces import EquidistantDisk, SphereCap, immerse

EQUIDISTANT_DISTANCE = float(np.arctanh(0.5))


@pytest.fixture(scope="session")
def h3() -> AmbientModel:
    return make_model()


@pytest.fixture(scope="session")
def equidistant_surface(h3):
    """Эквидистанта с главными кривизнами 0.5 (κ = 0.25) на сетке refinement 3."""
    mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, 3)
    return immerse(h3, mesh, EquidistantDisk(distance=EQUIDISTANT_DISTANCE, extent=1.0))


@pytest.fixture(scope="session")
def coarse_equidistant(h3):
    mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, 2)
    return immerse(h3, mesh, EquidistantDisk(distance=EQUIDISTANT_DISTANCE, extent=1.0))


@pytest.fixture(scope="session")
def sphere_cap_surface(h3):
    mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, 3)
    return immerse(h3, mesh, SphereCap(radius=1.0, half_angle=1.0))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
