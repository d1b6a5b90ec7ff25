"""Одномерный оракул вращательно-симметричных линз."""
from __future__ import annotations

import numpy as np
import pytest

from disk_mesh import MeshKind, make_disk_mesh
from ksurface_errors import PreconditionViolation
from shooting_oracle import ProfileBase, equidistant_profile, sphere_cap_profile


@pytest.fixture(scope="module")
def cap_profile():
    return sphere_cap_profile(0.25, radius=1.0, half_angle=1.0, n_samples=400)


class TestGuards:
    @pytest.mark.parametrize("k", [0.0, -0.1, 1.0, 1.5])
    def test_k_outside_unit_interval(self, k):
        with pytest.raises(PreconditionViolation) as info:
            sphere_cap_profile(k)
        assert info.value.precondition == "K_RANGE"

    def test_base_flatter_than_k(self):
        with pytest.raises(PreconditionViolation) as info:
            equidistant_profile(0.5, distance=float(np.arctanh(0.5)))
        assert info.value.precondition == "BASE_CURVATURE"

    @pytest.mark.parametrize("half_angle", [0.0, np.pi / 2, 2.0])
    def test_half_angle_range(self, half_angle):
        with pytest.raises(ValueError):
            sphere_cap_profile(0.25, half_angle=half_angle)


class TestCapProfile:
    def test_vanishes_on_boundary(self, cap_profile):
        assert cap_profile.lam(1.0) == 0.0
        assert cap_profile.lam(1.5) == 0.0

    def test_positive_inside(self, cap_profile):
        t = np.linspace(0.0, 0.95, 20)
        assert np.all(cap_profile.lam(t) > 0.0)

    def test_pole_value(self, cap_profile):
        assert cap_profile.base is ProfileBase.SPHERE_CAP
        assert float(cap_profile.lam(0.0)) == pytest.approx(1.0 - cap_profile.pole_height, abs=1e-8)

    def test_on_mesh_uses_reference_radius(self, cap_profile):
        mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, 2)
        lam = cap_profile.on_mesh(mesh.reference)
        assert np.all(lam[mesh.boundary_loop] == 0.0)
        assert lam[0] == pytest.approx(float(cap_profile.lam(0.0)))

    def test_smaller_k_sits_deeper(self, cap_profile):
        flatter = sphere_cap_profile(0.15, radius=1.0, half_angle=1.0, n_samples=400)
        assert float(flatter.lam(0.0)) > float(cap_profile.lam(0.0))


class TestEquidistantProfile:
    def test_shape(self):
        profile = equidistant_profile(0.1, distance=0.6, extent=1.0, n_samples=400)
        assert profile.base is ProfileBase.EQUIDISTANT
        t = np.linspace(0.0, 0.9, 10)
        assert np.all(profile.lam(t) > 0.0)
        assert profile.lam(1.0) == 0.0
        # линза не может уйти за вполне геодезическую плоскость
        assert float(profile.lam(0.0)) < 0.6
