"""Параметризации семейств с замкнутыми формулами."""
from __future__ import annotations

import numpy as np
import pytest

import hyperboloid as hyp
from ambient_geometry import FamilyKind, SurfaceFamily, g_norm
from disk_mesh import MeshKind, make_disk_mesh
from model_surfaces import (
    EquidistantDisk,
    HorospherePatch,
    SphereCap,
    TubePatch,
    closed_sphere_surface,
    family_mesh_kind,
    family_parametrization,
    family_surface,
    immerse,
    to_chart,
)


def make_reference(refinement: int = 2) -> np.ndarray:
    return make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, refinement).reference


class TestParametrizations:
    @pytest.mark.parametrize(
        "param",
        [SphereCap(radius=0.8), HorospherePatch(), EquidistantDisk(distance=0.4), TubePatch(radius=0.6)],
        ids=["sphere", "horosphere", "equidistant", "tube"],
    )
    def test_points_and_normals(self, param):
        X, N = param(make_reference())
        assert np.allclose(hyp.mdot(X, X), -1.0)
        assert np.allclose(hyp.mdot(N, N), 1.0)
        assert np.allclose(hyp.mdot(X, N), 0.0, atol=1e-12)

    def test_sphere_points_at_radius(self):
        X, _ = SphereCap(radius=1.3)(make_reference())
        assert np.allclose(hyp.distance(hyp.ORIGIN, X), 1.3)

    def test_sphere_pole_is_above_origin(self):
        X, _ = SphereCap(radius=0.5)(np.zeros((1, 2)))
        assert hyp.hyperboloid_to_chart(X)[0, 2] > 1.0

    def test_horosphere_is_unit_height(self):
        X, N = HorospherePatch(extent=0.7)(make_reference())
        P, V = to_chart(X, N)
        assert np.allclose(P[:, 2], 1.0)
        assert np.allclose(V[:, :2], 0.0, atol=1e-12)
        assert np.all(V[:, 2] < 0.0)

    def test_zero_distance_equidistant_is_plane(self):
        X, N = EquidistantDisk(distance=0.0)(make_reference())
        assert np.allclose(X[:, 3], 0.0)
        assert np.allclose(N, hyp.E3)

    def test_scale_contracts_patch(self):
        param = EquidistantDisk(distance=0.3, extent=1.0)
        uv = make_reference()
        X_full, _ = param(0.5 * uv)
        X_half, _ = param(uv, scale=0.5)
        assert np.allclose(X_full, X_half)

    def test_tube_distance_to_axis(self):
        tube = TubePatch(radius=0.6)
        uv = make_disk_mesh(MeshKind.PLANAR_DISK_SAMPLE, 2).reference
        X, _ = tube(uv)
        A = tube.axis_point(uv[:, 0] * tube.axial_extent)
        assert np.allclose(hyp.distance(A, X), 0.6)

    def test_placement_applies_isometry(self):
        R = hyp.rotation_to(np.array([0.0, 0.6, 0.8]))
        placed = SphereCap(radius=0.9, placement=hyp.lorentz_rotation(R))
        X, _ = placed(make_reference())
        assert np.allclose(hyp.distance(hyp.ORIGIN, X), 0.9)


class TestFamilies:
    @pytest.mark.parametrize(
        "kind, mesh_kind",
        [
            (FamilyKind.SPHERE, MeshKind.GEODESIC_POLAR_CAP),
            (FamilyKind.EQUIDISTANT, MeshKind.GEODESIC_POLAR_CAP),
            (FamilyKind.TUBE, MeshKind.PLANAR_DISK_SAMPLE),
            (FamilyKind.HOROSPHERE, MeshKind.PLANAR_DISK_SAMPLE),
        ],
    )
    def test_mesh_kind(self, kind, mesh_kind):
        assert family_mesh_kind(SurfaceFamily(kind, 0.7)) is mesh_kind

    def test_parametrization_matches_closed_form(self):
        param = family_parametrization(SurfaceFamily(FamilyKind.TUBE, 0.7))
        lo, hi = param.principal_curvatures()
        assert lo * hi == pytest.approx(1.0)

    def test_family_surface_has_forms(self, h3):
        surf = family_surface(h3, SurfaceFamily(FamilyKind.HOROSPHERE), 3)
        kappa = surf.require_forms().extrinsic[surf.mesh.interior]
        assert np.allclose(kappa, 1.0, rtol=2e-2)

    def test_immerse_with_fitted_normals(self, h3):
        mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, 2)
        exact = immerse(h3, mesh, SphereCap(radius=1.0), with_forms=False)
        fitted = immerse(h3, mesh, SphereCap(radius=1.0), fitted_normals=True, with_forms=False)
        interior = mesh.interior
        cosines = np.sum(exact.normals[interior] * fitted.normals[interior], axis=1) / (
            np.linalg.norm(exact.normals[interior], axis=1) * np.linalg.norm(fitted.normals[interior], axis=1)
        )
        assert np.all(cosines > 0.999)


class TestClosedSphere:
    def test_closed_sphere_surface(self, h3):
        surf = closed_sphere_surface(h3, radius=0.8)
        assert surf.forms is None
        assert surf.mesh.boundary_loop.size == 0
        X = hyp.chart_to_hyperboloid(surf.positions)
        assert np.allclose(hyp.distance(hyp.ORIGIN, X), 0.8)
        assert np.allclose(g_norm(h3, surf.positions, surf.normals), 1.0)
