"""Дискретные поверхности: подгонка форм, смещения по нормалям, радиальные графики."""
from __future__ import annotations

import numpy as np
import pytest

import hyperboloid as hyp
from ambient_geometry import ChartPoint, FamilyKind, SurfaceFamily, distance, distances, g_norm, model_surface_curvatures
from disk_mesh import MeshKind, make_disk_mesh
from immersed_surface import (
    GraphSide,
    RadialGraph,
    boundary_length,
    displace_along_normals,
    extrinsic_curvature,
    footprint,
    gauss_equation_defect,
    graph_embed,
    intrinsic_curvature,
    inverse_function,
    is_locally_convex,
    make_surface,
    mean_curvature,
    surface_edge_lengths,
)
from ksurface_errors import ChartError
from model_surfaces import EquidistantDisk, family_surface, immerse

from conftest import EQUIDISTANT_DISTANCE


class TestConstruction:
    def test_shape_mismatch_rejected(self, h3):
        mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, 1)
        with pytest.raises(ValueError):
            make_surface(h3, mesh, np.ones((3, 3)), np.ones((3, 3)))

    def test_off_chart_rejected(self, h3):
        mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, 0)
        P = np.column_stack((mesh.reference, np.ones(mesh.n_vertices)))
        P[2, 2] = -0.5
        with pytest.raises(ChartError):
            make_surface(h3, mesh, P, np.tile([0.0, 0.0, 1.0], (mesh.n_vertices, 1)))

    def test_normals_are_normalized(self, h3):
        mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, 0)
        P = np.column_stack((0.3 * mesh.reference, np.full(mesh.n_vertices, 0.5)))
        surf = make_surface(h3, mesh, P, np.tile([0.0, 0.0, 3.0], (mesh.n_vertices, 1)))
        assert np.allclose(g_norm(h3, surf.positions, surf.normals), 1.0)

    def test_forms_required(self, h3):
        mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, 1)
        bare = immerse(h3, mesh, EquidistantDisk(distance=0.5), with_forms=False)
        with pytest.raises(ValueError):
            bare.require_forms()


class TestFundamentalForms:
    def test_equidistant_curvature(self, equidistant_surface):
        forms = equidistant_surface.require_forms()
        interior = equidistant_surface.mesh.interior
        assert np.allclose(forms.extrinsic[interior], 0.25, rtol=2e-2)
        assert np.allclose(forms.principal[interior], 0.5, rtol=2e-2)

    def test_det_and_trace(self, equidistant_surface):
        forms = equidistant_surface.require_forms()
        i = equidistant_surface.mesh.interior
        assert np.allclose(forms.extrinsic[i], forms.principal[i, 0] * forms.principal[i, 1], atol=1e-12)
        assert np.allclose(forms.trace[i], forms.principal[i].sum(axis=1), atol=1e-12)
        assert np.all(forms.principal[i, 0] <= forms.principal[i, 1])

    def test_sphere_cap_is_convex(self, sphere_cap_surface):
        forms = sphere_cap_surface.require_forms()
        stencil = sphere_cap_surface.mesh.complete_stencil
        assert is_locally_convex(sphere_cap_surface)
        assert np.allclose(forms.extrinsic[stencil], 1.0 / np.tanh(1.0) ** 2, rtol=1e-2)

    def test_quartic_fit_on_complete_stencil(self, sphere_cap_surface):
        forms = sphere_cap_surface.require_forms()
        mesh = sphere_cap_surface.mesh
        assert np.all(forms.fit_order[mesh.complete_stencil] == 4)
        outer = mesh.interior[mesh.ring_index[mesh.interior] == mesh.rings - 1]
        assert set(np.unique(forms.fit_order[outer])) <= {2, 3}
        assert all(forms.derivative_rows[v].shape[0] == 5 for v in mesh.complete_stencil)

    def test_extrinsic_is_determinant(self, sphere_cap_surface):
        forms = sphere_cap_surface.require_forms()
        i = sphere_cap_surface.mesh.interior
        kappa = extrinsic_curvature(sphere_cap_surface)
        assert np.allclose(kappa[i], np.linalg.det(forms.shape_operator[i]), rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize(
        "family",
        [
            SurfaceFamily(FamilyKind.SPHERE, 1.0),
            SurfaceFamily(FamilyKind.HOROSPHERE),
            SurfaceFamily(FamilyKind.EQUIDISTANT, EQUIDISTANT_DISTANCE),
        ],
        ids=lambda f: f.kind.value,
    )
    def test_mean_curvature_closed_form(self, h3, family):
        surf = family_surface(h3, family, 3)
        expected = 0.5 * model_surface_curvatures(h3, family).trace
        H = mean_curvature(surf)[surf.mesh.complete_stencil]
        assert np.allclose(H, expected, rtol=5e-3)

    def test_exact_normals_have_small_tilt(self, equidistant_surface):
        forms = equidistant_surface.require_forms()
        assert float(np.max(forms.tilt[equidistant_surface.mesh.interior])) < 1e-2


class TestIntrinsicCurvature:
    def test_boundary_is_nan(self, sphere_cap_surface, h3):
        K = intrinsic_curvature(h3, sphere_cap_surface)
        assert np.all(np.isnan(K[sphere_cap_surface.mesh.boundary_loop]))
        assert np.all(np.isfinite(K[sphere_cap_surface.mesh.interior]))

    def test_gauss_equation(self, sphere_cap_surface, h3):
        # K = -1 + coth² 1 = 1 / sinh² 1 на сфере радиуса 1
        defect = gauss_equation_defect(h3, sphere_cap_surface)[sphere_cap_surface.mesh.complete_stencil]
        assert float(np.max(np.abs(defect))) < 0.05

    def test_arc_lengths_on_sphere(self, sphere_cap_surface, h3):
        # геодезическая сфера радиуса 1 изометрична круглой сфере радиуса sinh 1
        edges = sphere_cap_surface.mesh.edges
        X = hyp.chart_to_hyperboloid(sphere_cap_surface.positions)
        D = X[:, 1:] / np.sinh(1.0)
        a, b = D[edges[:, 0]], D[edges[:, 1]]
        theta = np.arctan2(np.linalg.norm(np.cross(a, b), axis=1), np.sum(a * b, axis=1))
        exact = np.sinh(1.0) * theta
        chords = distances(h3, sphere_cap_surface.positions[edges[:, 0]], sphere_cap_surface.positions[edges[:, 1]])
        arcs = surface_edge_lengths(h3, sphere_cap_surface, edges)
        assert float(np.max(np.abs(chords - exact) / exact)) > 5e-4
        assert float(np.max(np.abs(arcs - exact) / exact)) < 5e-5


class TestDisplacement:
    def test_constant_push_moves_equidistant(self, h3, equidistant_surface):
        moved = displace_along_normals(h3, equidistant_surface, np.full(equidistant_surface.n_vertices, 0.1))
        expected = np.tanh(EQUIDISTANT_DISTANCE + 0.1) ** 2
        kappa = moved.require_forms().extrinsic[moved.mesh.interior]
        assert float(np.mean(kappa)) == pytest.approx(expected, rel=3e-2)

    def test_displacement_distance(self, h3, coarse_equidistant):
        field = np.linspace(-0.1, 0.1, coarse_equidistant.n_vertices)
        moved = displace_along_normals(h3, coarse_equidistant, field, with_forms=False)
        for v in (0, 7, coarse_equidistant.n_vertices - 1):
            d = distance(h3, coarse_equidistant.position(v), moved.position(v))
            assert d == pytest.approx(abs(field[v]), abs=1e-9)

    def test_field_shape_checked(self, h3, coarse_equidistant):
        with pytest.raises(ValueError):
            displace_along_normals(h3, coarse_equidistant, np.zeros(3))

    def test_boundary_length(self, h3, equidistant_surface):
        # окружность радиуса 1 на плоскости, поднятая на эквидистанту
        expected = 2.0 * np.pi * np.sinh(1.0) * np.cosh(EQUIDISTANT_DISTANCE)
        assert boundary_length(h3, equidistant_surface) == pytest.approx(expected, rel=5e-3)


class TestRadialGraph:
    def test_boundary_values_must_vanish(self, coarse_equidistant):
        lam = np.ones(coarse_equidistant.n_vertices)
        with pytest.raises(ValueError):
            RadialGraph(base=coarse_equidistant, lam=lam)

    def test_shape_checked(self, coarse_equidistant):
        with pytest.raises(ValueError):
            RadialGraph(base=coarse_equidistant, lam=np.zeros(4))

    def test_with_lambda_clears_boundary(self, coarse_equidistant):
        graph = RadialGraph(base=coarse_equidistant, lam=np.zeros(coarse_equidistant.n_vertices))
        moved = graph.with_lambda(np.full(coarse_equidistant.n_vertices, 0.2))
        assert np.all(moved.lam[coarse_equidistant.mesh.boundary_loop] == 0.0)
        assert moved.interior_positive()
        assert moved.direction == -1.0
        assert RadialGraph(coarse_equidistant, moved.lam, GraphSide.PUSHOFF).direction == 1.0

    def test_zero_graph_is_base(self, h3, coarse_equidistant):
        graph = RadialGraph(base=coarse_equidistant, lam=np.zeros(coarse_equidistant.n_vertices))
        embedded = graph_embed(h3, graph)
        assert np.array_equal(embedded.positions, coarse_equidistant.positions)
        assert inverse_function(h3, graph, embedded).lipschitz_ratio == 0.0

    def test_lens_moves_against_normal(self, h3, coarse_equidistant):
        mesh = coarse_equidistant.mesh
        lam = 0.05 * (1.0 - np.sum(mesh.reference ** 2, axis=1))
        lam[mesh.boundary_loop] = 0.0
        graph = RadialGraph(base=coarse_equidistant, lam=lam)
        embedded = graph_embed(h3, graph)
        # центр эквидистанты уходит к вполне геодезической плоскости
        centre = ChartPoint.from_array(embedded.positions[0])
        assert distance(h3, coarse_equidistant.position(0), centre) == pytest.approx(lam[0], abs=1e-9)
        assert embedded.positions[0, 2] > coarse_equidistant.positions[0, 2]
        inv = inverse_function(h3, graph, embedded)
        assert np.array_equal(inv.values, lam)
        assert inv.lipschitz_ratio < 1.0

    def test_footprint_is_identity(self, coarse_equidistant):
        mesh = coarse_equidistant.mesh
        lam = 0.05 * (1.0 - np.sum(mesh.reference ** 2, axis=1))
        graph = RadialGraph(base=coarse_equidistant, lam=np.where(mesh.is_boundary, 0.0, lam))
        fp = footprint(graph)
        assert np.array_equal(fp.base_vertex, np.arange(mesh.n_vertices))
        assert np.array_equal(fp.focal[fp.base_vertex], graph.lam)
        fp.focal[0] = -1.0
        assert graph.lam[0] > 0.0
