"""Триангуляции опорного диска и замкнутая октаэдрическая сфера."""
from __future__ import annotations

import numpy as np
import pytest

from disk_mesh import MeshKind, hyperbolic_ring_counts, make_disk_mesh, make_ring_disk_mesh, make_sphere_mesh


class TestHexDisk:
    @pytest.mark.parametrize("refinement", [0, 1, 2, 3])
    def test_counts(self, refinement):
        N = 2 ** refinement
        mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, refinement)
        assert mesh.n_vertices == 1 + 3 * N * (N + 1)
        assert mesh.triangles.shape[0] == 6 * N * N
        assert mesh.edges.shape[0] == 3 * N * (3 * N + 1)
        assert mesh.boundary_loop.size == 6 * N
        assert mesh.rings == N

    @pytest.mark.parametrize("kind", [MeshKind.GEODESIC_POLAR_CAP, MeshKind.PLANAR_DISK_SAMPLE])
    def test_topology(self, kind):
        report = make_disk_mesh(kind, 2).topology_report()
        assert report == {
            "euler_characteristic": 1,
            "boundary_simple_cycle": True,
            "orientation_consistent": True,
        }

    def test_reference_inside_unit_disk(self):
        mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, 3)
        radii = np.linalg.norm(mesh.reference, axis=1)
        assert np.all(radii <= 1.0 + 1e-12)
        assert np.allclose(radii[mesh.boundary_loop], 1.0)
        assert np.allclose(mesh.reference[0], 0.0)

    def test_boundary_flags_match_loop(self):
        mesh = make_disk_mesh(MeshKind.PLANAR_DISK_SAMPLE, 2)
        assert set(np.flatnonzero(mesh.is_boundary)) == set(mesh.boundary_loop.tolist())
        assert mesh.interior.size + mesh.boundary_loop.size == mesh.n_vertices

    def test_two_rings_exclude_self(self):
        mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, 2)
        for v in (0, 5, int(mesh.boundary_loop[0])):
            assert v not in mesh.two_rings[v]
            assert set(mesh.neighbors[v]) <= set(mesh.two_rings[v])

    def test_rejects_negative_refinement(self):
        with pytest.raises(ValueError):
            make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, -1)

    def test_rejects_ring_kind(self):
        with pytest.raises(ValueError):
            make_disk_mesh(MeshKind.HYPERBOLIC_RINGS, 2)


class TestRingDisk:
    def test_counts_grow_with_radius(self):
        counts = hyperbolic_ring_counts(6, 0.5)
        assert all(c % 6 == 0 for c in counts)
        assert counts == sorted(counts)
        assert counts[0] >= 6

    def test_topology(self):
        mesh = make_ring_disk_mesh(hyperbolic_ring_counts(5, 0.6))
        report = mesh.topology_report()
        assert report["euler_characteristic"] == 1
        assert report["boundary_simple_cycle"]
        assert report["orientation_consistent"]
        assert mesh.kind is MeshKind.HYPERBOLIC_RINGS

    def test_rejects_tiny_rings(self):
        with pytest.raises(ValueError):
            make_ring_disk_mesh([6, 2])


class TestSphereMesh:
    def test_closed_without_boundary(self):
        mesh = make_sphere_mesh()
        assert mesh.boundary_loop.size == 0
        assert mesh.boundary_edges().size == 0
        assert mesh.euler_characteristic() == 2
        assert mesh.interior.size == 6
