"""Задача о линзе: предусловия, расписания, доминирование, аудит, решение."""
from __future__ import annotations

import numpy as np
import pytest

import hyperboloid as hyp
from ambient_geometry import AmbientModel, ModelKind, WarpFactor
from continuation_solver import (
    BaseHypothesis,
    ComparisonKind,
    HomotopySchedule,
    ScheduleKind,
    SolverConfig,
    boundary_ball_inclusion,
    cap_problem,
    cap_seed,
    contracting_schedule,
    degeneracy_diagnostics,
    distance_to_geodesic,
    domination_check,
    equidistant_problem,
    equidistant_seed,
    equidistant_seed_schedule,
    fit_geodesic,
    k_ramp_schedule,
    make_lens_problem,
    match_scaled_vertices,
    maximum_principle_probe,
    newton_solve,
    solve_lens,
)
from disk_mesh import MeshKind, make_disk_mesh
from immersed_surface import GraphSide, RadialGraph, graph_embed
from ksurface_errors import FitError, PreconditionViolation
from model_surfaces import closed_sphere_surface
from shooting_oracle import sphere_cap_profile

from conftest import EQUIDISTANT_DISTANCE


def make_graph(base, values) -> RadialGraph:
    lam = np.asarray(values, dtype=float).copy()
    lam[base.mesh.boundary_loop] = 0.0
    return RadialGraph(base=base, lam=lam)


@pytest.fixture(scope="module")
def cap(h3):
    return cap_problem(h3, 0.25, refinement=2)


@pytest.fixture(scope="module")
def solved_cap(cap):
    return solve_lens(cap, SolverConfig(tol=1e-8))


@pytest.fixture(scope="module")
def fine_cap(h3):
    return cap_problem(h3, 0.25, refinement=3)


@pytest.fixture(scope="module")
def solved_fine_cap(fine_cap):
    return solve_lens(fine_cap, SolverConfig(tol=1e-8))


class TestPreconditions:
    def test_closed_base_refused(self, h3):
        with pytest.raises(PreconditionViolation) as info:
            make_lens_problem(h3, closed_sphere_surface(h3), 0.25)
        assert info.value.precondition == "EMPTY_BOUNDARY"

    @pytest.mark.parametrize("k", [0.0, 1.0, 1.5, -0.2])
    def test_k_range(self, h3, k):
        with pytest.raises(PreconditionViolation) as info:
            cap_problem(h3, k, refinement=1)
        assert info.value.precondition == "K_RANGE"

    def test_nearly_flat_sphere_refused(self, h3):
        # coth² 3 ≈ 1.01 < c + margin
        with pytest.raises(PreconditionViolation) as info:
            cap_problem(h3, 0.25, refinement=1, radius=3.0, half_angle=0.5)
        assert info.value.precondition == "BASE_CURVATURE"

    def test_equidistant_needs_curvature_above_k(self, h3):
        with pytest.raises(PreconditionViolation) as info:
            equidistant_problem(h3, 0.5, refinement=1, distance=EQUIDISTANT_DISTANCE)
        assert info.value.precondition == "BASE_CURVATURE"
        assert info.value.details["hypothesis"] == BaseHypothesis.ABOVE_K.value

    def test_below_k_uses_pushoff(self, h3, coarse_equidistant):
        problem = make_lens_problem(h3, coarse_equidistant, 0.5, hypothesis=BaseHypothesis.BELOW_K)
        assert problem.side is GraphSide.PUSHOFF

    def test_cap_problem_hypothesis(self, cap):
        assert cap.hypothesis is BaseHypothesis.ABOVE_C
        assert cap.side is GraphSide.LENS
        assert cap.parametrization is not None


class TestSchedules:
    def test_contracting_stages(self):
        schedule = contracting_schedule(0.25)
        assert [t for t, _ in schedule.stages] == [0.125, 0.25, 0.5, 1.0]
        assert all(k == 0.25 for _, k in schedule.stages)

    def test_k_ramp(self):
        schedule = k_ramp_schedule(0.1, 0.3, stages=3)
        assert schedule.stages[0][1] == pytest.approx(0.1)
        assert schedule.stages[-1] == pytest.approx((1.0, 0.3))
        assert schedule.k_at(schedule.stages[1][0]) == pytest.approx(0.2)

    @pytest.mark.parametrize(
        "stages",
        [(), ((0.5, 0.2),), ((0.5, 0.2), (0.25, 0.2), (1.0, 0.2)), ((0.0, 0.2), (1.0, 0.2))],
        ids=["empty", "no-final-stage", "decreasing-t", "zero-t"],
    )
    def test_invalid_schedules(self, stages):
        with pytest.raises(ValueError):
            HomotopySchedule(ScheduleKind.CONTRACTING_DISK, stages)

    def test_decreasing_k_with_domination(self):
        with pytest.raises(ValueError):
            HomotopySchedule(ScheduleKind.K_RAMP, ((0.5, 0.3), (1.0, 0.2)))
        HomotopySchedule(ScheduleKind.K_RAMP, ((0.5, 0.3), (1.0, 0.2)), track_domination=False)

    def test_k_outside_range_in_schedule(self):
        schedule = HomotopySchedule(ScheduleKind.K_RAMP, ((0.5, 0.5), (1.0, 1.2)))
        with pytest.raises(PreconditionViolation):
            schedule.validate_against(1.0)

    def test_equidistant_seed_schedule(self):
        assert equidistant_seed_schedule(0.3).stages == ((1.0, 0.3),)


class TestDomination:
    def test_statuses(self, coarse_equidistant):
        V = coarse_equidistant.n_vertices
        low = make_graph(coarse_equidistant, np.full(V, 0.1))
        high = make_graph(coarse_equidistant, np.full(V, 0.2))
        assert domination_check(high, low).status == "strict"
        assert domination_check(low, low).status == "weak"
        result = domination_check(low, high)
        assert result.status == "violated"
        assert result.max_violation == pytest.approx(0.1)
        assert set(result.witnesses) == set(coarse_equidistant.mesh.interior.tolist())

    def test_different_meshes_rejected(self, h3, coarse_equidistant, equidistant_surface):
        a = make_graph(coarse_equidistant, np.zeros(coarse_equidistant.n_vertices))
        b = make_graph(equidistant_surface, np.zeros(equidistant_surface.n_vertices))
        with pytest.raises(ValueError):
            domination_check(a, b)

    def test_match_scaled_vertices(self):
        reference = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, 2).reference
        i, j = match_scaled_vertices(reference, 0.5, 1.0)
        # центр, чётные вершины колец 2 и 4
        assert i.size == 1 + 6 + 12
        assert np.allclose(0.5 * reference[i], reference[j], atol=1e-12)


class TestSeeds:
    def test_cap_seed_shape(self, cap):
        seed = cap_seed(cap)
        assert seed.side is GraphSide.LENS
        assert seed.interior_positive()
        assert seed.lam[0] == pytest.approx(seed.lam.max())

    def test_equidistant_seed(self, h3, coarse_equidistant):
        seed = equidistant_seed(h3, coarse_equidistant, 0.5)
        expected = np.arctanh(np.sqrt(0.5)) - EQUIDISTANT_DISTANCE
        assert seed.side is GraphSide.PUSHOFF
        assert seed.lam[0] == pytest.approx(expected, rel=5e-2)


class TestAudits:
    def test_fit_geodesic_recovers_axis(self):
        a = np.linspace(-1.0, 1.0, 9)
        points = np.cosh(a)[:, None] * hyp.ORIGIN + np.sinh(a)[:, None] * hyp.E3
        p, u = fit_geodesic(points)
        assert np.max(distance_to_geodesic(points, p, u)) < 1e-7
        assert hyp.mdot(p, p) == pytest.approx(-1.0)
        assert hyp.mdot(p, u) == pytest.approx(0.0, abs=1e-12)

    def test_fit_geodesic_rejects_spacelike(self):
        with pytest.raises(FitError):
            fit_geodesic(np.array([hyp.E1, hyp.E2, hyp.E1 + hyp.E2]))

    def test_sphere_probe_on_equidistant(self, h3, equidistant_surface):
        report = maximum_principle_probe(h3, equidistant_surface, ComparisonKind.SPHERE)
        assert report.ok

    def test_equidistant_probe_on_equidistant(self, h3, equidistant_surface):
        # сравнение с самой эквидистантой: касание во всех вершинах, κ совпадает до ошибки подгонки
        report = maximum_principle_probe(
            h3, equidistant_surface, ComparisonKind.EQUIDISTANT, radius=EQUIDISTANT_DISTANCE, tol=1e-2
        )
        assert report.contacts > 0
        assert report.ok

    def test_probe_needs_closed_form_model(self, coarse_equidistant):
        warped = AmbientModel(kind=ModelKind.WARPED, warp=WarpFactor(0.05, (0.0, 0.0, 1.0), 0.5))
        with pytest.raises(PreconditionViolation) as info:
            maximum_principle_probe(warped, coarse_equidistant, "sphere")
        assert info.value.precondition == "MODEL_KIND"

    def test_tube_is_flagged(self, h3):
        from ambient_geometry import FamilyKind, SurfaceFamily
        from model_surfaces import family_surface

        tube = family_surface(h3, SurfaceFamily(FamilyKind.TUBE, 0.7), 3)
        report = degeneracy_diagnostics(h3, tube)
        assert report.status == "suspected_tube"
        assert report.axis is not None

    def test_ball_audit_on_base(self, h3, cap):
        audit = boundary_ball_inclusion(h3, cap.base)
        assert audit.ok
        assert audit.radius > 0.0


@pytest.mark.slow
class TestSolve:
    def test_benchmark_converges(self, solved_cap):
        graph, report = solved_cap
        assert report.converged
        assert report.residual_final <= 1e-8
        assert report.lambda_positive
        assert report.iterations <= 20
        accepted = [s.t for s in report.stages if s.accepted]
        assert accepted[0] == 0.125
        assert accepted[-1] == 1.0
        assert all(s.domination != "violated" for s in report.stages)

    def test_matches_oracle(self, cap, solved_cap):
        graph, _ = solved_cap
        oracle = sphere_cap_profile(0.25, 1.0, 1.0).on_mesh(cap.mesh.reference)
        assert np.max(np.abs(graph.lam - oracle)) <= 0.1 * np.max(oracle)

    def test_matches_oracle_fine(self, fine_cap, solved_fine_cap):
        graph, report = solved_fine_cap
        assert report.converged
        oracle = sphere_cap_profile(0.25, 1.0, 1.0).on_mesh(fine_cap.mesh.reference)
        assert np.max(np.abs(graph.lam - oracle)) <= 1e-3

    def test_residual_certificate(self, solved_cap):
        _, report = solved_cap
        assert abs(report.residual_final - report.residual_recomputed) <= 1e-6

    def test_solution_inside_boundary_ball(self, h3, solved_cap):
        graph, _ = solved_cap
        assert boundary_ball_inclusion(h3, graph_embed(h3, graph)).ok

    def test_domination_in_k(self, cap, solved_cap):
        graph, _ = solved_cap
        flatter, report = newton_solve(cap.with_k(0.2), graph, SolverConfig(tol=1e-8))
        assert report.converged
        assert domination_check(flatter, graph, tol=1e-6).status != "violated"
