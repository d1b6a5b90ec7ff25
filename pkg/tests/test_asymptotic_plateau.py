"""Асимптотическая задача: данные на идеальной сфере, барьеры, исчерпание, конус."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import hyperboloid as hyp
from ambient_geometry import AmbientModel, ModelKind, WarpFactor
from asymptotic_plateau import (
    BOUND_SLACK,
    EPSILON_EXTRA,
    ExhaustionConfig,
    IdealDataKind,
    IdealDiskData,
    barrier_surface,
    cone_barrier_estimate,
    cone_lambda_bound,
    embedding_threshold,
    ensure_disk_data,
    epsilon_for,
    exhaustion_radii,
    exhaustion_solve,
    reject_global_data,
    supporting_planes,
)
from ksurface_errors import PreconditionViolation

THETA = np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False)


def make_wavy(orientation: int = 1) -> IdealDiskData:
    return IdealDiskData(1.2, ((0.0, 0.0), (0.1, -0.05)), hyp.rotation_to(np.array([0.6, 0.0, 0.8])), orientation)


def make_warped() -> AmbientModel:
    return AmbientModel(kind=ModelKind.WARPED, warp=WarpFactor(0.05, (0.0, 0.0, 1.0), 0.5))


class TestRefusals:
    def test_disk_is_accepted(self):
        assert reject_global_data("disk") is None
        ensure_disk_data(IdealDataKind.DISK)

    @pytest.mark.parametrize(
        "kind, punctures",
        [(IdealDataKind.FULL_SPHERE, 0), (IdealDataKind.SPHERE_MINUS_1, 1), (IdealDataKind.SPHERE_MINUS_2, 2)],
    )
    def test_punctured_spheres(self, kind, punctures):
        refusal = reject_global_data(kind)
        assert refusal.punctures == punctures
        assert refusal.precondition == "PUNCTURED_SPHERE"
        with pytest.raises(PreconditionViolation) as info:
            ensure_disk_data(kind.value)
        assert info.value.details["punctures"] == punctures

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            reject_global_data("torus")


class TestIdealDiskData:
    @pytest.mark.parametrize("alpha", [0.0, np.pi, -0.3])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValueError):
            IdealDiskData(alpha)

    def test_orientation_checked(self):
        with pytest.raises(ValueError):
            IdealDiskData(1.0, orientation=0)

    def test_frame_must_be_rotation(self):
        with pytest.raises(ValueError):
            IdealDiskData(1.0, frame=np.diag([1.0, 1.0, -1.0]))

    def test_perturbation_must_keep_curve_embedded(self):
        with pytest.raises(ValueError):
            IdealDiskData(0.2, ((0.3, 0.0),))

    def test_round_and_amplitude(self):
        assert IdealDiskData(1.0).is_round
        data = make_wavy()
        assert not data.is_round
        assert data.amplitude == pytest.approx(0.15)

    def test_curve_lies_on_ideal_sphere(self):
        d = make_wavy().curve_directions(THETA)
        assert np.allclose(np.linalg.norm(d, axis=1), 1.0)

    def test_round_curve_in_spanning_plane(self):
        data = IdealDiskData(0.8, frame=hyp.rotation_to(np.array([0.0, 0.6, 0.8])))
        ideal = np.column_stack((np.ones(THETA.size), data.curve_directions(THETA)))
        assert np.allclose(hyp.mdot(ideal, data.spanning_plane()), 0.0, atol=1e-12)

    def test_placement_carries_equator_to_curve(self):
        data = IdealDiskData(0.8, frame=hyp.rotation_to(np.array([0.0, 0.6, 0.8])))
        equator = np.column_stack((np.ones(THETA.size), np.cos(THETA), np.sin(THETA), np.zeros(THETA.size)))
        Y = equator @ data.placement().T
        assert np.allclose(Y[:, 1:] / Y[:, :1], data.curve_directions(THETA), atol=1e-12)

    def test_canonical_describes_same_curve(self):
        data = make_wavy(orientation=-1)
        canonical = data.canonical()
        assert canonical.orientation == 1
        assert canonical.alpha == pytest.approx(np.pi - data.alpha)
        assert np.allclose(canonical.curve_directions(THETA), data.curve_directions(-THETA), atol=1e-12)
        assert canonical.canonical() is canonical

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, 2.0 * np.pi), st.floats(0.2, 1.2))
    def test_rotated_curve(self, angle, alpha):
        R = hyp.rotation_to(np.array([np.sin(angle) * 0.6, np.cos(angle) * 0.6, 0.8]))
        data = IdealDiskData(alpha, ((0.05, 0.02),))
        assert np.allclose(data.rotated(R).curve_directions(THETA), data.curve_directions(THETA) @ R.T, atol=1e-12)

    def test_max_angle(self):
        assert IdealDiskData(1.0).max_angle == pytest.approx(1.0)
        assert make_wavy().max_angle == pytest.approx(1.2 + np.hypot(0.1, 0.05), abs=1e-4)


class TestSupportingPlanes:
    def test_round_data_has_one_plane(self):
        data = IdealDiskData(1.0)
        planes = supporting_planes(data)
        assert planes.shape == (1, 4)
        assert np.allclose(planes[0], data.spanning_plane())

    def test_wavy_data_planes_are_unit(self):
        planes = supporting_planes(make_wavy())
        assert planes.shape[0] > 1
        assert np.allclose(hyp.mdot(planes, planes), 1.0)


class TestExhaustionRadii:
    def test_radii(self):
        radii = exhaustion_radii(3)
        assert [r for r, _ in radii] == [0.5, 0.75, 0.875]
        for r, rho in radii:
            assert rho == pytest.approx(np.log((1.0 + r) / (1.0 - r)))

    def test_epsilon(self):
        assert epsilon_for(0.25) == pytest.approx(np.arctanh(0.5) + EPSILON_EXTRA)


class TestBarrier:
    def test_round_barrier_is_equidistant(self, h3):
        surf = barrier_surface(h3, IdealDiskData(np.pi / 2), 0.25, radius=1.0, refinement=3)
        kappa = surf.require_forms().extrinsic[surf.mesh.interior]
        assert np.allclose(kappa, np.tanh(epsilon_for(0.25)) ** 2, rtol=3e-2)

    def test_guards(self, h3):
        with pytest.raises(PreconditionViolation) as info:
            barrier_surface(make_warped(), IdealDiskData(1.0), 0.25)
        assert info.value.precondition == "MODEL_KIND"
        with pytest.raises(PreconditionViolation) as info:
            barrier_surface(h3, IdealDiskData(1.0), 1.0)
        assert info.value.precondition == "K_RANGE"


class TestConeEstimate:
    def test_threshold(self):
        # ORIGIN лежит на k-эквидистанте, когда cot α = -sinh artanh √k; при k = 1/4 это 2π/3
        assert embedding_threshold(0.25) == pytest.approx(2.0 * np.pi / 3.0, abs=2e-3)

    def test_hemisphere_on_axis(self, h3):
        estimate = cone_barrier_estimate(h3, np.pi / 2, 0.0, 0.25)
        assert estimate.delta == pytest.approx(np.arctanh(0.5))
        assert estimate.spread == 0.0
        assert estimate.samples == 512

    def test_deterministic_seed(self, h3):
        a = cone_barrier_estimate(h3, 1.0, 0.4, 0.25, seed=3)
        b = cone_barrier_estimate(h3, 1.0, 0.4, 0.25, seed=3)
        assert a == b

    @pytest.mark.parametrize("alpha, beta", [(1.0, 1.0), (1.0, -0.1), (0.5, 0.8), (2.5, 0.1)])
    def test_invalid_angles(self, h3, alpha, beta):
        with pytest.raises(ValueError):
            cone_barrier_estimate(h3, alpha, beta, 0.25)

    def test_threshold_is_precondition(self, h3):
        with pytest.raises(PreconditionViolation) as info:
            cone_barrier_estimate(h3, 2.3, 0.0, 0.25)
        assert info.value.precondition == "CONE_THRESHOLD"
        assert info.value.details["alpha0"] == pytest.approx(embedding_threshold(0.25))
        assert "deltahyper" in info.value.citation

    def test_model_guard(self):
        with pytest.raises(PreconditionViolation):
            cone_barrier_estimate(make_warped(), 1.0, 0.0, 0.25)


class TestConeLambdaBound:
    @pytest.mark.parametrize("alpha", [1.0, np.pi / 2])
    def test_round_data_meets_equidistant(self, h3, alpha):
        # вдоль нормали барьера граница равна расстоянию до k-эквидистанты той же шапки
        data = IdealDiskData(alpha)
        surf = barrier_surface(h3, data, 0.25, radius=1.0, refinement=2)
        interior = surf.mesh.interior
        delta = cone_barrier_estimate(h3, alpha, 0.0, 0.25).delta
        bound = cone_lambda_bound(data, delta, surf.positions[interior], -surf.normals[interior])
        X = hyp.chart_to_hyperboloid(surf.positions[interior])
        dist = np.arcsinh(hyp.mdot(X, data.spanning_plane()))
        assert np.allclose(bound, dist - np.arctanh(0.5), atol=1e-6)

    def test_wavy_data_is_finite(self, h3):
        data = make_wavy()
        surf = barrier_surface(h3, data, 0.25, radius=1.0, refinement=2)
        interior = surf.mesh.interior
        delta = cone_barrier_estimate(h3, data.max_angle, 0.0, 0.25).delta
        bound = cone_lambda_bound(data, delta, surf.positions[interior], -surf.normals[interior])
        assert np.all(np.isfinite(bound))
        assert np.all(bound > 0.0)

    def test_no_crossing_is_infinite(self, h3):
        # вдоль нормали от плоскости эквидистанта не встречается
        data = IdealDiskData(np.pi / 2)
        surf = barrier_surface(h3, data, 0.25, radius=1.0, refinement=2)
        centre = surf.mesh.interior[:1]
        delta = cone_barrier_estimate(h3, np.pi / 2, 0.0, 0.25).delta
        bound = cone_lambda_bound(data, delta, surf.positions[centre], surf.normals[centre])
        assert np.all(np.isinf(bound))


@pytest.mark.slow
class TestExhaustion:
    def test_round_data(self, h3):
        surf, report = exhaustion_solve(
            h3, IdealDiskData(np.pi / 2), 0.25, ExhaustionConfig(refinement=2, max_stages=2)
        )
        assert surf is not None
        assert 1 <= len(report.stages) <= 2
        assert report.monotone
        assert report.bounded is True
        assert report.height_bound == pytest.approx(np.arctanh(0.5))
        assert set(report.lambda_bound) == set(report.probe_vertices)
        assert report.max_bound_excess <= BOUND_SLACK
        assert all(len(h) == len(report.stages) for h in report.trace.values())
        assert set(report.closed_form) == {
            "position_error",
            "lambda_error",
            "oracle_kappa_error",
            "solution_kappa_error",
            "kappa_error_ratio",
        }
        assert report.to_dict()["trace"].keys() == {str(v) for v in report.probe_vertices}

    def test_wide_cap_has_no_bound(self, h3):
        # α_max >= α₀: δ(α_max, 0) не определена, исчерпание идёт без границы
        surf, report = exhaustion_solve(
            h3, IdealDiskData(2.3), 0.25, ExhaustionConfig(refinement=2, max_stages=1)
        )
        assert surf is not None
        assert report.alpha0 == pytest.approx(embedding_threshold(0.25))
        assert report.bounded is None
        assert np.isnan(report.height_bound)
        assert report.lambda_bound == {}
        assert not report.converged
        assert report.to_dict()["bounded"] is None

    def test_guards(self, h3):
        with pytest.raises(PreconditionViolation):
            exhaustion_solve(h3, IdealDiskData(1.0), 1.2)
        with pytest.raises(PreconditionViolation):
            exhaustion_solve(make_warped(), IdealDiskData(1.0), 0.25)
