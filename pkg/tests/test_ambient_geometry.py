"""Амбиентная модель: типы карты, кривизна, геодезические, функции Буземана, оракулы."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ambient_geometry import (
    AmbientModel,
    ChartPoint,
    FamilyKind,
    IdealPoint,
    ModelKind,
    SurfaceFamily,
    TangentVector,
    WarpFactor,
    busemann,
    busemann_gradient_norm,
    christoffel_consistency_defect,
    curvature_endomorphism,
    curvature_evolution,
    distance,
    exp_map,
    geodesic_flow,
    g_norm,
    log_map,
    make_model,
    max_sectional_curvature,
    model_surface_curvatures,
    sectional_curvature,
)
from ksurface_errors import ChartError, PreconditionViolation

chart_points = st.tuples(
    st.floats(-1.5, 1.5, allow_nan=False),
    st.floats(-1.5, 1.5, allow_nan=False),
    st.floats(0.3, 2.5, allow_nan=False),
)


def make_warped(amplitude: float = 0.05, width: float = 0.5) -> AmbientModel:
    """Деформированная модель без сертификации (для проверок формул, не оценки)."""
    return AmbientModel(kind=ModelKind.WARPED, warp=WarpFactor(amplitude, (0.0, 0.0, 1.0), width))


def make_unit_vector(model: AmbientModel, p: np.ndarray, direction) -> TangentVector:
    v = np.asarray(direction, dtype=float)
    return TangentVector.from_arrays(p, v / float(g_norm(model, p, v)))


class TestChartTypes:
    @pytest.mark.parametrize("z", [0.0, -1.0, float("nan")])
    def test_point_below_chart_rejected(self, z):
        with pytest.raises(ChartError):
            ChartPoint(0.0, 0.0, z)

    def test_ideal_point_needs_both_coordinates(self):
        with pytest.raises(ValueError):
            IdealPoint(1.0, None)

    def test_infinity(self):
        assert IdealPoint.infinity().at_infinity
        assert not IdealPoint.boundary(0.0, 0.0).at_infinity


class TestModelConstruction:
    def test_hyperbolic_above_one_rejected(self):
        with pytest.raises(PreconditionViolation) as info:
            make_model(ModelKind.HYPERBOLIC, 1.5)
        assert info.value.precondition == "CURVATURE_BOUND"

    def test_nonpositive_bound_rejected(self):
        with pytest.raises(PreconditionViolation):
            make_model(ModelKind.HYPERBOLIC, 0.0)

    def test_flat_warp_is_certified(self):
        model = make_model(ModelKind.WARPED, 1.0, WarpFactor(0.0))
        assert model.certified_max_sectional == pytest.approx(-1.0, abs=1e-9)
        assert not model.closed_form

    def test_strong_positive_bump_rejected(self):
        # выпуклый гауссов бугор поднимает кривизну выше -1
        with pytest.raises(PreconditionViolation) as info:
            make_model(ModelKind.WARPED, 1.0, WarpFactor(0.5, (0.0, 0.0, 1.0), 0.5))
        assert "max_sectional" in info.value.details


class TestCurvature:
    @given(chart_points, st.integers(0, 2), st.integers(0, 2))
    @settings(max_examples=40, deadline=None)
    def test_hyperbolic_sectional_is_minus_one(self, p, i, j):
        if i == j:
            j = (i + 1) % 3
        model = AmbientModel()
        u, v = np.eye(3)[i], np.eye(3)[j] + 0.3 * np.eye(3)[i]
        assert sectional_curvature(model, ChartPoint(*p), u, v) == pytest.approx(-1.0, abs=1e-12)

    def test_max_sectional_is_minus_one(self):
        P = np.array([[0.0, 0.0, 1.0], [1.0, -1.0, 0.2], [0.3, 0.4, 3.0]])
        assert np.allclose(max_sectional_curvature(AmbientModel(), P), -1.0)

    def test_degenerate_plane_rejected(self):
        with pytest.raises(ValueError):
            sectional_curvature(AmbientModel(), ChartPoint(0.0, 0.0, 1.0), [1.0, 0.0, 0.0], [2.0, 0.0, 0.0])

    @pytest.mark.parametrize("model", [AmbientModel(), make_warped()], ids=["hyperbolic", "warped"])
    @pytest.mark.parametrize("point", [(0.0, 0.0, 1.0), (0.4, -0.3, 0.8), (0.2, 0.2, 1.6)])
    def test_christoffel_matches_metric(self, model, point):
        assert christoffel_consistency_defect(model, ChartPoint(*point)) < 1e-6

    def test_endomorphism_is_isotropic_in_h3(self):
        model = AmbientModel()
        p = np.array([0.2, -0.1, 0.7])
        W = curvature_endomorphism(model, make_unit_vector(model, p, [0.3, 0.1, 1.0]))
        assert W.symmetry_defect < 1e-12
        assert W.eigenvalues[0] == pytest.approx(W.eigenvalues[1], abs=1e-10)
        assert abs(W.eigenvalues[0]) == pytest.approx(1.0, abs=1e-10)

    def test_w_sign_flips_endomorphism(self):
        p = np.array([0.0, 0.0, 1.0])
        plus = curvature_endomorphism(AmbientModel(), make_unit_vector(AmbientModel(), p, [0, 0, 1]))
        minus_model = AmbientModel(w_sign=-1.0)
        minus = curvature_endomorphism(minus_model, make_unit_vector(minus_model, p, [0, 0, 1]))
        assert np.allclose(plus.matrix, -minus.matrix)

    def test_non_unit_normal_rejected(self):
        with pytest.raises(ChartError):
            curvature_endomorphism(AmbientModel(), TangentVector.from_arrays([0, 0, 1], [0, 0, 2]))


class TestGeodesics:
    @given(chart_points, st.floats(0.1, 2.0))
    @settings(max_examples=25, deadline=None)
    def test_exp_then_distance(self, p, t):
        model = AmbientModel()
        v = make_unit_vector(model, np.array(p), [0.5, -0.2, 0.7])
        q = exp_map(model, v, t)
        assert distance(model, ChartPoint(*p), q) == pytest.approx(t, rel=1e-8)

    def test_log_inverts_exp(self):
        model = AmbientModel()
        p = np.array([0.1, 0.2, 0.9])
        v = make_unit_vector(model, p, [1.0, 0.0, 0.5])
        q = exp_map(model, v, 1.2)
        w = log_map(model, ChartPoint.from_array(p), q)
        assert np.allclose(w.as_array(), 1.2 * v.as_array(), atol=1e-8)

    def test_unwarped_integrator_matches_closed_form(self):
        P = np.array([[0.0, 0.0, 1.0], [0.5, -0.2, 0.6]])
        V = np.array([[0.3, 0.0, 0.4], [-0.1, 0.2, 0.05]])
        exact, _ = geodesic_flow(AmbientModel(), P, V, 1.0)
        numeric, _ = geodesic_flow(make_warped(amplitude=0.0), P, V, 1.0)
        assert np.allclose(numeric, exact, atol=1e-7)

    def test_warped_distance_of_shot_geodesic(self):
        model = make_warped()
        p = np.array([0.1, 0.0, 1.1])
        v = make_unit_vector(model, p, [0.2, 0.4, -0.3])
        q = exp_map(model, v, 0.6)
        assert distance(model, ChartPoint.from_array(p), q) == pytest.approx(0.6, rel=1e-5)

    def test_exp_rejects_points_off_chart(self):
        with pytest.raises(ChartError):
            geodesic_flow(AmbientModel(), np.array([0.0, 0.0, -1.0]), np.array([1.0, 0.0, 0.0]))


class TestBusemann:
    @pytest.mark.parametrize("xi", [IdealPoint.infinity(), IdealPoint.boundary(0.5, -0.3)], ids=["infinity", "finite"])
    def test_unit_gradient(self, xi):
        model = AmbientModel()
        base = ChartPoint(0.0, 0.0, 1.0)
        for p in [(0.2, 0.1, 0.8), (-0.4, 0.3, 1.5)]:
            assert busemann_gradient_norm(model, ChartPoint(*p), xi, base) == pytest.approx(1.0, abs=1e-6)

    def test_horofunction_of_infinity(self):
        # центр в ∞: b = -log z относительно z = 1
        model = AmbientModel()
        value = busemann(model, ChartPoint(0.3, 0.4, 2.0), IdealPoint.infinity(), ChartPoint(0.0, 0.0, 1.0))
        assert value == pytest.approx(-np.log(2.0), abs=1e-12)

    def test_zero_at_basepoint(self):
        model = AmbientModel()
        base = ChartPoint(0.1, 0.1, 0.9)
        assert busemann(model, base, IdealPoint.boundary(1.0, 1.0), base) == pytest.approx(0.0, abs=1e-12)


class TestClosedForms:
    def test_sphere(self):
        curv = model_surface_curvatures(AmbientModel(), SurfaceFamily(FamilyKind.SPHERE, 1.0))
        assert curv.extrinsic == pytest.approx(1.0 / np.tanh(1.0) ** 2, rel=1e-14)
        assert curv.extrinsic > 1.0

    def test_horosphere(self):
        curv = model_surface_curvatures(AmbientModel(), SurfaceFamily(FamilyKind.HOROSPHERE))
        assert curv.principal == (1.0, 1.0)
        assert curv.extrinsic == 1.0

    def test_equidistant(self):
        curv = model_surface_curvatures(AmbientModel(), SurfaceFamily(FamilyKind.EQUIDISTANT, float(np.arctanh(0.5))))
        assert curv.extrinsic == pytest.approx(0.25, rel=1e-12)

    @pytest.mark.parametrize("r", [0.2, 0.7, 3.0])
    def test_tube_is_flat(self, r):
        curv = model_surface_curvatures(AmbientModel(), SurfaceFamily(FamilyKind.TUBE, r))
        assert curv.extrinsic == pytest.approx(1.0, rel=1e-14)
        assert curv.principal[0] < 1.0 < curv.principal[1]

    def test_nonpositive_radius_rejected(self):
        with pytest.raises(ValueError):
            model_surface_curvatures(AmbientModel(), SurfaceFamily(FamilyKind.SPHERE, 0.0))

    def test_warped_model_has_no_closed_form(self):
        with pytest.raises(PreconditionViolation) as info:
            model_surface_curvatures(make_warped(), SurfaceFamily(FamilyKind.SPHERE, 1.0))
        assert info.value.precondition == "MODEL_KIND"

    @pytest.mark.parametrize(
        "kind, r, kappa",
        [
            (FamilyKind.SPHERE, 1.0, lambda r: 1.0 / np.tanh(r) ** 2),
            (FamilyKind.EQUIDISTANT, 0.5, lambda r: np.tanh(r) ** 2),
        ],
    )
    def test_evolution_matches_finite_difference(self, kind, r, kappa):
        # поток вдоль внешней нормали увеличивает r
        h = 1e-6
        fd = (kappa(r + h) - kappa(r - h)) / (2.0 * h)
        rate = curvature_evolution(AmbientModel(), SurfaceFamily(kind, r))
        assert rate.rate == pytest.approx(fd, rel=1e-6)
        assert rate.rate >= rate.lower_bound - 1e-12
