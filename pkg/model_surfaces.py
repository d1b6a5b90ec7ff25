"""
Семейства поверхностей с замкнутыми формулами в H³ как параметризации диска.

Каждая параметризация переводит координаты опорного диска (u, v), |(u, v)| <= 1,
в точки гиперболоида и точные единичные внешние нормали. Центр патча лежит
в ORIGIN (точка карты (0, 0, 1)), ось E3 смотрит вниз по z. Множитель scale
сжимает опорный диск: scale = t даёт f_t(x) = f_1(t x).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

import hyperboloid as hyp
from ambient_geometry import AmbientModel, FamilyKind, SurfaceFamily, normalize
from disk_mesh import DiskMesh, MeshKind, make_disk_mesh, make_sphere_mesh
from immersed_surface import ImmersedSurface, estimate_normals, fit_fundamental_forms, make_surface


def polar_coordinates(uv: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    uv = np.asarray(uv, dtype=float)
    return np.hypot(uv[:, 0], uv[:, 1]), np.arctan2(uv[:, 1], uv[:, 0])


def _combine(*terms: Tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    return sum(coef[:, None] * vec[None, :] if np.ndim(vec) == 1 else coef[:, None] * vec for coef, vec in terms)


def plane_points(rho: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Точки вполне геодезической плоскости X3 = 0 в полярных координатах вокруг ORIGIN."""
    return _combine(
        (np.cosh(rho), hyp.ORIGIN),
        (np.sinh(rho) * np.cos(theta), hyp.E1),
        (np.sinh(rho) * np.sin(theta), hyp.E2),
    )


@dataclass(frozen=True)
class DiskParametrization:
    """Базовый класс: placement задаёт лоренцево преобразование, переносящее патч."""

    placement: np.ndarray = field(default_factory=lambda: np.eye(4))

    def local(self, uv: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def __call__(self, uv: np.ndarray, scale: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
        X, N = self.local(scale * np.asarray(uv, dtype=float))
        return X @ self.placement.T, N @ self.placement.T

    def principal_curvatures(self) -> Optional[Tuple[float, float]]:
        return None


@dataclass(frozen=True)
class SphereCap(DiskParametrization):
    """Шапка геодезической сферы радиуса radius вокруг ORIGIN; полярный угол до half_angle.

    Полюс шапки в направлении pole_sign·E3 (по умолчанию -E3, то есть вверх по z).
    """

    radius: float = 1.0
    half_angle: float = 1.0
    pole_sign: float = -1.0

    def local(self, uv):
        rho, theta = polar_coordinates(uv)
        phi = rho * self.half_angle
        direction = _combine(
            (np.sin(phi) * np.cos(theta), hyp.E1),
            (np.sin(phi) * np.sin(theta), hyp.E2),
            (self.pole_sign * np.cos(phi), hyp.E3),
        )
        r = self.radius
        X = np.cosh(r) * hyp.ORIGIN[None, :] + np.sinh(r) * direction
        N = np.sinh(r) * hyp.ORIGIN[None, :] + np.cosh(r) * direction
        return X, N

    def principal_curvatures(self):
        c = 1.0 / np.tanh(self.radius)
        return c, c


@dataclass(frozen=True)
class HorospherePatch(DiskParametrization):
    """Плоскость z = 1 (горосфера с центром в бесконечности), нормаль вниз."""

    extent: float = 1.0

    def local(self, uv):
        w = self.extent * np.asarray(uv, dtype=float)
        h = 0.5 * np.sum(w * w, axis=1)
        X = np.column_stack((1.0 + h, w[:, 0], w[:, 1], -h))
        return X, X - hyp.NULL_AT_INFINITY[None, :]

    def principal_curvatures(self):
        return 1.0, 1.0


@dataclass(frozen=True)
class EquidistantDisk(DiskParametrization):
    """Эквидистанта на расстоянии distance от плоскости X3 = 0 над геодезическим диском радиуса extent.

    distance = 0 даёт сам вполне геодезический диск с нормалью E3.
    """

    distance: float = 0.5
    extent: float = 1.0

    def local(self, uv):
        rho, theta = polar_coordinates(uv)
        Y = plane_points(rho * self.extent, theta)
        r = self.distance
        X = np.cosh(r) * Y + np.sinh(r) * hyp.E3[None, :]
        N = np.sinh(r) * Y + np.cosh(r) * hyp.E3[None, :]
        return X, N

    def principal_curvatures(self):
        t = np.tanh(self.distance)
        return t, t


@dataclass(frozen=True)
class TubePatch(DiskParametrization):
    """Трубка радиуса radius вокруг геодезической ORIGIN -> E3.

    u задаёт длину вдоль оси (до axial_extent), v угол (до angular_extent).
    """

    radius: float = 0.7
    axial_extent: float = 0.5
    angular_extent: float = 0.5

    def axis_point(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        return np.cosh(a)[..., None] * hyp.ORIGIN + np.sinh(a)[..., None] * hyp.E3

    def local(self, uv):
        uv = np.asarray(uv, dtype=float)
        a = uv[:, 0] * self.axial_extent
        theta = uv[:, 1] * self.angular_extent
        A = self.axis_point(a)
        direction = _combine((np.cos(theta), hyp.E1), (np.sin(theta), hyp.E2))
        r = self.radius
        return np.cosh(r) * A + np.sinh(r) * direction, np.sinh(r) * A + np.cosh(r) * direction

    def principal_curvatures(self):
        return float(np.tanh(self.radius)), float(1.0 / np.tanh(self.radius))


def to_chart(X: np.ndarray, N: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    P = hyp.hyperboloid_to_chart(X)
    return P, hyp.pull_vectors(P, N)


def immerse(
    model: AmbientModel,
    mesh: DiskMesh,
    param: DiskParametrization,
    *,
    scale: float = 1.0,
    fitted_normals: bool = False,
    with_forms: bool = True,
    threads: int = 1,
) -> ImmersedSurface:
    """Строит ImmersedSurface по параметризации; нормали точные или подогнанные."""
    X, N = param(mesh.reference, scale=scale)
    P, V = to_chart(X, N)
    V = normalize(model, P, V)
    if fitted_normals:
        V = estimate_normals(model, mesh, P, hint=V, threads=threads)
    surf = make_surface(model, mesh, P, V)
    return fit_fundamental_forms(model, surf, threads=threads) if with_forms else surf


def family_parametrization(family: SurfaceFamily) -> DiskParametrization:
    """Стандартный патч семейства для таблицы оракула."""
    kind = FamilyKind(family.kind)
    if kind is FamilyKind.SPHERE:
        return SphereCap(radius=family.r, half_angle=np.pi / 3.0)
    if kind is FamilyKind.HOROSPHERE:
        return HorospherePatch(extent=1.0)
    if kind is FamilyKind.EQUIDISTANT:
        return EquidistantDisk(distance=family.r, extent=1.0)
    return TubePatch(radius=family.r, axial_extent=0.5, angular_extent=0.5)


def family_mesh_kind(family: SurfaceFamily) -> MeshKind:
    # у трубки координаты (ось, угол) декартовы, остальные патчи полярные
    if FamilyKind(family.kind) in (FamilyKind.TUBE, FamilyKind.HOROSPHERE):
        return MeshKind.PLANAR_DISK_SAMPLE
    return MeshKind.GEODESIC_POLAR_CAP


def family_surface(model: AmbientModel, family: SurfaceFamily, refinement: int, threads: int = 1) -> ImmersedSurface:
    mesh = make_disk_mesh(family_mesh_kind(family), refinement)
    return immerse(model, mesh, family_parametrization(family), threads=threads)


def closed_sphere_surface(model: AmbientModel, radius: float = 1.0) -> ImmersedSurface:
    """Геодезическая сфера вокруг ORIGIN на октаэдре: замкнутая, без граничного цикла.

    Формы не подгоняются: у такой поверхности нет задачи Дирихле.
    """
    mesh = make_sphere_mesh()
    polar, azimuth = mesh.reference[:, 0], mesh.reference[:, 1]
    d = np.column_stack((np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth), np.cos(polar)))
    D = np.column_stack((np.zeros(mesh.n_vertices), d))
    X = np.cosh(radius) * hyp.ORIGIN + np.sinh(radius) * D
    N = np.sinh(radius) * hyp.ORIGIN + np.cosh(radius) * D
    P, V = to_chart(X, N)
    return make_surface(model, mesh, P, normalize(model, P, V))
