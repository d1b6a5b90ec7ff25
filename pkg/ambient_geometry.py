"""
Амбиентное многообразие Адамара в карте верхнего полупространства.

Две модели: гиперболическое пространство H³ (g = δ/z², кривизна -1, замкнутые
формулы через hyperboloid.py) и конформная деформация g = e^{2φ} δ/z² с
гауссовым φ (геодезические интегрируются численно). Обе метрики конформны
евклидовой в карте: g = e^{2ψ} δ, ψ = φ - log z, поэтому ортогональность в g
совпадает с евклидовой, а нормы масштабируются множителем e^{ψ}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import root

import hyperboloid as hyp
from ksurface_errors import ChartError, IntegratorFailure, PreconditionViolation

UNIT_TOL = 1e-8
CERTIFICATION_TOL = 1e-6
BUSEMANN_TOL = 1e-6


@dataclass(frozen=True)
class ChartPoint:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.z) and self.z > 0.0):
            raise ChartError(f"Точка вне карты: z = {self.z!r} (нужно z > 0)")

    @classmethod
    def from_array(cls, a: np.ndarray) -> "ChartPoint":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class TangentVector:
    base: ChartPoint
    components: Tuple[float, float, float]

    @classmethod
    def from_arrays(cls, base: np.ndarray, components: np.ndarray) -> "TangentVector":
        c = np.asarray(components, dtype=float)
        return cls(ChartPoint.from_array(base), (float(c[0]), float(c[1]), float(c[2])))

    def as_array(self) -> np.ndarray:
        return np.array(self.components, dtype=float)


@dataclass(frozen=True)
class IdealPoint:
    """Точка плоскости z = 0 или бесконечно удалённая точка (x = y = None)."""

    x: Optional[float] = None
    y: Optional[float] = None

    def __post_init__(self) -> None:
        if (self.x is None) != (self.y is None):
            raise ValueError("IdealPoint: задайте обе координаты или ни одной")

    @classmethod
    def infinity(cls) -> "IdealPoint":
        return cls()

    @classmethod
    def boundary(cls, x: float, y: float) -> "IdealPoint":
        return cls(float(x), float(y))

    @classmethod
    def from_null_vector(cls, N: np.ndarray) -> "IdealPoint":
        xy = hyp.null_to_boundary(N)
        return cls() if xy is None else cls(*xy)

    @property
    def at_infinity(self) -> bool:
        return self.x is None

    def null_vector(self) -> np.ndarray:
        if self.at_infinity:
            return hyp.NULL_AT_INFINITY.copy()
        return hyp.boundary_null_vector(self.x, self.y)


@dataclass(frozen=True)
class WarpFactor:
    """φ(p) = amplitude · exp(-|p - center|² / width²)."""

    amplitude: float = 0.0
    center: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    width: float = 1.0

    def derivatives(self, P: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        P = np.asarray(P, dtype=float)
        d = P - np.asarray(self.center, dtype=float)
        w2 = self.width * self.width
        phi = self.amplitude * np.exp(-np.sum(d * d, axis=-1) / w2)
        grad = phi[..., None] * (-2.0 * d / w2)
        hess = phi[..., None, None] * (
            4.0 * d[..., :, None] * d[..., None, :] / (w2 * w2) - 2.0 * np.eye(3) / w2
        )
        return phi, grad, hess


class ModelKind(str, Enum):
    HYPERBOLIC = "hyperbolic"
    WARPED = "warped"


@dataclass(frozen=True)
class AmbientModel:
    kind: ModelKind = ModelKind.HYPERBOLIC
    curvature_upper_bound: float = 1.0
    warp: WarpFactor = field(default_factory=WarpFactor)
    integrator_atol: float = 1e-10
    integrator_rtol: float = 1e-10
    # Множитель перед W; отличен от +1 только в мутационной проверке знаков.
    w_sign: float = 1.0
    certified_max_sectional: float = -1.0

    @property
    def c(self) -> float:
        return self.curvature_upper_bound

    @property
    def closed_form(self) -> bool:
        return self.kind is ModelKind.HYPERBOLIC


class FamilyKind(str, Enum):
    SPHERE = "sphere"
    HOROSPHERE = "horosphere"
    EQUIDISTANT = "equidistant"
    TUBE = "tube"


@dataclass(frozen=True)
class SurfaceFamily:
    kind: FamilyKind
    r: float = 0.0


@dataclass(frozen=True)
class SurfaceCurvatures:
    principal: Tuple[float, float]
    extrinsic: float

    @property
    def trace(self) -> float:
        return self.principal[0] + self.principal[1]


@dataclass(frozen=True)
class CurvatureEndomorphism:
    base: ChartPoint
    normal: Tuple[float, float, float]
    chart_matrix: np.ndarray
    basis: np.ndarray
    matrix: np.ndarray
    eigenvalues: Tuple[float, float]
    symmetry_defect: float


@dataclass(frozen=True)
class EvolutionRate:
    rate: float
    lower_bound: float


# ---------------------------------------------------------------------------
# векторизованные примитивы


def _check_points(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if np.any(~np.isfinite(P)) or np.any(P[..., 2] <= 0.0):
        raise ChartError("Точки вне карты верхнего полупространства (z <= 0)")
    return P


def psi_derivatives(model: AmbientModel, P: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    P = _check_points(P)
    z = P[..., 2]
    ez = np.zeros(P.shape)
    ez[..., 2] = 1.0
    psi = -np.log(z)
    dpsi = -ez / z[..., None]
    hpsi = ez[..., :, None] * ez[..., None, :] / (z * z)[..., None, None]
    if model.kind is ModelKind.WARPED:
        phi, grad, hess = model.warp.derivatives(P)
        psi = psi + phi
        dpsi = dpsi + grad
        hpsi = hpsi + hess
    return psi, dpsi, hpsi


def conformal_scale(model: AmbientModel, P: np.ndarray) -> np.ndarray:
    """e^{ψ}: g-норма = e^{ψ} · евклидова норма в карте."""
    return np.exp(psi_derivatives(model, P)[0])


def inner(model: AmbientModel, P: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    s = conformal_scale(model, P)
    return s * s * np.sum(np.asarray(u) * np.asarray(v), axis=-1)


def g_norm(model: AmbientModel, P: np.ndarray, v: np.ndarray) -> np.ndarray:
    return conformal_scale(model, P) * np.linalg.norm(np.asarray(v, dtype=float), axis=-1)


def normalize(model: AmbientModel, P: np.ndarray, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / g_norm(model, P, v)[..., None]


def curvature_form(model: AmbientModel, P: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """A = Hess ψ - dψ⊗dψ + ½|dψ|² I и ψ; сек. кривизна = -e^{-2ψ}(A(X,X) + A(Y,Y))."""
    psi, dpsi, hpsi = psi_derivatives(model, P)
    sq = np.sum(dpsi * dpsi, axis=-1)
    A = hpsi - dpsi[..., :, None] * dpsi[..., None, :] + 0.5 * sq[..., None, None] * np.eye(3)
    return A, psi


def christoffel(model: AmbientModel, P: np.ndarray) -> np.ndarray:
    """Γ[..., k, i, j] = δ_ik ∂_j ψ + δ_jk ∂_i ψ - δ_ij ∂_k ψ."""
    _, dpsi, _ = psi_derivatives(model, P)
    eye = np.eye(3)
    return (
        eye[:, :, None] * dpsi[..., None, None, :]
        + eye[:, None, :] * dpsi[..., None, :, None]
        - eye[None, :, :] * dpsi[..., :, None, None]
    )


def max_sectional_curvature(model: AmbientModel, P: np.ndarray) -> np.ndarray:
    """Максимум секционной кривизны по всем плоскостям в точке (точно)."""
    A, psi = curvature_form(model, P)
    lam = np.linalg.eigvalsh(A)
    return -np.exp(-2.0 * psi) * (np.trace(A, axis1=-2, axis2=-1) - lam[..., -1])


def curvature_endomorphism_matrices(model: AmbientModel, P: np.ndarray, N: np.ndarray) -> np.ndarray:
    """W(u) = R(n, u) n в компонентах карты для набора нормалей N."""
    A, psi = curvature_form(model, P)
    n_hat = np.asarray(N, dtype=float)
    n_hat = n_hat / np.linalg.norm(n_hat, axis=-1)[..., None]
    proj = np.eye(3) - n_hat[..., :, None] * n_hat[..., None, :]
    ann = np.einsum("...i,...ij,...j->...", n_hat, A, n_hat)
    W = proj @ A @ proj + ann[..., None, None] * proj
    return model.w_sign * np.exp(-2.0 * psi)[..., None, None] * W


def geodesic_acceleration(model: AmbientModel, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    _, dpsi, _ = psi_derivatives(model, x)
    return -2.0 * np.sum(dpsi * v, axis=-1)[..., None] * v + np.sum(v * v, axis=-1)[..., None] * dpsi


def _integrate_geodesic(model: AmbientModel, x0: np.ndarray, v0: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
    if t == 0.0:
        return x0.copy(), v0.copy()

    def rhs(_s, y):
        return np.concatenate((y[3:], geodesic_acceleration(model, y[:3], y[3:])))

    def hits_boundary(_s, y):
        return y[2] - 1e-9

    hits_boundary.terminal = True
    sol = solve_ivp(
        rhs,
        (0.0, float(t)),
        np.concatenate((x0, v0)),
        method="RK45",
        atol=model.integrator_atol,
        rtol=model.integrator_rtol,
        events=hits_boundary,
    )
    if sol.status != 0:
        raise IntegratorFailure(f"Интегратор геодезических остановлен: {sol.message}")
    y = sol.y[:, -1]
    return y[:3], y[3:]


def geodesic_flow(model: AmbientModel, P: np.ndarray, V: np.ndarray, t=1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Точки exp_p(t v) и скорости в них, в компонентах карты."""
    P = _check_points(P)
    V = np.asarray(V, dtype=float)
    T = np.broadcast_to(np.asarray(t, dtype=float), P.shape[:-1])
    if model.closed_form:
        X = hyp.chart_to_hyperboloid(P)
        points, vel = hyp.exp(X, hyp.push_vectors(P, V), T)
        chart = hyp.hyperboloid_to_chart(points)
        return chart, hyp.pull_vectors(chart, vel)
    flat_p = P.reshape(-1, 3)
    flat_v = V.reshape(-1, 3)
    flat_t = T.reshape(-1)
    out_p = np.empty_like(flat_p)
    out_v = np.empty_like(flat_v)
    for i in range(flat_p.shape[0]):
        out_p[i], out_v[i] = _integrate_geodesic(model, flat_p[i], flat_v[i], float(flat_t[i]))
    return out_p.reshape(P.shape), out_v.reshape(P.shape)


def log_vectors(model: AmbientModel, p: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Приближение log_p(q) в компонентах карты.

    H³: точная формула. Деформация: разложение второго порядка
    v = Δ + ½ Γ(p)(Δ, Δ), чего достаточно для кубической аппроксимации высот.
    """
    p = _check_points(p)
    Q = _check_points(Q)
    if model.closed_form:
        X = hyp.chart_to_hyperboloid(p)
        Y = hyp.chart_to_hyperboloid(Q)
        return hyp.pull_vectors(np.broadcast_to(p, Q.shape), hyp.log(X, Y))
    delta = Q - p
    gamma = christoffel(model, p)
    return delta + 0.5 * np.einsum("...kij,...i,...j->...k", gamma, delta, delta)


def transport_vectors(model: AmbientModel, Q: np.ndarray, p: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Параллельный перенос векторов W из точек Q в точку p."""
    Q = _check_points(Q)
    p = _check_points(p)
    if model.closed_form:
        Xq = hyp.chart_to_hyperboloid(Q)
        Xp = np.broadcast_to(hyp.chart_to_hyperboloid(p), Xq.shape)
        moved = hyp.transport(Xq, Xp, hyp.push_vectors(Q, W))
        return hyp.pull_vectors(np.broadcast_to(p, Q.shape), moved)
    delta = p - Q
    gamma = christoffel(model, 0.5 * (Q + p))
    return W - np.einsum("...kij,...i,...j->...k", gamma, delta, W)


def distances(model: AmbientModel, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    P = _check_points(P)
    Q = _check_points(Q)
    if model.closed_form:
        d2 = np.sum((P - Q) ** 2, axis=-1)
        return np.arccosh(1.0 + d2 / (2.0 * P[..., 2] * Q[..., 2]))
    P2 = np.broadcast_to(P, np.broadcast_shapes(P.shape, Q.shape)).reshape(-1, 3)
    Q2 = np.broadcast_to(Q, P2.shape[:-1] + (3,)).reshape(-1, 3)
    out = np.array([
        float(g_norm(model, a, _shoot(model, a, b))) for a, b in zip(P2, Q2)
    ])
    return out.reshape(np.broadcast_shapes(P.shape, Q.shape)[:-1])


def _shoot(model: AmbientModel, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """log_p(q) для деформированной метрики пристрелкой из гиперболического приближения."""
    guess = log_vectors(AmbientModel(), p, q)
    scale = max(1.0, float(np.linalg.norm(q - p)))

    def residual(v):
        end, _ = _integrate_geodesic(model, p, v, 1.0)
        return end - q

    sol = root(residual, guess, method="hybr", tol=1e-13)
    miss = float(np.linalg.norm(residual(sol.x)))
    if miss > 1e-9 * scale:
        raise IntegratorFailure(f"Пристрелка log_p(q) не сошлась (невязка {miss:.3e})")
    return sol.x


# ---------------------------------------------------------------------------
# построение модели


def certify_curvature_bound(model: AmbientModel, seed: int = 0, n_random: int = 200) -> float:
    """Максимум секционной кривизны на сетке и случайной выборке точек."""
    axis = np.linspace(-2.0, 2.0, 9)
    heights = np.geomspace(0.25, 4.0, 9)
    grid = np.stack(np.meshgrid(axis, axis, heights, indexing="ij"), axis=-1).reshape(-1, 3)
    rng = np.random.default_rng(seed)
    rand = np.column_stack((
        rng.uniform(-2.0, 2.0, n_random),
        rng.uniform(-2.0, 2.0, n_random),
        np.exp(rng.uniform(np.log(0.25), np.log(4.0), n_random)),
    ))
    return float(np.max(max_sectional_curvature(model, np.vstack((grid, rand)))))


def make_model(
    kind: ModelKind | str = ModelKind.HYPERBOLIC,
    curvature_upper_bound: float = 1.0,
    warp: Optional[WarpFactor] = None,
    *,
    w_sign: float = 1.0,
    seed: int = 0,
) -> AmbientModel:
    kind = ModelKind(kind)
    c = float(curvature_upper_bound)
    if c <= 0.0:
        raise PreconditionViolation("CURVATURE_BOUND", f"c = {c} должно быть > 0")
    if kind is ModelKind.HYPERBOLIC:
        if c > 1.0 + 1e-12:
            raise PreconditionViolation("CURVATURE_BOUND", f"H³ имеет кривизну -1, c = {c} > 1 недопустимо")
        return AmbientModel(kind=kind, curvature_upper_bound=c, w_sign=w_sign, certified_max_sectional=-1.0)
    probe = AmbientModel(kind=kind, curvature_upper_bound=c, warp=warp or WarpFactor(), w_sign=w_sign)
    worst = certify_curvature_bound(probe, seed=seed)
    if worst > -c + CERTIFICATION_TOL:
        raise PreconditionViolation(
            "CURVATURE_BOUND",
            f"секционная кривизна достигает {worst:.6f} > -c = {-c:.6f}",
            {"max_sectional": worst},
        )
    return AmbientModel(
        kind=kind,
        curvature_upper_bound=c,
        warp=probe.warp,
        w_sign=w_sign,
        certified_max_sectional=worst,
    )


# ---------------------------------------------------------------------------
# операции


def metric_and_connection(model: AmbientModel, p: ChartPoint) -> Tuple[np.ndarray, np.ndarray]:
    x = p.as_array()
    scale = float(conformal_scale(model, x))
    return scale * scale * np.eye(3), christoffel(model, x)


def christoffel_consistency_defect(model: AmbientModel, p: ChartPoint, h: float = 1e-5) -> float:
    """Сравнение Γ с центральными разностями метрики."""
    x = p.as_array()
    dg = np.zeros((3, 3, 3))
    for l in range(3):
        step = np.zeros(3)
        step[l] = h
        gp, _ = metric_and_connection(model, ChartPoint.from_array(x + step))
        gm, _ = metric_and_connection(model, ChartPoint.from_array(x - step))
        dg[l] = (gp - gm) / (2.0 * h)
    g, gamma = metric_and_connection(model, p)
    ginv = np.linalg.inv(g)
    # Γ^k_ij = ½ g^{kl} (∂_i g_lj + ∂_j g_li - ∂_l g_ij)
    fd = 0.5 * (
        np.einsum("kl,ilj->kij", ginv, dg)
        + np.einsum("kl,jli->kij", ginv, dg)
        - np.einsum("kl,lij->kij", ginv, dg)
    )
    return float(np.max(np.abs(fd - gamma)))


def sectional_curvature(model: AmbientModel, p: ChartPoint, u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    e1 = u / np.linalg.norm(u)
    w = v - np.dot(v, e1) * e1
    nw = np.linalg.norm(w)
    if nw < 1e-12:
        raise ValueError("Векторы u и v не порождают плоскость")
    e2 = w / nw
    A, psi = curvature_form(model, p.as_array())
    return float(-np.exp(-2.0 * psi) * (e1 @ A @ e1 + e2 @ A @ e2))


def curvature_endomorphism(model: AmbientModel, n: TangentVector) -> CurvatureEndomorphism:
    x = n.base.as_array()
    nv = n.as_array()
    length = float(g_norm(model, x, nv))
    if abs(length - 1.0) > UNIT_TOL:
        raise ChartError(f"Нормаль не единичная: |n| = {length:.12f}")
    W = curvature_endomorphism_matrices(model, x, nv)
    n_hat = nv / np.linalg.norm(nv)
    helper = np.eye(3)[int(np.argmin(np.abs(n_hat)))]
    a = helper - np.dot(helper, n_hat) * n_hat
    a /= np.linalg.norm(a)
    b = np.cross(n_hat, a)
    basis = np.column_stack((a, b))
    # (W ê)·ê совпадает с g(W e, e) для g-единичного e = e^{-ψ} ê
    M = basis.T @ W @ basis
    defect = float(np.max(np.abs(M - M.T)))
    eig = np.linalg.eigvalsh(0.5 * (M + M.T))
    scale = float(conformal_scale(model, x))
    return CurvatureEndomorphism(
        base=n.base,
        normal=n.components,
        chart_matrix=W,
        basis=basis / scale,
        matrix=0.5 * (M + M.T),
        eigenvalues=(float(eig[0]), float(eig[1])),
        symmetry_defect=defect,
    )


def exp_map(model: AmbientModel, v: TangentVector, t: float) -> ChartPoint:
    point, _ = geodesic_flow(model, v.base.as_array(), v.as_array(), float(t))
    return ChartPoint.from_array(point)


def log_map(model: AmbientModel, p: ChartPoint, q: ChartPoint) -> TangentVector:
    x = p.as_array()
    y = q.as_array()
    if model.closed_form:
        return TangentVector.from_arrays(x, log_vectors(model, x, y))
    return TangentVector.from_arrays(x, _shoot(model, x, y))


def distance(model: AmbientModel, p: ChartPoint, q: ChartPoint) -> float:
    return float(distances(model, p.as_array(), q.as_array()))


def _ray_toward(model: AmbientModel, xi: IdealPoint, basepoint: np.ndarray) -> np.ndarray:
    O = hyp.chart_to_hyperboloid(basepoint)
    N = xi.null_vector()
    U = N + hyp.mdot(O, N) * O
    U = U / np.sqrt(hyp.mdot(U, U))
    v = hyp.pull_vectors(basepoint, U)
    return normalize(model, basepoint, v)


def busemann(model: AmbientModel, p: ChartPoint, xi: IdealPoint, basepoint: ChartPoint) -> float:
    x = p.as_array()
    b = basepoint.as_array()
    if model.closed_form:
        return float(hyp.busemann(hyp.chart_to_hyperboloid(x), xi.null_vector(), hyp.chart_to_hyperboloid(b)))
    # b_T(p) = d(p, γ(T)) - T, T удваивается до стабилизации
    direction = _ray_toward(model, xi, b)
    previous = None
    T = 2.0
    while T <= 32.0:
        far, _ = _integrate_geodesic(model, b, direction, T)
        value = float(g_norm(model, x, _shoot(model, x, far))) - T
        if previous is not None and abs(value - previous) < BUSEMANN_TOL:
            return value
        previous = value
        T *= 2.0
    raise IntegratorFailure("Функция Буземана: усечение луча не стабилизировалось до T = 32")


def busemann_gradient_norm(model: AmbientModel, p: ChartPoint, xi: IdealPoint, basepoint: ChartPoint, h: float = 1e-5) -> float:
    x = p.as_array()
    grad = np.zeros(3)
    for i in range(3):
        step = np.zeros(3)
        step[i] = h
        grad[i] = (
            busemann(model, ChartPoint.from_array(x + step), xi, basepoint)
            - busemann(model, ChartPoint.from_array(x - step), xi, basepoint)
        ) / (2.0 * h)
    # |∇b|_g = e^{-ψ} |∂b|
    return float(np.linalg.norm(grad) / conformal_scale(model, x))


def _require_closed_form(model: AmbientModel) -> None:
    if not model.closed_form:
        raise PreconditionViolation("MODEL_KIND", "замкнутые формулы есть только для H³")


def model_surface_curvatures(model: AmbientModel, family: SurfaceFamily) -> SurfaceCurvatures:
    _require_closed_form(model)
    kind = FamilyKind(family.kind)
    r = float(family.r)
    if kind is FamilyKind.HOROSPHERE:
        return SurfaceCurvatures((1.0, 1.0), 1.0)
    if r <= 0.0:
        raise ValueError(f"Радиус семейства должен быть > 0, получено {r}")
    if kind is FamilyKind.SPHERE:
        p = 1.0 / np.tanh(r)
        return SurfaceCurvatures((p, p), p * p)
    if kind is FamilyKind.EQUIDISTANT:
        p = np.tanh(r)
        return SurfaceCurvatures((p, p), p * p)
    # у трубки tanh · coth = 1 тождественно
    return SurfaceCurvatures((float(np.tanh(r)), float(1.0 / np.tanh(r))), 1.0)


def curvature_evolution(model: AmbientModel, family: SurfaceFamily) -> EvolutionRate:
    """dκ_r/dr вдоль единичного нормального потока и нижняя оценка (κ - c)(-λ₁ - λ₂)."""
    curv = model_surface_curvatures(model, family)
    lam1, lam2 = curv.principal
    kappa = curv.extrinsic
    k1 = k2 = -1.0
    rate = -kappa * (lam2 * (1.0 + k1 / kappa) + lam1 * (1.0 + k2 / kappa))
    bound = (kappa - model.c) * (-lam1 - lam2)
    return EvolutionRate(float(rate), float(bound))
