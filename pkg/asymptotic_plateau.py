#!/usr/bin/env python3
"""
Асимптотическая задача Плато в H³ для дисков на идеальной границе.

Данные: кривая на идеальной сфере, заданная как график над круглой окружностью
(угловой радиус α плюс тригонометрическое возмущение) в ортонормированной
рамке. Барьер: граница пересечения полупространств {<X, m_c> <= sinh ε₀} по
плоскостям максимальных вписанных окружностей; для круглых данных это одна
эквидистанта. Решение: линзы над растущими геодезическими дисками барьера,
высоты f_r на пробной области должны не убывать по r.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

import hyperboloid as hyp
from ambient_geometry import AmbientModel
from continuation_solver import (
    BaseHypothesis,
    LensProblem,
    SolverConfig,
    SolveReport,
    certify_base,
    linearized_seed,
    newton_solve,
)
from disk_mesh import DiskMesh, hyperbolic_ring_counts, make_ring_disk_mesh
from immersed_surface import GraphSide, ImmersedSurface, footprint, graph_embed
from ksurface_errors import PreconditionViolation, SolverFailure
from model_surfaces import DiskParametrization, immerse, plane_points, polar_coordinates

EPSILON_EXTRA = 0.1
MONOTONE_TOL = 1e-6
BOUND_SLACK = 1e-2
CURVE_SAMPLES = 720


class IdealDataKind(str, Enum):
    DISK = "disk"
    FULL_SPHERE = "full_sphere"
    SPHERE_MINUS_1 = "sphere_minus_1"
    SPHERE_MINUS_2 = "sphere_minus_2"


PUNCTURES = {
    IdealDataKind.FULL_SPHERE: 0,
    IdealDataKind.SPHERE_MINUS_1: 1,
    IdealDataKind.SPHERE_MINUS_2: 2,
}


@dataclass(frozen=True)
class Refusal:
    kind: IdealDataKind
    punctures: int
    precondition: str
    citation: str
    message: str


def reject_global_data(kind: IdealDataKind | str) -> Optional[Refusal]:
    """Отказ для образа Гаусса, равного сфере без 0, 1 или 2 точек; None для диска."""
    kind = IdealDataKind(kind)
    if kind is IdealDataKind.DISK:
        return None
    exc = PreconditionViolation(
        "PUNCTURED_SPHERE",
        f"данные '{kind.value}' (сфера без {PUNCTURES[kind]} точек) не имеют полной k-поверхности",
        {"punctures": PUNCTURES[kind]},
    )
    return Refusal(kind, PUNCTURES[kind], exc.precondition, exc.citation, str(exc))


def ensure_disk_data(kind: IdealDataKind | str) -> None:
    refusal = reject_global_data(kind)
    if refusal is not None:
        raise PreconditionViolation(refusal.precondition, refusal.message, {"punctures": refusal.punctures})


@dataclass(frozen=True)
class IdealDiskData:
    """Кривая α(θ) = α + Σ a_j cos jθ + b_j sin jθ вокруг frame[:, 2].

    orientation = +1: образ Гаусса есть диск, содержащий центр; -1: дополнительный диск.
    """

    alpha: float
    coefficients: Tuple[Tuple[float, float], ...] = ()
    frame: np.ndarray = field(default_factory=lambda: np.eye(3))
    orientation: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < np.pi:
            raise ValueError(f"α = {self.alpha} вне (0, π)")
        if self.orientation not in (1, -1):
            raise ValueError("orientation должна быть ±1")
        R = np.asarray(self.frame, dtype=float)
        if R.shape != (3, 3) or not np.allclose(R.T @ R, np.eye(3), atol=1e-10) or np.linalg.det(R) < 0.0:
            raise ValueError("frame должна быть матрицей поворота")
        object.__setattr__(self, "frame", R)
        object.__setattr__(self, "coefficients", tuple((float(a), float(b)) for a, b in self.coefficients))
        values = self.curve_angles(np.linspace(0.0, 2.0 * np.pi, CURVE_SAMPLES, endpoint=False))
        if values.min() <= 0.0 or values.max() >= np.pi:
            raise ValueError("возмущение выводит кривую за (0, π): кривая не вложена")

    @property
    def is_round(self) -> bool:
        return all(a == 0.0 and b == 0.0 for a, b in self.coefficients)

    @property
    def amplitude(self) -> float:
        return float(sum(abs(a) + abs(b) for a, b in self.coefficients))

    @property
    def max_angle(self) -> float:
        theta = np.linspace(0.0, 2.0 * np.pi, CURVE_SAMPLES, endpoint=False)
        return float(self.curve_angles(theta).max())

    def curve_angles(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.full_like(theta, self.alpha)
        for j, (a, b) in enumerate(self.coefficients, start=1):
            out = out + a * np.cos(j * theta) + b * np.sin(j * theta)
        return out

    def canonical(self) -> "IdealDiskData":
        """Данные с orientation = +1: дополнительный диск вокруг -центра."""
        if self.orientation == 1:
            return self
        flip = self.frame @ np.diag([1.0, -1.0, -1.0])
        # при повороте на π вокруг первой оси угол θ меняет знак
        coeffs = tuple((-a, b) for a, b in self.coefficients)
        return IdealDiskData(np.pi - self.alpha, coeffs, flip, 1)

    def curve_directions(self, theta: np.ndarray) -> np.ndarray:
        ang = self.curve_angles(theta)
        local = np.column_stack((np.sin(ang) * np.cos(theta), np.sin(ang) * np.sin(theta), np.cos(ang)))
        return local @ self.frame.T

    def rotated(self, R: np.ndarray) -> "IdealDiskData":
        return IdealDiskData(self.alpha, self.coefficients, np.asarray(R) @ self.frame, self.orientation)

    def placement(self) -> np.ndarray:
        """Лоренцево преобразование, переводящее плоскость X3 = 0 в плоскость круглой окружности α."""
        s = float(np.arcsinh(1.0 / np.tan(self.alpha)))
        boost = np.eye(4)
        boost[0, 0] = boost[3, 3] = np.cosh(s)
        boost[0, 3] = boost[3, 0] = np.sinh(s)
        return hyp.lorentz_rotation(self.frame) @ boost

    def spanning_plane(self) -> np.ndarray:
        return hyp.plane_of_circle(self.frame[:, 2], self.alpha)


def supporting_planes(data: IdealDiskData, n_tilt: int = 7, n_azimuth: int = 24) -> np.ndarray:
    """Нормали m_c плоскостей максимальных вписанных окружностей на сетке центров."""
    data = data.canonical()
    if data.is_round:
        return data.spanning_plane()[None, :]
    theta = np.linspace(0.0, 2.0 * np.pi, CURVE_SAMPLES, endpoint=False)
    curve = data.curve_directions(theta)
    min_alpha = float(data.curve_angles(theta).min())
    tilt_max = min(3.0 * data.amplitude, 0.5 * min_alpha)
    planes = []
    for tau in np.linspace(0.0, tilt_max, n_tilt):
        for phi in np.linspace(0.0, 2.0 * np.pi, 1 if tau == 0.0 else n_azimuth, endpoint=False):
            center = data.frame @ np.array([np.sin(tau) * np.cos(phi), np.sin(tau) * np.sin(phi), np.cos(tau)])
            beta = float(np.min(np.arccos(np.clip(curve @ center, -1.0, 1.0))))
            if beta > 1e-6:
                planes.append(hyp.plane_of_circle(center, beta))
    return np.array(planes)


def _envelope_heights(Y: np.ndarray, planes: np.ndarray, e: float) -> Tuple[np.ndarray, np.ndarray]:
    """Первый выход геодезической cosh s Y + sinh s E3 на {<X, m_c> = e}; индекс активной плоскости."""
    A = hyp.mdot(Y[:, None, :], planes[None, :, :])
    B = planes[:, 3][None, :]
    plus, minus = A + B, A - B
    disc = np.sqrt(np.maximum(e * e - plus * minus, 0.0))
    ok = (plus > 0.0) & (minus < 0.0)
    t = np.where(ok, (e + disc) / np.where(ok, plus, 1.0), np.inf)
    s = np.where(ok, np.log(np.where(ok, t, 1.0)), np.inf)
    active = np.argmin(s, axis=1)
    heights = s[np.arange(Y.shape[0]), active]
    if not np.all(np.isfinite(heights)):
        raise PreconditionViolation("BASE_CURVATURE", "огибающая опорных плоскостей не пересекает нормальные геодезические")
    return heights, active


@dataclass(frozen=True)
class EnvelopeBarrier(DiskParametrization):
    """ε₀-эквидистанта пересечения полупространств над геодезическим диском радиуса extent.

    local_planes заданы в системе, где плоскость круглой окружности есть X3 = 0.
    """

    local_planes: np.ndarray = field(default_factory=lambda: hyp.E3[None, :].copy())
    epsilon: float = 0.6
    extent: float = 1.0

    def local(self, uv):
        rho, theta = polar_coordinates(uv)
        Y = plane_points(rho * self.extent, theta)
        e = np.sinh(self.epsilon)
        s, active = _envelope_heights(Y, self.local_planes, e)
        X = np.cosh(s)[:, None] * Y + np.sinh(s)[:, None] * hyp.E3[None, :]
        N = (self.local_planes[active] + e * X) / np.cosh(self.epsilon)
        return X, N


def epsilon_for(k: float) -> float:
    return float(np.arctanh(np.sqrt(k)) + EPSILON_EXTRA)


def stage_mesh(radius: float, step: float) -> DiskMesh:
    """Кольцевая сетка с шагом step; кольцо j на радиусе j·step во всех стадиях."""
    rings = max(2, int(round(radius / step)))
    return make_ring_disk_mesh(hyperbolic_ring_counts(rings, step))


def _mesh_extent(mesh: DiskMesh, step: float) -> float:
    return mesh.rings * step


def barrier_surface(
    model: AmbientModel,
    data: IdealDiskData,
    k: float,
    radius: float = 2.0,
    refinement: int = 3,
    margin: float = 0.05,
    retries: int = 3,
    threads: int = 1,
) -> ImmersedSurface:
    """Барьер над геодезическим диском радиуса radius плоскости круглой окружности."""
    if not model.closed_form:
        raise PreconditionViolation("MODEL_KIND", "барьер строится замкнутыми формулами H³")
    if not 0.0 < k < model.c:
        raise PreconditionViolation("K_RANGE", f"k = {k} вне ]0, {model.c}[")
    step = 1.6 / 2 ** refinement
    return _barrier(model, data, k, stage_mesh(radius, step), step, margin, retries, threads)[0]


def _barrier(
    model: AmbientModel,
    data: IdealDiskData,
    k: float,
    mesh: DiskMesh,
    step: float,
    margin: float,
    retries: int,
    threads: int,
    epsilon: Optional[float] = None,
) -> Tuple[ImmersedSurface, EnvelopeBarrier]:
    data = data.canonical()
    placement = data.placement()
    inverse = hyp.lorentz_inverse(placement)
    local_planes = supporting_planes(data) @ inverse.T
    eps = epsilon_for(k) if epsilon is None else epsilon
    last: Optional[PreconditionViolation] = None
    for _ in range(retries + 1):
        param = EnvelopeBarrier(
            placement=placement, local_planes=local_planes, epsilon=eps, extent=_mesh_extent(mesh, step)
        )
        surf = immerse(model, mesh, param, threads=threads)
        try:
            certify_base(model, surf, k, margin, BaseHypothesis.ABOVE_K)
            return surf, param
        except PreconditionViolation as exc:
            last = exc
            eps += EPSILON_EXTRA
    raise PreconditionViolation(
        "BASE_CURVATURE", f"барьер не сертифицирован после {retries} увеличений ε₀: {last}", {"epsilon": eps}
    )


# ---------------------------------------------------------------------------
# исчерпание


@dataclass
class ExhaustionState:
    stage: int = 0
    radius: float = 0.0
    geodesic_radius: float = 0.0
    lam: Optional[np.ndarray] = None
    heights: Dict[int, List[float]] = field(default_factory=dict)
    status: str = "idle"
    last_error: str = ""


ExhaustionCallback = Callable[[ExhaustionState], None]


@dataclass(frozen=True)
class ExhaustionConfig:
    refinement: int = 3
    max_stages: int = 5
    tol: float = 1e-6
    probe_radius: float = 0.5
    margin: float = 0.05
    solver: SolverConfig = SolverConfig()


@dataclass
class ExhaustionReport:
    epsilon: float
    step: float
    probe_vertices: List[int]
    stages: List[Dict[str, object]] = field(default_factory=list)
    trace: Dict[int, List[float]] = field(default_factory=dict)
    converged: bool = False
    monotone: bool = True
    max_monotone_violation: float = 0.0
    # δ(α_max, 0) и выведенная из неё граница λ на пробной области;
    # bounded = None, когда α_max >= α₀ и граница не определена
    height_bound: float = float("nan")
    alpha0: float = float("nan")
    lambda_bound: Dict[int, float] = field(default_factory=dict)
    bounded: Optional[bool] = None
    max_bound_excess: float = float("nan")
    closed_form: Dict[str, float] = field(default_factory=dict)
    final_solve: Dict[str, object] = field(default_factory=dict)
    last_error: str = ""

    def to_dict(self) -> Dict[str, object]:
        return {
            "epsilon": self.epsilon,
            "step": self.step,
            "probe_vertices": list(self.probe_vertices),
            "stages": self.stages,
            "trace": {str(v): h for v, h in self.trace.items()},
            "converged": self.converged,
            "monotone": self.monotone,
            "max_monotone_violation": self.max_monotone_violation,
            "height_bound": self.height_bound,
            "alpha0": self.alpha0,
            "lambda_bound": {str(v): b for v, b in self.lambda_bound.items()},
            "bounded": self.bounded,
            "max_bound_excess": self.max_bound_excess,
            "closed_form": self.closed_form,
            "final_solve": self.final_solve,
            "last_error": self.last_error,
        }


def exhaustion_radii(max_stages: int) -> List[Tuple[float, float]]:
    """(r_j, ρ_j): r_j = 1 - 2^-j в диске Пуанкаре, ρ_j = 2 artanh r_j."""
    return [(1.0 - 2.0 ** -j, 2.0 * float(np.arctanh(1.0 - 2.0 ** -j))) for j in range(1, max_stages + 1)]


def round_data_errors(
    model: AmbientModel,
    data: IdealDiskData,
    k: float,
    surf: ImmersedSurface,
    lam: np.ndarray,
    epsilon: float,
    extent: float,
    probe: Sequence[int],
) -> Dict[str, float]:
    """Ошибки решения для круглых данных относительно эквидистанты artanh √k.

    kappa_error_ratio: ошибка замкнутой кривизны эквидистант через вершины решения
    к ошибке подогнанной κ на точной эквидистанте той же сетки.
    """
    data = data.canonical()
    rk = float(np.arctanh(np.sqrt(k)))
    probe = np.asarray(probe, dtype=int)
    X = hyp.chart_to_hyperboloid(surf.positions[probe])
    dist = np.arcsinh(hyp.mdot(X, data.spanning_plane()))
    exact = EnvelopeBarrier(placement=data.placement(), epsilon=rk, extent=extent)
    oracle = immerse(model, surf.mesh, exact)
    oracle_error = float(np.max(np.abs(oracle.require_forms().extrinsic[probe] - k)))
    curvature_error = float(np.max(np.abs(np.tanh(dist) ** 2 - k)))
    return {
        "position_error": float(np.max(np.abs(dist - rk))),
        "lambda_error": float(np.max(np.abs(lam[probe] - (epsilon - rk)))),
        "oracle_kappa_error": oracle_error,
        "solution_kappa_error": curvature_error,
        "kappa_error_ratio": curvature_error / max(oracle_error, 1e-300),
    }


def exhaustion_solve(
    model: AmbientModel,
    data: IdealDiskData,
    k: float,
    config: ExhaustionConfig = ExhaustionConfig(),
    cone_bound: bool = True,
    callback: Optional[ExhaustionCallback] = None,
) -> Tuple[ImmersedSurface, ExhaustionReport]:
    """Исчерпание растущими линзами; cone_bound=False отключает оценку δ(α_max, 0)."""
    if not model.closed_form:
        raise PreconditionViolation("MODEL_KIND", "асимптотическая задача решается в H³")
    if not 0.0 < k < model.c:
        raise PreconditionViolation("K_RANGE", f"k = {k} вне ]0, {model.c}[")
    data = data.canonical()
    step = 1.6 / 2 ** config.refinement
    radii = exhaustion_radii(config.max_stages)
    probe_rho = 2.0 * float(np.arctanh(config.probe_radius))
    first_rings = max(2, int(round(radii[0][1] / step)))
    probe_rings = min(int(np.floor(probe_rho / step + 1e-9)), first_rings - 1)
    state = ExhaustionState()
    report = ExhaustionReport(epsilon=epsilon_for(k), step=step, probe_vertices=[])
    alpha_max = data.max_angle
    delta: Optional[float] = None
    if cone_bound:
        report.alpha0 = embedding_threshold(k)
        if alpha_max < report.alpha0:
            delta = cone_barrier_delta(model, alpha_max, 0.0, k)
            report.height_bound = delta
            report.bounded = True
    bound = np.zeros(0)

    surf: Optional[ImmersedSurface] = None
    previous: Optional[np.ndarray] = None
    probe = np.zeros(0, dtype=int)
    epsilon: Optional[float] = None
    for j, (r, rho) in enumerate(radii, start=1):
        mesh = stage_mesh(rho, step)
        base, param = _barrier(model, data, k, mesh, step, config.margin, 3, config.solver.threads, epsilon)
        epsilon = param.epsilon
        report.epsilon = epsilon
        if j == 1:
            probe = np.flatnonzero(mesh.ring_index <= probe_rings)
            report.probe_vertices = probe.tolist()
            report.trace = {int(v): [] for v in probe}
            if delta is not None:
                bound = cone_lambda_bound(data, delta, base.positions[probe], -base.normals[probe])
                report.lambda_bound = {int(v): float(b) for v, b in zip(probe, bound)}
        state.stage, state.radius, state.geodesic_radius, state.status = j, r, mesh.rings * step, "solving"
        if callback:
            callback(state)
        problem = LensProblem(model, base, k, config.margin, BaseHypothesis.ABOVE_K, GraphSide.LENS)
        try:
            seed = linearized_seed(problem, threads=config.solver.threads)
            graph, solve_report = newton_solve(problem, seed, config.solver)
        except SolverFailure as exc:
            report.last_error = f"стадия {j} (ρ = {rho:.4f}): {exc}"
            report.final_solve = exc.report.to_dict() if isinstance(exc.report, SolveReport) else {}
            raise SolverFailure(report.last_error, last_good=surf, report=report) from exc
        if not solve_report.converged:
            report.last_error = f"стадия {j}: {solve_report.last_error}"
            raise SolverFailure(report.last_error, last_good=surf, report=report)

        fp = footprint(graph)
        lam = fp.focal[fp.base_vertex]
        diff = float("inf") if previous is None else float(np.max(np.abs(lam[probe] - previous[probe])))
        violation = 0.0 if previous is None else float(np.max(previous[probe] - lam[probe]))
        for v in probe:
            report.trace[int(v)].append(float(lam[v]))
        state.heights = report.trace
        report.max_monotone_violation = max(report.max_monotone_violation, violation)
        report.stages.append(
            {
                "stage": j,
                "poincare_radius": r,
                "geodesic_radius": mesh.rings * step,
                "vertices": mesh.n_vertices,
                "iterations": solve_report.iterations,
                "residual": solve_report.residual_final,
                "probe_difference": diff,
                "monotone_violation": violation,
                "probe_max_height": float(np.max(lam[probe])),
            }
        )
        surf = graph_embed(model, graph, threads=config.solver.threads)
        report.final_solve = solve_report.to_dict()
        state.lam = lam
        if violation > MONOTONE_TOL:
            report.monotone = False
            report.last_error = f"высоты f_r убывают на стадии {j}: {violation:.3e}"
            raise SolverFailure(report.last_error, last_good=surf, report=report)
        if delta is not None:
            excess = float(np.max(lam[probe] - bound))
            report.max_bound_excess = excess if j == 1 else max(report.max_bound_excess, excess)
            if excess > BOUND_SLACK:
                report.bounded = False
        previous = lam
        if diff < config.tol:
            report.converged = True
            break
        state.status = "stage done"
        if callback:
            callback(state)

    if not report.converged:
        report.last_error = f"разность на пробной области не опустилась ниже {config.tol:.1e} за {config.max_stages} стадий"
    if data.is_round and surf is not None and previous is not None:
        report.closed_form = round_data_errors(
            model, data, k, surf, previous, report.epsilon, surf.mesh.rings * step, probe
        )
    state.status = "converged" if report.converged else "stage limit"
    if callback:
        callback(state)
    return surf, report


# ---------------------------------------------------------------------------
# конус


@dataclass(frozen=True)
class ConeEstimate:
    delta: float
    spread: float
    alpha0: float
    samples: int


def _fan_distances(alpha: float, gamma: np.ndarray, k: float) -> np.ndarray:
    """Расстояние от ORIGIN до k-эквидистанты круглой шапки α вдоль лучей с углом γ к центру."""
    A = -np.cos(alpha)
    B = np.cos(gamma)
    e = np.sinh(np.arctanh(np.sqrt(k))) * np.sin(alpha)
    plus, minus = A + B, A - B
    disc = np.sqrt(np.maximum(e * e - plus * minus, 0.0))
    t = (e + disc) / plus
    return np.log(t)


def embedding_threshold(k: float, grid: int = 2000) -> float:
    """Наибольшее α сетки, при котором все лучи из ORIGIN выходят на поверхность при t > 0."""
    alphas = np.linspace(1e-3, np.pi - 1e-3, grid)
    ok = np.array([_fan_distances(a, np.zeros(1), k)[0] > 0.0 for a in alphas])
    if not ok.any():
        return 0.0
    first_bad = np.flatnonzero(~ok)
    return float(alphas[first_bad[0] - 1] if first_bad.size else alphas[-1])


def cone_barrier_estimate(
    model: AmbientModel,
    alpha: float,
    beta: float,
    k: float,
    samples: int = 512,
    seed: int = 0,
    bootstrap: int = 200,
) -> ConeEstimate:
    """Эмпирическая δ(α, β): максимум по вееру лучей в пределах угла β от центра."""
    if not model.closed_form:
        raise PreconditionViolation("MODEL_KIND", "оценка δ использует замкнутые формулы H³")
    if not 0.0 <= beta < alpha < np.pi:
        raise ValueError(f"нужно 0 <= β < α < π, получено α = {alpha}, β = {beta}")
    alpha0 = embedding_threshold(k)
    if alpha >= alpha0:
        raise PreconditionViolation(
            "CONE_THRESHOLD",
            f"α = {alpha:.4f} не меньше измеренного порога α₀ = {alpha0:.4f}",
            {"alpha": float(alpha), "alpha0": alpha0},
        )
    rng = np.random.default_rng(seed)
    # равномерно по площади сферической шапки угла β
    cos_gamma = 1.0 - rng.random(samples) * (1.0 - np.cos(beta))
    gamma = np.arccos(np.clip(cos_gamma, -1.0, 1.0))
    t = _fan_distances(alpha, gamma, k)
    if not np.all(np.isfinite(t)):
        raise SolverFailure("веер лучей не пересёк поверхность")
    delta = float(t.max())
    picks = rng.integers(0, samples, size=(bootstrap, samples))
    boot = t[picks].max(axis=1)
    spread = float(boot.std() / max(abs(boot.mean()), 1e-300))
    return ConeEstimate(delta=delta, spread=spread, alpha0=alpha0, samples=samples)


def cone_barrier_delta(model: AmbientModel, alpha: float, beta: float, k: float, samples: int = 512, seed: int = 0) -> float:
    return cone_barrier_estimate(model, alpha, beta, k, samples=samples, seed=seed).delta


def _crossing_heights(Y: np.ndarray, U: np.ndarray, m: np.ndarray, e: float) -> np.ndarray:
    """Первое s >= 0, при котором cosh s Y + sinh s U выходит на {<X, m> = e}; inf без пересечения."""
    a = hyp.mdot(Y, m)
    b = hyp.mdot(U, m)
    plus, minus = a + b, a - b
    d2 = e * e - plus * minus
    disc = np.sqrt(np.maximum(d2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        roots = np.stack((e - disc, e + disc), axis=-1) / plus[:, None]
        s = np.where(roots > 0.0, np.log(np.where(roots > 0.0, roots, 1.0)), np.inf)
    s = np.where((s >= -1e-12) & (d2 >= 0.0)[:, None], s, np.inf)
    return np.maximum(s.min(axis=1), 0.0)


def cone_lambda_bound(data: IdealDiskData, delta: float, positions: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Граница высот λ по δ(α_max, 0).

    k-эквидистанта шапки α_max проходит через точку оси на расстоянии δ от
    ORIGIN; решение для данных внутри шапки лежит между барьером и ней, так что
    λ в вершине не превосходит момента пересечения её нормальной геодезической
    с этой эквидистантой.
    """
    data = data.canonical()
    center = data.frame[:, 2]
    m = hyp.plane_of_circle(center, data.max_angle)
    level = float(hyp.mdot(np.concatenate(([np.cosh(delta)], np.sinh(delta) * center)), m))
    P = np.asarray(positions, dtype=float)
    return _crossing_heights(hyp.chart_to_hyperboloid(P), hyp.push_vectors(P, directions), m, level)


def print_exhaustion(state: ExhaustionState) -> None:
    print(
        f"[plateau] стадия {state.stage} r={state.radius:.4f} ρ={state.geodesic_radius:.4f} {state.status}",
        file=sys.stderr,
    )
