#!/usr/bin/env python3
"""
Задача Дирихле для k-поверхностей-линз: ньютоновские итерации по λ и
гомотопия по сжатию диска (f_t(x) = f_1(t x)) или по k(t).

Линза: Σ = exp(λ · (-n)) над выпуклой базой, λ = 0 на границе. Ньютон решает
L(c_v y) = -(κ - k) с c_v = g(γ'_v, ν_v); шаг принимается по Армихо на
sup-невязке и только пока κ ∈ (κ_min, c - margin) и B > 0 во внутренних вершинах.
"""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import minimize
from scipy.spatial import cKDTree

import hyperboloid as hyp
from ambient_geometry import AmbientModel, distances, inner
from disk_mesh import DiskMesh, MeshKind, make_disk_mesh
from immersed_surface import (
    GraphSide,
    ImmersedSurface,
    RadialGraph,
    fit_fundamental_forms,
    graph_embed,
    graph_geodesics,
    inverse_function,
    make_surface,
    triangle_angles_and_areas,
)
from ksurface_errors import (
    ChartError,
    DiscreteMaximumPrincipleViolation,
    FitError,
    IntegratorFailure,
    PreconditionViolation,
    SolverFailure,
)
from linearized_operator import assemble_L, lu_solve
from model_surfaces import DiskParametrization, EquidistantDisk, SphereCap, immerse

DOMINATION_TOL = 1e-10
SCHEDULE_DOMINATION_TOL = 1e-6


class BaseHypothesis(str, Enum):
    ABOVE_C = "above_c"  # κ_base > c + margin: база для линз (шапки сфер)
    ABOVE_K = "above_k"  # κ_base > k + margin: барьеры (эквидистанты)
    BELOW_K = "below_k"  # κ_base < k - margin, B >= 0: отталкивание наружу


class ScheduleKind(str, Enum):
    CONTRACTING_DISK = "contracting_disk"
    K_RAMP = "k_ramp"
    EQUIDISTANT_SEED = "equidistant_seed"


@dataclass
class SolveState:
    stage: int = 0
    t: float = 1.0
    k: float = 0.0
    iteration: int = 0
    residual: float = float("inf")
    step: float = 0.0
    status: str = "idle"
    last_error: str = ""


UpdateCallback = Callable[[SolveState], None]


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_newton: int = 20
    kappa_min: float = 1e-4
    armijo: float = 1e-4
    max_backtracks: int = 20
    jacobian: str = "consistent"
    enforce_dmp: bool = True
    threads: int = 1


@dataclass(frozen=True)
class LensProblem:
    model: AmbientModel
    base: ImmersedSurface
    k_target: float
    margin: float = 0.05
    hypothesis: BaseHypothesis = BaseHypothesis.ABOVE_C
    side: GraphSide = GraphSide.LENS
    parametrization: Optional[DiskParametrization] = None

    @property
    def mesh(self) -> DiskMesh:
        return self.base.mesh

    def base_at(self, t: float, threads: int = 1) -> ImmersedSurface:
        if t == 1.0:
            return self.base
        if self.parametrization is None:
            raise ValueError("Для сжатия диска нужна параметризация базы")
        return immerse(self.model, self.mesh, self.parametrization, scale=t, threads=threads)

    def with_k(self, k: float) -> "LensProblem":
        return LensProblem(
            model=self.model,
            base=self.base,
            k_target=k,
            margin=self.margin,
            hypothesis=self.hypothesis,
            side=self.side,
            parametrization=self.parametrization,
        )


def certify_base(model: AmbientModel, base: ImmersedSurface, k: float, margin: float, hypothesis: BaseHypothesis) -> float:
    """Проверяет предусловия задачи; возвращает минимальную κ базы."""
    if base.mesh.boundary_loop.size == 0:
        raise PreconditionViolation("EMPTY_BOUNDARY", "у базы пустая граница: замкнутых k-поверхностей нет")
    c = model.c
    if not 0.0 < k < c:
        raise PreconditionViolation("K_RANGE", f"k = {k} вне ]0, {c}[", {"k": k, "c": c})
    forms = base.require_forms()
    kappa = forms.extrinsic
    if hypothesis is BaseHypothesis.BELOW_K:
        bound = k - margin
        weak = np.flatnonzero((kappa >= bound) | (forms.principal[:, 0] < -1e-9))
        relation = "не ниже"
    else:
        bound = c + margin if hypothesis is BaseHypothesis.ABOVE_C else k + margin
        weak = np.flatnonzero((kappa <= bound) | (forms.principal[:, 0] <= 0.0))
        relation = "не превосходит"
    if weak.size:
        raise PreconditionViolation(
            "BASE_CURVATURE",
            f"κ базы {float(kappa[weak].min()):.6f} {relation} {bound:.6f} в {weak.size} вершинах",
            {"vertices": weak.tolist(), "bound": bound, "hypothesis": hypothesis.value},
        )
    return float(kappa.min())


def make_lens_problem(
    model: AmbientModel,
    base: ImmersedSurface,
    k: float,
    margin: float = 0.05,
    hypothesis: BaseHypothesis = BaseHypothesis.ABOVE_C,
    parametrization: Optional[DiskParametrization] = None,
    side: Optional[GraphSide] = None,
) -> LensProblem:
    if base.mesh.boundary_loop.size == 0:
        raise PreconditionViolation("EMPTY_BOUNDARY", "у базы пустая граница: замкнутых k-поверхностей нет")
    if base.forms is None:
        base = fit_fundamental_forms(model, base)
    if side is None:
        side = GraphSide.PUSHOFF if hypothesis is BaseHypothesis.BELOW_K else GraphSide.LENS
    certify_base(model, base, k, margin, hypothesis)
    return LensProblem(model, base, k, margin, hypothesis, side, parametrization)


def cap_problem(
    model: AmbientModel,
    k: float,
    refinement: int = 3,
    radius: float = 1.0,
    half_angle: float = 1.0,
    margin: float = 0.05,
    threads: int = 1,
) -> LensProblem:
    """Линза над шапкой сферы радиуса radius (эталонная задача: 1, 1 рад, k = 0.25)."""
    param = SphereCap(radius=radius, half_angle=half_angle)
    base = immerse(model, make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, refinement), param, threads=threads)
    return make_lens_problem(model, base, k, margin, BaseHypothesis.ABOVE_C, param)


def equidistant_problem(
    model: AmbientModel,
    k: float,
    refinement: int = 3,
    distance: float = 1.0,
    extent: float = 1.0,
    margin: float = 0.05,
    threads: int = 1,
) -> LensProblem:
    """Линза над эквидистантой distance над геодезическим диском радиуса extent."""
    param = EquidistantDisk(distance=distance, extent=extent)
    base = immerse(model, make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, refinement), param, threads=threads)
    return make_lens_problem(model, base, k, margin, BaseHypothesis.ABOVE_K, param)


@dataclass
class StageRecord:
    index: int
    t: float
    k: float
    iterations: int
    residual: float
    accepted: bool
    domination: Optional[str] = None
    domination_violation: float = 0.0
    common_vertices: int = 0
    diameter: float = 0.0
    note: str = ""


@dataclass
class SolveReport:
    lam: np.ndarray
    residual_history: List[float] = field(default_factory=list)
    residual_final: float = float("inf")
    residual_recomputed: float = float("inf")
    iterations: int = 0
    converged: bool = False
    lambda_positive: bool = False
    min_J: float = float("nan")
    lipschitz_ratio: float = float("nan")
    stages: List[StageRecord] = field(default_factory=list)
    degeneracy: Dict[str, object] = field(default_factory=dict)
    mesh_quality: Dict[str, float] = field(default_factory=dict)
    dmp_violations: List[int] = field(default_factory=list)
    last_error: str = ""

    def to_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["lam"] = [float(x) for x in self.lam]
        return out


# ---------------------------------------------------------------------------
# вспомогательные проверки


def _interior_residual(surf: ImmersedSurface, k: float) -> float:
    kappa = surf.require_forms().extrinsic
    return float(np.max(np.abs(kappa[surf.mesh.interior] - k)))


def _admissibility_error(problem: LensProblem, surf: ImmersedSurface, config: SolverConfig) -> str:
    forms = surf.require_forms()
    interior = surf.mesh.interior
    kin = forms.extrinsic[interior]
    upper = problem.model.c - problem.margin
    if kin.min() <= config.kappa_min or kin.max() >= upper:
        return f"κ вне ({config.kappa_min}, {upper:.4f}): [{kin.min():.6f}, {kin.max():.6f}]"
    if forms.principal[interior, 0].min() <= 0.0:
        return "B перестал быть положительно определённым"
    return ""


def _try_embed(problem: LensProblem, base: ImmersedSurface, lam: np.ndarray, threads: int):
    graph = RadialGraph(base=base, lam=lam, side=problem.side)
    try:
        return graph, graph_embed(problem.model, graph, threads=threads), ""
    except (ChartError, IntegratorFailure, FitError) as exc:
        return graph, None, str(exc)


def mesh_quality(model: AmbientModel, surf: ImmersedSurface) -> Dict[str, float]:
    angles, _ = triangle_angles_and_areas(model, surf)
    e = surf.mesh.edges
    lengths = distances(model, surf.positions[e[:, 0]], surf.positions[e[:, 1]])
    quality = {
        "min_angle_deg": float(np.degrees(angles.min())),
        "edge_ratio": float(lengths.max() / lengths.min()),
    }
    if surf.forms is not None:
        interior = surf.mesh.interior
        quality["max_symmetry_defect"] = float(surf.forms.symmetry_defect[interior].max())
        quality["max_normal_tilt"] = float(surf.forms.tilt[interior].max())
    return quality


# ---------------------------------------------------------------------------
# затравки


def _base_radii(model: AmbientModel, base: ImmersedSurface) -> Tuple[np.ndarray, float]:
    center = int(np.argmin(np.hypot(base.mesh.reference[:, 0], base.mesh.reference[:, 1])))
    rho = distances(model, base.positions, base.positions[center])
    return rho, float(np.mean(rho[base.mesh.boundary_loop]))


def cap_seed(problem: LensProblem) -> RadialGraph:
    """λ ≈ ½ (p̄ - √k)(ρ_b² - ρ²): разность стрелок базы и поверхности с главными √k."""
    base = problem.base_at(1.0)
    forms = base.require_forms()
    p_bar = float(np.mean(forms.principal[base.mesh.interior]))
    rho, rho_b = _base_radii(problem.model, base)
    lam = 0.5 * max(p_bar - np.sqrt(problem.k_target), 0.0) * np.maximum(rho_b ** 2 - rho ** 2, 0.0)
    lam[base.mesh.boundary_loop] = 0.0
    return RadialGraph(base=base, lam=lam, side=problem.side)


def linearized_seed(problem: LensProblem, base: Optional[ImmersedSurface] = None, threads: int = 1) -> RadialGraph:
    """Один линейный шаг от базы: L y = -(κ_base - k), λ = y / c_v (c_v = ∓1 при λ = 0)."""
    base = base or problem.base
    assembly = assemble_L(problem.model, base, threads=threads)
    rhs = np.zeros(base.n_vertices)
    interior = base.mesh.interior
    rhs[interior] = -(base.require_forms().extrinsic[interior] - problem.k_target)
    x, _ = lu_solve(assembly.consistent, rhs)
    sign = -1.0 if problem.side is GraphSide.LENS else 1.0
    lam = x / sign
    lam[base.mesh.boundary_loop] = 0.0
    return RadialGraph(base=base, lam=lam, side=problem.side)


def equidistant_seed(model: AmbientModel, base: ImmersedSurface, k_target: float) -> RadialGraph:
    """Отталкивание λ = R(k)(1 - t²), где t есть нормированный опорный радиус.

    R = max(0, artanh √k - artanh(min λ_base)): после сдвига на R главные
    кривизны tanh(R + artanh λ) не меньше √k. При min λ_base >= 1 хватает R = 0.
    """
    forms = base.require_forms()
    if forms.principal[:, 0].min() < -1e-9:
        raise PreconditionViolation("BASE_CURVATURE", "база не локально выпукла")
    lam_min = max(float(forms.principal[:, 0].min()), 0.0)
    sk = np.sqrt(k_target)
    R = 0.0 if lam_min >= 1.0 else max(0.0, float(np.arctanh(min(sk, 1.0 - 1e-15)) - np.arctanh(lam_min)))
    t = np.hypot(base.mesh.reference[:, 0], base.mesh.reference[:, 1])
    lam = R * np.clip(1.0 - t * t, 0.0, 1.0)
    lam[base.mesh.boundary_loop] = 0.0
    return RadialGraph(base=base, lam=lam, side=GraphSide.PUSHOFF)


def default_seed(problem: LensProblem, threads: int = 1) -> RadialGraph:
    if problem.hypothesis is BaseHypothesis.BELOW_K:
        return equidistant_seed(problem.model, problem.base, problem.k_target)
    if problem.hypothesis is BaseHypothesis.ABOVE_K:
        return linearized_seed(problem, threads=threads)
    return cap_seed(problem)


# ---------------------------------------------------------------------------
# Ньютон


def newton_solve(
    problem: LensProblem,
    seed: RadialGraph,
    config: SolverConfig = SolverConfig(),
    state: Optional[SolveState] = None,
    callback: Optional[UpdateCallback] = None,
) -> Tuple[RadialGraph, SolveReport]:
    model = problem.model
    base = seed.base
    mesh = base.mesh
    interior = mesh.interior
    state = state or SolveState(k=problem.k_target)
    state.k = problem.k_target
    report = SolveReport(lam=seed.lam.copy())
    if not 0.0 < problem.k_target < model.c:
        raise PreconditionViolation("K_RANGE", f"k = {problem.k_target} вне ]0, {model.c}[")

    graph, surf, err = _try_embed(problem, base, seed.lam.copy(), config.threads)
    if surf is None:
        raise SolverFailure(f"Затравка не погружается: {err}", report=report)
    err = _admissibility_error(problem, surf, config)
    if err:
        report.last_error = f"эллиптичность на затравке: {err}"
        raise SolverFailure(report.last_error, report=report)
    res = _interior_residual(surf, problem.k_target)
    report.residual_history.append(res)
    state.status, state.residual, state.iteration = "newton", res, 0
    if callback:
        callback(state)

    for it in range(1, config.max_newton + 1):
        if res <= config.tol:
            break
        try:
            assembly = assemble_L(model, surf, threads=config.threads)
        except PreconditionViolation as exc:
            report.last_error = f"эллиптичность потеряна: {exc}"
            raise SolverFailure(report.last_error, last_good=graph, report=report) from exc
        report.dmp_violations = [int(v) for v in assembly.dmp_violations]
        if config.enforce_dmp and assembly.dmp_violations:
            report.last_error = f"дискретный принцип максимума нарушен в {len(assembly.dmp_violations)} вершинах"
            raise DiscreteMaximumPrincipleViolation(report.last_error, assembly.dmp_violations, report=report)

        _, vel = graph_geodesics(model, graph)
        cvec = inner(model, surf.positions, vel, surf.normals)
        cvec[mesh.boundary_loop] = 1.0
        A = assembly.consistent if config.jacobian == "consistent" else assembly.matrix
        jac = (A @ sparse.diags(cvec)).tocsr()
        rhs = np.zeros(mesh.n_vertices)
        rhs[interior] = -(surf.require_forms().extrinsic[interior] - problem.k_target)
        step, _ = lu_solve(jac, rhs)
        step[mesh.boundary_loop] = 0.0

        t = 1.0
        accepted = False
        for _ in range(config.max_backtracks):
            trial_graph, trial, err = _try_embed(problem, base, graph.lam + t * step, config.threads)
            if trial is not None:
                err = _admissibility_error(problem, trial, config)
                if not err:
                    trial_res = _interior_residual(trial, problem.k_target)
                    if trial_res <= (1.0 - config.armijo * t) * res:
                        accepted = True
                        break
                    err = f"Армихо: {trial_res:.3e} > {res:.3e}"
            state.last_error = err
            t *= 0.5
        if not accepted:
            report.last_error = f"линейный поиск застрял на итерации {it}: {state.last_error}"
            report.lam = graph.lam.copy()
            report.residual_final = res
            raise SolverFailure(report.last_error, last_good=graph, report=report)
        graph, surf, res = trial_graph, trial, trial_res
        report.residual_history.append(res)
        report.iterations = it
        state.iteration, state.residual, state.step = it, res, t
        if callback:
            callback(state)

    report.lam = graph.lam.copy()
    report.residual_final = res
    report.converged = res <= config.tol
    report.lambda_positive = bool(np.all(graph.lam[interior] > 0.0))
    # независимый пересчёт невязки свежей аппроксимацией форм
    fresh = fit_fundamental_forms(model, make_surface(model, mesh, surf.positions, surf.normals))
    report.residual_recomputed = _interior_residual(fresh, problem.k_target)
    try:
        report.min_J = float(assemble_L(model, surf, threads=config.threads).J[interior].min())
    except PreconditionViolation as exc:
        report.last_error = str(exc)
    report.lipschitz_ratio = inverse_function(model, graph, surf).lipschitz_ratio
    report.degeneracy = degeneracy_diagnostics(model, surf, k=problem.k_target).to_dict()
    report.mesh_quality = mesh_quality(model, surf)
    if not report.converged:
        report.last_error = f"невязка {res:.3e} > tol {config.tol:.1e} после {config.max_newton} итераций"
    state.status = "converged" if report.converged else "stalled"
    if callback:
        callback(state)
    return graph, report


# ---------------------------------------------------------------------------
# гомотопия


@dataclass(frozen=True)
class HomotopySchedule:
    kind: ScheduleKind
    stages: Tuple[Tuple[float, float], ...]
    track_domination: bool = True

    def __post_init__(self) -> None:
        if not self.stages:
            raise ValueError("Пустое расписание")
        ts = [t for t, _ in self.stages]
        if any(not 0.0 < t <= 1.0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("t стадий должны возрастать в (0, 1]")
        if ts[-1] != 1.0:
            raise ValueError("Последняя стадия должна иметь t = 1")
        ks = [k for _, k in self.stages]
        if self.track_domination and self.kind is ScheduleKind.K_RAMP and any(b < a for a, b in zip(ks, ks[1:])):
            raise ValueError("При отслеживании доминирования k(t) должна быть неубывающей")

    def validate_against(self, c: float) -> None:
        bad = [k for _, k in self.stages if not 0.0 < k < c]
        if bad:
            raise PreconditionViolation("K_RANGE", f"k(t) вне ]0, {c}[: {bad}")

    def k_at(self, t: float) -> float:
        ts = np.array([s for s, _ in self.stages])
        ks = np.array([k for _, k in self.stages])
        return float(np.interp(t, ts, ks))


def contracting_schedule(k: float, t0: float = 0.125, ratio: float = 2.0) -> HomotopySchedule:
    ts = [t0]
    while ts[-1] * ratio < 1.0 - 1e-12:
        ts.append(ts[-1] * ratio)
    ts.append(1.0)
    return HomotopySchedule(ScheduleKind.CONTRACTING_DISK, tuple((t, k) for t in ts))


def k_ramp_schedule(k_start: float, k_end: float, stages: int = 4) -> HomotopySchedule:
    ts = np.linspace(1.0 / stages, 1.0, stages)
    ks = k_start + (k_end - k_start) * (ts - ts[0]) / max(ts[-1] - ts[0], 1e-300)
    return HomotopySchedule(ScheduleKind.K_RAMP, tuple((float(t), float(k)) for t, k in zip(ts, ks)))


def equidistant_seed_schedule(k: float) -> HomotopySchedule:
    return HomotopySchedule(ScheduleKind.EQUIDISTANT_SEED, ((1.0, k),))


@dataclass(frozen=True)
class DominationResult:
    status: str
    witnesses: List[int]
    max_violation: float


def domination_check(g1: RadialGraph, g2: RadialGraph, tol: float = DOMINATION_TOL) -> DominationResult:
    """g1 доминирует g2, если λ1 >= λ2 поточечно."""
    if g1.base.mesh is not g2.base.mesh and (
        g1.base.n_vertices != g2.base.n_vertices
        or not np.array_equal(g1.base.mesh.triangles, g2.base.mesh.triangles)
    ):
        raise ValueError("Графики заданы на разных сетках")
    return _compare(g1.lam, g2.lam, g1.base.mesh.interior, tol)


def _compare(l1: np.ndarray, l2: np.ndarray, interior: np.ndarray, tol: float) -> DominationResult:
    diff = l1 - l2
    witnesses = np.flatnonzero(diff < -tol)
    if witnesses.size:
        return DominationResult("violated", witnesses.tolist(), float(-diff.min()))
    strict = interior.size > 0 and bool(np.all(diff[interior] > tol))
    return DominationResult("strict" if strict else "weak", [], 0.0)


def match_scaled_vertices(reference: np.ndarray, s: float, t: float, tol: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
    """Пары (i, j) с s·ref_i = t·ref_j: общие точки базы у стадий s <= t."""
    tree = cKDTree(t * reference)
    dist, j = tree.query(s * reference, distance_upper_bound=tol)
    i = np.flatnonzero(np.isfinite(dist))
    return i, j[i]


def surface_diameter(model: AmbientModel, surf: ImmersedSurface, max_points: int = 1500) -> float:
    P = surf.positions
    if P.shape[0] > max_points:
        idx = np.unique(np.concatenate((surf.mesh.boundary_loop, np.linspace(0, P.shape[0] - 1, max_points).astype(int))))
        P = P[idx]
    best = 0.0
    for i in range(P.shape[0]):
        best = max(best, float(np.max(distances(model, P[i], P))))
    return best


def homotopy_solve(
    problem: LensProblem,
    schedule: HomotopySchedule,
    config: SolverConfig = SolverConfig(),
    callback: Optional[UpdateCallback] = None,
    seed: Optional[RadialGraph] = None,
) -> Tuple[RadialGraph, SolveReport]:
    schedule.validate_against(problem.model.c)
    state = SolveState(k=schedule.stages[0][1], t=schedule.stages[0][0])
    records: List[StageRecord] = []

    def solve_at(t: float, k: float, start: Optional[RadialGraph]) -> Tuple[RadialGraph, SolveReport]:
        stage_problem = problem.with_k(k)
        base = stage_problem.base_at(t, threads=config.threads) if schedule.kind is ScheduleKind.CONTRACTING_DISK else problem.base
        stage_problem = LensProblem(
            problem.model, base, k, problem.margin, problem.hypothesis, problem.side, problem.parametrization
        )
        certify_base(problem.model, base, k, problem.margin, problem.hypothesis)
        if start is None:
            start = default_seed(stage_problem, threads=config.threads)
        else:
            start = RadialGraph(base=base, lam=start.lam, side=problem.side)
        return newton_solve(stage_problem, start, config, state, callback)

    if schedule.kind is ScheduleKind.EQUIDISTANT_SEED:
        k = schedule.stages[-1][1]
        if seed is None and problem.side is GraphSide.PUSHOFF:
            seed = equidistant_seed(problem.model, problem.base, k)
        graph, report = solve_at(1.0, k, seed)
        records.append(StageRecord(0, 1.0, k, report.iterations, report.residual_final, report.converged))
        report.stages = records
        return graph, report

    contracting = schedule.kind is ScheduleKind.CONTRACTING_DISK
    t_prev, k_prev = schedule.stages[0]
    state.stage, state.t = 0, t_prev
    try:
        graph, report = solve_at(t_prev, k_prev, seed)
    except SolverFailure as exc:
        exc.report = exc.report or SolveReport(lam=np.zeros(problem.mesh.n_vertices))
        exc.report.stages = records
        raise
    if not report.converged:
        raise SolverFailure(f"начальная стадия t = {t_prev} не сошлась: {report.last_error}", report=report)
    records.append(StageRecord(0, t_prev, k_prev, report.iterations, report.residual_final, True))
    if contracting:
        records[-1].diameter = surface_diameter(problem.model, graph_embed(problem.model, graph))

    planned = [t for t, _ in schedule.stages]
    step = (planned[1] / planned[0]) if contracting and len(planned) > 1 else (planned[1] - planned[0] if len(planned) > 1 else 0.0)
    max_step = step
    clean = 0
    index = 0
    while t_prev < 1.0:
        index += 1
        t_new = min(1.0, t_prev * step) if contracting else min(1.0, t_prev + step)
        k_new = schedule.k_at(t_new)
        if contracting:
            start = RadialGraph(base=graph.base, lam=graph.lam * (t_new / t_prev) ** 2, side=problem.side)
        else:
            start = graph
        state.stage, state.t, state.k = index, t_new, k_new
        try:
            new_graph, new_report = solve_at(t_new, k_new, start)
            ok = new_report.converged
            note = "" if ok else new_report.last_error
        except (SolverFailure, PreconditionViolation) as exc:
            ok, note = False, str(exc)
        if not ok:
            records.append(StageRecord(index, t_new, k_new, 0, float("nan"), False, note=note))
            clean = 0
            step = np.sqrt(step) if contracting else 0.5 * step
            if (contracting and step < 1.0 + 1e-3) or (not contracting and step < 1e-4):
                report.stages = records
                report.last_error = f"стадия t = {t_new:.6f} не решена: {note}"
                raise SolverFailure(report.last_error, last_good=graph, report=report)
            continue

        rec = StageRecord(index, t_new, k_new, new_report.iterations, new_report.residual_final, True)
        if schedule.track_domination:
            if contracting:
                i, j = match_scaled_vertices(problem.mesh.reference, t_prev, t_new)
                rec.common_vertices = int(i.size)
                if i.size:
                    res = _compare(new_graph.lam[j], graph.lam[i], np.arange(i.size), SCHEDULE_DOMINATION_TOL)
                    rec.domination, rec.domination_violation = res.status, res.max_violation
            else:
                res = _compare(graph.lam, new_graph.lam, problem.mesh.interior, SCHEDULE_DOMINATION_TOL)
                rec.domination, rec.domination_violation = res.status, res.max_violation
                rec.common_vertices = problem.mesh.n_vertices
            if rec.domination == "violated":
                records.append(rec)
                new_report.stages = records
                new_report.last_error = f"нарушено доминирование на стадии {index}: {rec.domination_violation:.3e}"
                raise SolverFailure(new_report.last_error, last_good=graph, report=new_report)
        if contracting:
            rec.diameter = surface_diameter(problem.model, graph_embed(problem.model, new_graph))
        records.append(rec)
        graph, report, t_prev = new_graph, new_report, t_new
        clean += 1
        if clean >= 2:
            step = min(max_step, step * step) if contracting else min(max_step, 2.0 * step)
            clean = 0
    report.stages = records
    return graph, report


def solve_lens(
    problem: LensProblem,
    config: SolverConfig = SolverConfig(),
    schedule: Optional[HomotopySchedule] = None,
    callback: Optional[UpdateCallback] = None,
) -> Tuple[RadialGraph, SolveReport]:
    if schedule is None:
        if problem.hypothesis is BaseHypothesis.ABOVE_C and problem.parametrization is not None:
            schedule = contracting_schedule(problem.k_target)
        else:
            schedule = equidistant_seed_schedule(problem.k_target)
    return homotopy_solve(problem, schedule, config, callback)


# ---------------------------------------------------------------------------
# аудит решений


class ComparisonKind(str, Enum):
    SPHERE = "sphere"
    EQUIDISTANT = "equidistant"
    HOROSPHERE = "horosphere"


@dataclass(frozen=True)
class ContactReport:
    comparison: ComparisonKind
    contacts: int
    violations: List[Tuple[int, float, float]]
    min_margin: float

    @property
    def ok(self) -> bool:
        return not self.violations


def maximum_principle_probe(
    model: AmbientModel,
    surf: ImmersedSurface,
    comparison: ComparisonKind | str,
    radius: Optional[float] = None,
    tol: float = 1e-6,
) -> ContactReport:
    """Внутренние касания поверхности с семейством сравнения.

    В каждой внутренней вершине берётся поверхность семейства, касающаяся
    изнутри (со стороны -n). Если соседи по второму кольцу лежат снаружи,
    касание допустимо и требуется κ_сравнения >= κ_поверхности - tol.
    radius по умолчанию: сфера с coth r = max(λ₂, 1) · 1.001, эквидистанта
    с tanh r = min(λ₁, 1 - 1e-9).
    """
    comparison = ComparisonKind(comparison)
    if not model.closed_form:
        raise PreconditionViolation("MODEL_KIND", "зонд принципа максимума использует замкнутые формулы H³")
    forms = surf.require_forms()
    mesh = surf.mesh
    X = hyp.chart_to_hyperboloid(surf.positions)
    N = hyp.push_vectors(surf.positions, forms.fitted_normals)
    contacts = 0
    violations: List[Tuple[int, float, float]] = []
    margin = float("inf")
    for v in mesh.interior:
        Y = X[mesh.two_rings[v]]
        lam1, lam2 = forms.principal[v]
        if comparison is ComparisonKind.SPHERE:
            coth = max(lam2, 1.0) * 1.001 if radius is None else 1.0 / np.tanh(radius)
            r = float(np.arctanh(1.0 / coth))
            center, _ = hyp.exp(X[v], -N[v], r)
            outside = hyp.distance(center, Y) >= r - tol
            kappa_cmp = coth * coth
        elif comparison is ComparisonKind.EQUIDISTANT:
            th = min(max(lam1, 1e-9), 1.0 - 1e-9) if radius is None else np.tanh(radius)
            r = float(np.arctanh(th))
            _, vq = hyp.exp(X[v], -N[v], r)
            outside = np.arcsinh(hyp.mdot(Y, -vq)) >= r - tol
            kappa_cmp = th * th
        else:
            xi = X[v] - N[v]
            outside = -hyp.mdot(Y, xi) >= 1.0 - tol
            kappa_cmp = 1.0
        if np.all(outside):
            contacts += 1
            gap = kappa_cmp - forms.extrinsic[v]
            margin = min(margin, float(gap))
            if gap < -tol:
                violations.append((int(v), float(kappa_cmp), float(forms.extrinsic[v])))
    return ContactReport(comparison, contacts, violations, margin if contacts else float("nan"))


@dataclass(frozen=True)
class DegeneracyReport:
    status: str
    max_mean_curvature: float
    median_anisotropy: float
    suspected_horospherical: bool
    axis: Optional[np.ndarray] = None
    axis_residual: float = float("nan")

    def to_dict(self) -> Dict[str, object]:
        return {
            "status": self.status,
            "max_mean_curvature": self.max_mean_curvature,
            "median_anisotropy": self.median_anisotropy,
            "suspected_horospherical": self.suspected_horospherical,
            "axis": None if self.axis is None else self.axis.tolist(),
            "axis_residual": self.axis_residual,
        }


def fit_geodesic(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Геодезическая по точкам гиперболоида: 2-плоскость двух главных сингулярных векторов.

    Возвращает (p, u): времениподобный единичный p и единичное направление u, <p, u> = 0.
    """
    _, _, vt = np.linalg.svd(points, full_matrices=False)
    basis = vt[:2]
    gram = basis @ hyp.ETA @ basis.T
    w, vecs = np.linalg.eigh(gram)
    if w[0] >= 0.0:
        raise FitError("Точки оси не задают времениподобную плоскость")
    p = (vecs[:, 0] @ basis) / np.sqrt(-w[0])
    u = (vecs[:, 1] @ basis) / np.sqrt(max(w[1], 1e-300))
    return (p if p[0] > 0.0 else -p), u


def distance_to_geodesic(Y: np.ndarray, p: np.ndarray, u: np.ndarray) -> np.ndarray:
    proj = -hyp.mdot(Y, p)[..., None] * p + hyp.mdot(Y, u)[..., None] * u
    return np.arccosh(np.maximum(np.sqrt(np.maximum(-hyp.mdot(proj, proj), 0.0)), 1.0))


def degeneracy_diagnostics(
    model: AmbientModel,
    surf: ImmersedSurface,
    k: Optional[float] = None,
    mean_threshold: float = 1e3,
    anisotropy_threshold: float = 2.0,
    kappa_tol: float = 0.05,
) -> DegeneracyReport:
    forms = surf.require_forms()
    interior = surf.mesh.interior
    principal = forms.principal[interior]
    max_mean = float(np.max(np.abs(forms.mean[interior])))
    aniso = principal[:, 1] / np.maximum(principal[:, 0], 1e-300)
    median_aniso = float(np.median(aniso)) if aniso.size else 1.0
    near_one = np.all(np.abs(principal - 1.0) < 0.05, axis=1)
    horospherical = bool(k is not None and k < model.c and near_one.size and np.mean(near_one) >= 0.9)
    if max_mean > mean_threshold or not np.all(np.isfinite(principal)):
        return DegeneracyReport("suspected_degenerate", max_mean, median_aniso, horospherical)
    kappa = forms.extrinsic[interior]
    tube_like = median_aniso > anisotropy_threshold and float(np.median(np.abs(kappa - model.c))) < kappa_tol * model.c
    if tube_like and model.closed_form:
        lam_max = principal[:, 1]
        r = np.arctanh(1.0 / np.maximum(lam_max, 1.0 + 1e-12))
        X = hyp.chart_to_hyperboloid(surf.positions[interior])
        N = hyp.push_vectors(surf.positions[interior], forms.fitted_normals[interior])
        axis_points, _ = hyp.exp(X, -N, r)
        p, u = fit_geodesic(axis_points)
        residual = float(np.max(distance_to_geodesic(axis_points, p, u)))
        return DegeneracyReport("suspected_tube", max_mean, median_aniso, horospherical, np.stack((p, u)), residual)
    if tube_like:
        return DegeneracyReport("suspected_tube", max_mean, median_aniso, horospherical)
    return DegeneracyReport("ok", max_mean, median_aniso, horospherical)


@dataclass(frozen=True)
class BallAudit:
    center: np.ndarray
    radius: float
    max_excess: float
    outside: List[int]

    @property
    def ok(self) -> bool:
        return not self.outside


def boundary_ball_inclusion(model: AmbientModel, surf: ImmersedSurface, slack: float = 1e-6) -> BallAudit:
    """Минимальный шар, содержащий границу (Нелдер-Мид по центру), и проверка всех вершин."""
    B = surf.positions[surf.mesh.boundary_loop]
    start = hyp.hyperboloid_to_chart(hyp.normalize_point(np.mean(hyp.chart_to_hyperboloid(B), axis=0)))

    def unpack(x):
        return np.array([x[0], x[1], np.exp(x[2])])

    def radius(x):
        return float(np.max(distances(model, unpack(x), B)))

    x0 = np.array([start[0], start[1], np.log(start[2])])
    best = minimize(radius, x0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    center = unpack(best.x)
    R = radius(best.x)
    d = distances(model, center, surf.positions)
    excess = d - R
    return BallAudit(center=center, radius=R, max_excess=float(excess.max()), outside=np.flatnonzero(excess > slack).tolist())


def print_state(state: SolveState) -> None:
    """Колбэк для CLI: одна строка на обновление."""
    print(
        f"[{state.status}] стадия {state.stage} t={state.t:.4f} k={state.k:.4f} "
        f"итерация {state.iteration} невязка {state.residual:.3e} шаг {state.step:.3g}",
        file=sys.stderr,
    )
