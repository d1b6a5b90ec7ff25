#!/usr/bin/env python3
"""
Набор проверок инвариантов для команды validate.

Каждая проверка регистрируется декоратором @check(группа), получает общий
SuiteContext и возвращает (ok, measured). SkipCheck помечает проверку как
skipped с причиной; любое другое исключение внутри проверки считается fail.
Порядок проверок фиксирован порядком регистрации, генераторы случайных чисел
выводятся из seed конфигурации и имени проверки.
"""
from __future__ import annotations

import sys
import zlib
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

import hyperboloid as hyp
from ambient_geometry import (
    AmbientModel,
    ChartPoint,
    FamilyKind,
    IdealPoint,
    ModelKind,
    SurfaceFamily,
    WarpFactor,
    busemann_gradient_norm,
    certify_curvature_bound,
    christoffel_consistency_defect,
    curvature_evolution,
    distances,
    g_norm,
    geodesic_flow,
    make_model,
    model_surface_curvatures,
    sectional_curvature,
    CERTIFICATION_TOL,
)
from asymptotic_plateau import (
    ExhaustionConfig,
    IdealDataKind,
    IdealDiskData,
    barrier_surface,
    cone_barrier_estimate,
    ensure_disk_data,
    exhaustion_solve,
    reject_global_data,
)
from config_loader import RunConfig
from continuation_solver import (
    ComparisonKind,
    LensProblem,
    SolverConfig,
    SolveReport,
    boundary_ball_inclusion,
    cap_problem,
    contracting_schedule,
    degeneracy_diagnostics,
    distance_to_geodesic,
    domination_check,
    homotopy_solve,
    make_lens_problem,
    maximum_principle_probe,
    newton_solve,
    solve_lens,
)
from disk_mesh import DiskMesh, MeshKind, make_disk_mesh
from immersed_surface import (
    ImmersedSurface,
    RadialGraph,
    displace_along_normals,
    fit_fundamental_forms,
    gauss_equation_defect,
    graph_embed,
    intrinsic_curvature,
)
from ksurface_errors import DiscreteMaximumPrincipleViolation, PreconditionViolation
from linearized_operator import (
    assemble_L,
    finite_difference_rate,
    shape_operator_variation_check,
    solve_dirichlet,
    zeroth_order_certificate,
)
from model_surfaces import EquidistantDisk, TubePatch, closed_sphere_surface, family_surface, immerse
from shooting_oracle import sphere_cap_profile

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"
ORACLE_REFINEMENT = 3
ORACLE_FAMILIES = (
    SurfaceFamily(FamilyKind.SPHERE, 1.0),
    SurfaceFamily(FamilyKind.HOROSPHERE),
    SurfaceFamily(FamilyKind.EQUIDISTANT, float(np.arctanh(0.5))),
    SurfaceFamily(FamilyKind.TUBE, 0.7),
)
EQUIDISTANT_K = SurfaceFamily(FamilyKind.EQUIDISTANT, float(np.arctanh(0.5)))
CONVERGENCE_TOP = 4
ORDER_TARGET = 1.5
ERROR_FLOOR = 1e-9
ACCEPTANCE_TOL = 1e-3


class SkipCheck(Exception):
    pass


@dataclass
class CheckResult:
    name: str
    group: str
    status: str
    measured: Dict[str, Any] = field(default_factory=dict)
    message: str = ""


@dataclass
class SuiteSummary:
    results: List[CheckResult]

    @property
    def failed(self) -> List[CheckResult]:
        return [r for r in self.results if r.status == FAIL]

    @property
    def passed(self) -> bool:
        return not self.failed

    def to_dict(self) -> Dict[str, Any]:
        counts = {s: sum(r.status == s for r in self.results) for s in (PASS, FAIL, SKIPPED)}
        return {
            "passed": self.passed,
            "counts": counts,
            "checks": {r.name: asdict(r) for r in self.results},
            "order": [r.name for r in self.results],
        }


CheckFn = Callable[["SuiteContext"], Tuple[bool, Dict[str, Any]]]
CHECKS: List[Tuple[str, str, CheckFn]] = []


def check(group: str) -> Callable[[CheckFn], CheckFn]:
    def register(fn: CheckFn) -> CheckFn:
        CHECKS.append((fn.__name__.removeprefix("check_"), group, fn))
        return fn

    return register


class SuiteContext:
    def __init__(self, config: RunConfig, model: AmbientModel) -> None:
        self.config = config
        self.model = model
        self._cache: Dict[str, Any] = {}

    def rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, zlib.crc32(name.encode("utf-8"))])

    @property
    def h3(self) -> AmbientModel:
        """Модель с замкнутыми формулами; знак W берётся из конфигурации."""
        if self.model.closed_form:
            return self.model
        return make_model(ModelKind.HYPERBOLIC, 1.0, w_sign=float(self.config.w_sign))

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(tol=self.config.tol, max_newton=self.config.max_newton, threads=self.config.threads)

    def cached(self, key: str, build: Callable[[], Any]) -> Any:
        if key not in self._cache:
            try:
                self._cache[key] = (True, build())
            except Exception as exc:
                self._cache[key] = (False, exc)
        ok, value = self._cache[key]
        if not ok:
            raise value
        return value

    def lens_problem(self) -> LensProblem:
        cfg = self.config
        return self.cached(
            "lens_problem",
            lambda: cap_problem(
                self.h3, cfg.k, cfg.refinement, cfg.base_radius, cfg.cap_angle, cfg.margin, cfg.threads
            ),
        )

    def benchmark(self) -> Tuple[LensProblem, RadialGraph, SolveReport, ImmersedSurface]:
        def build():
            problem = self.lens_problem()
            graph, report = solve_lens(problem, self.solver)
            return problem, graph, report, graph_embed(self.h3, graph, threads=self.config.threads)

        return self.cached("benchmark", build)

    def equidistant_surface(self, refinement: Optional[int] = None) -> ImmersedSurface:
        r = self.config.refinement if refinement is None else refinement
        return self.cached(
            f"equidistant_{r}", lambda: family_surface(self.h3, EQUIDISTANT_K, r, threads=self.config.threads)
        )


def _levels(refinement: int) -> List[int]:
    """Три уровня сгущения; старший не ниже CONVERGENCE_TOP."""
    top = max(refinement, CONVERGENCE_TOP)
    return [top - 2, top - 1, top]


def _orders(errors: Sequence[float]) -> List[float]:
    e = np.maximum(np.asarray(errors, dtype=float), 1e-300)
    return [float(x) for x in np.log2(e[:-1] / e[1:])]


def _decreasing(errors: Sequence[float]) -> bool:
    return all(b < a or b < ERROR_FLOOR for a, b in zip(errors, errors[1:]))


def _order_met(errors: Sequence[float], target: float = ORDER_TARGET) -> bool:
    # пары, упёршиеся в пол ошибки, порядка не определяют
    return all(o >= target or b < ERROR_FLOOR for b, o in zip(errors[1:], _orders(errors)))


def _shared_vertices(meshes: Sequence[DiskMesh]) -> List[np.ndarray]:
    """Номера вершин каждого уровня в опорных точках полной звезды самого грубого уровня."""
    anchor = meshes[0].reference[meshes[0].complete_stencil]
    out = []
    for mesh in meshes:
        dist, idx = cKDTree(mesh.reference).query(anchor)
        if float(np.max(dist)) > 1e-9:
            raise ValueError("сетки уровней не вложены")
        out.append(np.asarray(idx, dtype=int))
    return out


def _smooth_field(surf: ImmersedSurface, coeffs: np.ndarray) -> np.ndarray:
    u, v = surf.mesh.reference[:, 0], surf.mesh.reference[:, 1]
    rho = np.hypot(u, v)
    c = coeffs
    return c[0] + c[1] * u + c[2] * v + c[3] * u * v + c[4] * (u * u - v * v) + c[5] * np.cos(1.5 * rho)


def oracle_rows(model: AmbientModel, refinement: int, threads: int = 1) -> List[Dict[str, Any]]:
    """Таблица замкнутых κ и измеренных на сетке.

    Ошибка: максимальная относительная по вершинам с полной звездой соседей.
    """
    rows = []
    for family in ORACLE_FAMILIES:
        closed = model_surface_curvatures(model, family)
        surf = family_surface(model, family, refinement, threads=threads)
        kappa = surf.require_forms().extrinsic[surf.mesh.complete_stencil]
        rows.append(
            {
                "family": family.kind.value,
                "r": family.r,
                "closed_form": closed.extrinsic,
                "principal": list(closed.principal),
                "measured_mean": float(np.mean(kappa)),
                "relative_error": float(np.max(np.abs(kappa - closed.extrinsic)) / closed.extrinsic),
                "vertices": surf.n_vertices,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# окружающее пространство


@check("ambient")
def check_christoffel_consistency(ctx: SuiteContext):
    rng = ctx.rng("christoffel")
    pts = np.column_stack((rng.uniform(-1, 1, 20), rng.uniform(-1, 1, 20), rng.uniform(0.5, 2.0, 20)))
    defect = max(christoffel_consistency_defect(ctx.model, ChartPoint.from_array(p)) for p in pts)
    return defect <= 1e-6, {"max_defect": defect}


@check("ambient")
def check_busemann_unit_gradient(ctx: SuiteContext):
    rng = ctx.rng("busemann")
    base = ChartPoint(0.0, 0.0, 1.0)
    worst = 0.0
    for i in range(10):
        p = ChartPoint(float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), float(rng.uniform(0.5, 2.0)))
        xi = IdealPoint.infinity() if i == 0 else IdealPoint.boundary(*rng.uniform(-2, 2, 2))
        worst = max(worst, abs(busemann_gradient_norm(ctx.h3, p, xi, base) - 1.0))
    return worst <= 1e-6, {"max_gradient_defect": worst}


@check("ambient")
def check_riccati_consistency(ctx: SuiteContext):
    """dκ/dr по семействам против curvature_evolution."""
    model = ctx.h3
    h = 1e-4
    measured = {}
    worst = 0.0
    for family in (
        SurfaceFamily(FamilyKind.SPHERE, 1.0),
        SurfaceFamily(FamilyKind.EQUIDISTANT, 0.5),
        SurfaceFamily(FamilyKind.TUBE, 0.7),
        SurfaceFamily(FamilyKind.HOROSPHERE),
    ):
        rate = curvature_evolution(model, family)
        if family.kind is FamilyKind.HOROSPHERE:
            fd = 0.0
        else:
            plus = model_surface_curvatures(model, SurfaceFamily(family.kind, family.r + h)).extrinsic
            minus = model_surface_curvatures(model, SurfaceFamily(family.kind, family.r - h)).extrinsic
            fd = (plus - minus) / (2.0 * h)
        err = abs(fd - rate.rate)
        worst = max(worst, err)
        measured[family.kind.value] = {"rate": rate.rate, "finite_difference": fd, "lower_bound": rate.lower_bound}
    measured["max_error"] = worst
    return worst <= 1e-6, measured


@check("ambient")
def check_exp_radial_isometry(ctx: SuiteContext):
    model = ctx.model
    n = 100 if model.closed_form else 20
    tol = 1e-8 if model.closed_form else 1e-5
    rng = ctx.rng("exp")
    P = np.column_stack((rng.uniform(-1, 1, n), rng.uniform(-1, 1, n), rng.uniform(0.5, 2.0, n)))
    V = rng.normal(size=(n, 3))
    V = V / g_norm(model, P, V)[:, None]
    t = rng.uniform(0.1, 2.0, n)
    Q, _ = geodesic_flow(model, P, V, t=t)
    err = float(np.max(np.abs(distances(model, P, Q) - t)))
    return err <= tol, {"samples": n, "max_error": err}


@check("ambient")
def check_sectional_curvature_constant(ctx: SuiteContext):
    rng = ctx.rng("sectional")
    worst = 0.0
    for _ in range(100):
        p = ChartPoint(float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)), float(rng.uniform(0.25, 4.0)))
        u, v = rng.normal(size=3), rng.normal(size=3)
        worst = max(worst, abs(sectional_curvature(ctx.h3, p, u, v) + 1.0))
    return worst <= 1e-8, {"max_deviation": worst}


@check("ambient")
def check_warped_certification(ctx: SuiteContext):
    """make_model принимает модель с конформным множителем тогда и только тогда, когда сертификат ≤ -c."""
    c = ctx.config.curvature_bound if ctx.config.model_kind == "warped" else 1.0
    rows = []
    consistent = True
    for amplitude in (0.0, 0.05, -0.05, 0.6, -0.6):
        warp = WarpFactor(amplitude, (0.0, 0.0, 1.0), 0.5)
        worst = certify_curvature_bound(AmbientModel(ModelKind.WARPED, c, warp), seed=ctx.config.seed)
        try:
            make_model(ModelKind.WARPED, c, warp, seed=ctx.config.seed)
            accepted = True
        except PreconditionViolation:
            accepted = False
        expected = worst <= -c + CERTIFICATION_TOL
        consistent &= accepted == expected
        rows.append({"amplitude": amplitude, "max_sectional": worst, "accepted": accepted})
    return consistent, {"models": rows}


# ---------------------------------------------------------------------------
# дискретные поверхности


@check("surface")
def check_oracle_accuracy(ctx: SuiteContext):
    rows = oracle_rows(ctx.h3, ctx.config.refinement, ctx.config.threads)
    worst = max(r["relative_error"] for r in rows)
    if ctx.config.refinement < ORACLE_REFINEMENT:
        raise SkipCheck(f"refinement {ctx.config.refinement} < {ORACLE_REFINEMENT}: max relative error {worst:.3e}")
    return worst <= 1e-2, {"rows": rows, "max_relative_error": worst}


@check("surface")
def check_convergence_order(ctx: SuiteContext):
    levels = _levels(ctx.config.refinement)
    measured: Dict[str, Any] = {"levels": levels}
    ok = True
    for family in ORACLE_FAMILIES:
        closed = model_surface_curvatures(ctx.h3, family).extrinsic
        surfaces = [family_surface(ctx.h3, family, level, threads=ctx.config.threads) for level in levels]
        shared = _shared_vertices([s.mesh for s in surfaces])
        errors = [
            float(np.max(np.abs(s.require_forms().extrinsic[idx] - closed)) / closed)
            for s, idx in zip(surfaces, shared)
        ]
        decreasing, order_met = _decreasing(errors), _order_met(errors)
        ok &= decreasing and order_met
        measured[family.kind.value] = {
            "errors": errors,
            "orders": _orders(errors),
            "decreasing": decreasing,
            "order_target_met": order_met,
        }
    return ok, measured


@check("surface")
def check_det_trace_consistency(ctx: SuiteContext):
    forms = ctx.equidistant_surface().require_forms()
    i = ctx.equidistant_surface().mesh.interior
    det_err = np.abs(forms.extrinsic[i] - forms.principal[i, 0] * forms.principal[i, 1])
    tr_err = np.abs(forms.trace[i] - forms.principal[i].sum(axis=1))
    worst = float(max(det_err.max(), tr_err.max()))
    return worst <= 1e-12, {"max_error": worst}


@check("surface")
def check_zero_graph_identity(ctx: SuiteContext):
    base = ctx.lens_problem().base
    embedded = graph_embed(ctx.h3, RadialGraph(base=base, lam=np.zeros(base.n_vertices)))
    same = bool(np.array_equal(embedded.positions, base.positions))
    return same, {"max_displacement": float(np.max(np.abs(embedded.positions - base.positions)))}


@check("surface")
def check_gauss_equation_defect(ctx: SuiteContext):
    levels = _levels(ctx.config.refinement)
    family = SurfaceFamily(FamilyKind.SPHERE, 1.0)
    surfaces = [family_surface(ctx.h3, family, level, threads=ctx.config.threads) for level in levels]
    shared = _shared_vertices([s.mesh for s in surfaces])
    defects = [float(np.max(np.abs(gauss_equation_defect(ctx.h3, s)[idx]))) for s, idx in zip(surfaces, shared)]
    decreasing, order_met = _decreasing(defects), _order_met(defects)
    measured = {
        "levels": levels,
        "defects": defects,
        "orders": _orders(defects),
        "decreasing": decreasing,
        "order_target_met": order_met,
    }
    return decreasing and order_met, measured


# ---------------------------------------------------------------------------
# линеаризованный оператор


@check("operator")
def check_linearity(ctx: SuiteContext):
    surf = ctx.equidistant_surface()
    assembly = assemble_L(ctx.h3, surf, threads=ctx.config.threads)
    rng = ctx.rng("linearity")
    f, g = rng.normal(size=surf.n_vertices), rng.normal(size=surf.n_vertices)
    a, b = 0.7, -1.3
    lhs = assembly.apply_consistent(a * f + b * g)
    rhs = a * assembly.apply_consistent(f) + b * assembly.apply_consistent(g)
    scale = max(1.0, float(np.max(np.abs(rhs))))
    err = float(np.max(np.abs(lhs - rhs))) / scale
    return err <= 1e-12, {"relative_error": err}


@check("operator")
def check_constant_response(ctx: SuiteContext):
    """L(1) = κ J = 0.75 на эквидистанте artanh 0.5."""
    surf = ctx.equidistant_surface()
    assembly = assemble_L(ctx.h3, surf, threads=ctx.config.threads)
    values = assembly.apply_consistent(np.ones(surf.n_vertices))[surf.mesh.interior]
    err = float(np.max(np.abs(values - 0.75)) / 0.75)
    return err <= 1e-2, {"relative_error": err, "mean": float(np.mean(values))}


@check("operator")
def check_finite_difference_consistency(ctx: SuiteContext):
    r = ctx.config.refinement
    if r < 2:
        raise SkipCheck("insufficient levels")
    rng = ctx.rng("consistency")
    coeffs = [rng.normal(size=6) for _ in range(10)]
    errors = []
    for level in (r - 1, r):
        surf = ctx.equidistant_surface(level)
        assembly = assemble_L(ctx.h3, surf, threads=ctx.config.threads)
        region = surf.mesh.complete_stencil
        worst = 0.0
        for c in coeffs:
            f = _smooth_field(surf, c)
            fd = finite_difference_rate(ctx.h3, surf, f, threads=ctx.config.threads)
            lf = assembly.apply_consistent(f)
            scale = max(float(np.max(np.abs(fd[region]))), 1e-300)
            worst = max(worst, float(np.max(np.abs(lf[region] - fd[region]))) / scale)
        errors.append(worst)
    if r < ORACLE_REFINEMENT:
        raise SkipCheck(f"refinement {r} < {ORACLE_REFINEMENT}: relative errors {errors[0]:.3e}, {errors[1]:.3e}")
    ok = errors[-1] <= ACCEPTANCE_TOL
    return ok, {"levels": [r - 1, r], "relative_errors": errors, "order": _orders(errors)[0]}


@check("operator")
def check_shape_operator_variation(ctx: SuiteContext):
    surf = ctx.equidistant_surface()
    region = surf.mesh.complete_stencil
    unit = shape_operator_variation_check(ctx.h3, surf, np.ones(surf.n_vertices))
    p = 0.5
    riccati = float(np.max(np.abs(unit.predicted[region] - (1.0 - p * p) * np.eye(2))))
    rng = ctx.rng("variation")
    defects = [
        shape_operator_variation_check(ctx.h3, surf, _smooth_field(surf, rng.normal(size=6))).defect for _ in range(3)
    ]
    measured = {"riccati_error": riccati, "defects": defects}
    if ctx.config.refinement < ORACLE_REFINEMENT:
        raise SkipCheck(f"refinement {ctx.config.refinement} < {ORACLE_REFINEMENT}: riccati error {riccati:.3e}")
    return riccati <= ACCEPTANCE_TOL and max(defects) <= ACCEPTANCE_TOL, measured


@check("operator")
def check_zeroth_order_positivity(ctx: SuiteContext):
    """min J > 0 на 50 возмущённых эквидистантах и знак решения задачи Дирихле."""
    model = ctx.model
    rng = ctx.rng("positivity")
    level = min(ctx.config.refinement, 2)
    mesh = make_disk_mesh(MeshKind.GEODESIC_POLAR_CAP, level)
    u, v = mesh.reference[:, 0], mesh.reference[:, 1]
    bump = 1.0 - (u * u + v * v)
    certified, min_J, negatives, infeasible = 0, float("inf"), 0, 0
    for _ in range(50):
        base = immerse(model, mesh, EquidistantDisk(distance=float(rng.uniform(0.3, 1.0)), extent=1.0), with_forms=False)
        c = rng.normal(size=3)
        field_ = 0.005 * bump * (c[0] + c[1] * u + c[2] * (u * u - v * v))
        surf = displace_along_normals(model, base, field_, threads=ctx.config.threads)
        kappa = surf.require_forms().extrinsic[mesh.interior]
        if not np.all((kappa > 0.0) & (kappa < model.c)):
            continue
        certified += 1
        cert = zeroth_order_certificate(model, surf, strict=False)
        min_J = min(min_J, cert.min_J)
        if not cert.positive:
            continue
        assembly = assemble_L(model, surf, threads=ctx.config.threads)
        boundary = np.zeros(mesh.n_vertices)
        boundary[mesh.boundary_loop] = rng.uniform(0.0, 1.0, mesh.boundary_loop.size)
        try:
            solution = solve_dirichlet(assembly, np.zeros(mesh.n_vertices), boundary)
        except DiscreteMaximumPrincipleViolation:
            infeasible += 1
            continue
        negatives += int(np.any(solution.values < -1e-12))
    measured = {
        "certified_surfaces": certified,
        "min_J": min_J,
        "negative_solutions": negatives,
        "dmp_infeasible": infeasible,
    }
    ok = certified >= 40 and min_J > 1e-10 and negatives == 0 and infeasible == 0
    return ok, measured


@check("operator")
def check_deterministic_assembly(ctx: SuiteContext):
    surf = ctx.equidistant_surface()
    bare = ImmersedSurface(surf.mesh, surf.positions, surf.normals)
    one = fit_fundamental_forms(ctx.h3, bare, threads=1)
    many = fit_fundamental_forms(ctx.h3, bare, threads=max(2, ctx.config.threads))
    a, b = assemble_L(ctx.h3, one), assemble_L(ctx.h3, many)
    same = bool(
        np.array_equal(one.require_forms().extrinsic, many.require_forms().extrinsic)
        and np.array_equal(a.matrix.toarray(), b.matrix.toarray())
        and np.array_equal(a.consistent.toarray(), b.consistent.toarray())
    )
    return same, {"bitwise_identical": same}


# ---------------------------------------------------------------------------
# линзы


@check("lens")
def check_lens_benchmark(ctx: SuiteContext):
    problem, graph, report, _ = ctx.benchmark()
    cfg = ctx.config
    profile = sphere_cap_profile(cfg.k, cfg.base_radius, cfg.cap_angle)
    oracle_error = float(np.max(np.abs(graph.lam - profile.on_mesh(problem.mesh.reference))))
    measured = {
        "residual": report.residual_final,
        "iterations": report.iterations,
        "stages": len(report.stages),
        "oracle_sup_error": oracle_error,
    }
    ok = report.converged and report.residual_final <= cfg.tol and report.iterations <= 20
    if cfg.refinement >= ORACLE_REFINEMENT:
        ok &= oracle_error <= 1e-3
    return ok, measured


@check("lens")
def check_path_independence(ctx: SuiteContext):
    problem, graph, _, _ = ctx.benchmark()
    other, _ = homotopy_solve(problem, contracting_schedule(problem.k_target, t0=0.25), ctx.solver)
    diff = float(np.max(np.abs(other.lam - graph.lam)))
    return diff <= 1e-6, {"sup_difference": diff}


@check("lens")
def check_domination_in_k(ctx: SuiteContext):
    problem, graph, _, _ = ctx.benchmark()
    k = problem.k_target
    ks = [k - 0.05, k, k + 0.05]
    if ks[0] <= 0.0 or ks[-1] >= problem.model.c:
        raise SkipCheck(f"k ± 0.05 вне ]0, {problem.model.c}[")
    graphs = {}
    for kk in ks:
        if kk == k:
            graphs[kk] = graph
            continue
        solved, report = newton_solve(problem.with_k(kk), graph, ctx.solver)
        if not report.converged:
            return False, {"k": kk, "error": report.last_error}
        graphs[kk] = solved
    results = [domination_check(graphs[a], graphs[b], tol=1e-6) for a, b in zip(ks, ks[1:])]
    measured = {
        "k": ks,
        "status": [r.status for r in results],
        "max_violation": max(r.max_violation for r in results),
    }
    return all(r.status != "violated" for r in results), measured


@check("lens")
def check_residual_certificate(ctx: SuiteContext):
    _, _, report, _ = ctx.benchmark()
    gap = abs(report.residual_final - report.residual_recomputed)
    return gap <= 1e-9, {"reported": report.residual_final, "recomputed": report.residual_recomputed}


@check("lens")
def check_inverse_function_lipschitz(ctx: SuiteContext):
    _, _, report, _ = ctx.benchmark()
    return report.lipschitz_ratio <= 2.05, {"lipschitz_ratio": report.lipschitz_ratio}


@check("lens")
def check_boundary_ball_inclusion(ctx: SuiteContext):
    _, _, _, surf = ctx.benchmark()
    audit = boundary_ball_inclusion(ctx.h3, surf)
    return audit.ok, {"radius": audit.radius, "max_excess": audit.max_excess, "outside": audit.outside}


@check("lens")
def check_maximum_principle_probe(ctx: SuiteContext):
    _, _, _, surf = ctx.benchmark()
    report = maximum_principle_probe(ctx.h3, surf, ComparisonKind.SPHERE)
    return report.ok, {"contacts": report.contacts, "violations": report.violations, "min_margin": report.min_margin}


@check("lens")
def check_intrinsic_curvature_negative(ctx: SuiteContext):
    problem, _, _, surf = ctx.benchmark()
    K = intrinsic_curvature(ctx.h3, surf)[surf.mesh.complete_stencil]
    expected = -problem.model.c + problem.k_target
    return float(np.max(K)) < 0.0, {"max": float(np.max(K)), "median": float(np.median(K)), "expected": expected}


@check("lens")
def check_degeneracy_diagnostics(ctx: SuiteContext):
    problem, _, _, surf = ctx.benchmark()
    lens = degeneracy_diagnostics(ctx.h3, surf, k=problem.k_target)
    tube_param = TubePatch(radius=0.7)
    tube = family_surface(ctx.h3, SurfaceFamily(FamilyKind.TUBE, 0.7), ctx.config.refinement, ctx.config.threads)
    diag = degeneracy_diagnostics(ctx.h3, tube)
    measured: Dict[str, Any] = {"lens": lens.to_dict(), "tube": diag.to_dict()}
    if diag.status != "suspected_tube" or diag.axis is None:
        return False, measured
    true_axis = tube_param.axis_point(np.linspace(-tube_param.axial_extent, tube_param.axial_extent, 21))
    axis_error = float(np.max(distance_to_geodesic(true_axis, diag.axis[0], diag.axis[1])))
    measured["axis_error"] = axis_error
    return lens.status == "ok" and axis_error < 0.05 * tube_param.radius, measured


@check("lens")
def check_guard_rails(ctx: SuiteContext):
    refusals = {}
    try:
        make_lens_problem(ctx.h3, closed_sphere_surface(ctx.h3), ctx.config.k)
        refusals["closed_sphere"] = None
    except PreconditionViolation as exc:
        refusals["closed_sphere"] = exc.precondition
    try:
        cap_problem(ctx.h3, 1.5, refinement=1)
        refusals["k_above_c"] = None
    except PreconditionViolation as exc:
        refusals["k_above_c"] = exc.precondition
    ok = refusals == {"closed_sphere": "EMPTY_BOUNDARY", "k_above_c": "K_RANGE"}
    return ok, refusals


# ---------------------------------------------------------------------------
# асимптотическая задача


def _exhaustion_config(ctx: SuiteContext, max_stages: Optional[int] = None) -> ExhaustionConfig:
    cfg = ctx.config
    return ExhaustionConfig(
        refinement=cfg.refinement,
        max_stages=max_stages or cfg.max_stages,
        tol=cfg.plateau_tol,
        probe_radius=cfg.probe_fraction,
        margin=cfg.margin,
        solver=ctx.solver,
    )


@check("plateau")
def check_plateau_round_exactness(ctx: SuiteContext):
    _, report = exhaustion_solve(ctx.h3, IdealDiskData(np.pi / 2.0), ctx.config.k, _exhaustion_config(ctx))
    errors = report.closed_form
    measured = {
        "closed_form": errors,
        "monotone": report.monotone,
        "bounded": report.bounded,
        "converged": report.converged,
        "height_bound": report.height_bound,
        "max_bound_excess": report.max_bound_excess,
        "stages": len(report.stages),
    }
    ok = report.monotone and report.bounded is True
    if ctx.config.refinement >= ORACLE_REFINEMENT:
        ok &= errors.get("position_error", float("inf")) <= 1e-2
    return ok, measured


@check("plateau")
def check_plateau_equivariance(ctx: SuiteContext):
    angle = 0.3
    axis = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
    K = np.array([[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]])
    R = np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * K @ K
    data = IdealDiskData(np.pi / 2.0)
    config = _exhaustion_config(ctx, max_stages=1)
    plain, _ = exhaustion_solve(ctx.h3, data, ctx.config.k, config, cone_bound=False)
    turned, _ = exhaustion_solve(ctx.h3, data.rotated(R), ctx.config.k, config, cone_bound=False)
    expected = hyp.chart_to_hyperboloid(plain.positions) @ hyp.lorentz_rotation(R).T
    err = float(np.max(np.abs(hyp.chart_to_hyperboloid(turned.positions) - expected)))
    return err <= 1e-6, {"max_error": err}


@check("plateau")
def check_perturbed_barrier(ctx: SuiteContext):
    data = IdealDiskData(np.pi / 2.0, ((0.0, 0.0), (0.01, 0.0)))
    surf = barrier_surface(ctx.h3, data, ctx.config.k, refinement=ctx.config.refinement, margin=ctx.config.margin)
    kappa = surf.require_forms().extrinsic[surf.mesh.interior]
    return float(kappa.min()) > ctx.config.k, {"min_kappa": float(kappa.min()), "vertices": surf.n_vertices}


@check("plateau")
def check_barrier_isometry(ctx: SuiteContext):
    local = []
    for alpha in (np.pi / 2.0, np.pi / 3.0):
        data = IdealDiskData(alpha)
        surf = barrier_surface(ctx.h3, data, ctx.config.k, refinement=ctx.config.refinement, margin=ctx.config.margin)
        X = hyp.chart_to_hyperboloid(surf.positions)
        local.append(X @ hyp.lorentz_inverse(data.placement()).T)
    err = float(np.max(np.abs(local[0] - local[1])))
    return err <= 1e-8, {"max_error": err}


@check("plateau")
def check_cone_barrier(ctx: SuiteContext):
    k = ctx.config.k
    betas = [0.0, 0.2, 0.4, 0.6, 0.8]
    est = [cone_barrier_estimate(ctx.h3, np.pi / 2.0, b, k, seed=ctx.config.seed) for b in betas]
    deltas = [e.delta for e in est]
    spreads = [e.spread for e in est]
    narrow = cone_barrier_estimate(ctx.h3, np.pi / 3.0, 0.0, k, seed=ctx.config.seed).delta
    try:
        cone_barrier_estimate(ctx.h3, 0.5, 0.5, k)
        rejected = False
    except ValueError:
        rejected = True
    ok = (
        all(b >= a for a, b in zip(deltas, deltas[1:]))
        and max(spreads) < 0.05
        and narrow > deltas[0]
        and rejected
    )
    return ok, {
        "beta": betas,
        "delta": deltas,
        "spread": spreads,
        "alpha0": est[0].alpha0,
        "delta_alpha_pi_3": narrow,
        "alpha_equals_beta_rejected": rejected,
    }


@check("plateau")
def check_global_data_refusal(ctx: SuiteContext):
    refused = {}
    for kind in IdealDataKind:
        refusal = reject_global_data(kind)
        try:
            ensure_disk_data(kind)
            raised = None
        except PreconditionViolation as exc:
            raised = exc.precondition
        refused[kind.value] = {"refused": refusal is not None, "precondition": raised}
    ok = all(
        v["refused"] == (k != IdealDataKind.DISK.value) and (v["precondition"] is None) == (k == IdealDataKind.DISK.value)
        for k, v in refused.items()
    )
    return ok, refused


# ---------------------------------------------------------------------------


def print_check(result: CheckResult) -> None:
    tail = f" ({result.message})" if result.message else ""
    print(f"[validate] {result.group}/{result.name}: {result.status}{tail}", file=sys.stderr)


def run_suite(
    config: RunConfig,
    model: AmbientModel,
    only: Optional[Sequence[str]] = None,
    callback: Optional[Callable[[CheckResult], None]] = None,
) -> SuiteSummary:
    """Прогоняет зарегистрированные проверки; only ограничивает набор по имени или группе."""
    ctx = SuiteContext(config, model)
    selected = set(only or ())
    results = []
    for name, group, fn in CHECKS:
        if selected and name not in selected and group not in selected:
            continue
        try:
            ok, measured = fn(ctx)
            result = CheckResult(name, group, PASS if ok else FAIL, measured)
        except SkipCheck as exc:
            result = CheckResult(name, group, SKIPPED, message=str(exc))
        except Exception as exc:
            result = CheckResult(name, group, FAIL, message=f"{type(exc).__name__}: {exc}")
        results.append(result)
        if callback:
            callback(result)
    return SuiteSummary(results)
