"""
Погружённые диски, радиальные графики над ними и их фундаментальные формы.

Формы считаются локальной аппроксимацией высот в геодезических нормальных
координатах вершины (по второму кольцу соседей): четвёртой степени при >= 18
соседях (полная звезда), кубической при >= 12, квадратичной при >= 5.
Аппроксимация векторизована по группам вершин с равным числом соседей; группы
можно раздать пулу потоков, результат всегда собирается в порядке номеров
вершин.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from ambient_geometry import (
    AmbientModel,
    ChartPoint,
    TangentVector,
    conformal_scale,
    curvature_form,
    distances,
    geodesic_flow,
    inner,
    log_vectors,
    normalize,
    transport_vectors,
)
from disk_mesh import DiskMesh
from ksurface_errors import ChartError, FitError

MIN_NEIGHBORS = 5
CUBIC_NEIGHBORS = 12
QUARTIC_NEIGHBORS = 18
UMBILIC_GAP = 1e-10
NORMAL_TOL = 1e-10


@dataclass(frozen=True)
class SurfaceForms:
    fit_order: np.ndarray
    fit_scale: np.ndarray
    frames: np.ndarray
    gradient: np.ndarray
    first_form: np.ndarray
    second_form: np.ndarray
    shape_operator: np.ndarray
    tangent_frames: np.ndarray
    fitted_normals: np.ndarray
    principal: np.ndarray
    extrinsic: np.ndarray
    trace: np.ndarray
    symmetry_defect: np.ndarray
    residual: np.ndarray
    # (n, 2) координаты соседей в касательной плоскости и строки (5, n),
    # переводящие приращения f_q - f_p в (f_a, f_b, f_aa, f_ab, f_bb)
    local_coords: List[np.ndarray]
    derivative_rows: List[np.ndarray]

    @property
    def mean(self) -> np.ndarray:
        return 0.5 * self.trace

    @property
    def tilt(self) -> np.ndarray:
        """Отклонение заданной нормали от подогнанной касательной плоскости."""
        return np.linalg.norm(self.gradient, axis=1)


@dataclass(frozen=True)
class ImmersedSurface:
    mesh: DiskMesh
    positions: np.ndarray
    normals: np.ndarray
    forms: Optional[SurfaceForms] = None

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_vertices

    def position(self, v: int) -> ChartPoint:
        return ChartPoint.from_array(self.positions[v])

    def normal(self, v: int) -> TangentVector:
        return TangentVector.from_arrays(self.positions[v], self.normals[v])

    def require_forms(self) -> SurfaceForms:
        if self.forms is None:
            raise ValueError("Фундаментальные формы не вычислены (нужен fit_fundamental_forms)")
        return self.forms

    def with_forms(self, forms: SurfaceForms) -> "ImmersedSurface":
        return replace(self, forms=forms)


def make_surface(model: AmbientModel, mesh: DiskMesh, positions: np.ndarray, normals: np.ndarray) -> ImmersedSurface:
    P = np.array(positions, dtype=float)
    N = np.array(normals, dtype=float)
    if P.shape != (mesh.n_vertices, 3) or N.shape != P.shape:
        raise ValueError(f"Ожидались массивы формы ({mesh.n_vertices}, 3)")
    if not np.all(np.isfinite(P)) or np.any(P[:, 2] <= 0.0):
        raise ChartError("Вершины поверхности вне карты (z <= 0)")
    if not np.all(np.isfinite(N)) or np.any(np.linalg.norm(N, axis=1) == 0.0):
        raise ChartError("Нулевая или неконечная нормаль")
    return ImmersedSurface(mesh=mesh, positions=P, normals=normalize(model, P, N))


# ---------------------------------------------------------------------------
# локальная аппроксимация


def _complete_frame(nu_hat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    helper = np.zeros_like(nu_hat)
    helper[np.arange(nu_hat.shape[0]), np.argmin(np.abs(nu_hat), axis=1)] = 1.0
    e1 = helper - np.sum(helper * nu_hat, axis=1)[:, None] * nu_hat
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    return e1, np.cross(nu_hat, e1)


def _design(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    cols = [a, b, 0.5 * a * a, a * b, 0.5 * b * b]
    if order >= 3:
        cols += [a ** 3 / 6.0, 0.5 * a * a * b, 0.5 * a * b * b, b ** 3 / 6.0]
    if order >= 4:
        a2, b2 = a * a, b * b
        cols += [a2 * a2 / 24.0, a2 * a * b / 6.0, 0.25 * a2 * b2, a * b2 * b / 6.0, b2 * b2 / 24.0]
    return np.stack(cols, axis=-1)


def _inverse_sqrt_first_form(grad: np.ndarray) -> np.ndarray:
    """G^{-1/2} для G = I + ∇h ∇hᵀ в замкнутом виде."""
    g2 = np.sum(grad * grad, axis=1)
    safe = np.where(g2 > 0.0, g2, 1.0)
    coef = np.where(g2 > 0.0, (1.0 / np.sqrt(1.0 + g2) - 1.0) / safe, 0.0)
    return np.eye(2)[None] + coef[:, None, None] * grad[:, :, None] * grad[:, None, :]


@dataclass
class _Batch:
    vertices: np.ndarray
    order: int
    ok: np.ndarray
    values: Dict[str, np.ndarray]
    local_coords: np.ndarray
    derivative_rows: np.ndarray


def _fit_batch(
    model: AmbientModel,
    P: np.ndarray,
    normals: np.ndarray,
    verts: np.ndarray,
    rings: np.ndarray,
    order: int,
    with_defect: bool,
) -> _Batch:
    p = P[verts]
    Q = P[rings]
    nu = normals[verts]
    scale = conformal_scale(model, p)
    nu_hat = nu / np.linalg.norm(nu, axis=1)[:, None]
    e1, e2 = _complete_frame(nu_hat)

    vecs = log_vectors(model, p[:, None, :], Q)
    a = scale[:, None] * np.einsum("bnk,bk->bn", vecs, e1)
    b = scale[:, None] * np.einsum("bnk,bk->bn", vecs, e2)
    h = scale[:, None] * np.einsum("bnk,bk->bn", vecs, nu_hat)
    rms = np.sqrt(np.mean(a * a + b * b, axis=1))
    rms = np.where(rms > 0.0, rms, 1.0)

    D = _design(a / rms[:, None], b / rms[:, None], order)
    sv = np.linalg.svd(D, compute_uv=False)
    ok = sv[:, -1] > 1e-8 * sv[:, 0]
    pinv = np.linalg.pinv(D)
    coef = np.einsum("bmn,bn->bm", pinv, h / rms[:, None])
    fit = np.einsum("bnm,bm->bn", D, coef)
    residual = rms * np.sqrt(np.mean((fit - h / rms[:, None]) ** 2, axis=1))

    grad = coef[:, :2]
    hess = np.stack(
        (np.stack((coef[:, 2], coef[:, 3]), axis=-1), np.stack((coef[:, 3], coef[:, 4]), axis=-1)),
        axis=-2,
    ) / rms[:, None, None]
    w = np.sqrt(1.0 + np.sum(grad * grad, axis=1))
    G = np.eye(2)[None] + grad[:, :, None] * grad[:, None, :]
    II = -hess / w[:, None, None]
    Gm = _inverse_sqrt_first_form(grad)
    B = Gm @ II @ Gm
    B = 0.5 * (B + np.swapaxes(B, 1, 2))

    principal = np.linalg.eigvalsh(B)
    kappa = np.linalg.det(B)
    umbilic = (principal[:, 1] - principal[:, 0] < UMBILIC_GAP) & (kappa > 0.0)
    principal[umbilic] = np.sqrt(kappa[umbilic])[:, None]

    frames_hat = np.stack((e1, e2, nu_hat), axis=-1)
    fitted_hat = (nu_hat - grad[:, :1] * e1 - grad[:, 1:] * e2) / w[:, None]
    da = e1 + grad[:, :1] * nu_hat
    db = e2 + grad[:, 1:] * nu_hat
    tangent_hat = np.einsum("bkj,bji->bki", np.stack((da, db), axis=-1), Gm)

    defect = np.zeros(len(verts))
    if with_defect:
        moved = transport_vectors(model, Q, p[:, None, :], normals[rings])
        dn = moved - nu[:, None, :]
        comp = scale[:, None, None] * np.stack(
            (np.einsum("bnk,bk->bn", dn, e1), np.einsum("bnk,bk->bn", dn, e2)), axis=-1
        )
        lin = np.einsum("bmn,bni->bim", pinv[:, :2, :], comp) / rms[:, None, None]
        defect = np.abs(lin[:, 0, 1] - lin[:, 1, 0])

    rows = pinv[:, :5, :].copy()
    rows[:, :2, :] /= rms[:, None, None]
    rows[:, 2:, :] /= (rms * rms)[:, None, None]

    values = {
        "fit_order": np.full(len(verts), order),
        "fit_scale": rms,
        "frames": frames_hat / scale[:, None, None],
        "gradient": grad,
        "first_form": G,
        "second_form": II,
        "shape_operator": B,
        "tangent_frames": tangent_hat / scale[:, None, None],
        "fitted_normals": fitted_hat / scale[:, None],
        "principal": principal,
        "extrinsic": kappa,
        "trace": np.trace(B, axis1=1, axis2=2),
        "symmetry_defect": defect,
        "residual": residual,
    }
    return _Batch(
        vertices=verts,
        order=order,
        ok=ok,
        values=values,
        local_coords=np.stack((a, b), axis=-1),
        derivative_rows=rows,
    )


def _fit_all(
    model: AmbientModel,
    mesh: DiskMesh,
    P: np.ndarray,
    normals: np.ndarray,
    threads: int = 1,
    with_defect: bool = True,
) -> SurfaceForms:
    rings = mesh.two_rings
    sizes = np.array([len(r) for r in rings])
    short = np.flatnonzero(sizes < MIN_NEIGHBORS)
    if short.size:
        raise FitError(
            f"Недоопределённая аппроксимация: у {short.size} вершин меньше {MIN_NEIGHBORS} соседей",
            short.tolist(),
        )

    def run(job):
        verts, order = job
        ring = np.stack([rings[v] for v in verts])
        return _fit_batch(model, P, normals, verts, ring, order, with_defect)

    def order_for(n: int) -> int:
        if n >= QUARTIC_NEIGHBORS:
            return 4
        return 3 if n >= CUBIC_NEIGHBORS else 2

    jobs = [(np.flatnonzero(sizes == n), order_for(n)) for n in np.unique(sizes)]

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(run, jobs))
    else:
        batches = [run(job) for job in jobs]

    # на вырожденной выборке степень понижается до квадратичной
    pending = batches
    while pending:
        retry = [(b.vertices[~b.ok], b.order - 1) for b in pending if b.order > 2 and not np.all(b.ok)]
        pending = [run(job) for job in retry]
        batches.extend(pending)
    bad = np.concatenate([b.vertices[~b.ok] for b in batches if b.order == 2] or [np.array([], dtype=int)])
    if bad.size:
        raise FitError(f"Вырожденная касательная аппроксимация в {bad.size} вершинах", sorted(bad.tolist()))

    V = mesh.n_vertices
    merged: Dict[str, np.ndarray] = {}
    local: List[Optional[np.ndarray]] = [None] * V
    deriv: List[Optional[np.ndarray]] = [None] * V
    for batch in batches:
        keep = batch.ok if batch.order > 2 else np.ones(len(batch.vertices), dtype=bool)
        verts = batch.vertices[keep]
        for key, arr in batch.values.items():
            if key not in merged:
                merged[key] = np.zeros((V,) + arr.shape[1:], dtype=arr.dtype)
            merged[key][verts] = arr[keep]
        for i in np.flatnonzero(keep):
            local[batch.vertices[i]] = batch.local_coords[i]
            deriv[batch.vertices[i]] = batch.derivative_rows[i]
    return SurfaceForms(local_coords=local, derivative_rows=deriv, **merged)


# ---------------------------------------------------------------------------
# операции


def estimate_normals(
    model: AmbientModel,
    mesh: DiskMesh,
    positions: np.ndarray,
    hint: Optional[np.ndarray] = None,
    refine: int = 2,
    threads: int = 1,
) -> np.ndarray:
    """Нормали по площадям граней, ориентированные по hint и уточнённые аппроксимацией."""
    P = np.asarray(positions, dtype=float)
    t = mesh.triangles
    face = np.cross(P[t[:, 1]] - P[t[:, 0]], P[t[:, 2]] - P[t[:, 0]])
    acc = np.zeros_like(P)
    for i in range(3):
        np.add.at(acc, t[:, i], face)
    if hint is not None:
        flip = np.sum(acc * np.asarray(hint, dtype=float), axis=1) < 0.0
        acc[flip] *= -1.0
    normals = normalize(model, P, acc)
    for _ in range(refine):
        normals = _fit_all(model, mesh, P, normals, threads, with_defect=False).fitted_normals
    return normals


def fit_fundamental_forms(model: AmbientModel, surf: ImmersedSurface, threads: int = 1) -> ImmersedSurface:
    return surf.with_forms(_fit_all(model, surf.mesh, surf.positions, surf.normals, threads))


def extrinsic_curvature(surf: ImmersedSurface) -> np.ndarray:
    return surf.require_forms().extrinsic


def principal_curvatures(surf: ImmersedSurface) -> np.ndarray:
    return surf.require_forms().principal


def mean_curvature(surf: ImmersedSurface) -> np.ndarray:
    return surf.require_forms().mean


def is_locally_convex(surf: ImmersedSurface, tol: float = 0.0) -> bool:
    forms = surf.require_forms()
    return bool(np.all(forms.principal[surf.mesh.interior, 0] > tol))


def surface_edge_lengths(model: AmbientModel, surf: ImmersedSurface, pairs: np.ndarray) -> np.ndarray:
    """Длины дуг поверхности по хордам: s = d (1 + κ_n² d² / 24).

    Нормальная кривизна κ_n вдоль ребра берётся по перенесённым нормалям,
    симметрично с обоих концов.
    """
    pairs = np.asarray(pairs, dtype=int)
    P, N = surf.positions, surf.normals
    i, j = pairs[..., 0], pairs[..., 1]
    d = distances(model, P[i], P[j])

    def turn(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        moved = transport_vectors(model, P[b], P[a], N[b])
        return inner(model, P[a], moved - N[a], log_vectors(model, P[a], P[b]))

    d2 = np.where(d > 0.0, d * d, 1.0)
    kn = -0.5 * (turn(i, j) + turn(j, i)) / d2
    return d * (1.0 + kn * kn * d * d / 24.0)


def triangle_angles_and_areas(
    model: AmbientModel, surf: ImmersedSurface, arc_lengths: bool = False
) -> Tuple[np.ndarray, np.ndarray]:
    """Углы (F, 3) и площади (F,) треугольников по длинам рёбер.

    По умолчанию длины хордовые (амбиентная метрика); arc_lengths=True
    переходит к длинам дуг поверхности.
    """
    P = surf.positions
    t = surf.mesh.triangles
    # сторона напротив вершины i
    sides = np.stack((t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]), axis=1)
    if arc_lengths:
        lengths = surface_edge_lengths(model, surf, sides)
    else:
        lengths = distances(model, P[sides[..., 0]], P[sides[..., 1]])
    angles = np.empty_like(lengths)
    for i in range(3):
        a = lengths[:, i]
        b = lengths[:, (i + 1) % 3]
        c = lengths[:, (i + 2) % 3]
        angles[:, i] = np.arccos(np.clip((b * b + c * c - a * a) / (2.0 * b * c), -1.0, 1.0))
    s = 0.5 * lengths.sum(axis=1)
    areas = np.sqrt(np.maximum(s * (s - lengths[:, 0]) * (s - lengths[:, 1]) * (s - lengths[:, 2]), 0.0))
    return angles, areas


def intrinsic_curvature(model: AmbientModel, surf: ImmersedSurface) -> np.ndarray:
    """Дефект угла / (треть площади звезды) по длинам дуг; NaN на границе."""
    angles, areas = triangle_angles_and_areas(model, surf, arc_lengths=True)
    t = surf.mesh.triangles
    V = surf.n_vertices
    angle_sum = np.zeros(V)
    star_area = np.zeros(V)
    for i in range(3):
        np.add.at(angle_sum, t[:, i], angles[:, i])
        np.add.at(star_area, t[:, i], areas)
    K = (2.0 * np.pi - angle_sum) / (star_area / 3.0)
    K[surf.mesh.is_boundary] = np.nan
    return K


def tangent_plane_sectional_curvature(model: AmbientModel, surf: ImmersedSurface) -> np.ndarray:
    forms = surf.require_forms()
    A, psi = curvature_form(model, surf.positions)
    n_hat = forms.fitted_normals / np.linalg.norm(forms.fitted_normals, axis=1)[:, None]
    ann = np.einsum("vi,vij,vj->v", n_hat, A, n_hat)
    return -np.exp(-2.0 * psi) * (np.trace(A, axis1=1, axis2=2) - ann)


def gauss_equation_defect(model: AmbientModel, surf: ImmersedSurface) -> np.ndarray:
    """K_intrinsic - (sec(T_xS) + κ) по внутренним вершинам; NaN на границе."""
    forms = surf.require_forms()
    return intrinsic_curvature(model, surf) - (tangent_plane_sectional_curvature(model, surf) + forms.extrinsic)


def displace_along_normals(
    model: AmbientModel,
    surf: ImmersedSurface,
    field: np.ndarray,
    *,
    refine: int = 2,
    threads: int = 1,
    with_forms: bool = True,
) -> ImmersedSurface:
    """Поверхность x -> exp(field(x) n(x)); field может быть любого знака."""
    field = np.asarray(field, dtype=float)
    if field.shape != (surf.n_vertices,):
        raise ValueError("Поле смещения должно задаваться по вершинам")
    P, vel = geodesic_flow(model, surf.positions, surf.normals, t=field)
    N = estimate_normals(model, surf.mesh, P, hint=vel, refine=refine, threads=threads)
    moved = make_surface(model, surf.mesh, P, N)
    return fit_fundamental_forms(model, moved, threads) if with_forms else moved


def boundary_length(model: AmbientModel, surf: ImmersedSurface) -> float:
    loop = surf.mesh.boundary_loop
    if loop.size == 0:
        return 0.0
    P = surf.positions[loop]
    return float(np.sum(distances(model, P, np.roll(P, -1, axis=0))))


# ---------------------------------------------------------------------------
# радиальные графики


class GraphSide(str, Enum):
    LENS = "lens"  # exp(λ · (-n)): вогнутая сторона выпуклой базы
    PUSHOFF = "pushoff"  # exp(λ · n)


@dataclass(frozen=True)
class RadialGraph:
    base: ImmersedSurface
    lam: np.ndarray
    side: GraphSide = GraphSide.LENS

    def __post_init__(self) -> None:
        lam = np.asarray(self.lam, dtype=float)
        if lam.shape != (self.base.n_vertices,):
            raise ValueError(f"λ должна иметь форму ({self.base.n_vertices},)")
        if not np.all(np.isfinite(lam)):
            raise ValueError("λ содержит неконечные значения")
        if np.any(lam[self.base.mesh.boundary_loop] != 0.0):
            raise ValueError("λ должна быть в точности нулём на граничном цикле")
        object.__setattr__(self, "lam", lam)

    @property
    def direction(self) -> float:
        return -1.0 if self.side is GraphSide.LENS else 1.0

    def with_lambda(self, lam: np.ndarray) -> "RadialGraph":
        lam = np.array(lam, dtype=float)
        lam[self.base.mesh.boundary_loop] = 0.0
        return RadialGraph(base=self.base, lam=lam, side=self.side)

    def interior_positive(self) -> bool:
        return bool(np.all(self.lam[self.base.mesh.interior] > 0.0))


@dataclass(frozen=True)
class Footprint:
    base_vertex: np.ndarray
    focal: np.ndarray


@dataclass(frozen=True)
class InverseFunction:
    values: np.ndarray
    lipschitz_ratio: float
    worst_edge: Tuple[int, int]


def graph_geodesics(model: AmbientModel, graph: RadialGraph) -> Tuple[np.ndarray, np.ndarray]:
    """Точки exp(λ u) и единичные скорости γ'(λ) нормальных геодезических."""
    base = graph.base
    return geodesic_flow(model, base.positions, graph.direction * base.normals, t=graph.lam)


def graph_embed(model: AmbientModel, graph: RadialGraph, threads: int = 1, refine: int = 2) -> ImmersedSurface:
    """Σ = {exp(λ(u) u)} с подогнанными внешними нормалями и формами."""
    base = graph.base
    if np.all(graph.lam == 0.0):
        P, vel = base.positions.copy(), graph.direction * base.normals
    else:
        P, vel = graph_geodesics(model, graph)
    # внешняя нормаль линзы смотрит против γ', у отталкивания по γ'
    N = estimate_normals(model, base.mesh, P, hint=graph.direction * vel, refine=refine, threads=threads)
    return fit_fundamental_forms(model, make_surface(model, base.mesh, P, N), threads)


def inverse_function(model: AmbientModel, graph: RadialGraph, embedded: Optional[ImmersedSurface] = None) -> InverseFunction:
    """μ(exp(λ(u) u)) = λ(u) и её константа Липшица по рёбрам сетки."""
    if embedded is None:
        P, _ = graph_geodesics(model, graph)
    else:
        P = embedded.positions
    e = graph.base.mesh.edges
    d = distances(model, P[e[:, 0]], P[e[:, 1]])
    diff = np.abs(graph.lam[e[:, 0]] - graph.lam[e[:, 1]])
    ratio = np.where(d > 0.0, diff / np.where(d > 0.0, d, 1.0), 0.0)
    worst = int(np.argmax(ratio)) if ratio.size else 0
    return InverseFunction(
        values=graph.lam.copy(),
        lipschitz_ratio=float(ratio[worst]) if ratio.size else 0.0,
        worst_edge=(int(e[worst, 0]), int(e[worst, 1])) if ratio.size else (0, 0),
    )


def footprint(graph: RadialGraph) -> Footprint:
    return Footprint(base_vertex=np.arange(graph.base.n_vertices), focal=graph.lam.copy())
