"""
Линеаризованный оператор экстринсивной кривизны

    L(f) = κ ( -tr(Hess f ∘ B⁻¹) + f tr(W ∘ B⁻¹) - f tr B ) = -κ tr(Hess f ∘ B⁻¹) + κ J f,

собранный на внутренних вершинах с условием Дирихле на границе.

Собираются две матрицы. Монотонная: веса второго порядка неотрицательны
(NNLS по моментам на втором кольце), поэтому внутренние строки дают M-матрицу
и выполняется дискретный принцип максимума. Согласованная: гессиан берётся
из тех же строк МНК-аппроксимации, что и формы поверхности; ею пользуется
Ньютон и проверки согласованности.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.io import mmwrite
from scipy.optimize import nnls
from scipy.sparse.linalg import splu

from ambient_geometry import AmbientModel, conformal_scale, curvature_endomorphism_matrices
from immersed_surface import ImmersedSurface, displace_along_normals
from ksurface_errors import DiscreteMaximumPrincipleViolation, PreconditionViolation, SolverFailure

ELLIPTICITY_TOL = 1e-8
J_TOL = 1e-10
RESIDUAL_TOL = 1e-10
HARD_WEIGHT = 1e4
MOMENT_TOL = 1e-6


@dataclass(frozen=True)
class ZerothOrderCertificate:
    J: np.ndarray
    min_J: float
    argmin: int
    min_B_eigenvalue: float
    positive: bool


@dataclass(frozen=True)
class OperatorAssembly:
    matrix: sparse.csr_matrix
    consistent: sparse.csr_matrix
    interior: np.ndarray
    boundary: np.ndarray
    kappa: np.ndarray
    J: np.ndarray
    dmp_violations: List[int]
    offdiagonal_nonpositive: bool
    diagonally_dominant: bool
    max_moment_residual: float

    @property
    def n_vertices(self) -> int:
        return int(self.matrix.shape[0])

    def _apply(self, A: sparse.csr_matrix, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        out = A @ f
        out[self.boundary] = 0.0
        return out

    def apply(self, f: np.ndarray) -> np.ndarray:
        """L(f) монотонной схемой; на граничных вершинах 0."""
        return self._apply(self.matrix, f)

    def apply_consistent(self, f: np.ndarray) -> np.ndarray:
        return self._apply(self.consistent, f)


@dataclass(frozen=True)
class VariationField:
    values: np.ndarray
    boundary: np.ndarray
    boundary_values: np.ndarray
    residual: float

    def __post_init__(self) -> None:
        if np.any(self.values[self.boundary] != self.boundary_values):
            raise ValueError("Граничные значения поля вариации должны совпадать с заданными")


@dataclass(frozen=True)
class VariationCheck:
    defect: float
    predicted: np.ndarray
    predicted_trace_rate: np.ndarray
    measured_trace_rate: np.ndarray
    predicted_square_rate: np.ndarray
    measured_square_rate: np.ndarray


def _orthonormal_endomorphisms(model: AmbientModel, surf: ImmersedSurface) -> Tuple[np.ndarray, np.ndarray]:
    """(W, B) в g-ортонормированном касательном репере подогнанной плоскости."""
    forms = surf.require_forms()
    P = surf.positions
    W = curvature_endomorphism_matrices(model, P, forms.fitted_normals)
    s2 = conformal_scale(model, P) ** 2
    T = forms.tangent_frames
    W_on = s2[:, None, None] * np.einsum("vki,vkl,vlj->vij", T, W, T)
    W_on = 0.5 * (W_on + np.swapaxes(W_on, 1, 2))
    return W_on, forms.shape_operator


def zeroth_order_certificate(model: AmbientModel, surf: ImmersedSurface, strict: bool = True) -> ZerothOrderCertificate:
    """J = tr(W B⁻¹) - tr B по внутренним вершинам (равно -k₁/λ₁ - k₂/λ₂ - λ₁ - λ₂)."""
    forms = surf.require_forms()
    interior = surf.mesh.interior
    kappa = forms.extrinsic
    c = model.c
    bad = interior[(kappa[interior] <= 0.0) | (kappa[interior] >= c)]
    if bad.size:
        raise PreconditionViolation(
            "ELLIPTICITY",
            f"κ вне (0, {c}) в {bad.size} внутренних вершинах",
            {"vertices": bad.tolist(), "kappa_range": [float(kappa[interior].min()), float(kappa[interior].max())]},
        )
    min_eig = float(forms.principal[interior, 0].min())
    if min_eig <= ELLIPTICITY_TOL:
        weak = interior[forms.principal[interior, 0] <= ELLIPTICITY_TOL]
        raise PreconditionViolation("ELLIPTICITY", f"B не положительно определён (min λ = {min_eig:.3e})", {"vertices": weak.tolist()})
    W_on, B = _orthonormal_endomorphisms(model, surf)
    J = np.full(surf.n_vertices, np.nan)
    Binv = np.linalg.inv(B[interior])
    J[interior] = np.einsum("vij,vji->v", W_on[interior], Binv) - np.trace(B[interior], axis1=1, axis2=2)
    k = int(interior[np.argmin(J[interior])])
    cert = ZerothOrderCertificate(
        J=J, min_J=float(J[k]), argmin=k, min_B_eigenvalue=min_eig, positive=bool(J[k] > J_TOL)
    )
    if strict and not cert.positive:
        raise PreconditionViolation("ELLIPTICITY", f"min J = {cert.min_J:.3e} <= {J_TOL}", {"vertex": k})
    return cert


def _monotone_weights(coords: np.ndarray, scale: float, M: np.ndarray) -> Tuple[np.ndarray, float]:
    """Неотрицательные веса: Σw y = 0, ½ Σw y yᵀ = M, третьи моменты штрафуются."""
    y = coords / scale
    a, b = y[:, 0], y[:, 1]
    hard = np.vstack((a, b, 0.5 * a * a, 0.5 * a * b, 0.5 * b * b))
    target = np.array([0.0, 0.0, M[0, 0], M[0, 1], M[1, 1]])
    soft = np.vstack((a ** 3, a * a * b, a * b * b, b ** 3))
    A = np.vstack((HARD_WEIGHT * hard, soft))
    rhs = np.concatenate((HARD_WEIGHT * target, np.zeros(4)))
    w, _ = nnls(A, rhs, maxiter=50 * A.shape[1])
    miss = float(np.linalg.norm(hard @ w - target) / max(np.linalg.norm(M), 1e-300))
    return w / (scale * scale), miss


def assemble_L(model: AmbientModel, surf: ImmersedSurface, threads: int = 1) -> OperatorAssembly:
    forms = surf.require_forms()
    mesh = surf.mesh
    cert = zeroth_order_certificate(model, surf)
    interior = mesh.interior
    kappa = forms.extrinsic
    rings = mesh.two_rings

    II = forms.second_form
    det = np.linalg.det(II[interior])
    if np.any(np.abs(det) <= 1e-300):
        raise PreconditionViolation("ELLIPTICITY", "вырожденная вторая форма")

    def stencil(v: int):
        M = np.linalg.inv(II[v])
        M = 0.5 * (M + M.T)
        w, miss = _monotone_weights(forms.local_coords[v], forms.fit_scale[v], M)
        rows = forms.derivative_rows[v]
        c = M[0, 0] * rows[2] + 2.0 * M[0, 1] * rows[3] + M[1, 1] * rows[4]
        return w, c, miss

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stencils = list(pool.map(stencil, interior))
    else:
        stencils = [stencil(v) for v in interior]

    rows_m, cols_m, vals_m = [], [], []
    rows_c, cols_c, vals_c = [], [], []
    violations: List[int] = []
    worst = 0.0
    for v, (w, c, miss) in zip(interior, stencils):
        worst = max(worst, miss)
        if miss > MOMENT_TOL:
            violations.append(int(v))
        kv, Jv = kappa[v], cert.J[v]
        nb = rings[v]
        rows_m.extend([v] * (len(nb) + 1))
        cols_m.extend(nb.tolist() + [v])
        vals_m.extend((-kv * w).tolist() + [kv * (w.sum() + Jv)])
        rows_c.extend([v] * (len(nb) + 1))
        cols_c.extend(nb.tolist() + [v])
        vals_c.extend((-kv * c).tolist() + [kv * (c.sum() + Jv)])
    bnd = mesh.boundary_loop
    V = mesh.n_vertices
    for rows, cols, vals in ((rows_m, cols_m, vals_m), (rows_c, cols_c, vals_c)):
        rows.extend(bnd.tolist())
        cols.extend(bnd.tolist())
        vals.extend([1.0] * bnd.size)
    A = sparse.csr_matrix((vals_m, (rows_m, cols_m)), shape=(V, V))
    C = sparse.csr_matrix((vals_c, (rows_c, cols_c)), shape=(V, V))
    A.sum_duplicates()
    C.sum_duplicates()

    inner = A[interior]
    diag = A.diagonal()[interior]
    off = inner - sparse.csr_matrix((diag, (np.arange(interior.size), interior)), shape=inner.shape)
    off.eliminate_zeros()
    offdiag_ok = bool(off.nnz == 0 or off.data.max() <= 0.0)
    dominant = bool(np.all(diag + 1e-14 * np.abs(diag) >= np.asarray(abs(off).sum(axis=1)).ravel()))
    return OperatorAssembly(
        matrix=A,
        consistent=C,
        interior=interior,
        boundary=bnd,
        kappa=kappa.copy(),
        J=cert.J,
        dmp_violations=violations,
        offdiagonal_nonpositive=offdiag_ok,
        diagonally_dominant=dominant,
        max_moment_residual=worst,
    )


def lu_solve(A: sparse.csr_matrix, b: np.ndarray) -> Tuple[np.ndarray, float]:
    try:
        lu = splu(A.tocsc(), permc_spec="NATURAL")
    except RuntimeError as exc:
        raise SolverFailure(f"Разреженная LU-факторизация не удалась: {exc}") from exc
    x = lu.solve(b)
    res = float(np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300))
    if not np.all(np.isfinite(x)) or res > RESIDUAL_TOL:
        raise SolverFailure(f"Невязка линейной системы {res:.3e} > {RESIDUAL_TOL}")
    return x, res


def solve_dirichlet(
    assembly: OperatorAssembly,
    rhs: np.ndarray,
    boundary: np.ndarray,
    consistent: bool = False,
) -> VariationField:
    """L f = rhs внутри, f = boundary на граничном цикле."""
    if not consistent:
        if assembly.dmp_violations or not assembly.offdiagonal_nonpositive or not assembly.diagonally_dominant:
            raise DiscreteMaximumPrincipleViolation(
                f"Шаблон нарушает дискретный принцип максимума в {len(assembly.dmp_violations)} вершинах",
                vertices=assembly.dmp_violations,
            )
    rhs = np.asarray(rhs, dtype=float)
    boundary = np.asarray(boundary, dtype=float)
    b = rhs.copy()
    b[assembly.boundary] = boundary[assembly.boundary]
    A = assembly.consistent if consistent else assembly.matrix
    x, res = lu_solve(A, b)
    x[assembly.boundary] = boundary[assembly.boundary]
    return VariationField(
        values=x,
        boundary=assembly.boundary,
        boundary_values=boundary[assembly.boundary].copy(),
        residual=res,
    )


def finite_difference_rate(model: AmbientModel, surf: ImmersedSurface, f: np.ndarray, t: float = 1e-4, threads: int = 1) -> np.ndarray:
    """Центральная разность (d/dt)|₀ κ(exp(t f n))."""
    plus = displace_along_normals(model, surf, t * np.asarray(f, dtype=float), threads=threads)
    minus = displace_along_normals(model, surf, -t * np.asarray(f, dtype=float), threads=threads)
    return (plus.require_forms().extrinsic - minus.require_forms().extrinsic) / (2.0 * t)


def shape_operator_variation_check(
    model: AmbientModel,
    surf: ImmersedSurface,
    f: np.ndarray,
    t: float = 1e-4,
    threads: int = 1,
    vertices: Optional[np.ndarray] = None,
) -> VariationCheck:
    """Сравнивает dB/dt = f W - Hess f - f B² с разностями инвариантов tr B и tr B².

    defect считается по vertices, по умолчанию по вершинам с полной звездой.
    """
    forms = surf.require_forms()
    f = np.asarray(f, dtype=float)
    mesh = surf.mesh
    interior = mesh.interior
    W_on, B = _orthonormal_endomorphisms(model, surf)

    hess = np.zeros((surf.n_vertices, 2, 2))
    for v in interior:
        d = forms.derivative_rows[v] @ (f[mesh.two_rings[v]] - f[v])
        hess[v] = [[d[2], d[3]], [d[3], d[4]]]
    grad = forms.gradient
    g2 = np.sum(grad * grad, axis=1)
    coef = np.where(g2 > 0.0, (1.0 / np.sqrt(1.0 + g2) - 1.0) / np.where(g2 > 0.0, g2, 1.0), 0.0)
    Gm = np.eye(2)[None] + coef[:, None, None] * grad[:, :, None] * grad[:, None, :]
    hess_on = Gm @ hess @ Gm
    predicted = f[:, None, None] * W_on - hess_on - f[:, None, None] * (B @ B)
    predicted[mesh.is_boundary] = 0.0

    plus = displace_along_normals(model, surf, t * f, threads=threads).require_forms().shape_operator
    minus = displace_along_normals(model, surf, -t * f, threads=threads).require_forms().shape_operator
    measured_tr = (np.trace(plus, axis1=1, axis2=2) - np.trace(minus, axis1=1, axis2=2)) / (2.0 * t)
    measured_sq = (
        np.einsum("vij,vji->v", plus, plus) - np.einsum("vij,vji->v", minus, minus)
    ) / (2.0 * t)
    pred_tr = np.trace(predicted, axis1=1, axis2=2)
    pred_sq = 2.0 * np.einsum("vij,vji->v", B, predicted)
    if not np.any(f):
        defect = 0.0
    else:
        region = mesh.complete_stencil if vertices is None else np.asarray(vertices, dtype=int)
        err = np.maximum(np.abs(measured_tr - pred_tr), np.abs(measured_sq - pred_sq))[region]
        scale = max(1.0, float(np.max(np.abs(pred_tr[region]))), float(np.max(np.abs(pred_sq[region]))))
        defect = float(np.max(err) / scale)
    return VariationCheck(
        defect=defect,
        predicted=predicted,
        predicted_trace_rate=pred_tr,
        measured_trace_rate=measured_tr,
        predicted_square_rate=pred_sq,
        measured_square_rate=measured_sq,
    )


def dump_matrix_market(assembly: OperatorAssembly, path: str | Path, consistent: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    A = assembly.consistent if consistent else assembly.matrix
    mmwrite(str(path), A.tocoo(), comment="linearized extrinsic curvature operator, Dirichlet rows = identity")
    return path
