"""
Модель гиперболоида для H³ и переходы к карте верхнего полупространства.

Точки H³: X с <X, X> = -1, X0 > 0, где <a, b> = -a0 b0 + a1 b1 + a2 b2 + a3 b3.
Все замкнутые формулы (exp, log, расстояние, функции Буземана, идеальные точки)
считаются здесь; остальные модули работают в координатах карты (x, y, z).
"""
from __future__ import annotations

from typing import Tuple

import numpy as np

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])
ORIGIN = np.array([1.0, 0.0, 0.0, 0.0])
# Базис касательного пространства в ORIGIN; E3 соответствует -d/dz в точке (0, 0, 1).
E1 = np.array([0.0, 1.0, 0.0, 0.0])
E2 = np.array([0.0, 0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 0.0, 1.0])
NULL_AT_INFINITY = np.array([1.0, 0.0, 0.0, -1.0])


def mdot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return -a[..., 0] * b[..., 0] + np.sum(a[..., 1:] * b[..., 1:], axis=-1)


def chart_to_hyperboloid(points: np.ndarray) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    r2 = x * x + y * y + z * z
    return np.stack(((1.0 + r2) / (2.0 * z), x / z, y / z, (1.0 - r2) / (2.0 * z)), axis=-1)


def hyperboloid_to_chart(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    z = 1.0 / (X[..., 0] + X[..., 3])
    return np.stack((X[..., 1] * z, X[..., 2] * z, z), axis=-1)


def chart_jacobian(points: np.ndarray) -> np.ndarray:
    """dX/dx, форма (..., 4, 3)."""
    p = np.asarray(points, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    r2 = x * x + y * y + z * z
    z2 = z * z
    J = np.zeros(p.shape[:-1] + (4, 3))
    J[..., 0, 0] = x / z
    J[..., 0, 1] = y / z
    J[..., 0, 2] = (z2 - r2 + z2 - 1.0) / (2.0 * z2)
    J[..., 1, 0] = 1.0 / z
    J[..., 1, 2] = -x / z2
    J[..., 2, 1] = 1.0 / z
    J[..., 2, 2] = -y / z2
    J[..., 3, 0] = -x / z
    J[..., 3, 1] = -y / z
    J[..., 3, 2] = (-z2 - 1.0 + x * x + y * y) / (2.0 * z2)
    return J


def push_vectors(points: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Касательные векторы карты -> касательные векторы гиперболоида."""
    J = chart_jacobian(points)
    return np.einsum("...ij,...j->...i", J, np.asarray(vectors, dtype=float))


def pull_vectors(points: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Обратно к карте: v = z² Jᵀ η V (J ортогональна с весом 1/z²)."""
    p = np.asarray(points, dtype=float)
    J = chart_jacobian(p)
    V = np.asarray(vectors, dtype=float) * np.array([-1.0, 1.0, 1.0, 1.0])
    return (p[..., 2] ** 2)[..., None] * np.einsum("...ij,...i->...j", J, V)


def project_tangent(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    return V + mdot(X, V)[..., None] * X


def normalize_point(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X / np.sqrt(np.maximum(-mdot(X, X), 1e-300))[..., None]


def exp(X: np.ndarray, V: np.ndarray, t: float | np.ndarray = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Геодезическая t -> exp_X(tV); возвращает (точка, скорость)."""
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    speed = np.sqrt(np.maximum(mdot(V, V), 0.0))
    t = np.asarray(t, dtype=float)
    s = speed * t
    safe = np.where(speed > 1e-300, speed, 1.0)
    ch = np.cosh(s)[..., None]
    sh_over = np.where(speed > 1e-300, np.sinh(s) / safe, t)[..., None]
    point = ch * X + sh_over * V
    velocity = (speed * np.sinh(s))[..., None] * X + ch * V
    return point, velocity


def distance(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    D = np.asarray(X, dtype=float) - np.asarray(Y, dtype=float)
    chord = np.sqrt(np.maximum(mdot(D, D), 0.0))
    return 2.0 * np.arcsinh(0.5 * chord)


def log(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    a = np.maximum(-mdot(X, Y), 1.0)
    U = Y - a[..., None] * X
    d = distance(X, Y)
    norm_u = np.sqrt(np.maximum(mdot(U, U), 0.0))
    scale = np.where(norm_u > 1e-300, d / np.where(norm_u > 1e-300, norm_u, 1.0), 1.0)
    return scale[..., None] * U


def transport(X: np.ndarray, Y: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Параллельный перенос W из X в Y вдоль геодезической."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    W = np.asarray(W, dtype=float)
    coef = mdot(Y, W) / (1.0 - mdot(X, Y))
    return W + coef[..., None] * (X + Y)


def boundary_null_vector(x: float, y: float) -> np.ndarray:
    r2 = x * x + y * y
    return np.array([(1.0 + r2) / 2.0, x, y, (1.0 - r2) / 2.0])


def direction_null_vector(u: np.ndarray) -> np.ndarray:
    """Идеальная точка, видимая из ORIGIN в направлении единичного u ∈ S²."""
    u = np.asarray(u, dtype=float)
    return np.concatenate((np.ones(u.shape[:-1] + (1,)), u), axis=-1)


def null_to_boundary(N: np.ndarray, tol: float = 1e-12) -> Tuple[float, float] | None:
    """None означает бесконечно удалённую точку."""
    s = float(N[0] + N[3])
    if abs(s) <= tol * max(1.0, abs(float(N[0]))):
        return None
    return float(N[1] / s), float(N[2] / s)


def busemann(X: np.ndarray, null: np.ndarray, basepoint: np.ndarray) -> np.ndarray:
    """b(X) = log(-<X, ξ>) - log(-<O, ξ>); не зависит от нормировки ξ."""
    return np.log(-mdot(X, null)) - np.log(-mdot(basepoint, null))


def lorentz_rotation(R: np.ndarray) -> np.ndarray:
    L = np.eye(4)
    L[1:, 1:] = np.asarray(R, dtype=float)
    return L


def lorentz_inverse(L: np.ndarray) -> np.ndarray:
    return ETA @ L.T @ ETA


def rotation_to(direction: np.ndarray) -> np.ndarray:
    """Детерминированная ортогональная матрица, третий столбец которой равен direction."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    a = helper - np.dot(helper, d) * d
    a /= np.linalg.norm(a)
    b = np.cross(d, a)
    return np.column_stack((a, b, d))


def plane_of_circle(center_direction: np.ndarray, angular_radius: float) -> np.ndarray:
    """Единичная пространственноподобная нормаль m плоскости, чей идеальный край:
    окружность угловым радиусом angular_radius вокруг center_direction, вид из ORIGIN.
    Сторона диска: <X, m> > 0."""
    d = np.asarray(center_direction, dtype=float)
    d = d / np.linalg.norm(d)
    s = np.sin(angular_radius)
    return np.concatenate(([np.cos(angular_radius) / s], d / s))


def plane_center(m: np.ndarray) -> np.ndarray:
    """Ближайшая к ORIGIN точка плоскости <X, m> = 0."""
    a = float(mdot(ORIGIN, m))
    return normalize_point(ORIGIN - a * np.asarray(m, dtype=float))
