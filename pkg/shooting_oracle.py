"""
Независимый одномерный оракул для вращательно-симметричных линз.

Профиль k-поверхности вращения лежит в меридиональной плоскости X2 = 0 и
задаётся в координатах Ферми (d, a) относительно оси вращения ORIGIN -> E3:

    X = (cosh d cosh a, sinh d, 0, cosh d sinh a),
    d' = cos θ,  a' = sin θ / cosh d,  θ' = k tanh d / sin θ - tanh d sin θ.

Высота полюса a0 подбирается методом Брента так, чтобы профиль прошёл через
граничную окружность базы; затем профиль переводится в λ как функцию
нормированного радиуса на опорном диске.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from ksurface_errors import IntegratorFailure, PreconditionViolation

START_ARC = 1e-4
MAX_ARC = 50.0


class ProfileBase(str, Enum):
    SPHERE_CAP = "sphere_cap"
    EQUIDISTANT = "equidistant"


@dataclass(frozen=True)
class LensProfile:
    k: float
    base: ProfileBase
    pole_height: float
    samples: np.ndarray
    spline: CubicSpline

    def lam(self, t: np.ndarray) -> np.ndarray:
        """λ на нормированном радиусе t ∈ [0, 1] опорного диска."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        out = self.spline(t)
        return np.where(t >= 1.0, 0.0, out)

    def on_mesh(self, reference: np.ndarray) -> np.ndarray:
        return self.lam(np.hypot(reference[:, 0], reference[:, 1]))


def _rhs(k: float) -> Callable:
    def rhs(_s, y):
        d, _a, theta = y
        st = np.sin(theta)
        td = np.tanh(d)
        return [np.cos(theta), st / np.cosh(d), k * td / st - td * st]

    return rhs


def _shoot(k: float, a0: float, d_target: float, dense: bool = False):
    sk = np.sqrt(k)
    s0 = START_ARC
    y0 = [s0, a0 - 0.5 * sk * s0 * s0, -sk * s0]

    def reach(_s, y):
        return y[0] - d_target

    reach.terminal = True
    reach.direction = 1.0

    def turned(_s, y):
        # θ дошёл до -π: профиль развернулся, sin θ обращается в ноль
        return y[2] + np.pi - 1e-6

    turned.terminal = True

    sol = solve_ivp(
        _rhs(k),
        (s0, MAX_ARC),
        y0,
        method="RK45",
        rtol=1e-11,
        atol=1e-12,
        events=(reach, turned),
        dense_output=dense,
    )
    if sol.status == -1:
        raise IntegratorFailure(f"Интегрирование профиля не удалось: {sol.message}")
    if sol.t_events[0].size == 0:
        raise IntegratorFailure(f"Профиль с полюсом a0 = {a0:.6f} не достиг граничной окружности")
    return sol


def _solve_pole(k: float, d_target: float, a_target: float, lo: float, hi: float) -> float:
    def miss(a0: float) -> float:
        sol = _shoot(k, a0, d_target)
        return float(sol.y_events[0][0][1] - a_target)

    f_lo, f_hi = miss(lo), miss(hi)
    if f_lo * f_hi > 0.0:
        raise IntegratorFailure(f"Высота полюса не отделена: невязки {f_lo:.3e}, {f_hi:.3e} на [{lo:.4f}, {hi:.4f}]")
    return float(brentq(miss, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=200))


def _profile(
    k: float,
    base: ProfileBase,
    boundary: Tuple[float, float, float],
    bracket: Tuple[float, float],
    convert: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
    n_samples: int,
    pole_lam: Callable[[float], float],
) -> LensProfile:
    X0, X1, X3 = boundary
    d_target = float(np.arcsinh(X1))
    a_target = float(np.arctanh(X3 / X0))
    a0 = _solve_pole(k, d_target, a_target, *bracket)
    sol = _shoot(k, a0, d_target, dense=True)
    s_end = float(sol.t_events[0][0])
    s = np.linspace(START_ARC, s_end, n_samples)
    d, a, _ = sol.sol(s)
    X = np.stack((np.cosh(d) * np.cosh(a), np.sinh(d), np.cosh(d) * np.sinh(a)), axis=-1)
    t, lam = convert(X)
    t = np.concatenate(([0.0], t[:-1], [1.0]))
    lam = np.concatenate(([pole_lam(a0)], lam[:-1], [0.0]))
    order = np.argsort(t, kind="stable")
    t, lam = t[order], lam[order]
    keep = np.concatenate(([True], np.diff(t) > 1e-12))
    return LensProfile(
        k=k,
        base=base,
        pole_height=a0,
        samples=np.column_stack((t[keep], lam[keep])),
        spline=CubicSpline(t[keep], lam[keep]),
    )


def _check_k(k: float, base_kappa: float) -> None:
    if not 0.0 < k < 1.0:
        raise PreconditionViolation("K_RANGE", f"k = {k} вне ]0, 1[")
    if base_kappa <= k:
        raise PreconditionViolation("BASE_CURVATURE", f"κ базы {base_kappa:.6f} <= k = {k}")


def sphere_cap_profile(k: float, radius: float = 1.0, half_angle: float = 1.0, n_samples: int = 2000) -> LensProfile:
    """Линза над шапкой сферы радиуса radius с полярным полуугол half_angle; t = φ / half_angle."""
    _check_k(k, 1.0 / np.tanh(radius) ** 2)
    if not 0.0 < half_angle < np.pi / 2:
        raise ValueError("half_angle должен лежать в (0, π/2)")
    R = float(radius)
    boundary = (np.cosh(R), np.sinh(R) * np.sin(half_angle), np.sinh(R) * np.cos(half_angle))
    a_flat = float(np.arctanh(np.tanh(R) * np.cos(half_angle)))

    def convert(X):
        rho = np.arccosh(np.maximum(X[:, 0], 1.0))
        phi = np.arctan2(X[:, 1], X[:, 2])
        return phi / half_angle, R - rho

    return _profile(k, ProfileBase.SPHERE_CAP, boundary, (a_flat, R), convert, n_samples, lambda a0: R - a0)


def equidistant_profile(k: float, distance: float, extent: float = 1.0, n_samples: int = 2000) -> LensProfile:
    """Линза над эквидистантой distance над геодезическим диском радиуса extent; t = ρ / extent."""
    _check_k(k, np.tanh(distance) ** 2)
    r0 = float(distance)
    boundary = (np.cosh(r0) * np.cosh(extent), np.cosh(r0) * np.sinh(extent), np.sinh(r0))
    a_flat = float(np.arctanh(np.tanh(r0) / np.cosh(extent)))

    def convert(X):
        s = np.arcsinh(X[:, 2])
        rho = np.arccosh(np.maximum(X[:, 0] / np.cosh(s), 1.0))
        return rho / extent, r0 - s

    return _profile(k, ProfileBase.EQUIDISTANT, boundary, (a_flat, r0), convert, n_samples, lambda a0: r0 - a0)
