"""Ошибки пакета и коды завершения командной строки."""
from __future__ import annotations

from enum import IntEnum
from typing import Any, Dict, Optional


class ExitCode(IntEnum):
    OK = 0
    VALIDATION_FAILED = 1
    SOLVER_FAILED = 2
    PRECONDITION = 3
    IO_OR_CONFIG = 4


# Коды нарушенных предусловий и ссылки на утверждения, чьи гипотезы нарушены.
PRECONDITION_CITATIONS: Dict[str, str] = {
    "K_RANGE": "Lemma «morse» hypotheses: k must lie in ]0, c[",
    "BASE_CURVATURE": "Lemma «morse» / Prop. «platdisk» hypotheses: the base disk must be locally convex "
    "with extrinsic curvature above the certified bound",
    "EMPTY_BOUNDARY": "Thm. «inex»: no k-surface exists when the Gauss-Minkowski image is the sphere "
    "minus 0, 1 or 2 points (closed surface, empty boundary)",
    "PUNCTURED_SPHERE": "Thm. «inex»: no complete k-surface has Gauss-Minkowski image equal to the sphere "
    "minus 0, 1 or 2 points",
    "ELLIPTICITY": "Prop. «varinf»: the linearized operator is elliptic and invertible only while "
    "0 < kappa < c and B is positive definite",
    "CURVATURE_BOUND": "Prop. «varinf» / Lemma «morse» hypotheses: all sectional curvatures of the ambient "
    "model must be <= -c",
    "CONE_THRESHOLD": "Lemma «deltahyper» hypotheses: δ(α, β) is defined only for 0 <= β < α < α₀",
    "MODEL_KIND": "Cor. «equic»: closed-form equidistants and horospheres are available only in H³",
}


class KSurfaceError(Exception):
    """Базовая ошибка пакета."""


class ChartError(KSurfaceError, ValueError):
    """Точка вне карты (z <= 0) или ненормированный вектор."""


class ConfigError(KSurfaceError, ValueError):
    pass


class PreconditionViolation(KSurfaceError, ValueError):
    """Нарушено математическое предусловие; несёт код и формулировку."""

    def __init__(self, precondition: str, message: str, details: Optional[Dict[str, Any]] = None):
        self.precondition = precondition
        self.citation = PRECONDITION_CITATIONS.get(precondition, precondition)
        self.details = details or {}
        super().__init__(f"[{precondition}] {message} ({self.citation})")


class IntegratorFailure(KSurfaceError, RuntimeError):
    pass


class FitError(KSurfaceError, RuntimeError):
    """Недоопределённая или вырожденная локальная аппроксимация."""

    def __init__(self, message: str, vertices: Optional[list] = None):
        self.vertices = list(vertices or [])
        super().__init__(message)


class SolverFailure(KSurfaceError, RuntimeError):
    """Отказ решателя; last_good хранит последнее корректное состояние."""

    def __init__(self, message: str, last_good: Any = None, report: Any = None):
        self.last_good = last_good
        self.report = report
        super().__init__(message)


class DiscreteMaximumPrincipleViolation(SolverFailure):
    def __init__(self, message: str, vertices: Optional[list] = None, report: Any = None):
        self.vertices = list(vertices or [])
        super().__init__(message, report=report)


def exit_code_for(exc: BaseException) -> ExitCode:
    if isinstance(exc, PreconditionViolation):
        return ExitCode.PRECONDITION
    if isinstance(exc, (ConfigError, OSError)):
        return ExitCode.IO_OR_CONFIG
    if isinstance(exc, (SolverFailure, IntegratorFailure, FitError)):
        return ExitCode.SOLVER_FAILED
    if isinstance(exc, ChartError):
        return ExitCode.PRECONDITION
    return ExitCode.SOLVER_FAILED
