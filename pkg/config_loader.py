"""
Загрузка конфигурации запуска: файл `key = value` (как .env) или YAML,
поверх него флаги командной строки. Проверка через pydantic.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ambient_geometry import AmbientModel, WarpFactor, make_model
from ksurface_errors import ConfigError

LIST_KEYS = {"warp_center", "perturbation", "schedule_stages"}
INT_KEYS = {"refinement", "max_newton", "max_stages", "seed", "threads", "w_sign"}
BOOL_KEYS = {"dump_matrix"}


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Literal["oracle", "solve-lens", "solve-plateau", "validate"] = "validate"
    model_kind: Literal["hyperbolic", "warped"] = "hyperbolic"
    curvature_bound: float = 1.0
    warp_amplitude: float = 0.0
    warp_center: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    warp_width: float = 0.5
    w_sign: int = 1

    k: float = 0.25
    base_kind: Literal["spherical_cap", "equidistant_disk", "closed_sphere"] = "spherical_cap"
    base_radius: float = 1.0
    base_extent: float = 1.0
    cap_angle: float = 1.0
    ideal_kind: Literal["disk", "full_sphere", "sphere_minus_1", "sphere_minus_2"] = "disk"
    alpha: float = math.pi / 2.0
    perturbation: List[Tuple[float, float]] = Field(default_factory=list)

    refinement: int = 3
    tol: float = 1e-8
    max_newton: int = 20
    margin: float = 0.05
    schedule: Literal["contracting_disk", "k_ramp", "equidistant_seed"] = "contracting_disk"
    schedule_stages: List[float] = Field(default_factory=list)
    max_stages: int = 5
    probe_fraction: float = 0.5
    plateau_tol: float = 1e-6

    out: str = "out"
    seed: int = 0
    threads: int = 1
    dump_matrix: bool = False

    @field_validator("refinement")
    @classmethod
    def _refinement_range(cls, v: int) -> int:
        if not 0 <= v <= 6:
            raise ValueError("refinement должен лежать в [0, 6]")
        return v

    @field_validator("tol", "margin", "plateau_tol", "warp_width", "curvature_bound", "base_radius", "base_extent", "cap_angle")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0.0:
            raise ValueError("значение должно быть > 0")
        return v

    @field_validator("threads", "max_newton", "max_stages")
    @classmethod
    def _at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError("значение должно быть >= 1")
        return v

    @field_validator("w_sign")
    @classmethod
    def _sign(cls, v: int) -> int:
        if v not in (1, -1):
            raise ValueError("w_sign должен быть ±1")
        return v

    @field_validator("probe_fraction")
    @classmethod
    def _fraction(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("probe_fraction должна лежать в (0, 1)")
        return v

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        if self.model_kind == "hyperbolic" and self.curvature_bound != 1.0:
            raise ValueError("для гиперболической модели c = 1")
        if not 0.0 < self.alpha < math.pi:
            raise ValueError("alpha должна лежать в (0, π)")
        if self.schedule_stages and any(b <= a for a, b in zip(self.schedule_stages, self.schedule_stages[1:])):
            raise ValueError("schedule_stages должны возрастать")
        return self

    @property
    def c(self) -> float:
        return self.curvature_bound

    def provenance(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def _parse_line(line: str) -> Tuple[Optional[str], Optional[str]]:
    raw = line.strip()
    if not raw or raw.startswith("#") or "=" not in raw:
        return None, None
    key, value = raw.split("=", 1)
    key = key.strip()
    value = value.split(" #", 1)[0].strip().strip('"').strip("'")
    if not key:
        return None, None
    return key, value


def _coerce(key: str, value: str) -> Any:
    if key in LIST_KEYS:
        items = [float(x) for x in value.replace(";", ",").split(",") if x.strip()]
        if key == "perturbation":
            if len(items) % 2:
                raise ConfigError("perturbation: нужны пары a_j, b_j")
            return [(items[i], items[i + 1]) for i in range(0, len(items), 2)]
        return items
    if key in BOOL_KEYS:
        return value.lower() in ("1", "true", "yes", "on")
    if key in INT_KEYS:
        return int(value)
    return value


def parse_key_values(lines: Iterable[str]) -> Dict[str, Any]:
    data: Dict[str, Any] = {}
    for number, line in enumerate(lines, start=1):
        key, value = _parse_line(line)
        if key is None:
            if line.strip() and not line.strip().startswith("#"):
                raise ConfigError(f"строка {number}: ожидается 'key = value'")
            continue
        try:
            data[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"строка {number}: {key}: {exc}") from exc
    return data


def read_config_file(path: str | Path) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"не удалось прочитать {path}: {exc}") from exc
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: некорректный YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: ожидается отображение верхнего уровня")
        return data
    return parse_key_values(text.splitlines())


def load_run_config(
    path: Optional[str | Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Файл, затем флаги (значения None из флагов игнорируются)."""
    data: Dict[str, Any] = read_config_file(path) if path else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    try:
        return RunConfig(**data)
    except ValidationError as exc:
        raise ConfigError(f"некорректная конфигурация: {exc}") from exc


def model_from_config(config: RunConfig) -> AmbientModel:
    """Модель окружающего пространства; конформный множитель сертифицируется в make_model."""
    warp = WarpFactor(config.warp_amplitude, tuple(config.warp_center), config.warp_width)
    return make_model(config.model_kind, config.curvature_bound, warp, w_sign=float(config.w_sign), seed=config.seed)
