"""
Экспорт поверхностей: OBJ только с геометрией (координаты карты), все скалярные
поля в JSON-сайдкаре по номеру вершины. Отчёты пишутся детерминированно:
sort_keys, без времени, NaN/inf как null.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from disk_mesh import DiskMesh
from immersed_surface import ImmersedSurface


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        f = float(value)
        return f if math.isfinite(f) else None
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def dumps_report(data: Mapping[str, Any]) -> str:
    return json.dumps(_jsonable(data), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_report(path: str | Path, data: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(data), encoding="utf-8")
    return path


def write_obj(path: str | Path, surf: ImmersedSurface, name: str = "ksurface") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"o {name}\n")
        for x, y, z in surf.positions:
            f.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in surf.mesh.triangles + 1:
            f.write(f"f {a} {b} {c}\n")
    return path


def read_obj(path: str | Path) -> Tuple[np.ndarray, np.ndarray]:
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return np.array(vertices, dtype=float), np.array(faces, dtype=int)


def vertex_fields(surf: ImmersedSurface, extra: Optional[Mapping[str, np.ndarray]] = None) -> Dict[str, Dict[str, Any]]:
    """Скалярные поля по вершинам: нормаль, κ, главные кривизны и переданные извне (λ, J)."""
    columns: Dict[str, np.ndarray] = {"normal": surf.normals}
    if surf.forms is not None:
        columns["kappa"] = surf.forms.extrinsic
        columns["principal"] = surf.forms.principal
        columns["mean"] = surf.forms.mean
    for key, values in (extra or {}).items():
        columns[key] = np.asarray(values)
    boundary = surf.mesh.is_boundary
    out: Dict[str, Dict[str, Any]] = {}
    for v in range(surf.n_vertices):
        row: Dict[str, Any] = {"boundary": bool(boundary[v])}
        for key, values in columns.items():
            row[key] = values[v]
        out[str(v)] = row
    return out


def write_sidecar(
    path: str | Path,
    surf: ImmersedSurface,
    extra: Optional[Mapping[str, np.ndarray]] = None,
    meta: Optional[Mapping[str, Any]] = None,
) -> Path:
    data = {
        "mesh": {
            "kind": surf.mesh.kind.value,
            "vertices": surf.n_vertices,
            "triangles": int(surf.mesh.triangles.shape[0]),
            "boundary_loop": surf.mesh.boundary_loop,
            "topology": surf.mesh.topology_report(),
        },
        "vertices": vertex_fields(surf, extra),
        "meta": dict(meta or {}),
    }
    return write_report(path, data)


def export_surface(
    out_dir: str | Path,
    surf: ImmersedSurface,
    stem: str = "surface",
    extra: Optional[Mapping[str, np.ndarray]] = None,
    meta: Optional[Mapping[str, Any]] = None,
) -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    return write_obj(out_dir / f"{stem}.obj", surf), write_sidecar(out_dir / f"{stem}.json", surf, extra, meta)


def mesh_matches(mesh: DiskMesh, faces: np.ndarray) -> bool:
    return bool(np.array_equal(mesh.triangles, faces))
