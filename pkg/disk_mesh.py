"""
Триангуляции опорного диска.

Шестиугольная кольцевая решётка: N = 2^refinement колец, в кольце j ровно 6j
вершин, V = 1 + 3N(N+1), E = 3N(3N+1), F = 6N². Вершина m кольца j имеет индекс
1 + 3j(j-1) + (m mod 6j). Дополнительно кольцевая сетка с переменным числом
вершин по кольцам (для больших гиперболических дисков) и замкнутая
октаэдрическая сфера (только для проверки отказа на пустой границе).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np


class MeshKind(str, Enum):
    GEODESIC_POLAR_CAP = "geodesic_polar_cap"
    PLANAR_DISK_SAMPLE = "planar_disk_sample"
    HYPERBOLIC_RINGS = "hyperbolic_rings"
    CLOSED_SPHERE = "closed_sphere"


@dataclass(frozen=True)
class DiskMesh:
    kind: MeshKind
    reference: np.ndarray
    triangles: np.ndarray
    boundary_loop: np.ndarray
    ring_index: np.ndarray

    @property
    def n_vertices(self) -> int:
        return int(self.reference.shape[0])

    @property
    def vertices(self) -> np.ndarray:
        return np.arange(self.n_vertices)

    @property
    def rings(self) -> int:
        return int(self.ring_index.max()) if self.n_vertices else 0

    @cached_property
    def is_boundary(self) -> np.ndarray:
        flags = np.zeros(self.n_vertices, dtype=bool)
        flags[self.boundary_loop] = True
        return flags

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary)

    @cached_property
    def complete_stencil(self) -> np.ndarray:
        """Внутренние вершины с полным вторым кольцом соседей (кольцо <= rings - 2)."""
        return self.interior[self.ring_index[self.interior] <= self.rings - 2]

    @cached_property
    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.vstack((t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]))
        e.sort(axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def neighbors(self) -> List[np.ndarray]:
        adj: List[set] = [set() for _ in range(self.n_vertices)]
        for a, b in self.edges:
            adj[a].add(int(b))
            adj[b].add(int(a))
        return [np.array(sorted(s), dtype=int) for s in adj]

    @cached_property
    def two_rings(self) -> List[np.ndarray]:
        out = []
        for v in range(self.n_vertices):
            ring = set(self.neighbors[v].tolist())
            for w in self.neighbors[v]:
                ring.update(self.neighbors[w].tolist())
            ring.discard(v)
            out.append(np.array(sorted(ring), dtype=int))
        return out

    def euler_characteristic(self) -> int:
        return self.n_vertices - int(self.edges.shape[0]) + int(self.triangles.shape[0])

    def boundary_edges(self) -> np.ndarray:
        t = self.triangles
        directed = np.vstack((t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]))
        key = np.sort(directed, axis=1)
        _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return directed[counts[inverse.ravel()] == 1]

    def topology_report(self) -> dict:
        """χ, простота граничного цикла и согласованность ориентации."""
        t = self.triangles
        directed = np.vstack((t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]))
        _, dcounts = np.unique(directed, axis=0, return_counts=True)
        orientation_ok = bool(np.all(dcounts == 1))
        bedges = self.boundary_edges()
        loop_ok = True
        if self.boundary_loop.size:
            succ = {int(a): int(b) for a, b in bedges}
            loop_ok = len(succ) == len(bedges) == self.boundary_loop.size
            if loop_ok:
                start = int(self.boundary_loop[0])
                walk = [start]
                while True:
                    nxt = succ.get(walk[-1])
                    if nxt is None or nxt == start or len(walk) > len(succ):
                        break
                    walk.append(nxt)
                loop_ok = sorted(walk) == sorted(int(v) for v in self.boundary_loop)
        else:
            loop_ok = bedges.size == 0
        return {
            "euler_characteristic": self.euler_characteristic(),
            "boundary_simple_cycle": bool(loop_ok),
            "orientation_consistent": orientation_ok,
        }

    def edge_lengths_reference(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.reference[e[:, 0]] - self.reference[e[:, 1]], axis=1)


def _ring_offset(j: int) -> int:
    return 0 if j == 0 else 1 + 3 * j * (j - 1)


def _hex_vertex(j: int, m: int) -> int:
    return _ring_offset(j) + (m % (6 * j))


def _hex_triangles(N: int) -> np.ndarray:
    tris = []
    for j in range(1, N + 1):
        for s in range(6):
            outer = [_hex_vertex(j, s * j + i) for i in range(j + 1)]
            if j == 1:
                inner = [0]
            else:
                inner = [_hex_vertex(j - 1, s * (j - 1) + i) for i in range(j)]
            for i in range(j):
                tris.append((outer[i], outer[i + 1], inner[min(i, len(inner) - 1)]))
            for i in range(j - 1):
                tris.append((inner[i], outer[i + 1], inner[i + 1]))
    return np.array(tris, dtype=int)


def _hex_reference(N: int, kind: MeshKind) -> np.ndarray:
    pts = [np.zeros(2)]
    corners = np.array([[np.cos(np.pi * s / 3.0), np.sin(np.pi * s / 3.0)] for s in range(7)])
    for j in range(1, N + 1):
        for m in range(6 * j):
            if kind is MeshKind.GEODESIC_POLAR_CAP:
                ang = 2.0 * np.pi * m / (6 * j)
                pts.append((j / N) * np.array([np.cos(ang), np.sin(ang)]))
            else:
                s, i = divmod(m, j)
                lattice = j * corners[s] + i * (corners[s + 1] - corners[s])
                pts.append((j / N) * lattice / np.linalg.norm(lattice))
    return np.array(pts)


def make_disk_mesh(kind: MeshKind | str, refinement: int, rings: Optional[int] = None) -> DiskMesh:
    kind = MeshKind(kind)
    if refinement < 0:
        raise ValueError(f"refinement должен быть >= 0, получено {refinement}")
    if kind not in (MeshKind.GEODESIC_POLAR_CAP, MeshKind.PLANAR_DISK_SAMPLE):
        raise ValueError(f"make_disk_mesh не строит сетки вида {kind.value}")
    N = int(rings) if rings is not None else 2 ** int(refinement)
    if N < 1:
        raise ValueError("Нужно хотя бы одно кольцо")
    ring_index = np.concatenate(([0], np.repeat(np.arange(1, N + 1), 6 * np.arange(1, N + 1))))
    boundary = np.arange(_ring_offset(N), _ring_offset(N) + 6 * N)
    return DiskMesh(
        kind=kind,
        reference=_hex_reference(N, kind),
        triangles=_hex_triangles(N),
        boundary_loop=boundary,
        ring_index=ring_index,
    )


def hyperbolic_ring_counts(rings: int, step: float) -> List[int]:
    """Число вершин кольца ~ длине гиперболической окружности радиуса j·step."""
    counts = []
    for j in range(1, rings + 1):
        per_side = max(j, int(round(2.0 * np.pi * np.sinh(j * step) / (6.0 * step))))
        counts.append(6 * per_side)
    return counts


def make_ring_disk_mesh(counts: Sequence[int]) -> DiskMesh:
    """Кольцевая сетка: кольцо j (радиус j/N в опорном диске) с counts[j-1] вершинами."""
    N = len(counts)
    if N < 1 or any(c < 3 for c in counts):
        raise ValueError("Нужны кольца с числом вершин >= 3")
    offsets = [0, 1]
    for c in counts:
        offsets.append(offsets[-1] + int(c))
    pts = [np.zeros(2)]
    for j, c in enumerate(counts, start=1):
        ang = 2.0 * np.pi * np.arange(c) / c
        pts.extend((j / N) * np.column_stack((np.cos(ang), np.sin(ang))))
    tris = []
    for j in range(1, N + 1):
        n_out = counts[j - 1]
        out = lambda o, j=j, n=n_out: offsets[j] + (o % n)
        if j == 1:
            tris.extend((out(o), out(o + 1), 0) for o in range(n_out))
            continue
        n_in = counts[j - 2]
        inn = lambda i, j=j, n=n_in: offsets[j - 1] + (i % n)
        i = o = 0
        while i < n_in or o < n_out:
            next_out = (o + 1) / n_out
            next_in = (i + 1) / n_in
            if i >= n_in or (o < n_out and next_out <= next_in):
                tris.append((out(o), out(o + 1), inn(i)))
                o += 1
            else:
                tris.append((inn(i), out(o), inn(i + 1)))
                i += 1
    ring_index = np.concatenate(([0], np.repeat(np.arange(1, N + 1), counts)))
    boundary = np.arange(offsets[N], offsets[N] + counts[-1])
    return DiskMesh(
        kind=MeshKind.HYPERBOLIC_RINGS,
        reference=np.array(pts),
        triangles=np.array(tris, dtype=int),
        boundary_loop=boundary,
        ring_index=ring_index,
    )


def make_sphere_mesh() -> DiskMesh:
    """Октаэдр: замкнутая поверхность без границы."""
    tris = np.array(
        [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]],
        dtype=int,
    )
    # сферические углы (полярный, азимут) как опорные координаты
    reference = np.array([
        [np.pi / 2, 0.0], [np.pi / 2, np.pi], [np.pi / 2, np.pi / 2],
        [np.pi / 2, 3 * np.pi / 2], [0.0, 0.0], [np.pi, 0.0],
    ])
    return DiskMesh(
        kind=MeshKind.CLOSED_SPHERE,
        reference=reference,
        triangles=tris,
        boundary_loop=np.array([], dtype=int),
        ring_index=np.zeros(6, dtype=int),
    )
