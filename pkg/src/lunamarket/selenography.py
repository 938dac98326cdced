"""Goldberg-polyhedron cell registry over the lunar sphere.

A class-I Goldberg polyhedron GP(m, 0) is the dual of an icosahedron whose
faces are split into m*m triangles and projected onto the sphere. Each vertex
of that geodesic mesh is one Goldberg cell: the 12 icosahedron corners become
pentagons and every other vertex a hexagon, 10*m*m + 2 cells in total.

Cell indexing is fixed: the icosahedron has a vertex at +z, the 12 corner
cells come first (index 0 is the north pole, 11 the south pole), then the
points interior to icosahedron edges, then face interiors, each group in a
fixed traversal order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol, Sequence

import numpy as np

from lunamarket.errors import FrequencyMismatch, InvalidFrequency, NotFound

LUNAR_RADIUS_M = 1_737_400.0
TIE_EPS = 1e-12


@dataclass(frozen=True, order=True)
class CellId:
    frequency: int
    index: int

    def __str__(self) -> str:
        return f"m{self.frequency}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> CellId:
        try:
            freq, idx = text.removeprefix("m").split(":")
            return cls(int(freq), int(idx))
        except ValueError:
            raise ValueError(f"bad cell id {text!r}") from None


@dataclass(frozen=True)
class SelenographicCoord:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")
        if self.lon == -180.0:
            object.__setattr__(self, "lon", 180.0)

    def unit_vector(self) -> np.ndarray:
        la, lo = math.radians(self.lat), math.radians(self.lon)
        return np.array([math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la)])

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> SelenographicCoord:
        x, y, z = (float(c) for c in v)
        n = math.sqrt(x * x + y * y + z * z)
        lat = math.degrees(math.asin(max(-1.0, min(1.0, z / n))))
        lon = math.degrees(math.atan2(y, x))
        if lon <= -180.0:
            lon = 180.0
        return cls(lat, lon)


def icosahedron() -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Unit icosahedron with vertex 0 at +z and vertex 11 at -z."""
    ring = math.atan(0.5)
    verts = [(0.0, 0.0, 1.0)]
    for k in range(5):
        lon = math.radians(72.0 * k)
        verts.append((math.cos(ring) * math.cos(lon), math.cos(ring) * math.sin(lon), math.sin(ring)))
    for k in range(5):
        lon = math.radians(36.0 + 72.0 * k)
        verts.append((math.cos(ring) * math.cos(lon), math.cos(ring) * math.sin(lon), -math.sin(ring)))
    verts.append((0.0, 0.0, -1.0))
    faces = []
    for k in range(5):
        u0, u1 = 1 + k, 1 + (k + 1) % 5
        l0, l1 = 6 + k, 6 + (k + 1) % 5
        faces += [(0, u0, u1), (u0, l0, u1), (u1, l0, l1), (11, l1, l0)]
    return np.array(verts), faces


class Tiling:
    """Immutable GP(m, 0) tiling; build with :func:`build_tiling`."""

    def __init__(self, frequency: int, centers: np.ndarray, neighbors: tuple[tuple[int, ...], ...],
                 n_vertices: int, n_edges: int, radius: float) -> None:
        self.frequency = frequency
        self.centers = centers
        self.centers.setflags(write=False)
        self.neighbors = neighbors
        self.radius = radius
        # counts of the Goldberg polyhedron itself (dual of the geodesic mesh)
        self.n_vertices = n_vertices
        self.n_edges = n_edges

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def n_faces(self) -> int:
        return len(self.centers)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    @property
    def pentagons(self) -> list[int]:
        return [i for i, nb in enumerate(self.neighbors) if len(nb) == 5]

    @property
    def hexagons(self) -> list[int]:
        return [i for i, nb in enumerate(self.neighbors) if len(nb) == 6]

    def cells(self) -> list[CellId]:
        return [CellId(self.frequency, i) for i in range(len(self))]

    def _check(self, cell: CellId) -> int:
        if cell.frequency != self.frequency:
            raise FrequencyMismatch(f"cell {cell} is not on a frequency-{self.frequency} tiling")
        if not 0 <= cell.index < len(self):
            raise NotFound(f"cell {cell} out of range")
        return cell.index

    def locate(self, coord: SelenographicCoord) -> CellId:
        """Cell whose center has the largest dot product with ``coord``; ties go to the lowest index."""
        dots = self.centers @ coord.unit_vector()
        best = float(dots.max())
        idx = int(np.flatnonzero(dots >= best - TIE_EPS)[0])
        return CellId(self.frequency, idx)

    def center(self, cell: CellId) -> SelenographicCoord:
        return SelenographicCoord.from_vector(self.centers[self._check(cell)])

    def cell_neighbors(self, cell: CellId) -> list[CellId]:
        return [CellId(self.frequency, j) for j in self.neighbors[self._check(cell)]]

    def angle(self, a: CellId, b: CellId) -> float:
        u, v = self.centers[self._check(a)], self.centers[self._check(b)]
        return math.atan2(float(np.linalg.norm(np.cross(u, v))), float(np.dot(u, v)))

    def surface_distance(self, a: CellId, b: CellId) -> float:
        """Great-circle distance in meters between two cell centers."""
        if a.frequency != b.frequency:
            raise FrequencyMismatch(f"{a} and {b} have different frequencies")
        return self.angle(a, b) * self.radius


def build_tiling(m: int, radius: float = LUNAR_RADIUS_M) -> Tiling:
    if not isinstance(m, int) or m < 1:
        raise InvalidFrequency(f"frequency must be an integer >= 1, got {m!r}")
    centers, nbrs, n_tri, n_edges = _geodesic_mesh(m)
    # Goldberg vertices are geodesic triangles; edges coincide one-to-one.
    return Tiling(m, centers.copy(), nbrs, n_tri, n_edges, float(radius))


@lru_cache(maxsize=16)
def _geodesic_mesh(m: int):
    verts, faces = icosahedron()
    # A subdivision point is a barycentric combination of icosahedron corners
    # with integer weights summing to m; key by its positive-weight terms so
    # points on shared edges coincide across faces.
    keys: dict[frozenset, int] = {}
    order: list[tuple[int, frozenset]] = []

    def key_of(a: int, b: int, c: int, i: int, j: int) -> frozenset:
        w: dict[int, int] = {}
        for vert, weight in ((a, m - i - j), (b, i), (c, j)):
            if weight:
                w[vert] = w.get(vert, 0) + weight
        return frozenset(w.items())

    def group(k: frozenset) -> int:
        return len(k) - 1  # 0 corner, 1 edge interior, 2 face interior

    tri_keys = []
    for a, b, c in faces:
        grid = {}
        for i in range(m + 1):
            for j in range(m + 1 - i):
                k = key_of(a, b, c, i, j)
                grid[i, j] = k
                if k not in keys:
                    keys[k] = -1
                    order.append((group(k), k))
        for i in range(m):
            for j in range(m - i):
                tri_keys.append((grid[i, j], grid[i + 1, j], grid[i, j + 1]))
                if i + j < m - 1:
                    tri_keys.append((grid[i + 1, j], grid[i + 1, j + 1], grid[i, j + 1]))

    # stable sort keeps traversal order within each group; corners in vertex order
    order.sort(key=lambda gk: (gk[0], min(v for v, _ in gk[1]) if gk[0] == 0 else 0))
    for idx, (_, k) in enumerate(order):
        keys[k] = idx

    centers = np.zeros((len(order), 3))
    for k, idx in keys.items():
        p = sum(verts[v] * w for v, w in k) / m
        centers[idx] = p / np.linalg.norm(p)

    adj: list[set[int]] = [set() for _ in order]
    edges = set()
    for tri in tri_keys:
        ids = [keys[k] for k in tri]
        for x in range(3):
            u, v = ids[x], ids[(x + 1) % 3]
            adj[u].add(v)
            adj[v].add(u)
            edges.add((min(u, v), max(u, v)))
    nbrs = tuple(tuple(sorted(s)) for s in adj)
    return centers, nbrs, len(tri_keys), len(edges)


# --------------------------------------------------------------------------
# distance models used by agents


class DistanceModel(Protocol):
    def sites(self) -> list[str]: ...

    def distance(self, a: str, b: str) -> float: ...


class TilingDistances:
    """Distances between cells addressed by their string ids (``"m2:17"``)."""

    def __init__(self, tiling: Tiling) -> None:
        self.tiling = tiling
        n = len(tiling)
        c = tiling.centers
        dots = np.clip(c @ c.T, -1.0, 1.0)
        crosses = np.linalg.norm(np.cross(c[:, None, :], c[None, :, :]), axis=-1)
        self._matrix = np.arctan2(crosses, dots) * tiling.radius
        self._names = [str(CellId(tiling.frequency, i)) for i in range(n)]
        self._index = {s: i for i, s in enumerate(self._names)}

    def sites(self) -> list[str]:
        return list(self._names)

    def index(self, site: str) -> int:
        try:
            return self._index[site]
        except KeyError:
            raise NotFound(f"unknown cell {site}") from None

    def distance(self, a: str, b: str) -> float:
        return float(self._matrix[self.index(a), self.index(b)])


class MatrixDistances:
    """Explicit symmetric distance matrix over named sites."""

    def __init__(self, sites: Sequence[str], meters: Sequence[Sequence[float]]) -> None:
        n = len(sites)
        if len(set(sites)) != n:
            raise ValueError("site names must be unique")
        if len(meters) != n or any(len(row) != n for row in meters):
            raise ValueError("distance matrix must be square and match the site list")
        for i in range(n):
            if meters[i][i] != 0:
                raise ValueError("distance matrix diagonal must be zero")
            for j in range(n):
                if meters[i][j] < 0 or meters[i][j] != meters[j][i]:
                    raise ValueError("distance matrix must be symmetric and non-negative")
        self._names = list(sites)
        self._index = {s: i for i, s in enumerate(self._names)}
        self._matrix = [list(map(float, row)) for row in meters]

    def sites(self) -> list[str]:
        return list(self._names)

    def index(self, site: str) -> int:
        try:
            return self._index[site]
        except KeyError:
            raise NotFound(f"unknown site {site}") from None

    def distance(self, a: str, b: str) -> float:
        return self._matrix[self.index(a)][self.index(b)]
