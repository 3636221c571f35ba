"""Fixed tensor-product background meshes of axis-aligned rectangles.

Cells are numbered row by row, ``cell = j * nx + i`` with ``i`` the column
and ``j`` the row counted from the bottom.  Vertices use the same scheme on
the ``(nx + 1) x (ny + 1)`` grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DOMAIN = (-0.04, 0.04, 0.0, 0.08)
BASE_CELL = 5.0e-3
MAX_LEVEL = 3

BOUNDARY_TAGS = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class Face:
    """An interior face between two cells, or a boundary face of one cell."""

    cells: tuple[int, ...]
    start: np.ndarray
    end: np.ndarray
    normal: np.ndarray
    tag: str | None = None

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))


@dataclass(frozen=True, eq=False)
class BackgroundMesh:
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        for name in ("xs", "ys"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.size < 2 or np.any(np.diff(arr) <= 0):
                raise ValueError(f"{name} must be strictly increasing with >= 2 entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def nx(self) -> int:
        return self.xs.size - 1

    @property
    def ny(self) -> int:
        return self.ys.size - 1

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_vertices(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.xs[0], self.xs[-1], self.ys[0], self.ys[-1])

    @cached_property
    def vertices(self) -> np.ndarray:
        X, Y = np.meshgrid(self.xs, self.ys)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def cell_ij(self) -> np.ndarray:
        c = np.arange(self.n_cells)
        return np.column_stack([c % self.nx, c // self.nx])

    @cached_property
    def cells(self) -> np.ndarray:
        """Vertex ids per cell, counter-clockwise from the lower-left corner."""
        i, j = self.cell_ij.T
        v0 = j * (self.nx + 1) + i
        return np.column_stack([v0, v0 + 1, v0 + self.nx + 2, v0 + self.nx + 1])

    @cached_property
    def cell_origin(self) -> np.ndarray:
        i, j = self.cell_ij.T
        return np.column_stack([self.xs[i], self.ys[j]])

    @cached_property
    def cell_size(self) -> np.ndarray:
        i, j = self.cell_ij.T
        return np.column_stack([np.diff(self.xs)[i], np.diff(self.ys)[j]])

    @cached_property
    def cell_area(self) -> np.ndarray:
        return self.cell_size.prod(axis=1)

    @cached_property
    def cell_h(self) -> np.ndarray:
        """Local element size: the longer side of each cell."""
        return self.cell_size.max(axis=1)

    @property
    def h(self) -> float:
        """Maximum element size over the mesh."""
        return float(self.cell_h.max())

    def cell_id(self, i, j):
        return np.asarray(j) * self.nx + np.asarray(i)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Cell id containing each point (points on shared edges go right/up)."""
        pts = np.atleast_2d(points)
        i = np.clip(np.searchsorted(self.xs, pts[:, 0], side="right") - 1, 0, self.nx - 1)
        j = np.clip(np.searchsorted(self.ys, pts[:, 1], side="right") - 1, 0, self.ny - 1)
        return self.cell_id(i, j)

    @cached_property
    def vertex_neighbors(self) -> list[np.ndarray]:
        """Cells sharing at least one vertex with each cell (the cell itself included)."""
        out = []
        for i, j in self.cell_ij:
            ii = np.arange(max(i - 1, 0), min(i + 2, self.nx))
            jj = np.arange(max(j - 1, 0), min(j + 2, self.ny))
            I, J = np.meshgrid(ii, jj)
            out.append(np.sort(self.cell_id(I, J).ravel()))
        return out

    def dilate(self, mask: np.ndarray, connectivity: str = "vertex") -> np.ndarray:
        """Grow a cell mask by one layer.

        ``"vertex"`` adds every cell sharing a vertex with the mask,
        ``"face"`` only cells sharing an edge.
        """
        m = np.asarray(mask, dtype=bool).reshape(self.ny, self.nx)
        out = m.copy()
        padded = np.pad(m, 1)
        for dj in (-1, 0, 1):
            for di in (-1, 0, 1):
                if connectivity == "face" and di and dj:
                    continue
                out |= padded[1 + dj:1 + dj + self.ny, 1 + di:1 + di + self.nx]
        return out.ravel()

    @cached_property
    def face_cells(self) -> np.ndarray:
        """Interior faces as (left/lower cell, right/upper cell) pairs.

        Vertical faces come first (normal +x), then horizontal ones (normal +y).
        """
        nx, ny = self.nx, self.ny
        I, J = np.meshgrid(np.arange(nx - 1), np.arange(ny))
        vert = np.column_stack([self.cell_id(I, J).ravel(), self.cell_id(I + 1, J).ravel()])
        I, J = np.meshgrid(np.arange(nx), np.arange(ny - 1))
        horiz = np.column_stack([self.cell_id(I, J).ravel(), self.cell_id(I, J + 1).ravel()])
        return np.vstack([vert, horiz]).astype(np.int64)

    @cached_property
    def face_normal(self) -> np.ndarray:
        n_vert = (self.nx - 1) * self.ny
        normals = np.zeros((len(self.face_cells), 2))
        normals[:n_vert, 0] = 1.0
        normals[n_vert:, 1] = 1.0
        return normals

    @cached_property
    def face_geometry(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end points of each interior face."""
        c0 = self.face_cells[:, 0]
        origin = self.cell_origin[c0]
        size = self.cell_size[c0]
        vertical = self.face_normal[:, 0] > 0
        start = origin.copy()
        start[vertical, 0] += size[vertical, 0]
        start[~vertical, 1] += size[~vertical, 1]
        end = start.copy()
        end[vertical, 1] += size[vertical, 1]
        end[~vertical, 0] += size[~vertical, 0]
        return start, end

    @cached_property
    def boundary_face_cells(self) -> dict[str, np.ndarray]:
        nx, ny = self.nx, self.ny
        return {
            "bottom": self.cell_id(np.arange(nx), 0),
            "right": self.cell_id(nx - 1, np.arange(ny)),
            "top": self.cell_id(np.arange(nx), ny - 1),
            "left": self.cell_id(0, np.arange(ny)),
        }


def interior_faces(mesh: BackgroundMesh) -> list[Face]:
    start, end = mesh.face_geometry
    return [
        Face(cells=(int(a), int(b)), start=s, end=e, normal=n)
        for (a, b), s, e, n in zip(mesh.face_cells, start, end, mesh.face_normal)
    ]


def boundary_faces(mesh: BackgroundMesh) -> list[Face]:
    faces = []
    normals = {"bottom": (0.0, -1.0), "right": (1.0, 0.0), "top": (0.0, 1.0), "left": (-1.0, 0.0)}
    for tag in BOUNDARY_TAGS:
        for c in mesh.boundary_face_cells[tag]:
            (x0, y0), (hx, hy) = mesh.cell_origin[c], mesh.cell_size[c]
            s, e = {
                "bottom": ((x0, y0), (x0 + hx, y0)),
                "right": ((x0 + hx, y0), (x0 + hx, y0 + hy)),
                "top": ((x0, y0 + hy), (x0 + hx, y0 + hy)),
                "left": ((x0, y0), (x0, y0 + hy)),
            }[tag]
            faces.append(Face((int(c),), np.array(s), np.array(e), np.array(normals[tag]), tag))
    return faces


def build_rect_mesh(x0: float, x1: float, y0: float, y1: float, nx: int, ny: int) -> BackgroundMesh:
    return BackgroundMesh(np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1))


def build_uniform_mesh(level: int) -> BackgroundMesh:
    """Square cells of side 5 mm / 2**level on the benchmark box."""
    if not (0 <= int(level) <= MAX_LEVEL) or int(level) != level:
        raise ValueError(f"mesh level must be an integer in [0, {MAX_LEVEL}], got {level!r}")
    x0, x1, y0, y1 = DOMAIN
    n = int(round((x1 - x0) / BASE_CELL)) * 2 ** int(level)
    return build_rect_mesh(x0, x1, y0, y1, n, n)


def _graded_spacing(length: float, smallest: float, largest: float, max_ratio: float) -> np.ndarray:
    """Sizes ``min(smallest * r**i, largest)`` summing to ``length``.

    The count is the smallest one reachable with growth ratio ``max_ratio``;
    ``r`` is then found by bisection so the sum is exact.
    """
    def sizes(r, n):
        return np.minimum(smallest * r ** np.arange(n), largest)

    n = 1
    while sizes(max_ratio, n).sum() < length:
        n += 1
    lo, hi = 1.0, max_ratio
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if sizes(mid, n).sum() < length:
            lo = mid
        else:
            hi = mid
    out = sizes(hi, n)
    out[-1] -= out.sum() - length
    return out


def build_graded_mesh(ratio: float = 1.12) -> BackgroundMesh:
    """Rows shrink toward the bottom wall, columns shrink toward x = 0."""
    x0, x1, y0, y1 = DOMAIN
    heights = _graded_spacing(y1 - y0, 0.1875e-3, 1.625e-3, ratio)
    half = _graded_spacing(0.5 * (x1 - x0), 0.875e-3, 1.875e-3, ratio)
    widths = np.concatenate([half[::-1], half])
    ys = y0 + np.concatenate([[0.0], np.cumsum(heights)])
    xs = x0 + np.concatenate([[0.0], np.cumsum(widths)])
    xs[-1], ys[-1] = x1, y1
    xs[len(half)] = 0.0
    return BackgroundMesh(xs, ys)
