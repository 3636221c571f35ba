"""Level-set description of the moving solid and cut-cell geometry.

The solid occupies ``{phi < 0}``.  On every background cell the level set is
sampled on a 3 x 3 sub-grid (the cell corners, edge midpoints and centre),
each of the four sub-cells is cut by marching squares with straight
segments, and the resulting convex polygons carry the volume quadrature.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import BackgroundMesh
from .quadrature import convex_polygon_rule, gauss_interval, gauss_square, polygon_area

FLUID, SOLID, CUT = 0, 1, 2
CLASS_NAMES = {FLUID: "FluidOnly", SOLID: "SolidOnly", CUT: "Cut"}

BALL_CENTER = (0.0, 0.05)
BALL_RADIUS = 0.011

VOLUME_ORDER = 3     # Gauss points per direction on uncut (sub-)rectangles
SEGMENT_ORDER = 3    # Gauss points per interface segment
DEGENERATE_FRACTION = 1e-10


class GeometryError(RuntimeError):
    pass


def phi0_ball(point, center=BALL_CENTER, radius=BALL_RADIUS):
    """Signed distance to the initial ball, negative inside."""
    p = np.asarray(point, dtype=float)
    return np.hypot(p[..., 0] - center[0], p[..., 1] - center[1]) - radius


def circle_phi0(center, radius) -> tuple[Callable, Callable]:
    """Signed distance of a circle and its gradient, both vectorised over points."""
    c = np.asarray(center, dtype=float)

    def phi(p):
        return phi0_ball(p, c, radius)

    def grad(p):
        d = np.asarray(p, dtype=float) - c
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        return d / np.where(r > 0, r, 1.0)

    return phi, grad


def halfplane_phi0(normal, offset) -> tuple[Callable, Callable]:
    """``phi(x) = n . x - offset``; the solid lies on the side ``n . x < offset``."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)

    def phi(p):
        return np.asarray(p, dtype=float) @ n - offset

    def grad(p):
        return np.broadcast_to(n, np.shape(p)).copy()

    return phi, grad


def no_solid_phi0() -> tuple[Callable, Callable]:
    return (lambda p: np.ones(np.shape(p)[:-1]), lambda p: np.zeros(np.shape(p)))


@dataclass
class LevelSet:
    """Initial level set composed with a displacement field.

    ``displacement`` holds Q1 nodal values on the mesh vertices and is only
    trusted on ``extended_cells``; elsewhere the level set is 1.
    """

    phi0: Callable[[np.ndarray], np.ndarray]
    phi0_grad: Callable[[np.ndarray], np.ndarray] | None = None
    mesh: BackgroundMesh | None = None
    displacement: np.ndarray | None = None
    extended_cells: np.ndarray | None = None

    @classmethod
    def ball(cls, mesh=None, center=BALL_CENTER, radius=BALL_RADIUS, **kw):
        phi, grad = circle_phi0(center, radius)
        return cls(phi, grad, mesh=mesh, **kw)

    def moved(self, displacement: np.ndarray, extended_cells: np.ndarray) -> "LevelSet":
        return LevelSet(self.phi0, self.phi0_grad, self.mesh, displacement, extended_cells)


def _bilinear(mesh: BackgroundMesh, cells, points, nodal):
    """Q1 interpolation of vertex data inside given cells: values and gradients."""
    cells = np.asarray(cells)
    h = mesh.cell_size[cells]
    t = (points - mesh.cell_origin[cells]) / h
    s, r = t[:, 0], t[:, 1]
    vid = mesh.cells[cells]
    f = nodal[vid]  # (n, 4, ...)
    N = np.column_stack([(1 - s) * (1 - r), s * (1 - r), s * r, (1 - s) * r])
    dNs = np.column_stack([-(1 - r), 1 - r, r, -r]) / h[:, :1]
    dNr = np.column_stack([-(1 - s), -s, s, 1 - s]) / h[:, 1:]
    val = np.einsum("na,na...->n...", N, f)
    grad = np.stack([np.einsum("na,na...->n...", dNs, f),
                     np.einsum("na,na...->n...", dNr, f)], axis=-1)
    return val, grad


def _closed_cell_candidates(mesh: BackgroundMesh, points, tol=1e-12):
    """For each point, up to four cells whose closure contains it (-1 padded)."""
    pts = np.atleast_2d(points)
    scale = max(mesh.xs[-1] - mesh.xs[0], mesh.ys[-1] - mesh.ys[0]) * tol
    ilo = np.searchsorted(mesh.xs, pts[:, 0] - scale, side="right") - 1
    ihi = np.searchsorted(mesh.xs, pts[:, 0] + scale, side="left") - 1
    jlo = np.searchsorted(mesh.ys, pts[:, 1] - scale, side="right") - 1
    jhi = np.searchsorted(mesh.ys, pts[:, 1] + scale, side="left") - 1
    out = []
    for i in (ilo, ihi):
        for j in (jlo, jhi):
            ok = (i >= 0) & (i < mesh.nx) & (j >= 0) & (j < mesh.ny)
            out.append(np.where(ok, mesh.cell_id(np.clip(i, 0, mesh.nx - 1), np.clip(j, 0, mesh.ny - 1)), -1))
    return np.column_stack(out)


def evaluate_phi(points, levelset: LevelSet) -> np.ndarray:
    """Level set at arbitrary points: ``phi0(x - u(x))`` on the trusted cells, else 1."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if levelset.displacement is None and levelset.extended_cells is None:
        return np.asarray(levelset.phi0(pts), dtype=float)
    mesh = levelset.mesh
    cand = _closed_cell_candidates(mesh, pts)
    mask = levelset.extended_cells if levelset.extended_cells is not None else np.ones(mesh.n_cells, bool)
    valid = (cand >= 0) & mask[np.maximum(cand, 0)]
    inside = valid.any(axis=1)
    out = np.ones(len(pts))
    if np.any(inside):
        cells = cand[inside, np.argmax(valid[inside], axis=1)]
        x = pts[inside]
        if levelset.displacement is not None:
            u, _ = _bilinear(mesh, cells, x, levelset.displacement)
            x = x - u
        out[inside] = levelset.phi0(x)
    return out


def phi_gradient(points, cells, levelset: LevelSet) -> np.ndarray:
    """Chain-rule gradient ``(I - grad u)^T grad phi0(x - u)`` inside the given cells."""
    pts = np.atleast_2d(points)
    if levelset.displacement is None:
        x, J = pts, None
    else:
        u, gu = _bilinear(levelset.mesh, cells, pts, levelset.displacement)
        x, J = pts - u, gu
    if levelset.phi0_grad is not None:
        g0 = levelset.phi0_grad(x)
    else:
        step = 1e-7
        g0 = np.column_stack([
            (levelset.phi0(x + [step, 0]) - levelset.phi0(x - [step, 0])) / (2 * step),
            (levelset.phi0(x + [0, step]) - levelset.phi0(x - [0, step])) / (2 * step),
        ])
    if J is None:
        return g0
    # d/dx_j phi0(x - u) = sum_i g0_i (delta_ij - du_i/dx_j)
    return g0 - np.einsum("ni,nij->nj", g0, J)


def subgrid_phi(mesh: BackgroundMesh, levelset: LevelSet) -> np.ndarray:
    """Level set on the (2 ny + 1) x (2 nx + 1) grid of corners, midpoints and centres."""
    xs2 = np.empty(2 * mesh.nx + 1)
    xs2[0::2] = mesh.xs
    xs2[1::2] = 0.5 * (mesh.xs[:-1] + mesh.xs[1:])
    ys2 = np.empty(2 * mesh.ny + 1)
    ys2[0::2] = mesh.ys
    ys2[1::2] = 0.5 * (mesh.ys[:-1] + mesh.ys[1:])
    X, Y = np.meshgrid(xs2, ys2)
    pts = np.stack([X, Y], axis=-1)
    if levelset.displacement is None and levelset.extended_cells is None:
        return np.asarray(levelset.phi0(pts.reshape(-1, 2)), dtype=float).reshape(X.shape)

    mask = (levelset.extended_cells if levelset.extended_cells is not None
            else np.ones(mesh.n_cells, bool)).reshape(mesh.ny, mesh.nx)
    valid = np.zeros(X.shape, dtype=bool)
    for a in range(3):
        for b in range(3):
            valid[a:a + 2 * mesh.ny:2, b:b + 2 * mesh.nx:2] |= mask

    if levelset.displacement is not None:
        U = np.asarray(levelset.displacement).reshape(mesh.ny + 1, mesh.nx + 1, 2)
        U2 = np.empty(X.shape + (2,))
        U2[0::2, 0::2] = U
        U2[0::2, 1::2] = 0.5 * (U[:, :-1] + U[:, 1:])
        U2[1::2, 0::2] = 0.5 * (U[:-1, :] + U[1:, :])
        U2[1::2, 1::2] = 0.25 * (U[:-1, :-1] + U[1:, :-1] + U[:-1, 1:] + U[1:, 1:])
        pts = pts - np.where(valid[..., None], U2, 0.0)
    out = np.ones(X.shape)
    out[valid] = levelset.phi0(pts[valid])
    return out


def cell_subvalues(mesh: BackgroundMesh, grid: np.ndarray, cell: int) -> np.ndarray:
    i, j = mesh.cell_ij[cell]
    return grid[2 * j:2 * j + 3, 2 * i:2 * i + 3]


# --- marching squares on one sub-cell --------------------------------------

def _crossing(pa, pb, fa, fb):
    t = fa / (fa - fb)
    return pa + t * (pb - pa)


def split_subcell(corners: np.ndarray, values: np.ndarray):
    """Cut one rectangle (corners CCW) by the zero set of its corner values.

    Returns ``(solid_polys, fluid_polys, segments)``; the solid side is
    ``value < 0``.  Saddles are resolved with the bilinear centre value.
    """
    inside = values < 0
    if inside.all():
        return [corners], [], []
    if not inside.any():
        return [], [corners], []

    def walk(region):
        poly = []
        for a in range(4):
            b = (a + 1) % 4
            if region[a]:
                poly.append(corners[a])
            if region[a] != region[b]:
                poly.append(_crossing(corners[a], corners[b], values[a], values[b]))
        return np.array(poly)

    x = {}
    for a in range(4):
        b = (a + 1) % 4
        if inside[a] != inside[b]:
            x[a] = _crossing(corners[a], corners[b], values[a], values[b])

    saddle = inside[0] == inside[2] and inside[1] == inside[3] and inside[0] != inside[1]
    if not saddle:
        edges = sorted(x)
        return [walk(inside)], [walk(~inside)], [(x[edges[0]], x[edges[1]])]

    # diagonal pair (0, 2) or (1, 3) shares a sign; centre decides which pair connects
    centre_solid = values.mean() < 0
    pair_solid = 0 if inside[0] else 1
    connected_solid = centre_solid
    connected = pair_solid if connected_solid else 1 - pair_solid
    lone = 1 - connected  # corners (lone, lone + 2) become isolated triangles
    tris = []
    segs = []
    for c in (lone, lone + 2):
        prev_edge = (c - 1) % 4
        tri = np.array([corners[c], x[c], x[prev_edge]])
        tris.append(tri)
        segs.append((x[c], x[prev_edge]))
    if connected_solid:
        return [walk(inside)], tris, segs
    return tris, [walk(~inside)], segs


@dataclass
class QuadBatch:
    """Quadrature points grouped by cell (cells ascending, contiguous)."""

    cells: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray | None = None

    @classmethod
    def empty(cls, with_normals=False):
        return cls(np.empty(0, np.int64), np.empty((0, 2)), np.empty(0),
                   np.empty((0, 2)) if with_normals else None)

    @classmethod
    def concatenate(cls, parts):
        parts = [p for p in parts if len(p.cells)]
        if not parts:
            return cls.empty(parts[0].normals is not None if parts else False)
        cells = np.concatenate([p.cells for p in parts])
        order = np.argsort(cells, kind="stable")
        normals = None
        if parts[0].normals is not None:
            normals = np.vstack([p.normals for p in parts])[order]
        return cls(cells[order], np.vstack([p.points for p in parts])[order],
                   np.concatenate([p.weights for p in parts])[order], normals)

    def __len__(self):
        return len(self.weights)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique cells and the start offset of each cell's run of points."""
        if len(self.cells) == 0:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        starts = np.flatnonzero(np.r_[True, self.cells[1:] != self.cells[:-1]])
        return self.cells[starts], starts


@dataclass
class CellCut:
    solid_polys: list
    fluid_polys: list
    solid_rects: list
    fluid_rects: list
    segments: list

    @property
    def solid_area(self):
        return sum(polygon_area(p) for p in self.solid_polys) + sum(_rect_area(r) for r in self.solid_rects)

    @property
    def fluid_area(self):
        return sum(polygon_area(p) for p in self.fluid_polys) + sum(_rect_area(r) for r in self.fluid_rects)


def _rect_area(r):
    return (r[1][0] - r[0][0]) * (r[1][1] - r[0][1])


def cut_cell(mesh: BackgroundMesh, cell: int, sub: np.ndarray) -> CellCut:
    """Split a cell using its 3 x 3 sub-grid level-set values."""
    x0, y0 = mesh.cell_origin[cell]
    hx, hy = mesh.cell_size[cell]
    xs = (x0, x0 + 0.5 * hx, x0 + hx)
    ys = (y0, y0 + 0.5 * hy, y0 + hy)
    out = CellCut([], [], [], [], [])
    for b in range(2):
        for a in range(2):
            vals = np.array([sub[b, a], sub[b, a + 1], sub[b + 1, a + 1], sub[b + 1, a]])
            lo, hi = (xs[a], ys[b]), (xs[a + 1], ys[b + 1])
            if np.all(vals < 0):
                out.solid_rects.append((lo, hi))
                continue
            if np.all(vals >= 0):
                out.fluid_rects.append((lo, hi))
                continue
            corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
            s, f, segs = split_subcell(corners, vals)
            out.solid_polys += s
            out.fluid_polys += f
            out.segments += segs
    return out


def _rect_rule(lo, hi, order=VOLUME_ORDER):
    ref, w = gauss_square(order)
    lo, hi = np.asarray(lo), np.asarray(hi)
    size = hi - lo
    return lo + ref * size, w * size.prod()


def _part_rule(polys, rects):
    pts, wts = [], []
    for r in rects:
        p, w = _rect_rule(*r)
        pts.append(p)
        wts.append(w)
    for poly in polys:
        p, w = convex_polygon_rule(poly)
        keep = w > 0
        pts.append(p[keep])
        wts.append(w[keep])
    if not pts:
        return np.empty((0, 2)), np.empty(0)
    return np.vstack(pts), np.concatenate(wts)


def _segment_rule(segments, order=SEGMENT_ORDER):
    t, w = gauss_interval(order)
    pts, wts, kept = [], [], []
    for p, q in segments:
        length = float(np.hypot(*(q - p)))
        if length <= 0.0:
            continue
        pts.append(p + t[:, None] * (q - p))
        wts.append(w * length)
        kept.append((p, q))
    if not pts:
        return np.empty((0, 2)), np.empty(0), kept
    return np.vstack(pts), np.concatenate(wts), kept


def cut_cell_quadrature(mesh: BackgroundMesh, cell: int, levelset: LevelSet):
    """(fluid-part rule, solid-part rule), each a (points, weights) pair."""
    sub = _single_cell_subgrid(mesh, cell, levelset)
    pieces = cut_cell(mesh, cell, sub)
    return _part_rule(pieces.fluid_polys, pieces.fluid_rects), _part_rule(pieces.solid_polys, pieces.solid_rects)


def interface_quadrature(mesh: BackgroundMesh, cell: int, levelset: LevelSet, normal_mode="levelset"):
    """Points, weights and solid outward normals on the reconstructed interface."""
    sub = _single_cell_subgrid(mesh, cell, levelset)
    pieces = cut_cell(mesh, cell, sub)
    return _interface_rule(mesh, cell, pieces, levelset, normal_mode)


def _single_cell_subgrid(mesh, cell, levelset):
    x0, y0 = mesh.cell_origin[cell]
    hx, hy = mesh.cell_size[cell]
    X, Y = np.meshgrid(x0 + np.array([0, 0.5, 1]) * hx, y0 + np.array([0, 0.5, 1]) * hy)
    return evaluate_phi(np.column_stack([X.ravel(), Y.ravel()]), levelset).reshape(3, 3)


def _interface_rule(mesh, cell, pieces: CellCut, levelset, normal_mode):
    pts, wts, segs = _segment_rule(pieces.segments)
    if len(wts) == 0:
        return pts, wts, np.empty((0, 2))
    if normal_mode == "segment":
        normals = []
        solid_pts = [np.mean(p, axis=0) for p in pieces.solid_polys] + \
                    [np.mean(np.array(r), axis=0) for r in pieces.solid_rects]
        for p, q in segs:
            d = q - p
            n = np.array([d[1], -d[0]]) / np.hypot(*d)
            mid = 0.5 * (p + q)
            ref = min(solid_pts, key=lambda c: np.hypot(*(c - mid)))
            if np.dot(n, mid - ref) < 0:
                n = -n
            normals.append(np.repeat(n[None], SEGMENT_ORDER, axis=0))
        normals = np.vstack(normals)
    else:
        g = phi_gradient(pts, np.full(len(pts), cell), levelset)
        norm = np.linalg.norm(g, axis=1, keepdims=True)
        if np.any(norm == 0):
            raise GeometryError(f"vanishing level-set gradient on cell {cell}")
        normals = g / norm
    return pts, wts, normals


def wall_gap(point) -> np.ndarray:
    """Distance to the planar bottom wall y = 0."""
    return np.asarray(point, dtype=float)[..., 1]


@dataclass
class CutGeometry:
    mesh: BackgroundMesh
    levelset: LevelSet
    cell_class: np.ndarray
    kappa_s: np.ndarray
    fluid_cells: np.ndarray
    solid_cells: np.ndarray
    fluid_ext: np.ndarray
    solid_ext: np.ndarray
    ghost_faces_f: np.ndarray
    ghost_faces_s: np.ndarray
    ext_faces_f: np.ndarray
    ext_faces_s: np.ndarray
    vol_f: QuadBatch
    vol_s: QuadBatch
    iface: QuadBatch
    segments: np.ndarray            # (n, 2, 2) reconstructed interface pieces
    segment_cells: np.ndarray
    phi_grid: np.ndarray
    normal_mode: str = "levelset"
    cuts: dict = field(default_factory=dict, repr=False)

    @property
    def kappa_f(self) -> np.ndarray:
        return 1.0 - self.kappa_s

    @property
    def cut_cells(self) -> np.ndarray:
        return np.flatnonzero(self.cell_class == CUT)

    @property
    def has_solid(self) -> bool:
        return bool(self.solid_cells.any())

    def kappa(self, domain: str) -> np.ndarray:
        return self.kappa_f if domain == "f" else self.kappa_s

    def active(self, domain: str, extended=True) -> np.ndarray:
        if domain == "f":
            return self.fluid_ext if extended else self.fluid_cells
        return self.solid_ext if extended else self.solid_cells

    def ghost_faces(self, domain: str) -> np.ndarray:
        return self.ghost_faces_f if domain == "f" else self.ghost_faces_s

    def ext_faces(self, domain: str) -> np.ndarray:
        return self.ext_faces_f if domain == "f" else self.ext_faces_s

    def solid_area(self) -> float:
        return float(self.vol_s.weights.sum())

    def fluid_area(self) -> float:
        return float(self.vol_f.weights.sum())

    def interface_length(self) -> float:
        return float(self.iface.weights.sum())


def classify(mesh: BackgroundMesh, levelset: LevelSet, normal_mode: str = "levelset",
             extension: str = "face", degenerate_tol: float = DEGENERATE_FRACTION) -> CutGeometry:
    """Classify every cell against the level set and build all cut quadrature.

    ``extension`` selects the neighbourhood used for the one-layer extension
    of the active sets (``"face"`` or ``"vertex"``, see ``BackgroundMesh.dilate``).
    """
    if levelset.mesh is None:
        levelset.mesh = mesh
    grid = subgrid_phi(mesh, levelset)
    if not np.all(np.isfinite(grid)):
        raise GeometryError("non-finite level-set values")
    ny, nx = mesh.ny, mesh.nx
    neg = grid < 0
    # per cell: any negative / any non-negative among its 3 x 3 sub-grid values
    any_neg = np.zeros((ny, nx), bool)
    any_pos = np.zeros((ny, nx), bool)
    for a in range(3):
        for b in range(3):
            any_neg |= neg[a:a + 2 * ny:2, b:b + 2 * nx:2]
            any_pos |= ~neg[a:a + 2 * ny:2, b:b + 2 * nx:2]
    any_neg, any_pos = any_neg.ravel(), any_pos.ravel()
    cell_class = np.where(any_neg & any_pos, CUT, np.where(any_neg, SOLID, FLUID)).astype(np.int8)
    kappa_s = (cell_class == SOLID).astype(float)

    cuts = {}
    for c in np.flatnonzero(cell_class == CUT):
        sub = cell_subvalues(mesh, grid, c)
        if np.all(sub == 0):
            raise GeometryError(f"level set vanishes identically on cell {c}")
        pieces = cut_cell(mesh, c, sub)
        frac = pieces.solid_area / mesh.cell_area[c]
        if frac < degenerate_tol:
            cell_class[c] = FLUID
            kappa_s[c] = 0.0
        elif frac > 1.0 - degenerate_tol:
            cell_class[c] = SOLID
            kappa_s[c] = 1.0
        else:
            kappa_s[c] = frac
            cuts[c] = pieces

    fluid_cells = cell_class != SOLID
    solid_cells = cell_class != FLUID
    fluid_ext = mesh.dilate(fluid_cells, extension)
    solid_ext = mesh.dilate(solid_cells, extension)

    fc = mesh.face_cells
    is_cut = cell_class == CUT
    touches_cut = is_cut[fc[:, 0]] | is_cut[fc[:, 1]]

    def faces_for(active, ext):
        ghost = active[fc[:, 0]] & active[fc[:, 1]] & touches_cut
        layer = ext & ~active
        extf = ext[fc[:, 0]] & ext[fc[:, 1]] & (layer[fc[:, 0]] | layer[fc[:, 1]]) & ~ghost
        return np.flatnonzero(ghost), np.flatnonzero(extf)

    gf, ef = faces_for(fluid_cells, fluid_ext)
    gs, es = faces_for(solid_cells, solid_ext)

    vol_f = [_full_cells_rule(mesh, np.flatnonzero(cell_class == FLUID))]
    vol_s = [_full_cells_rule(mesh, np.flatnonzero(cell_class == SOLID))]
    iface = []
    segments, segment_cells = [], []
    for c, pieces in cuts.items():
        p, w = _part_rule(pieces.fluid_polys, pieces.fluid_rects)
        vol_f.append(QuadBatch(np.full(len(w), c), p, w))
        p, w = _part_rule(pieces.solid_polys, pieces.solid_rects)
        vol_s.append(QuadBatch(np.full(len(w), c), p, w))
        p, w, n = _interface_rule(mesh, c, pieces, levelset, normal_mode)
        iface.append(QuadBatch(np.full(len(w), c), p, w, n))
        for s in pieces.segments:
            segments.append(np.array(s))
            segment_cells.append(c)

    return CutGeometry(
        mesh=mesh, levelset=levelset, cell_class=cell_class, kappa_s=kappa_s,
        fluid_cells=fluid_cells, solid_cells=solid_cells, fluid_ext=fluid_ext, solid_ext=solid_ext,
        ghost_faces_f=gf, ghost_faces_s=gs, ext_faces_f=ef, ext_faces_s=es,
        vol_f=QuadBatch.concatenate(vol_f), vol_s=QuadBatch.concatenate(vol_s),
        iface=QuadBatch.concatenate(iface) if iface else QuadBatch.empty(True),
        segments=np.array(segments).reshape(-1, 2, 2), segment_cells=np.array(segment_cells, np.int64),
        phi_grid=grid, normal_mode=normal_mode, cuts=cuts,
    )


def _full_cells_rule(mesh: BackgroundMesh, cells: np.ndarray) -> QuadBatch:
    ref, w = gauss_square(VOLUME_ORDER)
    if len(cells) == 0:
        return QuadBatch.empty()
    origin = mesh.cell_origin[cells]
    size = mesh.cell_size[cells]
    pts = origin[:, None, :] + ref[None] * size[:, None, :]
    wts = w[None] * size.prod(axis=1)[:, None]
    return QuadBatch(np.repeat(cells, len(w)), pts.reshape(-1, 2), wts.ravel())


def interface_within(new: CutGeometry, old: CutGeometry) -> bool:
    """True when the new active sets stay inside the old extended sets."""
    return bool(np.all(old.solid_ext[new.solid_cells]) and np.all(old.fluid_ext[new.fluid_cells]))


def motion_constraint_ok(k: float, max_solid_speed: float, h: float) -> bool:
    """The interface may travel at most one cell layer per step: ``k |v_s|_inf <= h``."""
    return k * max_solid_speed <= h


def min_interface_height(geom: CutGeometry) -> float:
    """Lowest point of the reconstructed interface (inf without interface)."""
    if len(geom.segments) == 0:
        return float("inf")
    return float(geom.segments[:, :, 1].min())


def dump_classification(geom: CutGeometry, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell", "class", "kappa_s"])
        for c in range(geom.mesh.n_cells):
            w.writerow([c, CLASS_NAMES[int(geom.cell_class[c])], f"{geom.kappa_s[c]:.12g}"])
