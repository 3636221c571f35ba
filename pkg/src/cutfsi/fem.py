"""Lagrange Q1/Q2 spaces on active cell sets and the global DoF layout.

Local shape functions are ordered lexicographically with x running fastest;
vector fields use component-major local ordering ``c * nb + a``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import BackgroundMesh

FIELDS = ("vf", "p", "vs", "u")
FIELD_DEGREE = {"vf": 2, "p": 1, "vs": 1, "u": 1}
FIELD_COMPONENTS = {"vf": 2, "p": 1, "vs": 2, "u": 2}
FIELD_DOMAIN = {"vf": "f", "p": "f", "vs": "s", "u": "s"}


def lagrange_1d(degree: int, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values, first and second derivatives of the 1D Lagrange basis on [0, 1]."""
    t = np.asarray(t, dtype=float)
    one, zero = np.ones_like(t), np.zeros_like(t)
    if degree == 1:
        return np.stack([1 - t, t], -1), np.stack([-one, one], -1), np.stack([zero, zero], -1)
    if degree == 2:
        val = np.stack([2 * (t - 0.5) * (t - 1), -4 * t * (t - 1), 2 * t * (t - 0.5)], -1)
        d1 = np.stack([4 * t - 3, -8 * t + 4, 4 * t - 1], -1)
        d2 = np.stack([4 * one, -8 * one, 4 * one], -1)
        return val, d1, d2
    raise ValueError(f"unsupported degree {degree}")


@dataclass
class BasisEval:
    """Shape data at points: ``values (n, nb)``, ``grads (n, nb, 2)``, ``hessians (n, nb, 2, 2)``."""

    values: np.ndarray
    grads: np.ndarray
    hessians: np.ndarray

    def stacked(self, with_hessian: bool = False) -> np.ndarray:
        """``(n, 3, nb)`` value/d_x/d_y, or ``(n, 6, nb)`` with d_xx/d_xy/d_yy appended."""
        parts = [self.values[:, None], np.moveaxis(self.grads, 2, 1)]
        if with_hessian:
            H = self.hessians
            parts.append(np.stack([H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]], axis=1))
        return np.concatenate(parts, axis=1)


def reference_basis(degree: int, ref_points: np.ndarray, size) -> BasisEval:
    """Tensor-product basis at reference points in [0,1]^2 for a cell of the given size.

    ``size`` may be a single (hx, hy) or one pair per point.
    """
    s = np.atleast_2d(ref_points)
    size = np.broadcast_to(np.asarray(size, dtype=float), s.shape)
    vx, dx, ddx = lagrange_1d(degree, s[:, 0])
    vy, dy, ddy = lagrange_1d(degree, s[:, 1])
    hx, hy = size[:, 0:1], size[:, 1:2]
    n = len(s)
    val = (vy[:, :, None] * vx[:, None, :]).reshape(n, -1)
    gx = (vy[:, :, None] * dx[:, None, :]).reshape(n, -1) / hx
    gy = (dy[:, :, None] * vx[:, None, :]).reshape(n, -1) / hy
    hxx = (vy[:, :, None] * ddx[:, None, :]).reshape(n, -1) / hx ** 2
    hyy = (ddy[:, :, None] * vx[:, None, :]).reshape(n, -1) / hy ** 2
    hxy = (dy[:, :, None] * dx[:, None, :]).reshape(n, -1) / (hx * hy)
    grads = np.stack([gx, gy], axis=-1)
    hess = np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
    return BasisEval(val, grads, hess)


def evaluate_basis(mesh: BackgroundMesh, cells, points, degree: int) -> BasisEval:
    """Basis of the given degree on ``cells[i]`` evaluated at ``points[i]``."""
    cells = np.atleast_1d(cells)
    pts = np.atleast_2d(points)
    if cells.size == 1 and len(pts) > 1:
        cells = np.full(len(pts), cells.item())
    size = mesh.cell_size[cells]
    ref = (pts - mesh.cell_origin[cells]) / size
    return reference_basis(degree, ref, size)


@lru_cache(maxsize=None)
def _local_offsets(degree: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.arange((degree + 1) ** 2)
    return a % (degree + 1), a // (degree + 1)


def cell_nodes(mesh: BackgroundMesh, cells: np.ndarray, degree: int) -> np.ndarray:
    """Global node ids (on the degree-refined vertex grid) of each cell's local basis."""
    cells = np.asarray(cells)
    ox, oy = _local_offsets(degree)
    i, j = mesh.cell_ij[cells].T
    stride = degree * mesh.nx + 1
    I = degree * i[:, None] + ox[None]
    J = degree * j[:, None] + oy[None]
    return J * stride + I


def node_coordinates(mesh: BackgroundMesh, degree: int) -> np.ndarray:
    if degree == 1:
        return mesh.vertices
    xs = np.empty(2 * mesh.nx + 1)
    xs[0::2] = mesh.xs
    xs[1::2] = 0.5 * (mesh.xs[:-1] + mesh.xs[1:])
    ys = np.empty(2 * mesh.ny + 1)
    ys[0::2] = mesh.ys
    ys[1::2] = 0.5 * (mesh.ys[:-1] + mesh.ys[1:])
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def n_nodes(mesh: BackgroundMesh, degree: int) -> int:
    return (degree * mesh.nx + 1) * (degree * mesh.ny + 1)


@dataclass
class FieldLayout:
    name: str
    degree: int
    components: int
    active_cells: np.ndarray      # cell ids, ascending
    node_dof: np.ndarray          # (n_nodes, components) global dof or -1

    @property
    def n_basis(self) -> int:
        return (self.degree + 1) ** 2

    @property
    def dofs(self) -> np.ndarray:
        d = self.node_dof.ravel()
        return np.sort(d[d >= 0])


@dataclass
class DofLayout:
    """Global numbering of all four fields; constrained DoFs are fixed to zero."""

    mesh: BackgroundMesh
    fields: dict
    n_dofs: int
    constrained: np.ndarray       # sorted global ids held fixed
    free_index: np.ndarray        # global id -> position among unknowns, or -1
    offsets: dict

    @property
    def n_free(self) -> int:
        return int(self.n_dofs - len(self.constrained))

    @property
    def free_dofs(self) -> np.ndarray:
        return np.flatnonzero(self.free_index >= 0)

    def field_size(self, name: str) -> int:
        return int(np.count_nonzero(self.fields[name].node_dof >= 0))

    def cell_dofs(self, name: str, cells: np.ndarray) -> np.ndarray:
        """(n, components * nb) global dofs, component-major; -1 where inactive."""
        f = self.fields[name]
        nodes = cell_nodes(self.mesh, cells, f.degree)
        d = f.node_dof[nodes]                      # (n, nb, comp)
        return np.moveaxis(d, 2, 1).reshape(len(nodes), -1)

    def field_slice(self, name: str) -> slice:
        return slice(self.offsets[name], self.offsets[name] + self.field_size(name))

    def nodal_values(self, name: str, vector: np.ndarray, fill=0.0) -> np.ndarray:
        """Field coefficients on the full node grid, ``fill`` where inactive."""
        f = self.fields[name]
        out = np.full(f.node_dof.shape, fill, dtype=float)
        m = f.node_dof >= 0
        out[m] = vector[f.node_dof[m]]
        return out


def _boundary_nodes(mesh: BackgroundMesh, degree: int) -> dict[str, np.ndarray]:
    nx, ny = degree * mesh.nx + 1, degree * mesh.ny + 1
    I, J = np.meshgrid(np.arange(nx), np.arange(ny))
    ids = J * nx + I
    return {"bottom": ids[0], "top": ids[-1], "left": ids[:, 0], "right": ids[:, -1]}


def build_dof_layout(mesh: BackgroundMesh, fluid_cells: np.ndarray, solid_cells: np.ndarray,
                     pin_pressure: bool = False, apply_bc: bool = True) -> DofLayout:
    """Enumerate the four fields on their active cell masks.

    Boundary conditions: ``v_f = 0`` on bottom/left/right, ``(v_f)_y = 0`` on
    top; displacement and solid velocity are natural.  With ``pin_pressure``
    one pressure DoF on the top boundary is fixed, for runs without a solid
    where nothing else determines the pressure level.  ``apply_bc=False``
    leaves every DoF free (used by the term audit).
    """
    masks = {"f": np.asarray(fluid_cells, bool), "s": np.asarray(solid_cells, bool)}
    fields, offsets = {}, {}
    nxt = 0
    for name in FIELDS:
        deg, comp = FIELD_DEGREE[name], FIELD_COMPONENTS[name]
        cells = np.flatnonzero(masks[FIELD_DOMAIN[name]])
        used = np.zeros(n_nodes(mesh, deg), bool)
        if len(cells):
            used[cell_nodes(mesh, cells, deg).ravel()] = True
        node_dof = -np.ones((len(used), comp), np.int64)
        nodes = np.flatnonzero(used)
        # node-major numbering keeps vector components adjacent
        node_dof[nodes] = nxt + np.arange(len(nodes) * comp).reshape(-1, comp)
        offsets[name] = nxt
        nxt += len(nodes) * comp
        fields[name] = FieldLayout(name, deg, comp, cells, node_dof)

    fixed = [np.empty(0, np.int64)]
    vf = fields["vf"].node_dof
    bnodes = _boundary_nodes(mesh, 2)
    if apply_bc:
        for tag in ("bottom", "left", "right"):
            fixed.append(vf[bnodes[tag]].ravel())
        fixed.append(vf[bnodes["top"], 1])
    if pin_pressure:
        top = fields["p"].node_dof[_boundary_nodes(mesh, 1)["top"], 0]
        top = top[top >= 0]
        if len(top):
            fixed.append(top[len(top) // 2:len(top) // 2 + 1])
    fixed = np.concatenate(fixed)
    constrained = np.unique(fixed[fixed >= 0])
    free_index = np.full(nxt, -1, np.int64)
    is_free = np.ones(nxt, bool)
    is_free[constrained] = False
    free_index[is_free] = np.arange(np.count_nonzero(is_free))
    return DofLayout(mesh, fields, nxt, constrained, free_index, offsets)


def transfer(old: DofLayout, new: DofLayout, vector: np.ndarray, max_sweeps: int = 50) -> np.ndarray:
    """Carry coefficients to a new layout node by node.

    Nodes active in both layouts keep their values.  Nodes that only exist in
    the new layout take the mean of already-defined neighbouring nodes of the
    same field, sweeping outward until all are filled.
    """
    out = np.zeros(new.n_dofs)
    mesh = new.mesh
    for name in FIELDS:
        fo, fn = old.fields[name], new.fields[name]
        active_new = fn.node_dof[:, 0] >= 0
        if not active_new.any():
            continue
        deg = fn.degree
        nx, ny = deg * mesh.nx + 1, deg * mesh.ny + 1
        vals = np.zeros((ny, nx, fn.components))
        known = (fo.node_dof[:, 0] >= 0)
        if known.any():
            vals.reshape(-1, fn.components)[known] = vector[fo.node_dof[known]]
        known = known.reshape(ny, nx)
        need = active_new.reshape(ny, nx) & ~known
        sweeps = 0
        while need.any() and known.any() and sweeps < max_sweeps:
            total = np.zeros_like(vals)
            count = np.zeros((ny, nx))
            kv = np.where(known[..., None], vals, 0.0)
            kp = np.pad(kv, ((1, 1), (1, 1), (0, 0)))
            cp = np.pad(known.astype(float), 1)
            for dj in (-1, 0, 1):
                for di in (-1, 0, 1):
                    if dj == 0 and di == 0:
                        continue
                    total += kp[1 + dj:1 + dj + ny, 1 + di:1 + di + nx]
                    count += cp[1 + dj:1 + dj + ny, 1 + di:1 + di + nx]
            fill = ~known & (count > 0)
            vals[fill] = total[fill] / count[fill, None]
            known = known | fill
            need = active_new.reshape(ny, nx) & ~known
            sweeps += 1
        flat = vals.reshape(-1, fn.components)
        out[fn.node_dof[active_new]] = flat[active_new]
    out[new.constrained] = 0.0
    return out
