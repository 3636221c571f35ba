"""Residual and Jacobian of one backward-Euler step on a frozen cut geometry."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..fem import DofLayout
from ..geometry import CutGeometry
from . import engine
from .forms import TERMS
from .ghost import FACE_TERMS, face_blocks, face_matrices
from .params import PhysicalParams, StabilizationParams, supg_delta

RHS_GHOST = "rhs_ghost_vs_prev"
ALL_TERMS = tuple(TERMS) + tuple(FACE_TERMS) + (RHS_GHOST,)

TABLE_FIELDS = {
    "vol_f": ("vf", "p"),
    "vol_s": ("vs", "u"),
    "iface": ("vf", "p", "vs", "u"),
}
HESSIAN_FIELDS = {"vol_s": ("u",)}
PREV_FIELDS = {"vol_f": ("vf",), "vol_s": ("vs", "u"), "iface": ("u",)}


class AssemblyError(RuntimeError):
    pass


@dataclass
class StateVector:
    layout: DofLayout
    values: np.ndarray
    t: float = 0.0
    k: float = 0.0

    def __post_init__(self):
        if self.values.shape != (self.layout.n_dofs,):
            raise ValueError("state size does not match its layout")

    def field(self, name: str) -> np.ndarray:
        return self.values[self.layout.field_slice(name)]

    @classmethod
    def zeros(cls, layout: DofLayout, t: float = 0.0) -> "StateVector":
        return cls(layout, np.zeros(layout.n_dofs), t)


class StepProblem:
    """All data of one time step: tables, constant operators and the load.

    The unknown of the nonlinear solver is the vector of free DoFs; use
    ``full()``/``free()`` to convert.
    """

    def __init__(self, geom: CutGeometry, layout: DofLayout, prev: np.ndarray,
                 params: PhysicalParams, stab: StabilizationParams, k: float,
                 terms=None, supg_speed: float | None = None):
        if layout.mesh is not geom.mesh:
            raise AssemblyError("layout and geometry live on different meshes")
        self.geom, self.layout = geom, layout
        self.params, self.stab, self.k = params, stab, float(k)
        self.prev = np.asarray(prev, dtype=float)
        if self.prev.shape != (layout.n_dofs,):
            raise AssemblyError("previous state does not match the layout")
        self.terms = set(ALL_TERMS if terms is None else terms)
        unknown = self.terms - set(ALL_TERMS)
        if unknown:
            raise ValueError(f"unknown terms: {sorted(unknown)}")
        self.free_dofs = layout.free_dofs
        self.contact_active = 0
        self.contact_gap_max = -np.inf

        quads = {"vol_f": geom.vol_f, "vol_s": geom.vol_s, "iface": geom.iface}
        self.tables = {
            name: engine.build_table(name, quads[name], layout, TABLE_FIELDS[name], HESSIAN_FIELDS.get(name, ()))
            for name in TABLE_FIELDS
        }
        self.h = {name: geom.mesh.cell_h[t.quad.cells] for name, t in self.tables.items()}
        self.prev_eval = {
            name: {f + "0": engine.evaluate_field(t, f, self.prev, stack=3) for f in PREV_FIELDS[name]}
            for name, t in self.tables.items()
        }

        vol_s = self.tables["vol_s"]
        if supg_speed is None:
            ws = self.prev_eval["vol_s"]["vs0"][:, :, 0]
            if len(ws) == 0:
                supg_speed = 0.0
            elif stab.supg_norm == "max":
                supg_speed = float(np.max(np.linalg.norm(ws, axis=1)))
            else:
                area = vol_s.weights.sum()
                supg_speed = float(np.sqrt(np.sum(vol_s.weights * np.sum(ws ** 2, axis=1)) / area))
        self.supg_speed = supg_speed
        hs = self.h["vol_s"]
        self.delta_vs = supg_delta(hs, self.k, supg_speed, params, stab, "vs")
        self.delta_u = supg_delta(hs, self.k, supg_speed, params, stab, "u")
        iface = self.tables["iface"]
        self.contact_points = iface.points[:, 1] < stab.contact_window * stab.epsilon

        self._build_plan()
        self._build_constant_parts()

    # -- context used by the term functions ------------------------------------
    def _ctx(self, table_name: str):
        ctx = _Context(self.params, self.stab, self.k, self.h[table_name])
        if table_name == "vol_s":
            ctx.delta_vs, ctx.delta_u = self.delta_vs, self.delta_u
        if table_name == "iface":
            ctx.contact_points = self.contact_points
        return ctx

    def _terms(self, batch: str, kind: str):
        return [t for n, t in TERMS.items() if n in self.terms and t.batch == batch and t.kind == kind]

    def _trial_stack(self, table_name):
        return {"u": 6} if table_name == "vol_s" else {}

    # -- sparsity ---------------------------------------------------------------
    def _build_plan(self):
        self.plan = engine.SparsityPlan(self.layout)
        for name, table in self.tables.items():
            if table.n == 0:
                continue
            for T in TABLE_FIELDS[name]:
                for S in TABLE_FIELDS[name]:
                    rows = table.cell_dofs[T]
                    cols = table.cell_dofs[S]
                    self.plan.add((name, T, S), rows, cols)
        self._face = {}
        for name, term in FACE_TERMS.items():
            if name not in self.terms:
                continue
            faces, M = face_matrices(self.geom, term, self.params, self.stab, self.k)
            if len(faces) == 0:
                continue
            rows, cols, vals = face_blocks(self.layout, term, faces, M)
            self.plan.add(("face", name), rows, cols)
            self._face[name] = (rows, cols, vals)
        self.plan.finalize()

    def _add_acc(self, data, acc):
        name = acc.table.name
        for (T, S), C in acc.jac.items():
            K = engine.local_matrices(acc.table, T, S, C)
            self.plan.accumulate(data, (name, T, S), K)

    def _residual_full(self, acc, out):
        for T, r in acc.res.items():
            out += engine.residual_vector(acc.table, T, r, self.layout.n_dofs)

    def _build_constant_parts(self):
        data = self.plan.zeros()
        for name, table in self.tables.items():
            if table.n == 0:
                continue
            acc = engine.Accumulator(table, self._trial_stack(name))
            ctx = self._ctx(name)
            for term in self._terms(name, "linear"):
                term.func(acc, None, ctx)
            self._add_acc(data, acc)
        for fname, (rows, cols, vals) in self._face.items():
            self.plan.accumulate(data, ("face", fname), vals)
        self.linear_data = data
        self.L = self.plan.matrix(data)

        load = np.zeros(self.layout.n_dofs)
        for name, table in self.tables.items():
            if table.n == 0:
                continue
            acc = engine.Accumulator(table, self._trial_stack(name))
            ctx = self._ctx(name)
            for term in self._terms(name, "rhs"):
                term.func(acc, self.prev_eval[name], ctx)
            self._residual_full(acc, load)
        if RHS_GHOST in self.terms and "ghost_vs" in FACE_TERMS:
            faces, M = face_matrices(self.geom, FACE_TERMS["ghost_vs"], self.params, self.stab, self.k)
            if len(faces):
                rows, cols, vals = face_blocks(self.layout, FACE_TERMS["ghost_vs"], faces, M)
                loc = np.einsum("eab,eb->ea", vals, self.prev[cols])
                load -= np.bincount(rows.ravel(), weights=loc.ravel(), minlength=self.layout.n_dofs)
        self.constant = load[self.free_dofs]   # -F restricted to the unknowns

    # -- conversion ---------------------------------------------------------------
    def full(self, x: np.ndarray) -> np.ndarray:
        U = np.zeros(self.layout.n_dofs)
        U[self.free_dofs] = x
        return U

    def free(self, U: np.ndarray) -> np.ndarray:
        return U[self.free_dofs]

    # -- evaluation ----------------------------------------------------------------
    def _nonlinear(self, U: np.ndarray, jac: bool):
        out = np.zeros(self.layout.n_dofs)
        data = self.plan.zeros() if jac else None
        self.contact_active = 0
        self.contact_gap_max = -np.inf
        for name, table in self.tables.items():
            terms = self._terms(name, "nonlinear")
            if table.n == 0 or not terms:
                continue
            ev = dict(self.prev_eval[name])
            for f in TABLE_FIELDS[name]:
                ev[f] = engine.evaluate_field(table, f, U)
            acc = engine.Accumulator(table, self._trial_stack(name))
            ctx = self._ctx(name)
            for term in terms:
                term.func(acc, ev, ctx, jac=jac)
            if name == "iface":
                self.contact_active = getattr(ctx, "contact_active", 0)
                self.contact_gap_max = getattr(ctx, "contact_gap_max", -np.inf)
            for T, r in acc.res.items():
                if not np.all(np.isfinite(r)):
                    bad = table.quad.cells[~np.all(np.isfinite(r), axis=(1, 2))][0]
                    raise AssemblyError(f"non-finite integrand in cell {bad} ({name}, field {T})")
            self._residual_full(acc, out)
            if jac:
                self._add_acc(data, acc)
        return out[self.free_dofs], data

    def residual(self, x: np.ndarray) -> np.ndarray:
        U = self.full(x)
        nl, _ = self._nonlinear(U, jac=False)
        return self.L @ x + nl + self.constant

    def linearize(self, x: np.ndarray):
        """Residual and Jacobian (CSR) at ``x``."""
        U = self.full(x)
        nl, data = self._nonlinear(U, jac=True)
        r = self.L @ x + nl + self.constant
        J = self.plan.matrix(self.linear_data + data)
        return r, J

    def jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        return self.linearize(x)[1]


class _Context:
    def __init__(self, params, stab, k, h):
        self.params, self.stab, self.k, self.h = params, stab, k, h
        self.delta_vs = self.delta_u = None
        self.contact_points = None


def assemble_residual(state: StateVector, prev: StateVector, geom: CutGeometry,
                      params: PhysicalParams, stab: StabilizationParams, k: float, terms=None) -> np.ndarray:
    """Residual on the free DoFs of ``state.layout``."""
    prob = StepProblem(geom, state.layout, prev.values, params, stab, k, terms)
    return prob.residual(prob.free(state.values))


def assemble_jacobian(state: StateVector, prev: StateVector, geom: CutGeometry,
                      params: PhysicalParams, stab: StabilizationParams, k: float, terms=None) -> sp.csr_matrix:
    prob = StepProblem(geom, state.layout, prev.values, params, stab, k, terms)
    return prob.jacobian(prob.free(state.values))
