"""Vectorised quadrature-point assembly.

Integrands are described by coefficient arrays acting on stacked shape data
(value, d/dx, d/dy and optionally d_xx, d_xy, d_yy).  For a test field ``T``
and trial field ``S`` the local matrix at a quadrature point is

    K[c a, d b] = sum_{s,t} B_T[s, a] C[c, d, s, t] B_S[t, b]

and residual contributions are ``R[c a] = sum_s r[c, s] B_T[s, a]``.
Weights are folded into the coefficients by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..fem import FIELD_COMPONENTS, FIELD_DEGREE, DofLayout, evaluate_basis
from ..geometry import QuadBatch

N_TEST = 3


@dataclass
class QuadTable:
    """Basis data and DoF maps for one batch of quadrature points."""

    name: str
    quad: QuadBatch
    fields: tuple
    basis: dict            # field -> (nq, S, nb)
    dofs: dict             # field -> (nq, comp * nb) global dofs (-1 inactive)
    cell_dofs: dict        # field -> (ncell, comp * nb)
    starts: np.ndarray
    cells: np.ndarray

    @property
    def n(self) -> int:
        return len(self.quad)

    @property
    def weights(self) -> np.ndarray:
        return self.quad.weights

    @property
    def points(self) -> np.ndarray:
        return self.quad.points


def build_table(name: str, quad: QuadBatch, layout: DofLayout, fields, hessian_fields=()) -> QuadTable:
    mesh = layout.mesh
    cells, starts = quad.segments()
    basis, dofs, cdofs = {}, {}, {}
    for f in fields:
        if len(quad) == 0:
            nb = (FIELD_DEGREE[f] + 1) ** 2
            basis[f] = np.zeros((0, 6 if f in hessian_fields else 3, nb))
            dofs[f] = np.zeros((0, FIELD_COMPONENTS[f] * nb), np.int64)
            cdofs[f] = dofs[f]
            continue
        be = evaluate_basis(mesh, quad.cells, quad.points, FIELD_DEGREE[f])
        basis[f] = be.stacked(with_hessian=f in hessian_fields)
        cd = layout.cell_dofs(f, cells)
        if np.any(cd < 0):
            bad = cells[np.any(cd < 0, axis=1)][0]
            raise ValueError(f"field {f} is not active on quadrature cell {bad}")
        cdofs[f] = cd
        counts = np.diff(np.r_[starts, len(quad)])
        dofs[f] = np.repeat(cd, counts, axis=0)
    return QuadTable(name, quad, tuple(fields), basis, dofs, cdofs, starts, cells)


def evaluate_field(table: QuadTable, f: str, U: np.ndarray, stack: int | None = None) -> np.ndarray:
    """``(nq, comp, S)`` values and derivatives of the field with coefficients ``U``."""
    B = table.basis[f] if stack is None else table.basis[f][:, :stack]
    comp = FIELD_COMPONENTS[f]
    coef = U[table.dofs[f]].reshape(table.n, comp, table.dofs[f].shape[1] // comp)
    return np.einsum("qcb,qsb->qcs", coef, B)


def residual_vector(table: QuadTable, f: str, rcoef: np.ndarray, n_dofs: int) -> np.ndarray:
    """Scatter ``rcoef (nq, comp, 3)`` tested against the field's basis."""
    B = table.basis[f][:, :N_TEST]
    loc = np.einsum("qcs,qsb->qcb", rcoef, B).reshape(table.n, -1)
    return np.bincount(table.dofs[f].ravel(), weights=loc.ravel(), minlength=n_dofs)


def local_matrices(table: QuadTable, T: str, S: str, C: np.ndarray) -> np.ndarray:
    """Cell matrices ``(ncell, cT nbT, cS nbS)`` from coefficients ``C (nq, cT, cS, 3, sS)``."""
    BT = table.basis[T][:, :N_TEST]
    BS = table.basis[S][:, :C.shape[-1]]
    left = np.matmul(np.swapaxes(BT, 1, 2)[:, None, None], C)        # (nq, cT, cS, nbT, sS)
    K = np.matmul(left, BS[:, None, None])                             # (nq, cT, cS, nbT, nbS)
    K = np.add.reduceat(K, table.starts, axis=0)
    n, cT, cS, nbT, nbS = K.shape
    return K.transpose(0, 1, 3, 2, 4).reshape(n, cT * nbT, cS * nbS)


class SparsityPlan:
    """Fixed CSR pattern for a set of element blocks on the free DoFs.

    Each block is registered with its global row/column DoF arrays of shape
    ``(n_elem, a)`` and ``(n_elem, b)``; values are later supplied as
    ``(n_elem, a, b)`` and summed straight into the CSR data array.
    """

    def __init__(self, layout: DofLayout):
        self.layout = layout
        self.n = layout.n_free
        self._blocks = {}
        self._keys = []
        self._finalized = False

    def add(self, key, rows: np.ndarray, cols: np.ndarray) -> None:
        fi = self.layout.free_index
        r = np.where(rows >= 0, fi[np.maximum(rows, 0)], -1)
        c = np.where(cols >= 0, fi[np.maximum(cols, 0)], -1)
        R = np.broadcast_to(r[:, :, None], (len(r), r.shape[1], c.shape[1]))
        Cc = np.broadcast_to(c[:, None, :], R.shape)
        valid = ((R >= 0) & (Cc >= 0)).ravel()
        lin = (R.astype(np.int64) * self.n + Cc).ravel()[valid]
        self._blocks[key] = [valid, lin, None]
        self._finalized = False

    def has(self, key) -> bool:
        return key in self._blocks

    def finalize(self) -> None:
        allkeys = np.concatenate([b[1] for b in self._blocks.values()]) if self._blocks else np.empty(0, np.int64)
        uniq, inv = np.unique(allkeys, return_inverse=True)
        pos = 0
        for b in self._blocks.values():
            b[2] = inv[pos:pos + len(b[1])]
            pos += len(b[1])
        rows = uniq // self.n
        self.indices = (uniq % self.n).astype(np.int32)
        self.indptr = np.searchsorted(rows, np.arange(self.n + 1)).astype(np.int32)
        self.nnz = len(uniq)
        self._finalized = True

    def accumulate(self, data: np.ndarray, key, values: np.ndarray) -> None:
        if not self._finalized:
            self.finalize()
        valid, _, idx = self._blocks[key]
        data += np.bincount(idx, weights=values.ravel()[valid], minlength=self.nnz)

    def zeros(self) -> np.ndarray:
        if not self._finalized:
            self.finalize()
        return np.zeros(self.nnz)

    def matrix(self, data: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


@dataclass
class Accumulator:
    """Residual and Jacobian coefficients of one quadrature table."""

    table: QuadTable
    trial_stack: dict
    res: dict = field(default_factory=dict)
    jac: dict = field(default_factory=dict)

    def r(self, T: str) -> np.ndarray:
        if T not in self.res:
            self.res[T] = np.zeros((self.table.n, FIELD_COMPONENTS[T], N_TEST))
        return self.res[T]

    def j(self, T: str, S: str) -> np.ndarray:
        if (T, S) not in self.jac:
            self.jac[(T, S)] = np.zeros((self.table.n, FIELD_COMPONENTS[T], FIELD_COMPONENTS[S],
                                         N_TEST, self.trial_stack.get(S, 3)))
        return self.jac[(T, S)]
