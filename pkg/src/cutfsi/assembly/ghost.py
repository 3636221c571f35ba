"""Weighted face-jump (ghost-penalty) operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fem import FIELD_COMPONENTS, FIELD_DEGREE, DofLayout, cell_nodes, evaluate_basis
from ..geometry import CutGeometry
from ..quadrature import gauss_interval
from .params import StabilizationParams, PhysicalParams, cut_weight

FACE_ORDER = 3


@dataclass(frozen=True)
class FaceTerm:
    name: str
    test: str
    trial: str
    domain: str          # "f" or "s"
    faces: str           # "ghost" or "ext"
    gamma: str           # attribute of StabilizationParams
    scale: str           # prefactor key, see ``face_prefactor``
    h_power: int         # power of h on the first-order jump
    second_order: bool   # add h^3/4 J2 (Q2 fluid velocity only)


FACE_TERMS = {t.name: t for t in [
    FaceTerm("ghost_vf", "vf", "vf", "f", "ghost", "gamma_vf", "2mu_f k", 1, True),
    FaceTerm("ghost_p", "p", "p", "f", "ghost", "gamma_p", "k", 3, False),
    FaceTerm("ghost_vs", "vs", "vs", "s", "ghost", "gamma_vs", "rho_s", 3, False),
    FaceTerm("ghost_u", "vs", "u", "s", "ghost", "gamma_u", "2mu_s k", 1, False),
    FaceTerm("ext_vf", "vf", "vf", "f", "ext", "gamma_ext_vf", "2mu_f k", 1, True),
    FaceTerm("ext_p", "p", "p", "f", "ext", "gamma_ext_p", "k", 3, False),
    FaceTerm("ext_vs", "vs", "vs", "s", "ext", "gamma_ext_vs", "rho_s k", 3, False),
    FaceTerm("ext_u", "vs", "u", "s", "ext", "gamma_ext_u", "2mu_s k", 1, False),
    FaceTerm("ext_upsi", "u", "u", "s", "ext", "gamma_ext_upsi", "k", 1, False),
]}


def face_prefactor(key: str, params: PhysicalParams, k: float) -> float:
    return {
        "2mu_f k": 2 * params.mu_f * k,
        "k": k,
        "rho_s": params.rho_s,
        "rho_s k": params.rho_s * k,
        "2mu_s k": 2 * params.mu_s * k,
    }[key]


def face_jumps(mesh, faces: np.ndarray, degree: int, order: int = FACE_ORDER):
    """Normal-derivative jumps of the scalar basis on the given interior faces.

    Returns ``(weights (nF, nq), j1 (nF, nq, 2 nb), j2 (nF, nq, 2 nb))`` where
    the local basis is [cell A | cell B] and the jump is A minus B along the
    face normal (+x for vertical, +y for horizontal faces).
    """
    fc = mesh.face_cells[faces]
    start, end = (g[faces] for g in mesh.face_geometry)
    axis = (mesh.face_normal[faces, 1] > 0).astype(int)
    t, w = gauss_interval(order)
    nF, nq = len(faces), len(t)
    pts = start[:, None, :] + t[None, :, None] * (end - start)[:, None, :]
    length = np.linalg.norm(end - start, axis=1)
    weights = length[:, None] * w[None]
    flat = pts.reshape(-1, 2)
    ba = evaluate_basis(mesh, np.repeat(fc[:, 0], nq), flat, degree)
    bb = evaluate_basis(mesh, np.repeat(fc[:, 1], nq), flat, degree)
    ax = np.repeat(axis, nq)
    rows = np.arange(len(flat))
    dA = ba.grads[rows, :, ax]
    dB = bb.grads[rows, :, ax]
    ddA = ba.hessians[rows, :, ax, ax]
    ddB = bb.hessians[rows, :, ax, ax]
    j1 = np.concatenate([dA, -dB], axis=1).reshape(nF, nq, -1)
    j2 = np.concatenate([ddA, -ddB], axis=1).reshape(nF, nq, -1)
    return weights, j1, j2


def face_matrices(geom: CutGeometry, term: FaceTerm, params: PhysicalParams,
                  stab: StabilizationParams, k: float):
    """Local face matrices ``(nF, 2 nb, 2 nb)`` including every prefactor, and the faces."""
    faces = geom.ghost_faces(term.domain) if term.faces == "ghost" else geom.ext_faces(term.domain)
    mesh = geom.mesh
    deg = FIELD_DEGREE[term.trial]
    if len(faces) == 0:
        nb = 2 * (deg + 1) ** 2
        return faces, np.zeros((0, nb, nb))
    wq, j1, j2 = face_jumps(mesh, faces, deg)
    fc = mesh.face_cells[faces]
    kappa = geom.kappa(term.domain)
    weight = cut_weight(kappa[fc[:, 0]], stab.w_max) + cut_weight(kappa[fc[:, 1]], stab.w_max)
    h = np.maximum(mesh.cell_h[fc[:, 0]], mesh.cell_h[fc[:, 1]])
    M = np.einsum("fq,fqa,fqb->fab", wq, j1, j1) * (h ** term.h_power)[:, None, None]
    if term.second_order:
        M += np.einsum("fq,fqa,fqb->fab", wq, j2, j2) * (h ** 3 / 4)[:, None, None]
    scale = getattr(stab, term.gamma) * face_prefactor(term.scale, params, k)
    return faces, M * (scale * weight)[:, None, None]


def face_dofs(layout: DofLayout, field: str, faces: np.ndarray) -> np.ndarray:
    """``(nF, comp, 2 nb)`` global DoFs of the two cells adjacent to each face."""
    mesh = layout.mesh
    fc = mesh.face_cells[faces]
    deg = FIELD_DEGREE[field]
    nodes = np.concatenate([cell_nodes(mesh, fc[:, 0], deg), cell_nodes(mesh, fc[:, 1], deg)], axis=1)
    d = layout.fields[field].node_dof[nodes]            # (nF, 2nb, comp)
    return np.moveaxis(d, 2, 1)


def face_blocks(layout: DofLayout, term: FaceTerm, faces: np.ndarray, M: np.ndarray):
    """Rows, columns and values of a face term, one element per face and component."""
    rows = face_dofs(layout, term.test, faces)
    cols = face_dofs(layout, term.trial, faces)
    comp = FIELD_COMPONENTS[term.test]
    nb2 = M.shape[1]
    vals = np.repeat(M[:, None], comp, axis=1).reshape(-1, nb2, nb2)
    return rows.reshape(-1, nb2), cols.reshape(-1, nb2), vals
