"""Pointwise integrands of every term of the discrete fluid-structure-contact system.

Each term fills residual coefficients ``acc.r(T)[q, c, s]`` and/or Jacobian
coefficients ``acc.j(T, S)[q, c, d, s, t]`` (see ``engine``).  Stack index 0
is the value, 1-2 the gradient, 3-5 the Hessian (xx, xy, yy).

Terms come in three kinds:

* ``linear``: state independent Jacobian; the residual is ``L @ U``.
* ``nonlinear``: residual and Jacobian evaluated at the current state.
* ``rhs``: constant load, subtracted from the residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .params import solid_stress, solid_stress_tangent

HESS = {(0, 0): 3, (0, 1): 4, (1, 0): 4, (1, 1): 5}


@dataclass(frozen=True)
class Term:
    name: str
    batch: str          # "vol_f", "vol_s", "iface"
    kind: str           # "linear", "nonlinear", "rhs"
    func: Callable


# --- fluid volume --------------------------------------------------------------

def fluid_mass(acc, ev, ctx):
    w = acc.table.weights * ctx.params.rho_f
    J = acc.j("vf", "vf")
    for c in range(2):
        J[:, c, c, 0, 0] += w


def fluid_convection(acc, ev, ctx, jac=True):
    w = acc.table.weights * ctx.params.rho_f * ctx.k
    V, G = ev["vf"][:, :, 0], ev["vf"][:, :, 1:3]
    acc.r("vf")[:, :, 0] += w[:, None] * np.einsum("qcj,qj->qc", G, V)
    if jac:
        J = acc.j("vf", "vf")
        J[:, :, :, 0, 0] += w[:, None, None] * G
        for c in range(2):
            J[:, c, c, 0, 1:3] += w[:, None] * V


def fluid_stress_term(acc, ev, ctx):
    w = acc.table.weights * ctx.k
    m = ctx.params.mu_f
    J = acc.j("vf", "vf")
    Jp = acc.j("vf", "p")
    for c in range(2):
        for j in range(2):
            J[:, c, c, 1 + j, 1 + j] += w * m
            J[:, c, j, 1 + j, 1 + c] += w * m
        Jp[:, c, 0, 1 + c, 0] -= w


def fluid_divergence(acc, ev, ctx):
    w = acc.table.weights * ctx.k
    J = acc.j("p", "vf")
    for c in range(2):
        J[:, 0, c, 0, 1 + c] += w


def rhs_fluid_gravity(acc, ev, ctx):
    w = acc.table.weights * ctx.params.rho_f * ctx.k
    acc.r("vf")[:, :, 0] -= w[:, None] * np.asarray(ctx.params.gravity)[None]


def rhs_fluid_prev(acc, ev, ctx):
    w = acc.table.weights * ctx.params.rho_f
    acc.r("vf")[:, :, 0] -= w[:, None] * ev["vf0"][:, :, 0]


# --- solid volume ----------------------------------------------------------------

def solid_mass(acc, ev, ctx):
    w = acc.table.weights * ctx.params.rho_s
    J = acc.j("vs", "vs")
    for c in range(2):
        J[:, c, c, 0, 0] += w


def solid_stress_term(acc, ev, ctx, jac=True):
    w = acc.table.weights * ctx.k
    H = ev["u"][:, :, 1:3]
    acc.r("vs")[:, :, 1:3] += w[:, None, None] * solid_stress(H, ctx.params)
    if jac:
        C = solid_stress_tangent(H, ctx.params)     # (q, c, j, d, l)
        J = acc.j("vs", "u")
        J[:, :, :, 1:3, 1:3] += w[:, None, None, None, None] * C.transpose(0, 1, 3, 2, 4)


def solid_convection(acc, ev, ctx, jac=True):
    w = acc.table.weights * ctx.params.rho_s * ctx.k
    W, G = ev["vs"][:, :, 0], ev["vs"][:, :, 1:3]
    acc.r("vs")[:, :, 0] += w[:, None] * np.einsum("qcj,qj->qc", G, W)
    if jac:
        J = acc.j("vs", "vs")
        J[:, :, :, 0, 0] += w[:, None, None] * G
        for c in range(2):
            J[:, c, c, 0, 1:3] += w[:, None] * W


def displacement_transport(acc, ev, ctx, jac=True):
    w = acc.table.weights
    k = ctx.k
    Uv, H = ev["u"][:, :, 0], ev["u"][:, :, 1:3]
    W = ev["vs"][:, :, 0]
    acc.r("u")[:, :, 0] += w[:, None] * (Uv + k * (np.einsum("qcj,qj->qc", H, W) - W))
    if jac:
        Ju = acc.j("u", "u")
        Jv = acc.j("u", "vs")
        for c in range(2):
            Ju[:, c, c, 0, 0] += w
            Ju[:, c, c, 0, 1:3] += (w * k)[:, None] * W
            Jv[:, c, c, 0, 0] -= w * k
        Jv[:, :, :, 0, 0] += (w * k)[:, None, None] * H


def rhs_solid_gravity(acc, ev, ctx):
    w = acc.table.weights * ctx.params.rho_s * ctx.k
    acc.r("vs")[:, :, 0] -= w[:, None] * np.asarray(ctx.params.gravity)[None]


def rhs_solid_prev(acc, ev, ctx):
    w = acc.table.weights * ctx.params.rho_s
    acc.r("vs")[:, :, 0] -= w[:, None] * ev["vs0"][:, :, 0]


def rhs_displacement_prev(acc, ev, ctx):
    acc.r("u")[:, :, 0] -= acc.table.weights[:, None] * ev["u0"][:, :, 0]


def _div_stress(H, Hu, C):
    """``div sigma_c = sum_{j,d,l} C[c,j,d,l] d_j d_l u_d`` from stacked Hessians."""
    # Hu[q, d, l, j] = d_l d_j u_d
    return np.einsum("qcjdl,qdlj->qc", C, Hu)


def _hessian_tensor(D):
    """(q, comp, 6) stacked derivatives -> (q, comp, 2, 2) second derivatives."""
    h = D[:, :, 3:6]
    return np.stack([np.stack([h[..., 0], h[..., 1]], -1), np.stack([h[..., 1], h[..., 2]], -1)], -2)


def supg_vs(acc, ev, ctx, jac=True):
    p = ctx.params
    k, rho = ctx.k, p.rho_s
    w = acc.table.weights * ctx.delta_vs
    W, G = ev["vs"][:, :, 0], ev["vs"][:, :, 1:3]
    W0 = ev["vs0"][:, :, 0]
    H = ev["u"][:, :, 1:3]
    Hu = _hessian_tensor(ev["u"])
    C = solid_stress_tangent(H, p)
    g = np.asarray(p.gravity)[None]
    r = rho * (W - W0) + k * rho * np.einsum("qcj,qj->qc", G, W) - k * _div_stress(H, Hu, C) - k * rho * g
    acc.r("vs")[:, :, 1:3] += w[:, None, None] * r[:, :, None] * W[:, None, :]
    if not jac:
        return
    Jv = acc.j("vs", "vs")
    Ju = acc.j("vs", "u")
    # derivative of the strong residual, tested with W . grad(phi)
    dr_dW = rho * np.eye(2)[None] + k * rho * G                      # (q, c, d)
    Jv[:, :, :, 1:3, 0] += w[:, None, None, None] * np.einsum("qcd,qj->qcdj", dr_dW, W)
    for c in range(2):
        Jv[:, c, c, 1:3, 1:3] += (w * k * rho)[:, None, None] * np.einsum("qj,qm->qjm", W, W)
    # derivative of the test function W . grad(phi) with respect to W
    for j in range(2):
        Jv[:, :, j, 1 + j, 0] += w[:, None] * r
    # -k div sigma'(u)(du): first-derivative part through the tangent's dependence on H
    lap = Hu[:, :, 0, 0] + Hu[:, :, 1, 1]                             # (q, e)
    mu, lam = p.mu_s, p.lambda_s
    dd_dH = (mu + lam) * np.einsum("qecm->qcem", Hu) \
        + mu * np.einsum("cm,qe->qcem", np.eye(2), lap)               # (q, c, e, m)
    Ju[:, :, :, 1:3, 1:3] -= (w * k)[:, None, None, None, None] * np.einsum("qcem,qj->qcejm", dd_dH, W)
    # second-derivative part: d div sigma_c / d(d_l d_j u_d) = C[c, j, d, l]
    for l in range(2):
        for jj in range(2):
            s = HESS[(l, jj)]
            Ju[:, :, :, 1:3, s] -= (w * k)[:, None, None, None] * np.einsum("qcd,qj->qcdj", C[:, :, jj, :, l], W)


def supg_u(acc, ev, ctx, jac=True):
    k = ctx.k
    w = acc.table.weights * ctx.delta_u
    W = ev["vs"][:, :, 0]
    Uv, H = ev["u"][:, :, 0], ev["u"][:, :, 1:3]
    U0 = ev["u0"][:, :, 0]
    r = Uv - U0 + k * np.einsum("qcj,qj->qc", H, W) - k * W
    acc.r("u")[:, :, 1:3] += w[:, None, None] * r[:, :, None] * W[:, None, :]
    if not jac:
        return
    Ju = acc.j("u", "u")
    Jv = acc.j("u", "vs")
    for c in range(2):
        Ju[:, c, c, 1:3, 0] += w[:, None] * W
        Ju[:, c, c, 1:3, 1:3] += (w * k)[:, None, None] * np.einsum("qj,qm->qjm", W, W)
    dr_dW = k * (H - np.eye(2)[None])
    Jv[:, :, :, 1:3, 0] += w[:, None, None, None] * np.einsum("qcd,qj->qcdj", dr_dW, W)
    for j in range(2):
        Jv[:, :, j, 1 + j, 0] += w[:, None] * r


# --- interface -------------------------------------------------------------------

def fluid_interface_gradT(acc, ev, ctx):
    """-k < rho nu (grad v_f)^T n_f, phi_f >."""
    w = acc.table.weights * ctx.k * ctx.params.mu_f
    nf = -acc.table.quad.normals
    J = acc.j("vf", "vf")
    for c in range(2):
        for j in range(2):
            J[:, c, j, 0, 1 + c] -= w * nf[:, j]


def nitsche_penalty(acc, ev, ctx):
    w = acc.table.weights * ctx.k * ctx.params.mu_f * ctx.stab.gamma_N / ctx.h
    for T, sT in (("vf", 1.0), ("vs", -1.0)):
        for S, sS in (("vf", 1.0), ("vs", -1.0)):
            J = acc.j(T, S)
            for c in range(2):
                J[:, c, c, 0, 0] += sT * sS * w


def nitsche_consistency(acc, ev, ctx):
    """-k < sigma_f(v_f, p) n_f, phi_f - phi_s >."""
    w = acc.table.weights * ctx.k
    m = ctx.params.mu_f
    nf = -acc.table.quad.normals
    for T, sT in (("vf", -1.0), ("vs", 1.0)):
        J = acc.j(T, "vf")
        Jp = acc.j(T, "p")
        for c in range(2):
            for j in range(2):
                J[:, c, c, 0, 1 + j] += sT * w * m * nf[:, j]
                J[:, c, j, 0, 1 + c] += sT * w * m * nf[:, j]
            Jp[:, c, 0, 0, 0] -= sT * w * nf[:, c]


def nitsche_adjoint(acc, ev, ctx):
    """-k < v_f - v_s, sigma_f(phi_f, -xi) n_f >."""
    w = acc.table.weights * ctx.k
    m = ctx.params.mu_f
    nf = -acc.table.quad.normals
    for S, sS in (("vf", 1.0), ("vs", -1.0)):
        J = acc.j("vf", S)
        Jp = acc.j("p", S)
        for c in range(2):
            for j in range(2):
                J[:, c, c, 1 + j, 0] -= sS * w * m * nf[:, j]
                J[:, c, j, 1 + j, 0] -= sS * w * m * nf[:, c]
            Jp[:, 0, c, 0, 0] -= sS * w * nf[:, c]


def contact(acc, ev, ctx, jac=True):
    """gamma_C k < [P]_+, phi_s . n_s > on the interface points near the wall."""
    sel = ctx.contact_points
    if not np.any(sel):
        return
    p, stab = ctx.params, ctx.stab
    ns = acc.table.quad.normals[sel]
    nf = -ns
    h = ctx.h[sel]
    gC = stab.contact_stiffness(h, p.mu_s)
    beta = p.mu_f * stab.gamma_N / h
    w = acc.table.weights[sel] * gC * ctx.k
    Uv, H = ev["u"][sel, :, 0], ev["u"][sel, :, 1:3]
    U0 = ev["u0"][sel, :, 0]
    V, G = ev["vf"][sel, :, 0], ev["vf"][sel, :, 1:3]
    P = ev["p"][sel, 0, 0]
    W = ev["vs"][sel, :, 0]
    g0 = acc.table.points[sel, 1]
    sig_s = solid_stress(H, p)
    sig_f = p.mu_f * (G + np.swapaxes(G, 1, 2)) - P[:, None, None] * np.eye(2)
    jump = np.einsum("qi,qij,qj->q", ns, sig_s - sig_f, nf) + beta * np.einsum("qi,qi->q", ns, V - W)
    gap = np.einsum("qi,qi->q", Uv - U0, ns) - (g0 - stab.epsilon) - jump / gC
    active = gap > 0
    ctx.contact_active = int(np.count_nonzero(active))
    ctx.contact_gap_max = float(gap.max())
    val = np.where(active, gap, 0.0)
    r = np.zeros((acc.table.n, 2))
    r[sel] = (w * val)[:, None] * ns
    acc.r("vs")[:, :, 0] += r
    if not jac or not np.any(active):
        return
    idx = np.flatnonzero(sel)[active]
    ns, nf, w, gC, beta = ns[active], nf[active], w[active], gC[active], beta[active]
    C = solid_stress_tangent(H[active], p)
    m = p.mu_f
    coef = {}
    # d gap / d u (value): n_s ; d gap / d grad u: -n_s^T C n_f / gC
    du = np.zeros((len(idx), 2, 3))
    du[:, :, 0] = ns
    du[:, :, 1:3] = -np.einsum("qa,qabdl,qb->qdl", ns, C, nf) / gC[:, None, None]
    coef["u"] = du
    dv = np.zeros((len(idx), 2, 3))
    dv[:, :, 0] = -(beta / gC)[:, None] * ns
    dv[:, :, 1:3] = m * (ns[:, :, None] * nf[:, None, :] + nf[:, :, None] * ns[:, None, :]) / gC[:, None, None]
    coef["vf"] = dv
    dp = np.zeros((len(idx), 1, 3))
    dp[:, 0, 0] = 1.0 / gC * np.einsum("qi,qi->q", ns, -nf)
    coef["p"] = dp
    dw = np.zeros((len(idx), 2, 3))
    dw[:, :, 0] = (beta / gC)[:, None] * ns
    coef["vs"] = dw
    for S, d in coef.items():
        J = acc.j("vs", S)
        J[idx, :, :, 0, :3] += w[:, None, None, None] * ns[:, :, None, None] * d[:, None, :, :]


TERMS = {t.name: t for t in [
    Term("fluid_mass", "vol_f", "linear", fluid_mass),
    Term("fluid_convection", "vol_f", "nonlinear", fluid_convection),
    Term("fluid_stress", "vol_f", "linear", fluid_stress_term),
    Term("fluid_divergence", "vol_f", "linear", fluid_divergence),
    Term("rhs_fluid_gravity", "vol_f", "rhs", rhs_fluid_gravity),
    Term("rhs_fluid_prev", "vol_f", "rhs", rhs_fluid_prev),
    Term("solid_mass", "vol_s", "linear", solid_mass),
    Term("solid_stress", "vol_s", "nonlinear", solid_stress_term),
    Term("solid_convection", "vol_s", "nonlinear", solid_convection),
    Term("displacement_transport", "vol_s", "nonlinear", displacement_transport),
    Term("rhs_solid_gravity", "vol_s", "rhs", rhs_solid_gravity),
    Term("rhs_solid_prev", "vol_s", "rhs", rhs_solid_prev),
    Term("rhs_displacement_prev", "vol_s", "rhs", rhs_displacement_prev),
    Term("supg_vs", "vol_s", "nonlinear", supg_vs),
    Term("supg_u", "vol_s", "nonlinear", supg_u),
    Term("fluid_interface_gradT", "iface", "linear", fluid_interface_gradT),
    Term("nitsche_penalty", "iface", "linear", nitsche_penalty),
    Term("nitsche_consistency", "iface", "linear", nitsche_consistency),
    Term("nitsche_adjoint", "iface", "linear", nitsche_adjoint),
    Term("contact", "iface", "nonlinear", contact),
]}
