"""Term-by-term check of the vectorised assembly against a naive quadrature oracle.

The oracle shares only the geometry (quadrature points, weights, normals)
and the DoF numbering with the production code.  Basis functions come from
``numpy.polynomial`` and every integrand is written out point by point.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial

from .assembly import PhysicalParams, StabilizationParams, StepProblem
from .assembly.ghost import FACE_TERMS
from .assembly.params import contact_gap_function
from .assembly.system import ALL_TERMS, RHS_GHOST
from .fem import FIELD_COMPONENTS, FIELD_DEGREE, build_dof_layout
from .geometry import LevelSet, circle_phi0, classify
from .mesh import build_rect_mesh

AUDIT_TOL = 1e-12

AUDIT_PARAMS = PhysicalParams(rho_f=1.3, nu_f=0.7, rho_s=1.7, mu_s=2.1, lambda_s=3.2, gravity=(0.3, -1.1))
AUDIT_STAB = StabilizationParams(gamma_N=10.0, gamma_vf=0.5, gamma_p=0.3, gamma_vs=0.2, gamma_u=0.4,
                                 w_max=2.0, gamma_ext_vf=1.5, gamma_ext_p=2.5, gamma_ext_vs=3.5,
                                 gamma_ext_u=4.5, gamma_ext_upsi=0.7, delta0_vs=0.3, delta0_u=0.6,
                                 gamma_C=2.0, gamma_C_mode="fixed", epsilon=0.05, contact_window=5.0)
AUDIT_K = 0.1

# two layouts on a 2 x 2 unit-square mesh: a small ball (solid extension
# layer) and a large ball (fluid extension layer)
AUDIT_BALLS = {"small": ((0.27, 0.24), 0.2), "large": ((0.9, 0.9), 0.75)}


# -- independent basis -------------------------------------------------------------

@lru_cache(maxsize=None)
def _lagrange(degree: int):
    nodes = np.linspace(0.0, 1.0, degree + 1)
    polys = []
    for i, ti in enumerate(nodes):
        p = Polynomial([1.0])
        for j, tj in enumerate(nodes):
            if j != i:
                p = p * Polynomial([-tj, 1.0]) / (ti - tj)
        polys.append((p, p.deriv(1), p.deriv(2)))
    return polys


def _shape(mesh, cell: int, point, degree: int):
    """Values, gradients and Hessians of the cell's basis at one point, and its node ids."""
    i, j = cell % mesh.nx, cell // mesh.nx
    x0, y0 = mesh.xs[i], mesh.ys[j]
    hx, hy = mesh.xs[i + 1] - x0, mesh.ys[j + 1] - y0
    s, r = (point[0] - x0) / hx, (point[1] - y0) / hy
    L = _lagrange(degree)
    nb = (degree + 1) ** 2
    val, grad, hess = np.zeros(nb), np.zeros((nb, 2)), np.zeros((nb, 2, 2))
    nodes = np.zeros(nb, np.int64)
    stride = degree * mesh.nx + 1
    for a in range(nb):
        ix, iy = a % (degree + 1), a // (degree + 1)
        fx, dfx, ddfx = (p(s) for p in L[ix])
        fy, dfy, ddfy = (p(r) for p in L[iy])
        val[a] = fx * fy
        grad[a] = (dfx * fy / hx, fx * dfy / hy)
        hess[a] = ((ddfx * fy / hx ** 2, dfx * dfy / (hx * hy)),
                   (dfx * dfy / (hx * hy), fx * ddfy / hy ** 2))
        nodes[a] = (degree * j + iy) * stride + degree * i + ix
    return val, grad, hess, nodes


class _Point:
    """All fields of a state, plus test-function data, at one point of one cell."""

    def __init__(self, layout, cell, point, U, U0):
        self.data = {}
        self.val, self.grad, self.hess = {}, {}, {}
        self.val0, self.grad0 = {}, {}
        for f, fl in layout.fields.items():
            v, g, h, nodes = _shape(layout.mesh, cell, point, FIELD_DEGREE[f])
            dofs = fl.node_dof[nodes]                       # (nb, comp)
            self.data[f] = (v, g, h, dofs)
            safe = np.where(dofs >= 0, dofs, 0)
            mask = dofs >= 0
            co = np.where(mask, U[safe], 0.0)              # (nb, comp)
            co0 = np.where(mask, U0[safe], 0.0)
            self.val[f] = co.T @ v
            self.grad[f] = co.T @ g                        # (comp, 2): d_j of component c
            self.hess[f] = np.einsum("ac,ajk->cjk", co, h)
            self.val0[f] = co0.T @ v
            self.grad0[f] = co0.T @ g


def _add(R, pt: _Point, f: str, coef_val=None, coef_grad=None):
    """``R += sum_c coef_val[c] phi_c + coef_grad[c, j] d_j phi_c`` over the basis of ``f``."""
    v, g, _, dofs = pt.data[f]
    for c in range(FIELD_COMPONENTS[f]):
        for a in range(len(v)):
            d = dofs[a, c]
            if d < 0:
                continue
            x = 0.0
            if coef_val is not None:
                x += coef_val[c] * v[a]
            if coef_grad is not None:
                x += coef_grad[c, 0] * g[a, 0] + coef_grad[c, 1] * g[a, 1]
            R[d] += x


def _sym(G):
    return G + G.T


def _sigma_f(p: PhysicalParams, G, pres):
    return p.mu_f * _sym(G) - pres * np.eye(2)


def _E(H):
    return 0.5 * (H + H.T + H.T @ H)


def _sigma_s(p: PhysicalParams, H):
    E = _E(H)
    return 2 * p.mu_s * E + p.lambda_s * np.trace(E) * np.eye(2)


def _div_sigma_s(p: PhysicalParams, H, dH):
    """``dH[c, j, k] = d_k H_cj``; returns ``sum_j d_j sigma_cj``."""
    out = np.zeros(2)
    for jj in range(2):
        D = dH[:, :, jj]
        dE = 0.5 * (D + D.T + D.T @ H + H.T @ D)
        dS = 2 * p.mu_s * dE + p.lambda_s * np.trace(dE) * np.eye(2)
        out += dS[:, jj]
    return out


def oracle_residual(name: str, geom, layout, U, U0, params, stab, k) -> np.ndarray:
    """Residual contribution of a single term, built point by point."""
    R = np.zeros(layout.n_dofs)
    mesh = layout.mesh
    g = np.asarray(params.gravity, float)
    if name in FACE_TERMS or name == RHS_GHOST:
        return _oracle_face(name, geom, layout, U, U0, params, stab, k)
    batch = {"fluid": geom.vol_f, "solid": geom.vol_s, "iface": geom.iface}
    group = ("fluid" if name.startswith(("fluid_mass", "fluid_convection", "fluid_stress",
                                          "fluid_divergence", "rhs_fluid"))
             else "iface" if name in ("fluid_interface_gradT", "nitsche_penalty", "nitsche_consistency",
                                      "nitsche_adjoint", "contact")
             else "solid")
    q = batch[group]
    speed = 0.0
    if name in ("supg_vs", "supg_u") and len(geom.vol_s):
        for cell, x in zip(geom.vol_s.cells, geom.vol_s.points):
            speed = max(speed, float(np.linalg.norm(_Point(layout, cell, x, U, U0).val0["vs"])))
    for n in range(len(q)):
        cell, x, w = int(q.cells[n]), q.points[n], float(q.weights[n])
        h = float(mesh.cell_size[cell].max())
        pt = _Point(layout, cell, x, U, U0)
        vf, Gf, pr = pt.val["vf"], pt.grad["vf"], pt.val["p"][0]
        vs, Gs = pt.val["vs"], pt.grad["vs"]
        u, Hu = pt.val["u"], pt.grad["u"]
        if name == "fluid_mass":
            _add(R, pt, "vf", w * params.rho_f * vf)
        elif name == "fluid_convection":
            _add(R, pt, "vf", w * params.rho_f * k * (Gf @ vf))
        elif name == "fluid_stress":
            _add(R, pt, "vf", coef_grad=w * k * _sigma_f(params, Gf, pr))
        elif name == "fluid_divergence":
            _add(R, pt, "p", [w * k * np.trace(Gf)])
        elif name == "rhs_fluid_gravity":
            _add(R, pt, "vf", -w * params.rho_f * k * g)
        elif name == "rhs_fluid_prev":
            _add(R, pt, "vf", -w * params.rho_f * pt.val0["vf"])
        elif name == "solid_mass":
            _add(R, pt, "vs", w * params.rho_s * vs)
        elif name == "solid_stress":
            _add(R, pt, "vs", coef_grad=w * k * _sigma_s(params, Hu))
        elif name == "solid_convection":
            _add(R, pt, "vs", w * params.rho_s * k * (Gs @ vs))
        elif name == "displacement_transport":
            _add(R, pt, "u", w * (u + k * (Hu @ vs - vs)))
        elif name == "rhs_solid_gravity":
            _add(R, pt, "vs", -w * params.rho_s * k * g)
        elif name == "rhs_solid_prev":
            _add(R, pt, "vs", -w * params.rho_s * pt.val0["vs"])
        elif name == "rhs_displacement_prev":
            _add(R, pt, "u", -w * pt.val0["u"])
        elif name in ("supg_vs", "supg_u"):
            d0 = stab.delta0_vs if name == "supg_vs" else stab.delta0_u
            delta = d0 * h ** 2 / (6 * params.mu_s / params.rho_s + h * speed + h / k)
            if name == "supg_vs":
                strong = (params.rho_s * (vs - pt.val0["vs"]) + k * params.rho_s * (Gs @ vs)
                          - k * _div_sigma_s(params, Hu, pt.hess["u"]) - k * params.rho_s * g)
                _add(R, pt, "vs", coef_grad=w * delta * np.outer(strong, vs))
            else:
                strong = u - pt.val0["u"] + k * (Hu @ vs - vs)
                _add(R, pt, "u", coef_grad=w * delta * np.outer(strong, vs))
        else:
            ns = q.normals[n]
            nf = -ns
            mu = params.mu_f
            if name == "fluid_interface_gradT":
                _add(R, pt, "vf", -w * k * mu * (Gf.T @ nf))
            elif name == "nitsche_penalty":
                jump = w * k * mu * stab.gamma_N / h * (vf - vs)
                _add(R, pt, "vf", jump)
                _add(R, pt, "vs", -jump)
            elif name == "nitsche_consistency":
                t = _sigma_f(params, Gf, pr) @ nf
                _add(R, pt, "vf", -w * k * t)
                _add(R, pt, "vs", w * k * t)
            elif name == "nitsche_adjoint":
                dv = vf - vs
                # sigma_f(phi, -xi) n = mu (grad phi + grad phi^T) n + xi n
                coef = np.zeros((2, 2))
                for c in range(2):
                    for j in range(2):
                        coef[c, j] = -w * k * mu * (dv[c] * nf[j] + dv[j] * nf[c])
                _add(R, pt, "vf", coef_grad=coef)
                _add(R, pt, "p", [-w * k * dv @ nf])
            elif name == "contact":
                if x[1] >= stab.contact_window * stab.epsilon:
                    continue
                gap = contact_gap_function(x, u, pt.val0["u"], ns, _sigma_s(params, Hu),
                                           _sigma_f(params, Gf, pr), vf, vs, h, params, stab)
                gC = float(stab.contact_stiffness(h, params.mu_s))
                _add(R, pt, "vs", w * gC * k * max(float(gap), 0.0) * ns)
            else:
                raise KeyError(name)
    return R


def _face_prefactor(name, params, k):
    return {"ghost_vf": 2 * params.mu_f * k, "ghost_p": k, "ghost_vs": params.rho_s,
            "ghost_u": 2 * params.mu_s * k, "ext_vf": 2 * params.mu_f * k, "ext_p": k,
            "ext_vs": params.rho_s * k, "ext_u": 2 * params.mu_s * k, "ext_upsi": k}[name]


def _oracle_face(name, geom, layout, U, U0, params, stab, k):
    R = np.zeros(layout.n_dofs)
    mesh = layout.mesh
    src = U
    if name == RHS_GHOST:
        name, src, sign = "ghost_vs", U0, -1.0
    else:
        sign = 1.0
    test, trial = {"ghost_u": ("vs", "u"), "ext_u": ("vs", "u"), "ext_upsi": ("u", "u")}.get(
        name, (FACE_TERMS[name].test, FACE_TERMS[name].trial))
    domain = "f" if name.endswith(("vf", "_p")) else "s"
    faces = geom.ghost_faces(domain) if name.startswith("ghost") else geom.ext_faces(domain)
    gamma = getattr(stab, {"ghost_vf": "gamma_vf", "ghost_p": "gamma_p", "ghost_vs": "gamma_vs",
                           "ghost_u": "gamma_u"}.get(name, "gamma_" + name.replace("ext_", "ext_")))
    h_power = 3 if name in ("ghost_p", "ghost_vs", "ext_p", "ext_vs") else 1
    second = name in ("ghost_vf", "ext_vf")
    kappa = geom.kappa(domain)
    t_gl, w_gl = np.polynomial.legendre.leggauss(3)
    t_gl, w_gl = 0.5 * (t_gl + 1), 0.5 * w_gl
    for f in faces:
        A, B = mesh.face_cells[f]
        iA, jA = A % mesh.nx, A // mesh.nx
        vertical = B == A + 1
        if vertical:
            x = mesh.xs[iA + 1]
            p0, p1 = np.array([x, mesh.ys[jA]]), np.array([x, mesh.ys[jA + 1]])
            axis = 0
        else:
            y = mesh.ys[jA + 1]
            p0, p1 = np.array([mesh.xs[iA], y]), np.array([mesh.xs[iA + 1], y])
            axis = 1
        length = np.linalg.norm(p1 - p0)
        hf = max(mesh.cell_size[A].max(), mesh.cell_size[B].max())
        wk = 0.5 * stab.w_max ** (1 - 2 * kappa[A]) + 0.5 * stab.w_max ** (1 - 2 * kappa[B])
        scale = sign * gamma * _face_prefactor(name, params, k) * wk
        for t, wq in zip(t_gl, w_gl):
            xq = p0 + t * (p1 - p0)
            pa, pb = _Point(layout, A, xq, src, src), _Point(layout, B, xq, src, src)
            j1 = pa.grad[trial][:, axis] - pb.grad[trial][:, axis]
            j2 = pa.hess[trial][:, axis, axis] - pb.hess[trial][:, axis, axis]
            for side, pt, s in ((A, pa, 1.0), (B, pb, -1.0)):
                v, g, hs, dofs = pt.data[test]
                for c in range(FIELD_COMPONENTS[test]):
                    for a in range(len(v)):
                        d = dofs[a, c]
                        if d < 0:
                            continue
                        val = hf ** h_power * j1[c] * s * g[a, axis]
                        if second:
                            val += hf ** 3 / 4 * j2[c] * s * hs[a, axis, axis]
                        R[d] += scale * wq * length * val
    return R


# -- driver ----------------------------------------------------------------------------

@dataclass
class AuditResult:
    term: str
    layout: str
    error: float
    scale: float

    @property
    def ok(self) -> bool:
        return self.error <= AUDIT_TOL * max(1.0, self.scale)


def audit_geometry(which: str):
    mesh = build_rect_mesh(0.0, 1.0, 0.0, 1.0, 2, 2)
    center, radius = AUDIT_BALLS[which]
    phi, grad = circle_phi0(center, radius)
    geom = classify(mesh, LevelSet(phi, grad, mesh))
    layout = build_dof_layout(mesh, geom.fluid_ext, geom.solid_ext, apply_bc=False)
    return geom, layout


def run_audit(terms=None, seed: int = 0) -> list[AuditResult]:
    """Compare every term, alone, against the oracle on both audit layouts."""
    terms = list(ALL_TERMS if terms is None else terms)
    rng = np.random.default_rng(seed)
    out = []
    for which in AUDIT_BALLS:
        geom, layout = audit_geometry(which)
        U = rng.uniform(-1, 1, layout.n_dofs)
        U0 = rng.uniform(-1, 1, layout.n_dofs)
        for name in terms:
            prob = StepProblem(geom, layout, U0, AUDIT_PARAMS, AUDIT_STAB, AUDIT_K, terms=[name])
            r = prob.full(prob.residual(prob.free(U)))
            ref = oracle_residual(name, geom, layout, U, U0, AUDIT_PARAMS, AUDIT_STAB, AUDIT_K)
            out.append(AuditResult(name, which, float(np.max(np.abs(r - ref))), float(np.max(np.abs(ref)))))
    return out
