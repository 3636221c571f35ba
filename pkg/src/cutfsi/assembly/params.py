"""Material and stabilization parameters plus the pointwise constitutive laws."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np


@dataclass(frozen=True)
class PhysicalParams:
    rho_f: float = 1141.0
    nu_f: float = 7.0114e-5
    rho_s: float = 1361.0
    mu_s: float = 20.0e3
    lambda_s: float = 80.0e3
    gravity: tuple = (0.0, -9.81)

    def __post_init__(self):
        for name in ("rho_f", "nu_f", "rho_s", "mu_s", "lambda_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def mu_f(self) -> float:
        """Dynamic viscosity rho_f * nu_f."""
        return self.rho_f * self.nu_f


@dataclass(frozen=True)
class StabilizationParams:
    gamma_N: float = 1.0e7
    gamma_vf: float = 0.5
    gamma_p: float = 0.1
    gamma_vs: float = 0.1
    gamma_u: float = 0.1
    w_max: float = 2.0
    gamma_ext_vf: float = 10.0
    gamma_ext_p: float = 10.0
    gamma_ext_vs: float = 10.0
    gamma_ext_u: float = 10.0
    gamma_ext_upsi: float = 1.0e-4
    delta0_vs: float = 1.0e-5
    delta0_u: float = 1.0e-5
    gamma_C: float = 500.0
    gamma_C_mode: str = "scaled"     # "scaled": gamma_C * mu_s / h, "fixed": gamma_C as given
    epsilon: float = 1.0e-4
    contact_window: float = 5.0      # contact evaluated where wall gap < window * epsilon
    supg_norm: str = "max"           # "max" or "l2" (area-normalised) norm of v_s in delta

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, str):
                continue
            if not v > 0:
                raise ValueError(f"{f.name} must be positive")
        if self.w_max < 1:
            raise ValueError("w_max must be >= 1")
        if self.gamma_C_mode not in ("scaled", "fixed"):
            raise ValueError("gamma_C_mode must be 'scaled' or 'fixed'")
        if self.supg_norm not in ("max", "l2"):
            raise ValueError("supg_norm must be 'max' or 'l2'")

    def contact_stiffness(self, h, mu_s: float):
        """Effective gamma_C, per cell size ``h``."""
        if self.gamma_C_mode == "fixed":
            return np.full_like(np.asarray(h, dtype=float), self.gamma_C)
        return self.gamma_C * mu_s / np.asarray(h, dtype=float)


def fluid_stress(grad_v, p, params: PhysicalParams):
    """Cauchy stress ``rho nu (G + G^T) - p I``; works on stacks of 2x2 matrices."""
    G = np.asarray(grad_v, dtype=float)
    p = np.asarray(p, dtype=float)
    return params.mu_f * (G + np.swapaxes(G, -1, -2)) - p[..., None, None] * np.eye(2)


def green_lagrange(grad_u):
    H = np.asarray(grad_u, dtype=float)
    Ht = np.swapaxes(H, -1, -2)
    return 0.5 * (H + Ht + Ht @ H)


def solid_stress(grad_u, params: PhysicalParams):
    """St. Venant-Kirchhoff stress ``2 mu E + lambda tr(E) I``."""
    E = green_lagrange(grad_u)
    tr = np.trace(E, axis1=-2, axis2=-1)
    return 2 * params.mu_s * E + params.lambda_s * tr[..., None, None] * np.eye(2)


def green_lagrange_derivative(grad_u, grad_du):
    H = np.asarray(grad_u, dtype=float)
    D = np.asarray(grad_du, dtype=float)
    Dt, Ht = np.swapaxes(D, -1, -2), np.swapaxes(H, -1, -2)
    return 0.5 * (D + Dt + Dt @ H + Ht @ D)


def solid_stress_derivative(grad_u, grad_du, params: PhysicalParams):
    Ed = green_lagrange_derivative(grad_u, grad_du)
    tr = np.trace(Ed, axis1=-2, axis2=-1)
    return 2 * params.mu_s * Ed + params.lambda_s * tr[..., None, None] * np.eye(2)


def solid_stress_tangent(grad_u, params: PhysicalParams):
    """``C[..., c, j, d, l] = d sigma_cj / d H_dl`` with ``F = I + H``."""
    H = np.asarray(grad_u, dtype=float)
    F = H + np.eye(2)
    I = np.eye(2)
    mu, lam = params.mu_s, params.lambda_s
    # mu (delta_cl F_dj + F_dc delta_jl) + lam delta_cj F_dl
    C = (mu * (np.einsum("cl,...dj->...cjdl", I, F) + np.einsum("...dc,jl->...cjdl", F, I))
         + lam * np.einsum("cj,...dl->...cjdl", I, F))
    return C


def cut_weight(kappa, w_max: float):
    """Ghost-penalty weight ``w_max**(1 - 2 kappa) / 2``."""
    if w_max < 1:
        raise ValueError("w_max must be >= 1")
    kappa = np.asarray(kappa, dtype=float)
    return 0.5 * np.power(w_max, 1.0 - 2.0 * kappa)


def supg_delta(h, k, v_norm, params: PhysicalParams, stab: StabilizationParams, which: str = "vs"):
    """``delta0 h^2 / (6 mu_s / rho_s + h |v_s| + h / k)``."""
    d0 = {"vs": stab.delta0_vs, "u": stab.delta0_u}[which]
    h = np.asarray(h, dtype=float)
    return d0 * h ** 2 / (6 * params.mu_s / params.rho_s + h * v_norm + h / k)


def contact_gap_function(point, u_here, u_prev_here, n_s, sigma_s, sigma_f, v_f, v_s,
                         h, params: PhysicalParams, stab: StabilizationParams):
    """Alart-Curnier argument ``P``; contact is active where ``P > 0``.

    ``P = (u - u_prev).n_s - (g0 - eps)
          - n_s.((sigma_s - sigma_f) n_f + rho nu gamma_N / h (v_f - v_s)) / gamma_C``
    """
    n_s = np.asarray(n_s, dtype=float)
    n_f = -n_s
    g0 = np.asarray(point, dtype=float)[..., 1]
    gamma_C = stab.contact_stiffness(h, params.mu_s)
    jump = (np.einsum("...i,...ij,...j->...", n_s, np.asarray(sigma_s) - np.asarray(sigma_f), n_f)
            + params.mu_f * stab.gamma_N / np.asarray(h)
            * np.einsum("...i,...i->...", n_s, np.asarray(v_f) - np.asarray(v_s)))
    du = np.asarray(u_here) - np.asarray(u_prev_here)
    return np.einsum("...i,...i->...", du, n_s) - (g0 - stab.epsilon) - jump / gamma_C
