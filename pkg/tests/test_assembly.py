import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutfsi.assembly import (
    FACE_TERMS, PhysicalParams, StabilizationParams, StepProblem, cut_weight, fluid_stress,
    green_lagrange, solid_stress, solid_stress_derivative, solid_stress_tangent, supg_delta,
)
from cutfsi.assembly.system import RHS_GHOST
from cutfsi.audit import AUDIT_PARAMS, AUDIT_STAB, run_audit
from cutfsi.fem import FIELD_DEGREE, build_dof_layout, node_coordinates
from cutfsi.geometry import LevelSet, classify, halfplane_phi0
from cutfsi.mesh import build_rect_mesh

# -- ghost-penalty consistency ---------------------------------------------------------


def polynomial_state(layout, rng):
    """Globally quadratic v_f and globally linear p, v_s, u, as coefficient vectors."""
    mesh = layout.mesh
    U = np.zeros(layout.n_dofs)
    for name, f in layout.fields.items():
        xy = node_coordinates(mesh, FIELD_DEGREE[name])
        x, y = xy[:, 0], xy[:, 1]
        for c in range(f.components):
            a = rng.uniform(-1, 1, 6)
            vals = a[0] + a[1] * x + a[2] * y
            if FIELD_DEGREE[name] == 2:
                vals = vals + a[3] * x * x + a[4] * x * y + a[5] * y * y
            used = f.node_dof[:, c] >= 0
            U[f.node_dof[used, c]] = vals[used]
    return U


@pytest.fixture(scope="module")
def diagonal_setup():
    mesh = build_rect_mesh(0.0, 1.0, 0.0, 1.0, 4, 4)
    phi, grad = halfplane_phi0((1.0, 1.0), 1.0 / np.sqrt(2) * 0.93)
    geom = classify(mesh, LevelSet(phi, grad, mesh))
    layout = build_dof_layout(mesh, geom.fluid_ext, geom.solid_ext, apply_bc=False)
    return geom, layout


@pytest.mark.parametrize("term", sorted(FACE_TERMS))
def test_face_terms_vanish_on_polynomials(diagonal_setup, term):
    geom, layout = diagonal_setup
    d = FACE_TERMS[term].domain
    faces = geom.ghost_faces(d) if FACE_TERMS[term].faces == "ghost" else geom.ext_faces(d)
    assert len(faces) > 0
    U = polynomial_state(layout, np.random.default_rng(11))
    prob = StepProblem(geom, layout, np.zeros(layout.n_dofs), AUDIT_PARAMS, AUDIT_STAB, 0.1, terms=[term])
    r = prob.residual(prob.free(U))
    assert np.max(np.abs(r)) <= 1e-12
    # and the operator is not trivially zero
    noise = np.random.default_rng(1).standard_normal(layout.n_dofs)
    assert np.max(np.abs(prob.residual(prob.free(noise)))) > 1e-6


def test_ghost_rhs_vanishes_on_linear(diagonal_setup):
    geom, layout = diagonal_setup
    U0 = polynomial_state(layout, np.random.default_rng(5))
    prob = StepProblem(geom, layout, U0, AUDIT_PARAMS, AUDIT_STAB, 0.1, terms=[RHS_GHOST])
    assert np.max(np.abs(prob.residual(prob.free(np.zeros(layout.n_dofs))))) <= 1e-12


# -- weight function -------------------------------------------------------------------


@pytest.mark.parametrize("w_max", [1.0, 2.0, 10.0])
def test_weight_half_at_half(w_max):
    assert cut_weight(0.5, w_max) == 0.5


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1))
def test_weight_unit_wmax_is_constant(kappa):
    assert cut_weight(kappa, 1.0) == 0.5


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(1, 20))
def test_weight_range_and_monotone(kappa, w_max):
    w = cut_weight(kappa, w_max)
    assert 0.5 / w_max * (1 - 1e-12) <= w <= 0.5 * w_max * (1 + 1e-12)
    assert cut_weight(min(kappa + 0.1, 1.0), w_max) <= w
    assert cut_weight(0.0, w_max) == pytest.approx(0.5 * w_max)


def test_weight_rejects_small_wmax():
    with pytest.raises(ValueError):
        cut_weight(0.3, 0.5)


# -- constitutive laws -----------------------------------------------------------------

P = PhysicalParams()
matrices = st.lists(st.floats(-0.5, 0.5), min_size=4, max_size=4).map(lambda a: np.array(a).reshape(2, 2))


@settings(max_examples=50, deadline=None)
@given(st.floats(-np.pi, np.pi))
def test_rigid_rotation_is_strain_free(theta):
    c, s = np.cos(theta), np.sin(theta)
    H = np.array([[c, -s], [s, c]]) - np.eye(2)
    assert np.max(np.abs(green_lagrange(H))) <= 1e-14
    assert np.max(np.abs(solid_stress(H, P))) <= 1e-14 * (P.mu_s + P.lambda_s) * 10


@settings(max_examples=30, deadline=None)
@given(matrices, matrices)
def test_stress_derivative_taylor_order_two(H, D):
    if np.linalg.norm(D) < 1e-3:
        return
    d = solid_stress_derivative(H, D, P)
    errs = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        errs.append(np.linalg.norm(solid_stress(H + eps * D, P) - solid_stress(H, P) - eps * d))
    if errs[0] < 1e-8 * P.lambda_s:
        return
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=1e-3)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=1e-3)


@settings(max_examples=30, deadline=None)
@given(matrices, matrices)
def test_tangent_matches_directional_derivative(H, D):
    C = solid_stress_tangent(H, P)
    assert np.allclose(np.einsum("cjdl,dl->cj", C, D), solid_stress_derivative(H, D, P),
                       atol=1e-9 * P.lambda_s)


@settings(max_examples=30, deadline=None)
@given(matrices, st.floats(-10, 10))
def test_fluid_stress_symmetric_with_trace(G, p):
    s = fluid_stress(G, p, P)
    assert np.allclose(s, s.T, rtol=0, atol=1e-15)
    assert np.trace(s) == pytest.approx(-2 * p + 2 * P.mu_f * np.trace(G), abs=1e-13)


def test_supg_delta_formula():
    st_ = StabilizationParams()
    d = supg_delta(0.005, 1e-4, 0.1, P, st_)
    assert d == pytest.approx(1e-5 * 0.005 ** 2 / (6 * P.mu_s / P.rho_s + 0.005 * 0.1 + 0.005 / 1e-4))


def test_contact_stiffness_modes():
    assert StabilizationParams().contact_stiffness(0.005, 2e4) == pytest.approx(500 * 2e4 / 0.005)
    assert StabilizationParams(gamma_C_mode="fixed").contact_stiffness(0.005, 2e4) == pytest.approx(500)


def test_parameter_validation():
    with pytest.raises(ValueError):
        PhysicalParams(rho_f=0.0)
    with pytest.raises(ValueError):
        StabilizationParams(w_max=0.5)
    with pytest.raises(ValueError):
        StabilizationParams(gamma_C_mode="other")


# -- term audit against the independent quadrature oracle -----------------------------


def test_every_term_matches_oracle():
    results = run_audit()
    bad = [(r.term, r.layout, r.error) for r in results if not r.ok]
    assert not bad
    assert len({r.term for r in results}) == len(results) // 2


# -- Jacobian ----------------------------------------------------------------------------


def test_jacobian_matches_finite_differences_small_problem():
    from cutfsi.solver import fd_jacobian_check
    from cutfsi.audit import audit_geometry, AUDIT_K
    geom, layout = audit_geometry("small")
    rng = np.random.default_rng(2)
    U0 = rng.uniform(-0.2, 0.2, layout.n_dofs)
    prob = StepProblem(geom, layout, U0, AUDIT_PARAMS, AUDIT_STAB, AUDIT_K)
    x = prob.free(U0 + 0.05 * rng.standard_normal(layout.n_dofs))
    assert fd_jacobian_check(prob, x, n_directions=10) <= 1e-6
