import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutfsi.fem import build_dof_layout, cell_nodes, evaluate_basis, node_coordinates, transfer
from cutfsi.geometry import LevelSet, classify
from cutfsi.mesh import build_graded_mesh, build_rect_mesh, build_uniform_mesh


def ball_layout(mesh, **kw):
    geom = classify(mesh, LevelSet.ball(mesh))
    return geom, build_dof_layout(mesh, geom.fluid_ext, geom.solid_ext, **kw)


@pytest.mark.parametrize("level, n", [(0, 2695), (1, 9928), (2, 37660)])
def test_benchmark_dof_counts(level, n):
    _, layout = ball_layout(build_uniform_mesh(level))
    assert layout.n_dofs == n


def test_graded_dof_count_frozen():
    # the grading law is our own choice, so this is a regression value only
    _, layout = ball_layout(build_graded_mesh())
    assert layout.n_dofs == 27154


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2), st.floats(0, 1), st.floats(0, 1))
def test_partition_of_unity_and_linear_reproduction(degree, s, r):
    mesh = build_rect_mesh(0.0, 2.0, 1.0, 2.0, 3, 2)
    cell = 4
    pt = mesh.cell_origin[cell] + np.array([s, r]) * mesh.cell_size[cell]
    b = evaluate_basis(mesh, np.array([cell]), pt[None], degree)
    xy = node_coordinates(mesh, degree)[cell_nodes(mesh, np.array([cell]), degree)[0]]
    assert b.values.sum() == pytest.approx(1.0)
    assert np.allclose(b.grads.sum(axis=1), 0.0, atol=1e-10)
    f = 3 * xy[:, 0] - 2 * xy[:, 1] + 0.5
    assert b.values[0] @ f == pytest.approx(3 * pt[0] - 2 * pt[1] + 0.5)
    assert np.allclose(b.grads[0].T @ f, [3, -2])


def test_q2_reproduces_quadratics_with_hessian():
    mesh = build_rect_mesh(0.0, 1.0, 0.0, 1.0, 2, 2)
    pts = np.array([[0.3, 0.7], [0.61, 0.12]])
    cells = mesh.locate(pts)
    b = evaluate_basis(mesh, cells, pts, 2)
    xy = node_coordinates(mesh, 2)[cell_nodes(mesh, cells, 2)]
    f = xy[..., 0] ** 2 + 3 * xy[..., 0] * xy[..., 1] - xy[..., 1] ** 2
    assert np.allclose(np.einsum("na,na->n", b.values, f), pts[:, 0] ** 2 + 3 * pts.prod(1) - pts[:, 1] ** 2)
    H = np.einsum("naij,na->nij", b.hessians, f)
    assert np.allclose(H, [[2, 3], [3, -2]])


def test_boundary_conditions_constrained():
    mesh = build_uniform_mesh(0)
    _, layout = ball_layout(mesh)
    vf = layout.fields["vf"].node_dof
    xy = node_coordinates(mesh, 2)
    fixed = set(layout.constrained.tolist())
    bottom = np.isclose(xy[:, 1], 0.0)
    top = np.isclose(xy[:, 1], 0.08)
    side = np.isclose(np.abs(xy[:, 0]), 0.04)
    assert all(d in fixed for d in vf[bottom | side].ravel())
    assert all(d in fixed for d in vf[top & ~side, 1])
    assert not any(d in fixed for d in vf[top & ~side, 0])
    for name in ("p", "vs", "u"):
        assert not set(layout.fields[name].dofs.tolist()) & fixed


def test_pressure_pin_and_no_bc():
    mesh = build_uniform_mesh(0)
    _, plain = ball_layout(mesh, apply_bc=False)
    assert plain.n_free == plain.n_dofs
    _, pinned = ball_layout(mesh, apply_bc=False, pin_pressure=True)
    assert pinned.n_free == plain.n_dofs - 1


def test_transfer_keeps_common_nodes_and_fills_new_ones():
    mesh = build_uniform_mesh(0)
    geom, old = ball_layout(mesh)
    ls = LevelSet.ball(mesh, center=(0.0, 0.045))
    g2 = classify(mesh, ls)
    new = build_dof_layout(mesh, g2.fluid_ext, g2.solid_ext)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(old.n_dofs)
    y = transfer(old, new, x)
    for name in ("vf", "p", "vs", "u"):
        a, b = old.fields[name].node_dof, new.fields[name].node_dof
        both = (a >= 0) & (b >= 0)
        free = both.copy()
        free[both] = new.free_index[b[both]] >= 0
        assert np.array_equal(y[b[free]], x[a[free]])
        assert np.all(y[new.constrained] == 0)
        lo, hi = x[old.field_slice(name)].min(), x[old.field_slice(name)].max()
        vals = y[new.field_slice(name)]
        assert np.all((vals >= lo - 1e-12) & (vals <= hi + 1e-12))


def test_transfer_preserves_constant():
    mesh = build_uniform_mesh(0)
    _, old = ball_layout(mesh)
    g2 = classify(mesh, LevelSet.ball(mesh, center=(0.0, 0.044)))
    new = build_dof_layout(mesh, g2.fluid_ext, g2.solid_ext)
    x = np.zeros(old.n_dofs)
    x[old.field_slice("u")] = 0.25
    y = transfer(old, new, x)
    assert np.allclose(y[new.field_slice("u")], 0.25)
