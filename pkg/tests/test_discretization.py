import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowlab.discretization import (
    Grid,
    assemble_operator,
    convergence_order,
    export_coo,
    refine,
    sample,
)
from blowlab.fields import CoefficientExpr as X
from blowlab.fields import builtin_system, delta_x_symbolic


def ladder(grid, levels=3):
    out = [grid]
    for _ in range(levels - 1):
        out.append(refine(out[-1]))
    return out


def test_grid_nodes_and_spacing():
    g = Grid((1.0,), (3,))
    np.testing.assert_allclose(g.axes()[0], [-0.5, 0.0, 0.5])
    assert g.spacing == (0.5,)
    with pytest.raises(ValueError):
        Grid((1.0,), (2,))


def test_sample_examples():
    g = Grid((1.0,), (3,))
    np.testing.assert_allclose(sample(X.variable(1, 0, 2), g).values, [0.25, 0.0, 0.25])
    assert np.all(sample(1.0, Grid.uniform(2, 1.0, 5)).values == 1.0)
    g2 = Grid.uniform(2, 2.0, 5)
    gauss = sample(lambda x: np.exp(-np.sum(x**2, axis=-1)), g2)
    assert gauss.values[g2.nearest_node([0.0, 0.0])] == 1.0
    with pytest.raises(ValueError):
        sample(X.variable(2, 0), g)


def test_row_major_ordering():
    g = Grid((1.0, 2.0), (3, 5))
    c = g.coords()
    assert c.shape == (15, 2)
    # last axis varies fastest
    assert c[1, 0] == c[0, 0] and c[1, 1] > c[0, 1]
    assert g.node_index((1, 2)) == 7


def test_euclidean_quadratic_exact():
    g = Grid((1.0,), (21,))
    op = assemble_operator(builtin_system("euclidean", n=1), g)
    out = op.matrix @ sample(X.variable(1, 0, 2), g).values
    mask = g.stencil_interior_mask()
    np.testing.assert_allclose(out[mask], 2.0, rtol=0, atol=1e-10)


def test_grushin_quadratic_exact():
    g = Grid((1.5, 1.5), (15, 17))
    sys_ = builtin_system("grushin", k=1)
    u = X.variable(2, 1, 2)
    out = assemble_operator(sys_, g).matrix @ sample(u, g).values
    exact = sample(delta_x_symbolic(sys_, u), g).values
    mask = g.stencil_interior_mask()
    np.testing.assert_allclose(out[mask], exact[mask], rtol=0, atol=1e-11)
    np.testing.assert_allclose(exact, 2 * g.coords()[:, 0] ** 2)


@pytest.mark.parametrize(
    "system, u, n",
    [
        (builtin_system("euclidean", n=1), X.sin(1, 0), 1),
        (builtin_system("trig-bounded", n=2), X.sin(2, 0) * X.sin(2, 1), 2),
        # x2*x3 is reproduced exactly by the cross stencil, so use a smooth non-bilinear u
        (builtin_system("engel", n=3), X.sin(3, 1) * X.sin(3, 2) + X.sin(3, 0), 3),
        (builtin_system("grushin", k=2), X.sin(2, 0) * X.cos(2, 1), 2),
    ],
    ids=["euclidean", "trig-bounded", "engel", "grushin"],
)
def test_convergence_order_two(system, u, n):
    res = convergence_order(system, u, ladder(Grid.uniform(n, 2.0, 7 if n == 3 else 9)))
    assert not res.indeterminate
    assert abs(res.order - 2.0) <= 0.2, res


def test_convergence_order_flags_exact_stencil():
    sys_ = builtin_system("constant", matrix=[[1, 0], [1, 1]])
    u = X.variable(2, 0, 2) + X.monomial(2, (1, 1), 3)
    res = convergence_order(sys_, u, ladder(Grid.uniform(2, 1.0, 5)))
    assert res.indeterminate and res.order is None
    assert res.diagnostics


def test_engel_bilinear_is_exact():
    sys_ = builtin_system("engel", n=3)
    res = convergence_order(sys_, X.monomial(3, (0, 1, 1)), ladder(Grid.uniform(3, 1.0, 5)))
    assert res.indeterminate


def test_convergence_needs_three_grids():
    with pytest.raises(ValueError):
        convergence_order(builtin_system("euclidean", n=1), X.sin(1, 0), [Grid((1.0,), (5,))] * 2)


@pytest.mark.parametrize(
    "system",
    [
        builtin_system("euclidean", n=2),
        builtin_system("euclidean", n=3),
        builtin_system("constant", matrix=[[1, 0.5], [0, 2], [1, -1]]),
    ],
    ids=["e2", "e3", "const"],
)
def test_symmetric_for_constant_coefficients(system):
    g = Grid(tuple([1.0, 1.7, 0.9][: system.n]), tuple([7, 9, 5][: system.n]))
    op = assemble_operator(system, g)
    A = op.matrix
    assert abs(A - A.T).max() <= 1e-12 * abs(A).max()
    assert op.symmetric


def test_grushin_not_flagged_symmetric_only_when_asymmetric():
    op = assemble_operator(builtin_system("trig-bounded", n=2), Grid.uniform(2, 2.0, 9))
    A = op.matrix
    assert op.symmetric == bool(abs(A - A.T).max() <= 1e-12 * abs(A).max())


def test_euclidean_row_sums_vanish_inside():
    g = Grid.uniform(2, 1.0, 9)
    op = assemble_operator(builtin_system("euclidean", n=2), g)
    rows = np.asarray(op.matrix.sum(axis=1)).ravel()
    assert np.max(np.abs(rows[g.stencil_interior_mask()])) <= 1e-9
    # Dirichlet loss on the boundary rows
    assert np.all(rows[g.boundary_mask()] < 0)


def test_spectral_bound_dominates_eigenvalues():
    g = Grid.uniform(2, 1.0, 7)
    op = assemble_operator(builtin_system("grushin", k=1), g)
    eig = np.linalg.eigvals(op.matrix.toarray())
    assert np.max(np.abs(eig)) <= op.spectral_bound * (1 + 1e-12)


def test_export_coo_roundtrip(tmp_path):
    g = Grid.uniform(2, 1.0, 4)
    op = assemble_operator(builtin_system("engel", n=2), g)
    path = tmp_path / "op.txt"
    export_coo(op, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    data = np.loadtxt(path)
    rebuilt = np.zeros((g.size, g.size))
    rebuilt[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2]
    assert np.array_equal(rebuilt, op.matrix.toarray())


@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_quadratics_exact_for_grushin(a, b, c):
    g = Grid.uniform(2, 1.0, 9)
    sys_ = builtin_system("grushin", k=1)
    u = a * X.variable(2, 0, 2) + b * X.variable(2, 1, 2) + c * X.monomial(2, (1, 0))
    out = assemble_operator(sys_, g).matrix @ sample(u, g).values
    exact = sample(delta_x_symbolic(sys_, u), g).values
    m = g.stencil_interior_mask()
    assert np.max(np.abs(out[m] - exact[m])) <= 1e-9 * (1 + abs(a) + abs(b) + abs(c))


def test_lq_norms():
    g = Grid((1.0,), (199,))
    f = sample(1.0, g)
    assert f.lq_norm(1) == pytest.approx(2.0, rel=1e-2)
    assert f.lq_norm(float("inf")) == 1.0
