from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowlab.fields import (
    CoefficientExpr,
    VectorField,
    apply_field,
    builtin_system,
    carre_du_champ,
    delta_x_symbolic,
    divergence,
    system_from_table,
)

X = CoefficientExpr


def test_grushin_second_field_is_x1_d2():
    sys_ = builtin_system("grushin", n=2, k=1)
    X2 = sys_.fields[1]
    assert X2.coeffs[0].is_zero
    assert X2.coeffs[1] == X.variable(2, 0)


def test_engel_n3_second_field():
    sys_ = builtin_system("engel", n=3)
    X2 = sys_.fields[1]
    assert X2.coeffs[0].is_zero
    assert X2.coeffs[1] == X.variable(3, 0, 1)
    assert X2.coeffs[2] == X.variable(3, 0, 2)


def test_euclidean_divergences_vanish():
    sys_ = builtin_system("euclidean", n=3)
    assert all(d.is_zero for d in sys_.divergences)
    assert sys_.all_constant and sys_.is_radial()


@pytest.mark.parametrize(
    "field, expected",
    [
        (VectorField((X.sin(1, 0),)), X.cos(1, 0)),
        (VectorField((X.zero(2), X.variable(2, 0, 3))), X.zero(2)),
        (VectorField((X.variable(2, 0), X.variable(2, 1))), X.constant(2, 2)),
    ],
)
def test_divergence_examples(field, expected):
    assert divergence(field) == expected


def test_grushin_and_engel_fields_are_divergence_free():
    for sys_ in (builtin_system("grushin", k=3), builtin_system("engel", n=4)):
        assert all(d.is_zero for d in sys_.divergences)


def test_apply_field_examples():
    g = builtin_system("grushin", k=1)
    d = X.variable(2, 0, 4) + X.variable(2, 1, 2)
    # X_2 d = 2 x1 x2
    assert apply_field(g.fields[1], d) == X.monomial(2, (1, 1), 2)
    # X_1 d = (2k+2) x1^(2k+1) with k=1
    assert apply_field(g.fields[0], d) == X.monomial(2, (3, 0), 4)
    assert apply_field(g.fields[0], X.constant(2, 1)).is_zero


def test_delta_x_symbolic_examples():
    g = builtin_system("grushin", k=1)
    assert delta_x_symbolic(g, X.variable(2, 1, 2)) == X.monomial(2, (2, 0), 2)
    assert delta_x_symbolic(g, X.variable(2, 0, 4)) == X.monomial(2, (2, 0), 12)
    e = builtin_system("euclidean", n=2)
    assert delta_x_symbolic(e, X.variable(2, 0, 2) + X.variable(2, 1, 2)) == X.constant(2, 4)


def test_grushin_display_terms_general_k():
    for k in (1, 2, 3):
        g = builtin_system("grushin", k=k)
        d = X.variable(2, 0, 2 * k + 2) + X.variable(2, 1, 2)
        X1, X2 = g.fields
        assert apply_field(X1, d) == X.monomial(2, (2 * k + 1, 0), 2 * k + 2)
        assert apply_field(X2, d) == X.monomial(2, (k, 1), 2)
        assert apply_field(X1, apply_field(X1, d)) == X.monomial(2, (2 * k, 0), (2 * k + 2) * (2 * k + 1))
        assert apply_field(X2, apply_field(X2, d)) == X.monomial(2, (2 * k, 0), 2)


def test_boundedness_flags():
    assert builtin_system("trig-bounded", n=3).coefficients_bounded
    assert builtin_system("trig-bounded", n=3).derivatives_bounded
    assert not builtin_system("grushin", k=1).coefficients_bounded
    assert X.sin(2, 0).bounded and not X.variable(2, 0).bounded


def test_sin_squared_closure():
    s = X.sin(1, 0)
    sq = s * s
    x = np.linspace(-2, 2, 7)[:, None]
    np.testing.assert_allclose(sq.diff(0)(x), 2 * np.sin(x[:, 0]) * np.cos(x[:, 0]))


def test_errors():
    with pytest.raises(ValueError):
        builtin_system("heisenberg", n=3)
    with pytest.raises(ValueError):
        builtin_system("grushin", n=3)
    with pytest.raises(ValueError):
        builtin_system("engel", n=1)
    with pytest.raises(ValueError):
        builtin_system("constant", n=3, matrix=[[1, 0], [0, 2]])
    with pytest.raises(ValueError):
        apply_field(builtin_system("euclidean", n=2).fields[0], X.constant(3, 1))


def test_system_from_table_matches_builtin():
    table = [
        [[{"c": 1}], []],
        [[], [{"c": 1, "pow": [2, 0]}]],
    ]
    custom = system_from_table(table)
    g = builtin_system("grushin", k=2)
    assert custom.fields == g.fields


def _fd_delta(system, u, x, h=1e-4):
    """Central-difference evaluation of sum_k (X_k^2 + div X_k X_k) u."""
    n = system.n

    def grad(fun, pts):
        out = np.empty(pts.shape)
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            out[:, i] = (fun(pts + e) - fun(pts - e)) / (2 * h)
        return out

    total = np.zeros(len(x))
    for f, dv in zip(system.fields, system.divergences):
        def Xu(pts, f=f):
            g = grad(u, pts)
            return sum(a(pts) * g[:, i] for i, a in enumerate(f.coeffs))

        g2 = grad(Xu, x)
        total += sum(a(x) * g2[:, i] for i, a in enumerate(f.coeffs))
        total += dv(x) * Xu(x)
    return total


SYSTEMS = [
    builtin_system("euclidean", n=2),
    builtin_system("constant", matrix=[[1, 0], [0, 2], [1, 1]]),
    builtin_system("trig-bounded", n=2),
    builtin_system("trig-bounded", n=3),
    builtin_system("grushin", k=1),
    builtin_system("grushin", k=2),
    builtin_system("engel", n=3),
    system_from_table([[[{"c": 1, "pow": [1, 0]}], [{"c": 1, "sin": [1, 0]}]]]),
]


def _poly(n, rng, degree=6, terms=5):
    out = X.zero(n)
    for _ in range(terms):
        pw = [0] * n
        budget = int(rng.integers(0, degree + 1))
        for _ in range(budget):
            pw[int(rng.integers(0, n))] += 1
        out = out + X.monomial(n, pw, Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 4))))
    return out


@pytest.mark.parametrize("system", SYSTEMS, ids=lambda s: f"{s.tag}-{s.n}")
def test_symbolic_delta_matches_finite_differences(system):
    rng = np.random.default_rng(7)
    for _ in range(3):
        u = _poly(system.n, rng)
        pts = rng.uniform(-1.0, 1.0, size=(100, system.n))
        exact = delta_x_symbolic(system, u)(pts)
        approx = _fd_delta(system, u, pts)
        scale = max(1.0, np.max(np.abs(exact)))
        assert np.max(np.abs(exact - approx)) / scale <= 1e-6


@st.composite
def _exprs(draw, n=2):
    terms = draw(
        st.lists(
            st.tuples(
                st.tuples(*[st.integers(0, 3)] * n),
                st.tuples(*[st.integers(0, 1)] * n),
                st.integers(-5, 5),
            ),
            max_size=4,
        )
    )
    return X.from_terms(n, [((pw, sn, (0,) * n), c) for pw, sn, c in terms])


@given(u=_exprs(), v=_exprs(), a=st.fractions(max_denominator=7), b=st.integers(-4, 4))
@settings(max_examples=60, deadline=None)
def test_apply_field_is_linear(u, v, a, b):
    for f in builtin_system("trig-bounded", n=2).fields + builtin_system("grushin", k=2).fields:
        assert apply_field(f, a * u + b * v) == a * apply_field(f, u) + b * apply_field(f, v)


@given(u=_exprs(), v=_exprs())
@settings(max_examples=60, deadline=None)
def test_diff_obeys_product_rule(u, v):
    for i in range(2):
        assert (u * v).diff(i) == u.diff(i) * v + u * v.diff(i)


def test_carre_du_champ_grushin():
    g = builtin_system("grushin", k=1)
    d = X.variable(2, 0, 4) + X.variable(2, 1, 2)
    expected = X.monomial(2, (6, 0), 16) + X.monomial(2, (2, 2), 4)
    assert carre_du_champ(g, d) == expected
