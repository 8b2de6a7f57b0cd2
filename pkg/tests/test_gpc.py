from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import legendre as npleg

from scamr.errors import (
    DegenerateDesignError,
    DimensionMismatchError,
    InsufficientPointsError,
    OutOfDomainError,
    ScamrError,
)
from scamr.gpc import (
    GpcSurrogate,
    basis_eval,
    design_matrix,
    fit_discrete_projection,
    fit_least_squares,
    legendre_eval,
    residual_inf,
    surrogate_eval,
    surrogate_mean,
    total_degree_indices,
)
from scamr.grids import chebyshev_nodes_1d, clenshaw_curtis_weights_1d, sparse_grid


def test_index_set_order_n2_p2():
    assert total_degree_indices(2, 2).as_tuples() == [
        (0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2),
    ]


def test_index_set_n3_p1():
    assert total_degree_indices(3, 1).as_tuples() == [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]


@pytest.mark.parametrize("n,p", [(0, 1), (2, -1)])
def test_index_set_rejects_bad_args(n, p):
    with pytest.raises(ValueError):
        total_degree_indices(n, p)


@given(st.integers(1, 20), st.integers(0, 4))
def test_cardinality(n, p):
    b = total_degree_indices(n, p)
    assert len(b) == comb(n + p, p)
    tuples = b.as_tuples()
    assert len(set(tuples)) == len(tuples)
    assert all(sum(t) <= p for t in tuples)
    degrees = b.degrees()
    assert np.all(np.diff(degrees) >= 0)


def test_norms():
    b = total_degree_indices(2, 2)
    expected = [1, 1 / 3, 1 / 3, 1 / 5, 1 / 9, 1 / 5]
    np.testing.assert_allclose(b.norms(), expected, rtol=0, atol=1e-15)


@pytest.mark.parametrize("k", range(7))
def test_legendre_matches_numpy(k):
    x = np.linspace(-1, 1, 23)
    coef = np.zeros(k + 1)
    coef[k] = 1
    ours = [legendre_eval(k, v) for v in x]
    np.testing.assert_allclose(ours, npleg.legval(x, coef), atol=1e-13)


def test_legendre_rejects_out_of_range():
    with pytest.raises(OutOfDomainError):
        legendre_eval(2, 1.5)


def test_basis_eval_examples():
    np.testing.assert_allclose(basis_eval(total_degree_indices(2, 1), [0, 0]), [1, 0, 0])
    np.testing.assert_allclose(basis_eval(total_degree_indices(1, 2), [1.0]), [1, 1, 1])
    np.testing.assert_allclose(
        basis_eval(total_degree_indices(2, 2), [0.5, -0.5]),
        [1, 0.5, -0.5, -0.125, -0.25, -0.125],
        atol=1e-15,
    )


def test_design_matrix_dimension_checks():
    b = total_degree_indices(2, 2)
    with pytest.raises(DimensionMismatchError):
        design_matrix(b, np.zeros((3, 3)))
    with pytest.raises(OutOfDomainError):
        design_matrix(b, [[0.0, 1.01]])


def test_orthogonality_cc_level4():
    # level-4 CC has 17 nodes and is exact to degree 16 >= 6 + 6
    x, w = chebyshev_nodes_1d(4), clenshaw_curtis_weights_1d(4)
    b = total_degree_indices(1, 6)
    a = design_matrix(b, x[:, None])
    gram = (a * w[:, None]).T @ a
    off = gram - np.diag(np.diag(gram))
    assert np.max(np.abs(off)) < 1e-10
    np.testing.assert_allclose(np.diag(gram), 2.0 / (2 * np.arange(7) + 1), atol=1e-12)


def test_orthogonality_multivariate_gauss():
    # tensor Gauss-Legendre oracle, independent of the CC rules
    g, gw = npleg.leggauss(6)
    X = np.array(np.meshgrid(g, g, indexing="ij")).reshape(2, -1).T
    W = np.outer(gw, gw).ravel() / 4.0
    b = total_degree_indices(2, 3)
    a = design_matrix(b, X)
    gram = (a * W[:, None]).T @ a
    np.testing.assert_allclose(gram, np.diag(b.norms()), atol=1e-13)


def test_projection_examples():
    r1 = sparse_grid(1, 1)
    b = total_degree_indices(1, 2)
    c = fit_discrete_projection(b, r1.nodes, r1.weights, np.full(3, 2.5))
    np.testing.assert_allclose(c, [2.5, 0, 0], atol=1e-12)
    c = fit_discrete_projection(b, r1.nodes, r1.weights, r1.nodes[:, 0])
    np.testing.assert_allclose(c, [0, 1, 0], atol=1e-12)
    r2 = sparse_grid(2, 2)
    b2 = total_degree_indices(2, 2)
    c = fit_discrete_projection(b2, r2.nodes, r2.weights, r2.nodes[:, 0] * r2.nodes[:, 1])
    expected = np.zeros(6)
    expected[4] = 1.0
    np.testing.assert_allclose(c, expected, atol=1e-10)


def test_projection_errors():
    r = sparse_grid(2, 1)
    b = total_degree_indices(2, 1)
    with pytest.raises(DimensionMismatchError):
        fit_discrete_projection(b, r.nodes, r.weights[:-1], np.zeros(5))
    with pytest.raises(DimensionMismatchError):
        fit_discrete_projection(b, r.nodes, r.weights, np.zeros(4))
    with pytest.raises(ScamrError):
        fit_discrete_projection(b, r.nodes, r.weights, [0, 0, np.nan, 0, 0])


def test_least_squares_examples():
    r = sparse_grid(2, 2)
    b = total_degree_indices(2, 2)
    np.testing.assert_array_equal(fit_least_squares(b, r.nodes, np.zeros(13)), np.zeros(6))
    # f1 = x1^2 + x2^2 on [0,1]^2 through the reference map
    x = 0.5 * (r.nodes + 1)
    v = (x**2).sum(axis=1)
    c = fit_least_squares(b, r.nodes, v)
    assert residual_inf(b, c, r.nodes, v) < 1e-12


def test_least_squares_insufficient_points():
    b = total_degree_indices(2, 2)
    with pytest.raises(InsufficientPointsError):
        fit_least_squares(b, np.zeros((6, 2)), np.zeros(6))


def test_least_squares_degenerate_names_columns():
    b = total_degree_indices(2, 1)
    pts = np.column_stack([np.linspace(-1, 1, 8), np.zeros(8)])
    with pytest.raises(DegenerateDesignError) as info:
        fit_least_squares(b, pts, pts[:, 0])
    assert info.value.columns == [2]


poly_coeffs = st.lists(st.floats(-5, 5, allow_nan=False), min_size=15, max_size=15)


@given(st.integers(1, 3), st.integers(1, 2), poly_coeffs, st.integers(0, 2**31))
def test_reproduction(n, p, raw, seed):
    b = total_degree_indices(n, p)
    coef = np.array(raw[: len(b)])
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (len(b) + 10, n))
    values = design_matrix(b, pts) @ coef
    fitted = fit_least_squares(b, pts, values)
    s = GpcSurrogate(b, fitted, np.tile([-1.0, 1.0], (n, 1)))
    q = rng.uniform(-1, 1, (100, n))
    exact = design_matrix(b, q) @ coef
    got = s.evaluate(q)
    assert np.all(np.abs(got - exact) <= 1e-9 * np.maximum(1.0, np.abs(exact)))


@given(st.integers(1, 4), st.integers(1, 2), poly_coeffs)
def test_solver_agreement(n, p, raw):
    # level-2 CC sparse rules are exact for degree <= 5 >= 2p, so projection is exact
    b = total_degree_indices(n, p)
    coef = np.array(raw[: len(b)])
    rule = sparse_grid(n, 2)
    values = design_matrix(b, rule.nodes) @ coef
    proj = fit_discrete_projection(b, rule.nodes, rule.weights, values)
    ls = fit_least_squares(b, rule.nodes, values)
    np.testing.assert_allclose(proj, ls, atol=1e-9)
    np.testing.assert_allclose(proj, coef, atol=1e-9)


def test_surrogate_eval_and_mean():
    b = total_degree_indices(1, 2)
    s = GpcSurrogate(b, [3.7, 0.0, 0.0], [[-1.0, 1.0]])
    assert surrogate_eval(s, [0.3]) == pytest.approx(3.7)
    assert surrogate_mean(s) == 3.7
    # f(xi) = xi^2 = 1/3 + (2/3) P2
    x = np.linspace(-1, 1, 9)[:, None]
    s2 = GpcSurrogate(b, fit_least_squares(b, x, x[:, 0] ** 2), [[-1.0, 1.0]])
    assert surrogate_mean(s2) == pytest.approx(1 / 3, abs=1e-12)
    s3 = GpcSurrogate(b, fit_least_squares(b, x, x[:, 0]), [[-1.0, 1.0]])
    assert surrogate_eval(s3, [0.25]) == pytest.approx(0.25, abs=1e-12)


def test_surrogate_f1_on_unit_square():
    r = sparse_grid(2, 2)
    b = total_degree_indices(2, 2)
    x = 0.5 * (r.nodes + 1)
    s = GpcSurrogate(b, fit_least_squares(b, r.nodes, (x**2).sum(axis=1)), [[0, 1], [0, 1]])
    assert surrogate_eval(s, [0.5, 0.5]) == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(OutOfDomainError):
        surrogate_eval(s, [1.2, 0.5])


def test_surrogate_roundtrip():
    b = total_degree_indices(3, 2)
    s = GpcSurrogate(b, np.arange(10.0), [[0, 1], [0, 2], [-1, 1]])
    t = GpcSurrogate.from_dict(s.to_dict())
    np.testing.assert_array_equal(t.coefficients, s.coefficients)
    np.testing.assert_array_equal(t.bounds, s.bounds)


def test_surrogate_validates_shape():
    b = total_degree_indices(2, 1)
    with pytest.raises(ScamrError):
        GpcSurrogate(b, [1.0, 2.0], [[0, 1], [0, 1]])
    with pytest.raises(ScamrError):
        GpcSurrogate(b, [1.0, 2.0, 3.0], [[0, 1], [1, 1]])
