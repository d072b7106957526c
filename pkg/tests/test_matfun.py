import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import polynomial as P

from phdae import MatFun, fit
from phdae.exceptions import FitError, ShapeError
from phdae.matfun import as_matfun, chebyshev_points, pointwise


def random_matfun(rng, deg, shape):
    return MatFun(rng.standard_normal((deg + 1,) + shape))


def test_eval_matches_scalar_polyval(rng):
    mf = random_matfun(rng, 3, (2, 3))
    t = 0.37
    expected = np.array([[P.polyval(t, mf.coeffs[:, i, j]) for j in range(3)] for i in range(2)])
    assert np.allclose(mf.eval(t), expected, atol=1e-14)
    assert np.allclose(mf(t), expected, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.floats(-2.0, 2.0), st.integers(0, 10_000))
def test_product_is_pointwise_product(da, db, t, seed):
    rng = np.random.default_rng(seed)
    a = random_matfun(rng, da, (2, 3))
    b = random_matfun(rng, db, (3, 4))
    c = a @ b
    assert c.degree <= da + db
    assert np.allclose(c.eval(t), a.eval(t) @ b.eval(t), atol=1e-10 * (1 + abs(t)) ** (da + db))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 4), st.floats(-1.0, 1.0), st.integers(0, 10_000))
def test_derivative_matches_polyder(deg, t, seed):
    rng = np.random.default_rng(seed)
    a = random_matfun(rng, deg, (2, 2))
    d = a.derivative().eval(t)
    for i in range(2):
        for j in range(2):
            assert np.isclose(d[i, j], P.polyval(t, P.polyder(a.coeffs[:, i, j])), atol=1e-12)


def test_sum_transpose_scale_and_slicing(rng):
    a = random_matfun(rng, 2, (3, 3))
    b = random_matfun(rng, 1, (3, 3))
    t = -0.4
    assert np.allclose((a + b).eval(t), a.eval(t) + b.eval(t))
    assert np.allclose((a - b).eval(t), a.eval(t) - b.eval(t))
    assert np.allclose(a.T.eval(t), a.eval(t).T)
    assert np.allclose((2.5 * a).eval(t), 2.5 * a.eval(t))
    assert np.allclose(a[1:, :2].eval(t), a.eval(t)[1:, :2])
    assert np.allclose((-a).eval(t), -a.eval(t))


def test_block_assembly(rng):
    a = random_matfun(rng, 1, (2, 2))
    b = random_matfun(rng, 2, (2, 1))
    c = random_matfun(rng, 0, (1, 2))
    d = random_matfun(rng, 1, (1, 1))
    blk = MatFun.block([[a, b], [c, d]])
    t = 0.8
    expected = np.block([[a.eval(t), b.eval(t)], [c.eval(t), d.eval(t)]])
    assert blk.shape == (3, 3)
    assert np.allclose(blk.eval(t), expected)


def test_constant_helpers():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    mf = as_matfun(A)
    assert mf.is_constant and mf.degree == 0
    assert np.array_equal(mf.eval(123.0), A)
    assert MatFun.identity(3).allclose(np.eye(3))
    assert MatFun.zeros(2, 0).shape == (2, 0)
    with pytest.raises(ShapeError):
        MatFun(np.zeros(3))


def test_trim_drops_vanishing_leading_coefficients():
    mf = MatFun(np.stack([np.eye(2), np.zeros((2, 2)), 1e-20 * np.eye(2)]))
    assert mf.trim(1e-15).degree == 0


def test_sample_shape(rng):
    mf = random_matfun(rng, 2, (2, 3))
    assert mf.sample(np.linspace(0, 1, 5)).shape == (5, 2, 3)


def test_fit_reproduces_polynomial_exactly(rng):
    mf = random_matfun(rng, 3, (2, 2))
    fitted, res = fit(mf.eval, 0.0, 2.0, max_degree=6, tol=1e-12)
    assert res < 1e-12
    assert fitted.degree == 3
    assert np.allclose(fitted.coeffs, mf.coeffs, atol=1e-9)


def test_fit_smooth_function_and_failure():
    f = lambda t: np.array([[np.exp(t), np.sin(t)]])
    mf, res = fit(f, 0.0, 1.0, max_degree=14, tol=1e-10)
    assert res <= 1e-10
    ts = np.linspace(0, 1, 17)
    assert max(np.abs(mf.eval(t) - f(t)).max() for t in ts) < 1e-9
    with pytest.raises(FitError):
        fit(lambda t: np.array([[abs(t - 0.5)]]), 0.0, 1.0, max_degree=4, tol=1e-10)


def test_pointwise_constant_is_exact(rng):
    A = MatFun.constant(rng.standard_normal((3, 3)) + 3 * np.eye(3))
    inv, res = pointwise(np.linalg.inv, A, interval=(0.0, 1.0))
    assert res == 0.0
    assert np.allclose(inv.eval(0.3) @ A.eval(0.3), np.eye(3), atol=1e-14)


def test_chebyshev_points_include_endpoints():
    pts = chebyshev_points(-1.0, 3.0, 7)
    assert pts[0] == pytest.approx(-1.0) and pts[-1] == pytest.approx(3.0)
    assert np.all(np.diff(pts) > 0)
