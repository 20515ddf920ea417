"""Convex calculus: divergences, conjugates, and their oracle cross-checks."""

import numpy as np
import pytest

from nqhinf.convex import (
    BoundedQuadraticFn,
    ComposedFn,
    ConjugateFn,
    ExpAbsFn,
    PiecewiseQuadraticFn,
    QuadraticFn,
    ScaledFn,
    SumFn,
    away_from_breaks,
    bregman,
    check_duality_identity,
    check_three_point,
    conjugate_value_numeric,
    finite_diff_check,
    grad_conjugate,
)
from nqhinf.system import DomainError


def scalar_library():
    """Scalar costs used throughout the property suites."""
    return {
        "quadratic": QuadraticFn([[1.7]]),
        "bounded_quadratic": BoundedQuadraticFn(0.5),
        "piecewise": PiecewiseQuadraticFn([(0.0, 1.0, 0.0, 0.0), (0.4, 2.5, -1.2, 0.24)]),
        "exp_abs": ExpAbsFn(),
        "scaled_exp": ScaledFn(ExpAbsFn(), 2.5),
    }


def grid_sup(f, y, radius=8.0, step=1e-4):
    """Brute-force sup_x {x y - f(x)}: the conjugate oracle."""
    xs = np.arange(-radius, radius + step, step)
    if f.domain_radius is not None:
        xs = xs[np.abs(xs) <= f.domain_radius]
    vals = xs * y - np.asarray(f.value(xs), dtype=float)
    i = int(np.argmax(vals))
    return float(xs[i]), float(vals[i])


def fd_gradient(f, x, h=1e-6):
    return (float(f.value(x + h)) - float(f.value(x - h))) / (2.0 * h)


# ---------------------------------------------------------------------------
# divergence values


def test_bregman_squared_euclidean():
    # D for 0.5||.||^2 is half the squared distance
    f = QuadraticFn(0.5 * np.eye(2))
    assert bregman(f, np.array([3.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(2.0, abs=1e-14)


def test_bregman_identity_point_is_zero():
    f = QuadraticFn(0.5 * np.eye(2))
    x = np.array([0.7, -0.2])
    assert bregman(f, x, x) == 0.0
    e = ExpAbsFn()
    assert float(bregman(e, 0.37, 0.37)) == 0.0


def test_bregman_expabs_matches_fd_linearization():
    # oracle: evaluate the definition with a finite-difference gradient
    e = ExpAbsFn()
    x, y = 1.0, 0.5
    expected = float(e.value(x)) - float(e.value(y)) - fd_gradient(e, y) * (x - y)
    assert float(bregman(e, x, y)) == pytest.approx(expected, abs=1e-8)
    assert float(bregman(e, x, y)) > 0


def test_bregman_nonnegative_library():
    rng = np.random.default_rng(0)
    for name, f in scalar_library().items():
        radius = f.domain_radius if f.domain_radius is not None else 3.0
        xs = rng.uniform(-radius, radius, 1000)
        ys = rng.uniform(-radius, radius, 1000)
        d = np.asarray(bregman(f, xs, ys), dtype=float)
        assert d.min() >= -1e-12, name


def test_bregman_asymmetry_witness():
    e = ExpAbsFn()
    d1 = float(bregman(e, 2.0, -1.0))
    d2 = float(bregman(e, -1.0, 2.0))
    assert abs(d1 - d2) > 1e-3


# ---------------------------------------------------------------------------
# conjugation


def test_conjugate_of_square_scalar():
    f = QuadraticFn([[1.0]])
    assert float(conjugate_value_numeric(f, 2.0)) == pytest.approx(1.0, abs=1e-10)


def test_conjugate_bounded_quadratic_touches_boundary():
    f = BoundedQuadraticFn(0.5)
    # closed form: t|y| - t^2 past the clip
    assert float(f.conjugate_value(2.0)) == pytest.approx(0.75, abs=1e-14)
    _, sup = grid_sup(f, 2.0)
    assert float(conjugate_value_numeric(f, 2.0)) == pytest.approx(sup, abs=1e-7)
    assert float(f.conjugate_value(2.0)) == pytest.approx(sup, abs=1e-7)


def test_conjugate_expabs_formula_and_grid():
    e = ExpAbsFn()
    y = 1.5
    xhat = np.log(2.5)
    expected = xhat * y - float(e.value(xhat))
    xg, sup = grid_sup(e, y)
    assert sup == pytest.approx(expected, abs=1e-7)
    assert float(conjugate_value_numeric(e, y)) == pytest.approx(expected, abs=1e-10)
    assert float(e.conjugate_value(y)) == pytest.approx(expected, abs=1e-12)
    assert xg == pytest.approx(xhat, abs=1e-4)


def test_grad_conjugate_examples():
    f = QuadraticFn(np.eye(2))
    np.testing.assert_allclose(grad_conjugate(f, np.array([4.0, -2.0])), [2.0, -1.0], atol=1e-10)
    b = BoundedQuadraticFn(0.1)
    xg, _ = grid_sup(b, 0.5)
    assert float(grad_conjugate(b, 0.5)) == pytest.approx(0.1, abs=1e-9)
    assert xg == pytest.approx(0.1, abs=1e-4)
    e = ExpAbsFn()
    assert float(grad_conjugate(e, -3.0)) == pytest.approx(-np.log(4.0), abs=1e-10)


def test_conjugate_round_trip_quadratic():
    rng = np.random.default_rng(1)
    W = np.array([[2.0, 0.3], [0.3, 1.1]])
    f = QuadraticFn(W)
    Winv = np.linalg.inv(W)
    for _ in range(1000):
        y = rng.normal(size=2) * 3
        assert f.conjugate_value(y) == pytest.approx(0.25 * y @ Winv @ y, abs=1e-10)


def test_conjugate_evenness():
    rng = np.random.default_rng(2)
    for name, f in scalar_library().items():
        ys = rng.uniform(0.05, 0.9, 25)  # inside every gradient range here
        v_pos = np.asarray(f.conjugate_value(ys), dtype=float)
        v_neg = np.asarray(f.conjugate_value(-ys), dtype=float)
        np.testing.assert_allclose(v_pos, v_neg, atol=1e-11, err_msg=name)


def test_inverse_function_theorem_identity():
    rng = np.random.default_rng(3)
    for name, f in scalar_library().items():
        # sample dual points strictly inside the gradient range, away from kinks
        hi = 0.9 if f.domain_radius is not None else 4.0
        ys = rng.uniform(-hi, hi, 1000)
        ys = away_from_breaks(ys, f.conjugate_hessian_breaks(), 1e-3)
        x = f.conjugate_gradient(ys)
        prod = np.asarray(f.hessian(x), dtype=float) * np.asarray(f.conjugate_hessian(ys), dtype=float)
        assert np.max(np.abs(prod - 1.0)) < 1e-6, name


# ---------------------------------------------------------------------------
# identities


def test_duality_identity_quadratic():
    rng = np.random.default_rng(4)
    f = QuadraticFn(np.array([[1.4, -0.2], [-0.2, 0.8]]))
    for _ in range(50):
        x, y = rng.normal(size=2), rng.normal(size=2)
        assert check_duality_identity(f, x, y) < 1e-12


def test_duality_identity_expabs():
    e = ExpAbsFn()
    assert check_duality_identity(e, 0.3, -0.8) < 1e-9
    assert check_duality_identity(e, 0.5, 0.5) == pytest.approx(0.0, abs=1e-15)


def test_duality_identity_library():
    rng = np.random.default_rng(5)
    for name, f in scalar_library().items():
        radius = 0.45 if f.domain_radius is not None else 2.0
        for _ in range(200):
            x, y = rng.uniform(-radius, radius, 2)
            assert check_duality_identity(f, x, y) < 1e-9, name


def test_three_point_parallelogram():
    f = QuadraticFn(0.5 * np.eye(2))
    rng = np.random.default_rng(6)
    x, y, z = rng.normal(size=(3, 2))
    assert check_three_point(f, f, x, y, z) < 1e-12


def test_three_point_mixed():
    q = QuadraticFn([[1.0]])
    e = ExpAbsFn()
    rng = np.random.default_rng(7)
    for _ in range(100):
        x, y, z = rng.uniform(-2, 2, 3)
        assert check_three_point(q, e, x, y, z) < 1e-9


def test_three_point_identity_point():
    q = QuadraticFn([[1.0]])
    e = ExpAbsFn()
    assert check_three_point(q, e, 0.4, 0.4, 0.4) < 1e-12


# ---------------------------------------------------------------------------
# differentiation checks


def test_finite_diff_quadratic_exact():
    f = QuadraticFn(np.array([[1.0, 0.2], [0.2, 2.0]]))
    grad_err, hess_err = finite_diff_check(f, np.array([0.3, -1.2]))
    assert grad_err < 1e-8
    assert hess_err < 1e-6


def test_finite_diff_expabs():
    grad_err, hess_err = finite_diff_check(ExpAbsFn(), 0.4)
    assert grad_err < 1e-5
    assert hess_err < 1e-5


def test_finite_diff_piecewise_away_from_breaks():
    pw = scalar_library()["piecewise"]
    for x in (0.1, 0.25, 0.9, -1.7):
        grad_err, hess_err = finite_diff_check(pw, x)
        assert grad_err < 1e-5
        assert hess_err < 1e-5


def test_composed_chain_rule():
    base = QuadraticFn(np.eye(2))
    M = np.array([[1.0, 0.5, 0.3], [0.0, 2.0, -0.4]])  # 2x3 map
    f = ComposedFn(base, matrix=M, shift=np.array([0.1, -0.2]), scale=1.5)
    grad_err, hess_err = finite_diff_check(f, np.array([0.3, -0.1, 0.7]))
    assert grad_err < 1e-7
    assert hess_err < 1e-6


# ---------------------------------------------------------------------------
# construction contracts


def test_piecewise_requires_c1():
    with pytest.raises(ValueError):
        PiecewiseQuadraticFn([(0.0, 1.0, 0.0, 0.0), (0.5, 2.0, 0.0, 0.0)])  # slope jump


def test_piecewise_requires_positive_curvature():
    with pytest.raises(ValueError):
        PiecewiseQuadraticFn([(0.0, 0.0, 0.0, 0.0), (0.5, 1.0, -0.5, 0.125)])


def test_bounded_quadratic_domain_error():
    f = BoundedQuadraticFn(0.5)
    with pytest.raises(DomainError):
        f.value(0.7)


def test_conjugate_view_swaps_roles():
    e = ExpAbsFn()
    dual = ConjugateFn(e)
    ys = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(np.asarray(dual.value(ys)), np.asarray(e.conjugate_value(ys)), atol=1e-14)
    np.testing.assert_allclose(np.asarray(dual.conjugate_value(ys)), np.asarray(e.value(ys)), atol=1e-14)


def test_sum_domain_is_intersection():
    f = SumFn(BoundedQuadraticFn(0.5), QuadraticFn([[1.0]]))
    assert f.domain_radius == 0.5
    # numeric conjugate of the sum handles the boundary (clipped maximizer)
    assert float(grad_conjugate(f, 10.0)) == pytest.approx(0.5, abs=1e-9)
