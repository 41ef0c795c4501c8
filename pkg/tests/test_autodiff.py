import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from isoscurv import autodiff as ad
from isoscurv.autodiff import Jet, taylor1

X, Y = sp.symbols("x y")


def _sym_derivs(expr, point, order):
    """All partials up to ``order`` via sympy, keyed by multi-index."""
    out = {}
    subs = {X: point[0], Y: point[1]}
    for i in range(order + 1):
        for j in range(order + 1 - i):
            d = expr
            if i:
                d = sp.diff(d, X, i)
            if j:
                d = sp.diff(d, Y, j)
            out[(i, j)] = float(d.subs(subs))
    return out


CASES = [
    (lambda x, y: x * y + x**3, X * Y + X**3),
    (lambda x, y: ad.exp(x) * ad.sqrt(1 + y * y), sp.exp(X) * sp.sqrt(1 + Y**2)),
    (lambda x, y: ad.log(2 + x * y) / (1 + x * x), sp.log(2 + X * Y) / (1 + X**2)),
    (lambda x, y: ad.artanh(0.3 * x - 0.2 * y), sp.atanh(sp.Rational(3, 10) * X - sp.Rational(1, 5) * Y)),
    (lambda x, y: (1 + x * x + y * y) ** 0.25, (1 + X**2 + Y**2) ** sp.Rational(1, 4)),
    (lambda x, y: (x - y) ** 3 * (1 / (3 + y)), (X - Y) ** 3 / (3 + Y)),
]


@pytest.mark.parametrize("f, expr", CASES)
def test_partials_match_sympy(f, expr):
    p = (0.3, -0.4)
    order = 3
    x, y = Jet.seed(p, order)
    jet = f(x, y)
    want = _sym_derivs(expr, p, order)
    for (i, j), v in want.items():
        got = jet.d(*([0] * i + [1] * j)) if i + j else jet.value
        assert got == pytest.approx(v, rel=1e-12, abs=1e-12), (i, j)


def test_gradient_and_hessian_shapes():
    x, y, z = Jet.seed([1.0, 2.0, 3.0], 2)
    f = x * y * z
    np.testing.assert_allclose(f.gradient(), [6.0, 3.0, 2.0])
    np.testing.assert_allclose(f.hessian(), [[0, 3, 2], [3, 0, 1], [2, 1, 0]])


def test_mixed_orders_truncate_to_lower():
    a = Jet.variable(0.5, 0, 1, 4)
    b = Jet.variable(0.5, 0, 1, 2)
    assert (a * b).order == 2


def test_diff_drops_one_order():
    t = Jet.variable(0.2, 0, 1, 4)
    f = ad.exp(t)
    g = f.diff(0)
    assert g.order == 3
    assert g.value == pytest.approx(math.exp(0.2))


def test_batched_coefficients_match_scalar_runs():
    s = np.array([-0.3, 0.0, 0.4])
    batch = taylor1(lambda t: ad.sqrt(1 + 4 * t * t) * ad.exp(t), s, 3)
    for k, s0 in enumerate(s):
        single = taylor1(lambda t: ad.sqrt(1 + 4 * t * t) * ad.exp(t), float(s0), 3)
        np.testing.assert_allclose(batch[:, k], single, rtol=1e-14)


def test_numpy_ufuncs_are_refused():
    x = Jet.variable(0.1, 0, 1, 2)
    with pytest.raises(TypeError):
        np.sin(x)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(-0.8, 0.8),
    st.floats(0.1, 3.0),
    st.integers(1, 4),
)
def test_taylor1_against_finite_differences(s0, c, order):
    f = lambda t: ad.log(c + t * t) * ad.sqrt(1 + t * t)
    d = taylor1(f, s0, order)
    h = 1e-4
    g = lambda t: math.log(c + t * t) * math.sqrt(1 + t * t)
    fd = (g(s0 - 2 * h) - 8 * g(s0 - h) + 8 * g(s0 + h) - g(s0 + 2 * h)) / (12 * h)
    assert d[1] == pytest.approx(fd, rel=1e-7, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(-3.0, 3.0))
def test_algebraic_identities(a, p):
    x = Jet.variable(a, 0, 1, 3)
    np.testing.assert_allclose((ad.sqrt(x) * ad.sqrt(x)).c, x.c, atol=1e-11 * (1 + a))
    np.testing.assert_allclose(ad.log(ad.exp(x * 0.3)).c, (x * 0.3).c, atol=1e-11)
    np.testing.assert_allclose((x.power(p) * x.power(-p)).c, Jet.constant(1.0, 1, 3).c, atol=1e-9)
