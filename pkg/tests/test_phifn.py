import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy import integrate

from isoscurv.errors import DomainError, ParamError, SingularPhiError
from isoscurv.phifn import (
    PhiModel,
    f_class_iv_closed,
    f_of_b,
    f_prime,
    f_randers_closed,
    phi_big,
    phi_jet,
    q_pack,
    regularity_margin,
)

S, B2 = sp.symbols("s B")


def sym_class_iv(k1, k2, sign):
    k1, k2 = sp.nsimplify(k1), sp.nsimplify(k2)
    u = sp.sqrt(k2 - k1) * S / sp.sqrt(1 + k2 * S**2)
    return ((1 + k1 * S**2) * (1 + k2 * S**2)) ** sp.Rational(1, 4) * sp.exp(sign * sp.atanh(u) / 2)


def sym_pack(phi, n):
    """Q, Delta, Psi, Phi, Upsilon straight from their definitions."""
    d1 = sp.diff(phi, S)
    Q = d1 / (phi - S * d1)
    Qp = sp.diff(Q, S)
    Qpp = sp.diff(Qp, S)
    Delta = 1 + S * Q + (B2 - S**2) * Qp
    Psi = Qp / (2 * Delta)
    Phi = -(Q - S * Qp) * (n * Delta + S * Q + 1) - (B2 - S**2) * (1 + S * Q) * Qpp
    Ups = sp.diff(S * Phi / Delta**2 - 2 * Psi * B2, S)
    return {"Q": Q, "Delta": Delta, "Psi": Psi, "Phi": Phi, "Upsilon": Ups}


def test_class_iv_closed_form_matches_integrated_tau():
    # phi = ((1+k1 s^2)(1+k2 s^2))^(1/4) exp(int_0^s tau), integrate tau numerically
    for k1, k2, sign in [(0, 4, 1), (-1, 0, 1), (1, 2, -1), (1.25, 2.25, 1)]:
        m = PhiModel.class_iv(k1, k2, sign)
        tau = lambda t: sign * math.sqrt(k2 - k1) / (2 * (1 + k1 * t * t) * math.sqrt(1 + k2 * t * t))
        for s in (-0.6, -0.2, 0.3, 0.7):
            if not m.in_domain(s):
                continue
            integral, _ = integrate.quad(tau, 0.0, s, epsabs=1e-14, epsrel=1e-14)
            want = ((1 + k1 * s * s) * (1 + k2 * s * s)) ** 0.25 * math.exp(integral)
            assert float(m(s)) == pytest.approx(want, rel=1e-12)


def test_class_iv_equals_algebraic_form():
    f = sp.lambdify(S, EX11_PHI)
    m = PhiModel.class_iv(0, 4, 1)
    for s in np.linspace(-0.9, 0.9, 19):
        assert float(m(s)) == pytest.approx(f(s), rel=1e-13)


def test_phi_jets_at_known_points():
    assert phi_jet(PhiModel.class_iv(0, 4, 1), 0.0) == pytest.approx((1.0, 1.0, 3.0, 3.0), abs=1e-13)
    assert phi_jet(PhiModel.randers(), 0.3) == pytest.approx((1.3, 1.0, 0.0, 0.0), abs=1e-14)


def test_a1_a2_of_class_iv():
    a1, a2 = PhiModel.class_iv(0, 4, 1).a1_a2
    assert (a1, a2) == pytest.approx((1.0, 1.5))
    a1, a2 = PhiModel.class_iv(1, 2, -1).a1_a2
    assert a1 == pytest.approx(-0.5)
    assert a2 == pytest.approx((1 + 6) / 8)


# (1 + 4 s^2)^(1/4) sqrt(2 s + sqrt(1 + 4 s^2)) is the algebraic form of k1=0, k2=4
EX11_PHI = (1 + 4 * S**2) ** sp.Rational(1, 4) * sp.sqrt(2 * S + sp.sqrt(1 + 4 * S**2))


@pytest.mark.parametrize(
    "model, expr, n",
    [
        (PhiModel.class_iv(0, 4, 1), EX11_PHI, 2),
        (PhiModel.class_iv(0, 4, 1), EX11_PHI, 3),
        (PhiModel.class_iv(1, 2, -1), sym_class_iv(1, 2, -1), 2),
        (PhiModel.excluded(1.0, 1.0, 0.4), sp.sqrt(1 + S**2) + sp.Rational(2, 5) * S, 2),
        (PhiModel.excluded(1.0, 1.0, 0.4), sp.sqrt(1 + S**2) + sp.Rational(2, 5) * S, 3),
        (PhiModel.series([1, 0.5, 0.25, -0.1]), 1 + S / 2 + S**2 / 4 - S**3 / 10, 2),
        (PhiModel.series([1, 0.5, 0.25, -0.1]), 1 + S / 2 + S**2 / 4 - S**3 / 10, 4),
    ],
)
def test_q_pack_matches_symbolic_definitions(model, expr, n):
    funcs = {k: sp.lambdify((S, B2), e, modules="mpmath") for k, e in sym_pack(expr, n).items()}
    for s, b2 in [(0.0, 0.25), (0.2, 0.25), (-0.35, 0.16)]:
        pk = q_pack(model, s, b2, n)
        for name, f in funcs.items():
            want = float(f(mpmath.mpf(s), mpmath.mpf(b2)))
            assert getattr(pk, name) == pytest.approx(want, rel=1e-9, abs=1e-11), name


def test_randers_values():
    m = PhiModel.randers()
    pk = q_pack(m, 0.0, 0.25, 2)
    assert pk.Phi == pytest.approx(-3.0)
    assert pk.Upsilon == pytest.approx(-3.0)
    assert q_pack(m, 0.5, 0.25, 2).Phi == pytest.approx(-4.5)


@pytest.mark.parametrize("k", [-0.5, 0.0, 1.0, 4.0])
def test_phi_vanishes_for_square_root_profile(k):
    m = PhiModel.sqrt_quadratic(k)
    b = 0.6
    s = np.linspace(-b, b, 101)
    assert np.max(np.abs(phi_big(m, s, b * b, 2))) <= 1e-12


def test_q_pack_domain_errors():
    with pytest.raises(DomainError):
        q_pack(PhiModel.randers(), 0.6, 0.25)
    with pytest.raises(DomainError):
        q_pack(PhiModel.class_iv(-1, 0, 1), 1.2, 4.0)
    # phi - s phi' = 1 - s^2 vanishes at s = 1
    with pytest.raises(SingularPhiError):
        q_pack(PhiModel.series([1, 0, 1], b_o=3.0), 1.0, 1.0)


def test_constructor_errors():
    with pytest.raises(ParamError):
        PhiModel.class_iv(2, 2)
    with pytest.raises(ParamError):
        PhiModel.excluded(0.0, 1.0, 1.0)
    with pytest.raises(ParamError):
        PhiModel.from_dict({"variant": "nope"})
    with pytest.raises(ParamError):
        PhiModel.from_dict({"variant": "class-iv", "k1": 0})


def test_dict_roundtrip_keeps_exact_parameters():
    m = PhiModel.class_iv(Fraction(5, 4), Fraction(9, 4), 1)
    d = m.to_dict()
    assert d["k1"] == "5/4"
    assert PhiModel.from_dict(d) == m


def test_class_iv_domain_bound():
    assert PhiModel.class_iv(-1, 0).b_o == pytest.approx(1.0)
    assert PhiModel.class_iv(-4, -1).b_o == pytest.approx(0.5)
    assert math.isinf(PhiModel.class_iv(0, 4).b_o)


# ---------------------------------------------------------------------------
# volume factor
# ---------------------------------------------------------------------------


def f_quad(model, n, b):
    """Independent f(b) with adaptive scipy quadrature."""
    num, _ = integrate.quad(lambda t: math.sin(t) ** (n - 2), 0, math.pi, epsabs=1e-13, epsrel=1e-13)
    den, _ = integrate.quad(lambda t: math.sin(t) ** (n - 2) / float(model(b * math.cos(t))) ** n,
                            0, math.pi, epsabs=1e-13, epsrel=1e-13, limit=200)
    return num / den


@pytest.mark.parametrize("b", [0.1, 0.3, 0.5, 0.8])
def test_f_closed_forms(b):
    assert f_of_b(PhiModel.randers(), 2, b) == pytest.approx(f_randers_closed(b), rel=1e-10)
    for k1, k2 in [(0, 4), (-1, 0), (1, 2)]:
        assert f_of_b(PhiModel.class_iv(k1, k2), 2, b) == pytest.approx(f_class_iv_closed(k1, b), rel=1e-10)


def test_randers_f_at_half():
    assert f_of_b(PhiModel.randers(), 2, 0.5) == pytest.approx(0.649519052838, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("model", [PhiModel.excluded(1.0, 1.0, 0.4), PhiModel.class_iv(1, 2, -1)])
def test_f_against_scipy_quadrature(model, n):
    for b in (0.2, 0.6):
        assert f_of_b(model, n, b) == pytest.approx(f_quad(model, n, b), rel=1e-11)


@pytest.mark.parametrize("k1, k2", [(0, 4), (-1, 0), (1, 2)])
def test_f_prime_against_closed_derivative(k1, k2):
    m = PhiModel.class_iv(k1, k2)
    for b in (0.2, 0.5, 0.7):
        want = k1 * b / math.sqrt(1 + k1 * b * b)
        assert f_prime(m, 2, b) == pytest.approx(want, abs=1e-9)


def test_riemannian_volume_factor_is_one():
    m = PhiModel.riemannian()
    assert f_of_b(m, 3, 0.4) == 1.0
    assert f_prime(m, 3, 0.4) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.85))
def test_randers_f_property(b):
    assert f_of_b(PhiModel.randers(), 2, b) == pytest.approx((1 - b * b) ** 1.5, rel=1e-10)


# ---------------------------------------------------------------------------
# regularity
# ---------------------------------------------------------------------------


def test_regularity_margins():
    assert regularity_margin(PhiModel.randers(), 0.9) == pytest.approx(1.0, abs=1e-9)
    assert regularity_margin(PhiModel.riemannian(), 5.0) == pytest.approx(1.0)
    assert regularity_margin(PhiModel.class_iv(0, 4), 0.9) > 0.5
    # 1 - s^2 gives 1 + 3 s^2 - 2 rho^2, negative at s = 0 once rho > 1/sqrt(2)
    bad = PhiModel.series([1, 0, -1], b_o=1.0)
    assert regularity_margin(bad, 0.6) > 0
    assert regularity_margin(bad, 0.9) == pytest.approx(1 - 2 * 0.81, abs=1e-9)


def test_regularity_outside_domain_is_minus_inf():
    m = PhiModel.excluded(1.0, -1.0, 0.0)  # sqrt(1 - s^2), b_o = 1
    assert regularity_margin(m, 0.99) > 0
    assert regularity_margin(m, 1.0) == -math.inf
