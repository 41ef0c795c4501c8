from fractions import Fraction as Fr

import numpy as np
import pytest

from isoscurv.classifier import (
    CURVATURE_TOL,
    adapted_frame,
    adapted_frame_residuals,
    class_iv_params,
    phi_match_residual,
    classify,
    classify_iv,
    fit_structure,
    pde_residuals,
    r_coefficient,
)
from isoscurv.errors import BZeroError, DimensionError
from isoscurv.fields import FieldTriple, ScalarField, build_catalog_spec
from isoscurv.phifn import PhiModel
from isoscurv.riemann import RSData, rs_decompose
from isoscurv.series import lambda_delta_closed

ISO_TOL = 1e-8


def test_structure_fit_on_example(ex11):
    fit = fit_structure(rs_decompose(ex11, [0.5, 0.0]))
    assert fit.k == pytest.approx(0.0, abs=1e-12)
    assert fit.epsilon == pytest.approx(0.0, abs=1e-12)
    assert fit.lam == pytest.approx(-4 / 7, abs=1e-12)
    assert fit.residual < 1e-14


def test_structure_fit_recovers_synthetic_coefficients():
    rng = np.random.default_rng(3)
    m = rng.normal(size=(2, 2))
    a = m @ m.T + 2 * np.eye(2)
    b = np.array([0.3, -0.2])
    sv = np.array([0.1, 0.4])
    k, eps, lam = 0.7, -1.3, 0.25
    r = k * a - eps * np.outer(b, b) - lam * (np.outer(b, sv) + np.outer(sv, b))
    rs = RSData.__new__(RSData)
    object.__setattr__(rs, "a", a)
    object.__setattr__(rs, "b_low", b)
    object.__setattr__(rs, "s_vec", sv)
    object.__setattr__(rs, "r", r)
    fit = fit_structure(rs)
    assert (fit.k, fit.epsilon, fit.lam) == pytest.approx((k, eps, lam), abs=1e-12)
    np.testing.assert_allclose(fit.reconstruct(rs), r, atol=1e-13)


def test_flat_lambda_is_not_identifiable(flat):
    fit = fit_structure(rs_decompose(flat, [0.1, 0.2]))
    assert not fit.lambda_identifiable
    assert fit.k == 0.0 and fit.residual == 0.0


def test_lambda_closed_form_on_twenty_points(rng):
    spec = build_catalog_spec("EXAMPLE_5_1")
    k1, k2, _ = class_iv_params(spec.phi)
    lam, _ = lambda_delta_closed(1, Fr(3, 2))
    for x in spec.sample_points(rng, 20, min_b=1e-2):
        rs = rs_decompose(spec, x)
        fit = fit_structure(rs)
        assert fit.lam == pytest.approx(-r_coefficient(k1, k2, rs.b2), abs=1e-9)
        assert fit.lam == pytest.approx(float(lam(Fr(rs.b2))), abs=1e-9)


def test_class_iv_params_roundtrip():
    assert class_iv_params(PhiModel.class_iv(0, 4)) == pytest.approx((0.0, 4.0, 1))
    # Randers yields candidate parameters; the profile match then rejects it
    cand = class_iv_params(PhiModel.randers())
    assert cand == pytest.approx((-3.0, 1.0, 1))
    assert phi_match_residual(PhiModel.randers(), *cand) > 1e-3
    assert phi_match_residual(PhiModel.class_iv(0, 4), 0.0, 4.0, 1) < 1e-14


@pytest.mark.parametrize(
    "cid,params,expect",
    [
        ("EXAMPLE_1_1", {}, ["iv"]),
        ("EXAMPLE_5_1", {}, ["iv"]),
        ("EXAMPLE_5_1", {"a1": 0.5, "a2": 1.0}, ["iv"]),
        ("FLAT_PARALLEL", {}, ["iii"]),
        ("EXAMPLE_1_1", {"sigma_cubic": 0.05}, []),
        ("CONFORMAL_GENERAL", {}, []),
        ("RANDERS_CONTROL", {}, []),
    ],
)
def test_classify_verdicts(cid, params, expect, rng):
    spec = build_catalog_spec(cid, params)
    pts = spec.sample_points(rng, 20, min_b=1e-3)
    rep = classify(spec, pts, isotropy_points=4)
    assert rep.classes == expect
    # a listed class and isotropy go together
    assert rep.isotropic == bool(expect)
    assert rep.to_json()["classes"] == expect


@pytest.mark.parametrize("a1,a2,cubic", [(1.0, 1.5, 0.0), (0.5, 1.0, 0.0), (-0.7, 0.8, 0.0),
                                         (1.0, 1.5, 0.1), (0.5, 1.0, -0.08)])
def test_class_iv_iff_isotropic(a1, a2, cubic, rng):
    params = {"a1": a1, "a2": a2}
    if cubic:
        params["sigma_cubic"] = cubic
    spec = build_catalog_spec("EXAMPLE_5_1", params)
    pts = spec.sample_points(rng, 8, min_b=1e-3)
    rep = classify(spec, pts, isotropy_points=4)
    assert rep.verdicts["iv"] == (rep.isotropy_residual <= ISO_TOL)
    assert rep.verdicts["iv"] == (cubic == 0.0)


def test_general_triple_with_example_sigma_has_class_iv_structure():
    spec = build_catalog_spec("CONFORMAL_GENERAL", {
        "sigma": {"log_radial": [[-0.25, 4.0], [-0.75, 0.0]]},
        "xi": {"poly": [[[0, 1], 1.0]]},
        "eta": {"poly": [[[1, 0], -1.0]]},
        "phi": {"variant": "class-iv", "k1": 0, "k2": 4, "sign": 1},
    })
    for x in ([0.3, 0.2], [-0.1, -0.45]):
        fit = fit_structure(rs_decompose(spec, x))
        assert abs(fit.k) < 1e-12 and abs(fit.epsilon) < 1e-12
    assert classify(spec, [[0.3, 0.2], [0.1, -0.5]], isotropy_points=2).classes == ["iv"]


def test_class_iv_needs_two_dimensions():
    spec = build_catalog_spec("FLAT_PARALLEL", {"n": 3, "b": [0.2, 0.1, 0.0]})
    with pytest.raises(DimensionError):
        classify_iv(spec, [[0.1, 0.1, 0.1]])
    rep = classify(spec, [[0.1, 0.1, 0.1]], isotropy_points=0)
    assert rep.classes == ["iii"] and "iv_skipped" in rep.details


def test_adapted_frame_is_orthonormal(ex11):
    fr = adapted_frame(rs_decompose(ex11, [0.3, 0.2]))
    a = ex11.a_matrix([0.3, 0.2])
    np.testing.assert_allclose(fr.frame.T @ a @ fr.frame, np.eye(2), atol=1e-13)
    assert np.linalg.det(fr.frame) > 0
    with pytest.raises(BZeroError):
        adapted_frame(rs_decompose(ex11, [1e-8, 0.0]))


@pytest.mark.parametrize("cid,params", [("EXAMPLE_1_1", {}), ("EXAMPLE_5_1", {"a1": 0.5, "a2": 1.0})])
def test_frame_equations_hold_on_isotropic_examples(cid, params):
    spec = build_catalog_spec(cid, params)
    for x in ([0.3, 0.2], [-0.4, 0.1]):
        res_tangent, res_mixed = adapted_frame_residuals(spec, x)
        assert res_tangent < 1e-10 and res_mixed < 1e-10


@pytest.mark.parametrize("cid,params", [("EXAMPLE_1_1", {"sigma_cubic": 0.05}), ("CONFORMAL_GENERAL", {})])
def test_frame_equations_fail_off_the_family(cid, params):
    spec = build_catalog_spec(cid, params)
    res_tangent, res_mixed = adapted_frame_residuals(spec, [0.3, 0.2])
    assert max(res_tangent, res_mixed) > CURVATURE_TOL


def test_pde_residuals_on_example(ex11):
    res = pde_residuals(ex11.triple, {}, [0.5, 0.0])
    assert res.eps73 == 0.0
    assert res.closed74 == pytest.approx(0.1875, abs=1e-14)
    res = pde_residuals(ex11.triple, {"a1": 1, "a2": 1.5}, [0.3, 0.2])
    assert max(abs(v) for v in res.res76) < 1e-13
    printed = pde_residuals(ex11.triple, {"a1": 1, "a2": 1.5}, [0.3, 0.2], printed_t2=True)
    assert max(abs(v) for v in printed.res76) > 1e-3


def test_pde_residuals_vanish_for_constant_fields():
    triple = FieldTriple(ScalarField(poly=(((0, 0), 0.3),)), ScalarField(poly=(((0, 0), 1.0),)),
                         ScalarField())
    res = pde_residuals(triple, {}, [0.2, -0.1])
    assert res.eps73 == 0.0 and res.closed74 == 0.0
    assert res.res75 == (0.0, 0.0) and res.res76 is None
