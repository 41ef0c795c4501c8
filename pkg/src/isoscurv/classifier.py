"""Residual tests for the four isotropic S-curvature classes.

Every test is a residual, never a proof: a class is reported when all of its
displayed conditions hold to the requested tolerance on the sample.  Classes
overlap on degenerate data (parallel beta satisfies several at once), so the
report is non-exclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BZeroError, DimensionError, SingularFrameError
from .fields import FieldTriple, MetricSpec
from .finsler import point_data, s_curvature_report, unit_directions
from .phifn import PhiModel, phi_big, q_pack
from .riemann import RSData, rs_decompose

CLASSES = ("i", "ii", "iii", "iv")
ALGEBRAIC_TOL = 1e-8
CURVATURE_TOL = 1e-6
K_GRID = (-0.9, -0.5, -0.1, 0.1, 0.5, 0.9)
PHI_GRID = 41


# ---------------------------------------------------------------------------
# r_ij = k a_ij - eps b_i b_j - lam (b_i s_j + b_j s_i)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructureFit:
    k: float
    epsilon: float
    lam: float
    k_identifiable: bool
    epsilon_identifiable: bool
    lambda_identifiable: bool
    residual: float  # rms over the n^2 entries

    def reconstruct(self, rs: RSData) -> np.ndarray:
        b, sv = rs.b_low, rs.s_vec
        lam = self.lam if self.lambda_identifiable else 0.0
        eps = self.epsilon if self.epsilon_identifiable else 0.0
        return self.k * rs.a - eps * np.outer(b, b) - lam * (np.outer(b, sv) + np.outer(sv, b))


def fit_structure(rs: RSData, a: np.ndarray | None = None, tiny: float = 1e-12) -> StructureFit:
    """Least-squares coefficients of r_ij in the basis {a, -bb, -(bs + sb)}."""
    a = rs.a if a is None else np.asarray(a, dtype=float)
    b, sv = rs.b_low, rs.s_vec
    basis = [a, -np.outer(b, b), -(np.outer(b, sv) + np.outer(sv, b))]
    scale = max(1.0, float(np.max(np.abs(a))))
    usable = [float(np.max(np.abs(m))) > tiny * scale for m in basis]
    cols = [m.ravel() for m, ok in zip(basis, usable) if ok]
    coef = np.zeros(3)
    if cols:
        A = np.stack(cols, axis=1)
        sol, *_ = np.linalg.lstsq(A, rs.r.ravel(), rcond=None)
        coef[np.array(usable)] = sol
        resid = rs.r.ravel() - A @ sol
    else:
        resid = rs.r.ravel()
    rms = float(math.sqrt(np.mean(resid**2)))
    return StructureFit(float(coef[0]), float(coef[1]), float(coef[2]), *usable, rms)


# ---------------------------------------------------------------------------
# per-class residuals
# ---------------------------------------------------------------------------


def _s_grid(phi: PhiModel, b: float, count: int = PHI_GRID) -> np.ndarray:
    m = min(b, 0.999 * phi.b_o) * 0.95
    s = np.linspace(-m, m, count)
    return s[np.asarray(phi.in_domain(s))]


def class_iv_params(phi: PhiModel) -> tuple[float, float, int] | None:
    """(k1, k2, sign) read off phi'(0) and phi''(0); None when phi'(0) = 0."""
    if phi.variant == "class_iv":
        k1, k2, sign = phi.params
        return k1, k2, sign
    a1, a2 = phi.a1_a2
    if abs(a1) < 1e-14:
        return None
    return 2 * a2 - 3 * a1 * a1, 2 * a2 + a1 * a1, 1 if a1 > 0 else -1


def r_coefficient(k1: float, k2: float, b2: float) -> float:
    return (3 * k1 + k2 + 4 * k1 * k2 * b2) / (4 + (k1 + 3 * k2) * b2)


def phi_match_residual(phi: PhiModel, k1: float, k2: float, sign: int, count: int = 201) -> float:
    """sup |phi - phi_iv| on a symmetric grid inside both domains."""
    ref = PhiModel.class_iv(k1, k2, sign)
    m = 0.9 * min(1.0, phi.b_o, ref.b_o)
    s = np.linspace(-m, m, count)
    s = s[np.asarray(phi.in_domain(s)) & np.asarray(ref.in_domain(s))]
    return float(np.max(np.abs(phi(s) - ref(s))))


def constant_b_residual(rs: RSData) -> float:
    """Residual of r_ij + (b_i s_j + b_j s_i)/b^2 = eps (b^2 a_ij - b_i b_j); diagnostic only."""
    if rs.b2 < 1e-24:
        raise BZeroError("b = 0")
    lhs = rs.r + (np.outer(rs.b_low, rs.s_vec) + np.outer(rs.s_vec, rs.b_low)) / rs.b2
    M = rs.b2 * rs.a - np.outer(rs.b_low, rs.b_low)
    mm = float(np.sum(M * M))
    eps = float(np.sum(lhs * M)) / mm if mm > 0 else 0.0
    return float(np.max(np.abs(lhs - eps * M)))


@dataclass
class ClassReport:
    residuals: dict
    verdicts: dict
    tolerance: float
    n_points: int
    c_hat: list = field(default_factory=list)
    isotropy_residual: float = math.nan
    details: dict = field(default_factory=dict)

    @property
    def classes(self) -> list[str]:
        return [c for c in CLASSES if self.verdicts.get(c)]

    @property
    def isotropic(self) -> bool:
        return self.isotropy_residual <= CURVATURE_TOL

    def to_json(self) -> dict:
        return {
            "residuals": self.residuals, "verdicts": self.verdicts, "classes": self.classes,
            "tolerance": self.tolerance, "n_points": self.n_points,
            "c_hat": self.c_hat, "isotropy_residual": self.isotropy_residual,
            "details": self.details,
        }


def classify(spec: MetricSpec, points, tolerance: float = ALGEBRAIC_TOL,
             isotropy_points: int | None = None, directions: int = 16) -> ClassReport:
    """Residuals of the displayed conditions for each class over ``points``.

    ``isotropy_points`` caps how many of the points also get the (slower)
    direct isotropy fit; ``0`` skips it.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    phi, n = spec.phi, spec.n
    res = {"i": 0.0, "ii": 0.0, "iii": 0.0, "iv": 0.0}
    det = {"r_plus_s": 0.0, "phi_grid": 0.0, "r_conformal_bb": 0.0, "k_spread": 0.0, "r_s_vanish": 0.0, "r_bs_structure": 0.0,
           "phi_match": math.nan}

    iv = class_iv_params(phi) if n == 2 else None
    if iv is not None:
        det["phi_match"] = phi_match_residual(phi, *iv)
        det["k1_k2_sign"] = [iv[0], iv[1], iv[2]]
    ks = []
    for x in points:
        rs = rs_decompose(spec, x)
        b = math.sqrt(max(rs.b2, 0.0))
        bs = np.outer(rs.b_low, rs.s_vec) + np.outer(rs.s_vec, rs.b_low)
        # (i)
        det["r_plus_s"] = max(det["r_plus_s"], float(np.max(np.abs(rs.r_vec + rs.s_vec))))
        s = _s_grid(phi, b)
        if len(s):
            det["phi_grid"] = max(det["phi_grid"], float(np.max(np.abs(phi_big(phi, s, rs.b2, n)))))
        # (ii): pointwise eps, and one k for all s
        M = rs.b2 * rs.a - np.outer(rs.b_low, rs.b_low)
        mm = float(np.sum(M * M))
        eps = float(np.sum(rs.r * M)) / mm if mm > 0 else 0.0
        det["r_conformal_bb"] = max(det["r_conformal_bb"], float(np.max(np.abs(rs.r - eps * M))), float(np.max(np.abs(rs.s_vec))))
        if b > 1e-12:
            for t in K_GRID:
                sv = t * b
                if not phi.in_domain(sv):
                    continue
                pk = q_pack(phi, sv, rs.b2, n)
                ks.append(-pk.Phi * (rs.b2 - sv * sv) / (2 * (n + 1) * pk.phi * pk.Delta**2))
        # (iii)
        det["r_s_vanish"] = max(det["r_s_vanish"], float(np.max(np.abs(rs.r))), float(np.max(np.abs(rs.s_vec))))
        # (iv)
        if iv is not None:
            coef = r_coefficient(iv[0], iv[1], rs.b2)
            det["r_bs_structure"] = max(det["r_bs_structure"], float(np.max(np.abs(rs.r - coef * bs))))
    if ks:
        ks = np.array(ks)
        det["k_spread"] = float(np.max(np.abs(ks - np.mean(ks))))
        det["k_fit"] = float(np.mean(ks))
    else:
        det["k_spread"] = math.inf

    res["i"] = max(det["r_plus_s"], det["phi_grid"])
    res["ii"] = max(det["r_conformal_bb"], det["k_spread"])
    res["iii"] = det["r_s_vanish"]
    res["iv"] = max(det["r_bs_structure"], det["phi_match"]) if iv is not None else math.inf
    if n != 2:
        det["iv_skipped"] = "class (iv) is two-dimensional"
    verdicts = {c: bool(res[c] <= tolerance) for c in CLASSES}

    report = ClassReport(res, verdicts, tolerance, len(points), details=det)
    m = len(points) if isotropy_points is None else min(isotropy_points, len(points))
    if m:
        ys = unit_directions(n, directions)
        worst = 0.0
        for x in points[:m]:
            rep = s_curvature_report(spec, x, ys, with_formula=False)
            report.c_hat.append(rep.c_hat)
            worst = max(worst, rep.residual)
        report.isotropy_residual = worst
    return report


def classify_iv(spec: MetricSpec, points, tolerance: float = ALGEBRAIC_TOL) -> float:
    """Class (iv) residual alone; raises for n != 2."""
    if spec.n != 2:
        raise DimensionError("class (iv) requires n = 2")
    return classify(spec, points, tolerance, isotropy_points=0).residuals["iv"]


# ---------------------------------------------------------------------------
# adapted frame
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrameData:
    b: float
    frame: np.ndarray  # columns e_1..e_n, a-orthonormal, e_1 = b^i / b
    r11: float
    r1A: np.ndarray
    rAB: np.ndarray
    s1A: np.ndarray


def adapted_frame(rs: RSData) -> FrameData:
    """Frame components with e_1 along b^i; e_2 positively oriented for n = 2."""
    b = math.sqrt(max(rs.b2, 0.0))
    if b < 1e-6:
        raise BZeroError(f"b = {b:.3e} too small for the adapted frame")
    a = rs.a
    n = a.shape[0]
    vecs = [rs.b_up / b]
    for j in range(n):
        v = np.eye(n)[j]
        for e in vecs:
            v = v - (e @ a @ v) * e
        nv = math.sqrt(max(float(v @ a @ v), 0.0))
        if nv > 1e-8:
            vecs.append(v / nv)
        if len(vecs) == n:
            break
    if len(vecs) != n:
        raise SingularFrameError("Gram-Schmidt failed to complete the frame")
    E = np.stack(vecs, axis=1)
    if n == 2 and np.linalg.det(E) < 0:
        E[:, 1] = -E[:, 1]
    R = E.T @ rs.r @ E
    S = E.T @ rs.s @ E
    return FrameData(b, E, float(R[0, 0]), R[0, 1:], R[1:, 1:], S[0, 1:])


def _frame_samples(b: float, count: int = 9) -> np.ndarray:
    return np.linspace(-0.8 * b, 0.8 * b, count)


def adapted_frame_residuals(spec: MetricSpec, x, samples=None,
                            c_hat: float | None = None) -> tuple[float, float]:
    """Max |residual| of the two split isotropy equations over (s, y^A) samples.

    ``samples`` is a sequence of (s, yA) with yA a vector of length n - 1;
    the default is nine values of s in [-0.8 b, 0.8 b] with yA = e_2.
    r_1A and s_1A are frame components of the tensors r_ij and s_ij.
    """
    n = spec.n
    ctx = point_data(spec, x)
    fr = adapted_frame(ctx.rs)
    b, phi = fr.b, spec.phi
    if c_hat is None:
        c_hat = s_curvature_report(spec, ctx.x, with_formula=False, ctx=ctx).c_hat
    if samples is None:
        yA = np.zeros(n - 1)
        yA[0] = 1.0
        samples = [(s, yA) for s in _frame_samples(b)]
    bfp = b * ctx.fp / ctx.f
    res_tangent = res_mixed = 0.0
    for s, yA in samples:
        yA = np.asarray(yA, dtype=float)
        pk = q_pack(phi, float(s), ctx.rs.b2, n)
        k2 = pk.Phi / (2 * pk.Delta**2)
        abar2 = float(yA @ yA)
        r00 = float(yA @ fr.rAB @ yA)
        lhs = k2 * (b * b - s * s) * r00
        rhs = -(s * (s * k2 - 2 * pk.Psi * b * b + bfp) * fr.r11 + (n + 1) * c_hat * b * b * pk.phi) * abar2
        res_tangent = max(res_tangent, abs(lhs - rhs))
        left = (s * pk.Phi / pk.Delta**2 - 2 * pk.Psi * b * b + bfp) * fr.r1A
        right = ((pk.Q * pk.Phi / pk.Delta**2 + 2 * pk.Psi) * b * b - bfp) * fr.s1A
        res_mixed = max(res_mixed, float(np.max(np.abs(left - right))) if n > 1 else 0.0)
    return res_tangent, res_mixed


# ---------------------------------------------------------------------------
# two-dimensional conformal PDE characterizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PDEResiduals:
    eps73: float
    closed74: float
    res75: tuple
    res76: tuple | None

    def to_json(self) -> dict:
        return {"eps73": self.eps73, "closed74": self.closed74, "res75": list(self.res75),
                "res76": None if self.res76 is None else list(self.res76)}


def pde_residuals(triple: FieldTriple, params: dict | None, x, printed_t2: bool = False) -> PDEResiduals:
    """eps from the constant-b construction, the closedness expression, and the
    residuals of the two first-order systems for sigma.

    ``params`` may carry ``b`` (constant norm, default 1) and ``a1``, ``a2``
    for the class (iv) system; without them ``res76`` is None.  The class (iv)
    T_2 includes the leading 1 in its first bracket unless ``printed_t2``.
    """
    params = dict(params or {})
    sj, xj, ej = triple.jets(x)
    sig = math.exp(float(sj.value))
    s1, s2 = sj.gradient
    xi, eta = float(xj.value), float(ej.value)
    xi1, xi2 = xj.gradient
    eta1, eta2 = ej.gradient
    q = xi * xi + eta * eta
    if q <= 0:
        raise SingularFrameError("xi^2 + eta^2 = 0")
    b = float(params.get("b", 1.0))
    num73 = q * (xi * s1 + eta * s2) - xi * eta * eta1 + xi * xi * eta2 + eta * eta * xi1 - xi * eta * xi2
    eps73 = num73 / (b * sig * q**1.5)
    closed74 = q * (xi * s2 - eta * s1) - xi * xi * eta1 - xi * eta * eta2 + xi * eta * xi1 + eta * eta * xi2
    res75 = (s1 - (eta * xi2 - xi * eta2) / q, s2 - (eta * xi1 - xi * eta1) / q)
    res76 = None
    if "a1" in params and "a2" in params:
        a1, a2 = float(params["a1"]), float(params["a2"])
        A, K = 2 * a2 + a1 * a1, 2 * a2 - 3 * a1 * a1
        T0 = xi * (1 + A * q) * (1 + K * q)
        if abs(xi) < 1e-14 or abs(T0) < 1e-14:
            raise SingularFrameError("xi or T0 vanishes")
        quart = A * K * (xi**4 - eta**4)
        T1 = (2 * xi * eta * (2 * (a2 - a1 * a1) + A * K * q) * xi2
              - (1 + 2 * (2 * a2 - a1 * a1) * xi * xi + 2 * a1 * a1 * eta * eta + quart) * eta2)
        lead = 0.0 if printed_t2 else 1.0
        T2 = ((lead + 2 * a1 * a1 * xi * xi + 2 * (2 * a2 - a1 * a1) * eta * eta - quart) * (xi * xi2 + eta * eta2)
              + xi * (1 + A * q) * (1 + K * q) * eta1)
        res76 = (
            s1 - T1 / T0,
            s2 - T2 / (xi * T0),
            xi1 + eta * (eta * eta2 + xi * xi2 + xi * eta1) / (xi * xi),
        )
    return PDEResiduals(float(eps73), float(closed74), tuple(map(float, res75)),
                        None if res76 is None else tuple(map(float, res76)))


__all__ = [
    "ALGEBRAIC_TOL", "CURVATURE_TOL", "ClassReport", "FrameData", "PDEResiduals", "StructureFit",
    "adapted_frame", "adapted_frame_residuals", "class_iv_params", "classify", "classify_iv",
    "constant_b_residual", "fit_structure", "pde_residuals", "phi_match_residual", "r_coefficient",
]
