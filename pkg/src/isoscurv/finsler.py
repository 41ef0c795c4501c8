"""Finsler-level quantities of F = alpha * phi(beta / alpha).

The spray and its y-divergence come from one third-order jet of F^2 in the
joint variables (x, y); the distortion term uses the volume density
``sigma_F = f(b) sqrt(det a)`` whose x-gradient follows from the chain rule
``d ln sigma_F = (f'/f) (r_m + s_m) / b + (1/2) d ln det a``.  Two routes to
the S-curvature are exposed: :func:`s_curvature_direct` from the definition
and :func:`s_curvature_formula` from the closed (alpha, beta) expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Jet
from .errors import BZeroError, DomainError, NullVectorError, SingularGError
from .fields import MetricSpec
from .phifn import f_of_b, f_prime, q_pack
from .riemann import RSData, rs_decompose

UNIT_BALL_VOLUME_2D = math.pi
POLAR_NODES = 512
B_FORMULA_MIN = 1e-3


@dataclass(frozen=True)
class SprayEval:
    F: float
    g: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class PointData:
    """x-dependent data shared by every direction y at one point."""

    x: np.ndarray
    rs: RSData
    b: float
    f: float
    fp: float
    dlog_sigma: np.ndarray


@dataclass(frozen=True)
class SCurvatureReport:
    x: np.ndarray
    ys: np.ndarray
    F: np.ndarray
    S_direct: np.ndarray
    S_formula: np.ndarray | None
    c_hat: float
    residual: float

    @property
    def disagreement(self) -> float:
        """max |S_direct - S_formula| / (1 + |S_direct|), or nan without a formula value."""
        if self.S_formula is None:
            return math.nan
        return float(np.max(np.abs(self.S_direct - self.S_formula) / (1.0 + np.abs(self.S_direct))))


def unit_directions(n: int = 2, count: int = 16) -> np.ndarray:
    if n == 2:
        th = 2 * math.pi * np.arange(count) / count
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    dirs = []
    eye = np.eye(n)
    for i in range(n):
        dirs += [eye[i], -eye[i]]
        for j in range(i + 1, n):
            dirs += [(eye[i] + eye[j]) / math.sqrt(2), (eye[i] - eye[j]) / math.sqrt(2)]
    return np.array(dirs[: max(count, 2 * n)])


# ---------------------------------------------------------------------------
# jets of F
# ---------------------------------------------------------------------------


def _F_jets(spec: MetricSpec, x, y, order: int, x_vars: bool):
    n = spec.n
    x = spec.check(x)
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise NullVectorError("y = 0")
    if x_vars:
        v = Jet.seed(np.concatenate([x, y]), order)
        X, Y = v[:n], v[n:]
    else:
        X = list(x)
        Y = Jet.seed(y, order)
    a = spec.a(X)
    b = spec.b(X)
    alpha2 = sum(a[i][j] * Y[i] * Y[j] for i in range(n) for j in range(n))
    beta = sum(b[i] * Y[i] for i in range(n))
    alpha = ad.sqrt(alpha2)
    s = beta / alpha
    s0 = s.value
    if not spec.phi.in_domain(s0):
        raise DomainError(f"s = {s0} outside the domain of phi")
    phi = s.compose(spec.phi.derivatives(s0, order))
    return alpha * phi, alpha2 * phi * phi


def fundamental(spec: MetricSpec, x, y) -> tuple[float, np.ndarray]:
    """F(x, y) and g_ij = (1/2) d^2 F^2 / dy^i dy^j."""
    F, L = _F_jets(spec, x, y, 2, x_vars=False)
    g = 0.5 * L.hessian()
    return F.value, g


def _derivative_tables(L: Jet, n: int, order: int):
    Lx = np.array([L.d(l) for l in range(n)])
    Lxy = np.array([[L.d(k, n + l) for l in range(n)] for k in range(n)])
    Lyy = np.array([[L.d(n + i, n + j) for j in range(n)] for i in range(n)])
    if order < 3:
        return Lx, Lxy, Lyy, None, None
    Lyyy = np.empty((n, n, n))
    Lxyy = np.empty((n, n, n))
    for a in range(n):
        for b in range(n):
            for m in range(n):
                Lyyy[a, b, m] = L.d(n + a, n + b, n + m)
                Lxyy[a, b, m] = L.d(a, n + b, n + m)
    return Lx, Lxy, Lyy, Lyyy, Lxyy


def _g_inverse(g: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(g)
    if not w[0] > 0:
        raise SingularGError(f"g_ij not positive definite (min eigenvalue {w[0]:.3e})")
    return np.linalg.inv(g)


def spray(spec: MetricSpec, x, y) -> SprayEval:
    """G^i = (1/4) g^il ([F^2]_{x^k y^l} y^k - [F^2]_{x^l})."""
    n = spec.n
    y = np.asarray(y, dtype=float)
    F, L = _F_jets(spec, x, y, 2, x_vars=True)
    Lx, Lxy, Lyy, _, _ = _derivative_tables(L, n, 2)
    g = 0.5 * Lyy
    ginv = _g_inverse(g)
    A = y @ Lxy - Lx
    return SprayEval(F.value, g, 0.25 * ginv @ A)


def spray_divergence(spec: MetricSpec, x, y) -> tuple[float, float]:
    """(F, dG^m/dy^m)."""
    n = spec.n
    y = np.asarray(y, dtype=float)
    F, L = _F_jets(spec, x, y, 3, x_vars=True)
    Lx, Lxy, Lyy, Lyyy, Lxyy = _derivative_tables(L, n, 3)
    ginv = _g_inverse(0.5 * Lyy)
    A = y @ Lxy - Lx
    # dA_l/dy^m = [F^2]_{x^k y^l y^m} y^k + [F^2]_{x^m y^l} - [F^2]_{x^l y^m}
    dA = np.einsum("klm,k->lm", Lxyy, y) + Lxy - Lxy.T
    dginv = -np.einsum("ia,abm,bl->ilm", ginv, 0.5 * Lyyy, ginv)
    dG = 0.25 * (np.einsum("ilm,l->im", dginv, A) + ginv @ dA)
    return F.value, float(np.trace(dG))


# ---------------------------------------------------------------------------
# volume form
# ---------------------------------------------------------------------------


def point_data(spec: MetricSpec, x) -> PointData:
    x = spec.check(x)
    rs = rs_decompose(spec, x)
    b = math.sqrt(max(rs.b2, 0.0))
    phi, n = spec.phi, spec.n
    f = f_of_b(phi, n, b)
    fp = f_prime(phi, n, b) if b > 0 else 0.0
    aj = spec.a_jet(x)
    # d_m ln det a = tr(a^-1 d_m a)
    dlogdet = np.einsum("ij,jim->m", rs.a_inv, aj.gradient)
    if b > 1e-12:
        dlog = (fp / f) * (rs.r_vec + rs.s_vec) / b + 0.5 * dlogdet
    else:
        dlog = 0.5 * dlogdet
    return PointData(x, rs, b, f, fp, dlog)


def sigma_bh(spec: MetricSpec, x, ctx: PointData | None = None) -> float:
    """Busemann-Hausdorff density f(b) sqrt(det a)."""
    ctx = ctx or point_data(spec, x)
    return ctx.f * math.sqrt(np.linalg.det(ctx.rs.a))


def sigma_bh_polar(spec: MetricSpec, x, nodes: int = POLAR_NODES) -> float:
    """pi / Area{y : F(x, y) < 1} with the area from r(theta) = 1 / F(x, u_theta)."""
    if spec.n != 2:
        raise ValueError("polar-area oracle is two-dimensional")
    x = spec.check(x)
    a = spec.a_matrix(x)
    bv = spec.b_vector(x)
    th = 2 * math.pi * np.arange(nodes) / nodes
    u = np.stack([np.cos(th), np.sin(th)], axis=1)
    alpha = np.sqrt(np.einsum("ti,ij,tj->t", u, a, u))
    s = (u @ bv) / alpha
    spec.phi.check(s)
    F = alpha * spec.phi(s)
    area = 0.5 * np.sum(1.0 / F**2) * (2 * math.pi / nodes)
    return UNIT_BALL_VOLUME_2D / float(area)


def dlog_sigma_bh(spec: MetricSpec, x) -> np.ndarray:
    return point_data(spec, x).dlog_sigma


# ---------------------------------------------------------------------------
# S-curvature
# ---------------------------------------------------------------------------


def s_curvature_direct(spec: MetricSpec, x, y, ctx: PointData | None = None) -> float:
    """S = dG^m/dy^m - y^m d_m ln sigma_F."""
    ctx = ctx or point_data(spec, x)
    _, div = spray_divergence(spec, ctx.x, y)
    return div - float(np.dot(y, ctx.dlog_sigma))


def s_curvature_formula(spec: MetricSpec, x, y, ctx: PointData | None = None) -> float:
    """Closed (alpha, beta) expression in terms of r_0, s_0, r_00 and the Q pack."""
    ctx = ctx or point_data(spec, x)
    if ctx.b < 1e-12:
        raise BZeroError("formula route needs b > 0")
    rs = ctx.rs
    y = np.asarray(y, dtype=float)
    alpha = math.sqrt(float(y @ rs.a @ y))
    if alpha == 0:
        raise NullVectorError("y = 0")
    s = float(rs.b_low @ y) / alpha
    pk = q_pack(spec.phi, s, rs.b2, spec.n)
    r0, s0, r00 = rs.contractions(y)
    return (
        (2.0 * pk.Psi - ctx.fp / (ctx.b * ctx.f)) * (r0 + s0)
        - pk.Phi / (2.0 * pk.Delta**2 * alpha) * (r00 - 2.0 * alpha * pk.Q * s0)
    )


def isotropy_fit(spec: MetricSpec, x, ys=None, ctx: PointData | None = None) -> tuple[float, float]:
    """Least-squares c in S = (n+1) c F; residual max|S - (n+1) c F| / max F."""
    rep = s_curvature_report(spec, x, ys, ctx=ctx, with_formula=False)
    return rep.c_hat, rep.residual


def s_curvature_report(spec: MetricSpec, x, ys=None, ctx: PointData | None = None,
                       with_formula: bool = True) -> SCurvatureReport:
    ctx = ctx or point_data(spec, x)
    ys = unit_directions(spec.n) if ys is None else np.asarray(ys, dtype=float)
    if len(ys) < 8:
        raise ValueError("isotropy fit needs at least 8 directions")
    Fs, Sd = [], []
    for y in ys:
        F, div = spray_divergence(spec, ctx.x, y)
        Fs.append(F)
        Sd.append(div - float(np.dot(y, ctx.dlog_sigma)))
    Fs, Sd = np.array(Fs), np.array(Sd)
    Sf = None
    if with_formula and ctx.b > B_FORMULA_MIN:
        Sf = np.array([s_curvature_formula(spec, ctx.x, y, ctx) for y in ys])
    k = spec.n + 1
    c = float(np.dot(Sd, Fs) / (k * np.dot(Fs, Fs)))
    resid = float(np.max(np.abs(Sd - k * c * Fs)) / np.max(Fs))
    return SCurvatureReport(ctx.x, ys, Fs, Sd, Sf, c, resid)
