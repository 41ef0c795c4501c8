"""Profile functions phi(s) of (alpha, beta)-metrics and the scalars built on them.

Three families are supported:

* ``excluded``: ``k1*sqrt(1 + k2 s^2) + k3 s`` (Randers is ``(1, 0, 1)``),
* ``class_iv``: the two-dimensional family
  ``((1+k1 s^2)(1+k2 s^2))^(1/4) * exp(int_0^s tau)`` with
  ``tau = +-sqrt(k2-k1) / (2 (1+k1 s^2) sqrt(1+k2 s^2))``,
* ``series``: a polynomial ``a0 + a1 s + ... + aN s^N``.

For ``class_iv`` the integral of tau has the closed form
``+-(1/2) artanh(sqrt(k2-k1) s / sqrt(1+k2 s^2))``, valid exactly where
``1 + k1 s^2 > 0``.  All derivatives come from forward-mode jets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import optimize

from . import autodiff as ad
from .autodiff import Jet
from .errors import (
    DomainError,
    ParamError,
    QuadratureError,
    SingularDeltaError,
    SingularPhiError,
)

EXCLUDED = "excluded"
CLASS_IV = "class_iv"
SERIES = "series"

_SINGULAR = 1e-14


@dataclass(frozen=True)
class PhiModel:
    variant: str
    params: tuple
    b_o: float = math.inf
    coeffs: tuple = field(default=(), compare=False)

    # constructors ---------------------------------------------------------
    @classmethod
    def excluded(cls, k1: float, k2: float, k3: float, b_o: float | None = None) -> "PhiModel":
        if k1 <= 0:
            raise ParamError("excluded family requires k1 > 0")
        if b_o is None:
            b_o = _excluded_bound(k1, k2, k3)
        return cls(EXCLUDED, (float(k1), float(k2), float(k3)), b_o)

    @classmethod
    def randers(cls) -> "PhiModel":
        return cls.excluded(1.0, 0.0, 1.0)

    @classmethod
    def class_iv(cls, k1, k2, sign: int = 1, b_o: float | None = None) -> "PhiModel":
        if not k2 > k1:
            raise ParamError(f"class (iv) requires k2 > k1, got k1={k1}, k2={k2}")
        if sign not in (1, -1):
            raise ParamError("sign must be +1 or -1")
        if b_o is None:
            b_o = min([1.0 / math.sqrt(-k) for k in (k1, k2) if k < 0], default=math.inf)
        return cls(CLASS_IV, (float(k1), float(k2), int(sign)), b_o, (k1, k2))

    @classmethod
    def sqrt_quadratic(cls, k: float) -> "PhiModel":
        """sqrt(1 + k s^2), the degenerate k1 = k2 member (Phi vanishes)."""
        return cls.excluded(1.0, k, 0.0)

    @classmethod
    def series(cls, coeffs: Sequence, b_o: float = 1.0) -> "PhiModel":
        if not coeffs:
            raise ParamError("series needs at least one coefficient")
        exact = tuple(Fraction(c) if not isinstance(c, float) else Fraction(c) for c in coeffs)
        return cls(SERIES, tuple(float(c) for c in coeffs), b_o, exact)

    @classmethod
    def riemannian(cls) -> "PhiModel":
        return cls.series([1], b_o=math.inf)

    @classmethod
    def from_dict(cls, d: dict) -> "PhiModel":
        d = dict(d)
        kind = d.pop("variant", None) or d.pop("kind", None)
        b_o = d.pop("b_o", None)
        try:
            if kind in ("class-iv", CLASS_IV):
                return cls.class_iv(_num(d.pop("k1")), _num(d.pop("k2")), int(d.pop("sign", 1)), b_o)
            if kind in ("excluded", "excluded-family"):
                return cls.excluded(d.pop("k1"), d.pop("k2"), d.pop("k3"), b_o)
            if kind == "randers":
                return cls.randers()
            if kind == "riemannian":
                return cls.riemannian()
            if kind == "series":
                return cls.series([_num(c) for c in d.pop("coeffs")], b_o if b_o is not None else 1.0)
        except KeyError as exc:
            raise ParamError(f"phi: missing key {exc.args[0]!r}") from None
        if kind is None:
            raise ParamError("phi: missing key 'variant'")
        raise ParamError(f"phi: unknown variant {kind!r}")

    def to_dict(self) -> dict:
        if self.variant == CLASS_IV:
            k1, k2 = self.coeffs
            return {"variant": "class-iv", "k1": _jsonnum(k1), "k2": _jsonnum(k2), "sign": self.params[2]}
        if self.variant == EXCLUDED:
            k1, k2, k3 = self.params
            return {"variant": "excluded", "k1": k1, "k2": k2, "k3": k3}
        return {"variant": "series", "coeffs": [_jsonnum(c) for c in self.coeffs], "b_o": self.b_o}

    # evaluation -----------------------------------------------------------
    def __call__(self, s):
        """phi(s) for a float, numpy array or Jet (no domain check)."""
        if self.variant == CLASS_IV:
            k1, k2, sign = self.params
            s2 = s * s
            base = ((1.0 + k1 * s2) * (1.0 + k2 * s2)) ** 0.25
            if k2 == k1:
                return base
            u = math.sqrt(k2 - k1) * s / ad.sqrt(1.0 + k2 * s2)
            return base * ad.exp(0.5 * sign * ad.artanh(u))
        if self.variant == EXCLUDED:
            k1, k2, k3 = self.params
            return k1 * ad.sqrt(1.0 + k2 * (s * s)) + k3 * s
        out = 0.0 * s + self.params[-1]
        for a in reversed(self.params[:-1]):
            out = out * s + a
        return out

    def in_domain(self, s) -> np.ndarray | bool:
        s = np.asarray(s, dtype=float)
        ok = np.abs(s) < self.b_o
        if self.variant == CLASS_IV:
            k1, k2, _ = self.params
            ok &= (1.0 + k1 * s * s > 0) & (1.0 + k2 * s * s > 0)
        elif self.variant == EXCLUDED:
            _, k2, _ = self.params
            ok &= 1.0 + k2 * s * s > 0
        return ok

    def check(self, s) -> None:
        if not np.all(self.in_domain(s)):
            raise DomainError(f"s={s} outside the domain of phi ({self.variant}, b_o={self.b_o})")

    def derivatives(self, s, order: int = 3) -> np.ndarray:
        """phi and its derivatives through ``order`` (stacked on axis 0)."""
        self.check(s)
        return ad.taylor1(self, s, order)

    @property
    def a1_a2(self) -> tuple[float, float]:
        d = self.derivatives(0.0, 2)
        return float(d[1]), float(d[2]) / 2.0


def _num(v):
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, int):
        return Fraction(v)
    return v


def _jsonnum(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else str(v)
    return v


def _excluded_bound(k1: float, k2: float, k3: float) -> float:
    bounds = []
    if k2 < 0:
        bounds.append(1.0 / math.sqrt(-k2))
    denom = k3 * k3 - k1 * k1 * k2
    if k3 != 0 and denom > 0:
        bounds.append(k1 / math.sqrt(denom))
    return min(bounds, default=math.inf)


# ---------------------------------------------------------------------------
# phi jet and the Q pack
# ---------------------------------------------------------------------------


def phi_jet(model: PhiModel, s: float) -> tuple[float, float, float, float]:
    d = model.derivatives(float(s), 3)
    return tuple(float(v) for v in d)


@dataclass(frozen=True)
class PhiPack:
    s: float
    b2: float
    n: int
    phi: float
    Q: float
    Qp: float
    Qpp: float
    Delta: float
    Psi: float
    Phi: float
    Upsilon: float


def _pack_jets(model: PhiModel, s, b2: float, n: int):
    t = Jet.variable(s, 0, 1, 4)
    phi = model(t)
    dphi = phi.diff(0)
    denom = phi - t * dphi
    if np.any(np.abs(denom.value) < _SINGULAR):
        raise SingularPhiError(f"phi - s phi' = 0 at s={s}")
    Q = dphi / denom
    Qp = Q.diff(0)
    Qpp = Qp.diff(0)
    w = b2 - t * t
    Delta = 1.0 + t * Q + w * Qp
    if np.any(np.abs(Delta.value) < _SINGULAR):
        raise SingularDeltaError(f"Delta = 0 at s={s}, b^2={b2}")
    Psi = Qp / (2.0 * Delta)
    Phi = -(Q - t * Qp) * (n * Delta + t * Q + 1.0) - w * (1.0 + t * Q) * Qpp
    return phi, Q, Qp, Qpp, Delta, Psi, Phi


def q_pack(model: PhiModel, s: float, b2: float, n: int = 2) -> PhiPack:
    """Q, Q', Q'', Delta, Psi, Phi and Upsilon at (s, b^2).

    Upsilon = d/ds [s Phi / Delta^2 - 2 Psi b^2] is read off the first-order
    coefficient of the assembled jet, so phi is expanded to fourth order.
    """
    s = float(s)
    if s * s > b2 * (1.0 + 1e-12) + 1e-300:
        raise DomainError(f"q_pack needs s^2 <= b^2, got s={s}, b^2={b2}")
    model.check(s)
    phi, Q, Qp, Qpp, Delta, Psi, Phi = _pack_jets(model, s, b2, n)
    t = Jet.variable(s, 0, 1, 1)
    Y = t * Phi / (Delta * Delta) - 2.0 * b2 * Psi
    return PhiPack(
        s=s, b2=b2, n=n,
        phi=phi.value, Q=Q.value, Qp=Qp.value, Qpp=Qpp.value,
        Delta=Delta.value, Psi=Psi.value, Phi=Phi.value, Upsilon=Y.d(0),
    )


def phi_big(model: PhiModel, s, b2, n: int = 2):
    """Vectorised Phi(s, b^2) for arrays of s (no Upsilon)."""
    s = np.asarray(s, dtype=float)
    model.check(s)
    *_, Phi = _pack_jets(model, s, b2, n)
    return Phi.value


# ---------------------------------------------------------------------------
# volume factor f(b)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=16)
def _gl(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * math.pi * (x + 1.0), 0.5 * math.pi * w


def _fb_fixed(model: PhiModel, n: int, b: float, nodes: int) -> float:
    t, w = _gl(nodes)
    weight = np.sin(t) ** (n - 2)
    arg = b * np.cos(t)
    model.check(arg)
    phi = model(arg)
    if np.any(phi <= 0):
        raise DomainError(f"phi(b cos t) <= 0 for b={b}")
    return float(np.dot(w, weight) / np.dot(w, weight / phi**n))


def _fb_adaptive(model: PhiModel, n: int, b: float, nodes: int = 64, rtol: float = 1e-12) -> tuple[float, int]:
    prev = _fb_fixed(model, n, b, nodes)
    for _ in range(4):
        nodes *= 2
        cur = _fb_fixed(model, n, b, nodes)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur, nodes
        prev = cur
    raise QuadratureError(f"f(b) quadrature did not converge at b={b} with {nodes} nodes")


def f_of_b(model: PhiModel, n: int, b: float) -> float:
    """Ratio of int_0^pi sin^(n-2) t dt to int_0^pi sin^(n-2) t / phi(b cos t)^n dt."""
    if b < 0:
        raise DomainError("f(b) needs b >= 0")
    if model.variant == SERIES and model.params == (1.0,):
        return 1.0
    return _fb_adaptive(model, n, b)[0]


def f_prime(model: PhiModel, n: int, b: float) -> float:
    """f'(b) by 5-point central differences with one Richardson step.

    The quadrature node count is frozen at the value that converged at ``b``
    so every stencil point integrates with the same rule.  f is even in b, so
    stencil points below zero are legitimate.
    """
    if model.variant == SERIES and model.params == (1.0,):
        return 0.0
    _, nodes = _fb_adaptive(model, n, b)
    h = 1e-4 * (1.0 + b)

    def d5(h):
        f = lambda x: _fb_fixed(model, n, x, nodes)
        return (f(b - 2 * h) - 8 * f(b - h) + 8 * f(b + h) - f(b + 2 * h)) / (12 * h)

    return (16.0 * d5(h / 2) - d5(h)) / 15.0


def f_class_iv_closed(k1: float, b: float) -> float:
    return math.sqrt(1.0 + k1 * b * b)


def f_randers_closed(b: float) -> float:
    return (1.0 - b * b) ** 1.5


# ---------------------------------------------------------------------------
# regularity
# ---------------------------------------------------------------------------


def _regularity_expr(model: PhiModel, s: np.ndarray, rho: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    out = np.full(s.shape, -np.inf)
    ok = model.in_domain(s)
    if np.any(ok):
        d = ad.taylor1(model, s[ok], 2)
        rho_ok = np.broadcast_to(rho, s.shape)[ok]
        vals = d[0] - s[ok] * d[1] + (rho_ok**2 - s[ok] ** 2) * d[2]
        out[ok] = np.where(np.isfinite(vals), vals, -np.inf)
    return out


def regularity_margin(model: PhiModel, b0: float) -> float:
    """min of phi - s phi' + (rho^2 - s^2) phi'' over |s| <= rho <= b0.

    Positive means F is a regular metric wherever ||beta|| <= b0.  Points where
    phi is undefined count as -inf rather than raising.
    """
    rhos = np.linspace(0.0, b0, 41)
    unit = np.linspace(-1.0, 1.0, 401)
    S = rhos[:, None] * unit[None, :]
    R = np.broadcast_to(rhos[:, None], S.shape)
    vals = _regularity_expr(model, S, R)
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    best = float(vals[i, j])
    rho = rhos[i]
    if not np.isfinite(best) or rho == 0.0:
        return best
    lo, hi = S[i, max(j - 1, 0)], S[i, min(j + 1, S.shape[1] - 1)]
    g = lambda s: float(_regularity_expr(model, np.array([s]), np.array([rho]))[0])
    try:
        res = optimize.minimize_scalar(g, bracket=(lo, S[i, j], hi), method="golden")
        if lo <= res.x <= hi and res.fun < best:
            best = float(res.fun)
    except ValueError:
        # grid minimum sits on the boundary or a flat stretch
        pass
    return best
