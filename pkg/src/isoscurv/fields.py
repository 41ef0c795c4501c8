"""Chart fields with exact jets and the catalog of concrete (alpha, beta) pairs.

Every catalog field is a closed-form expression written over the generic
arithmetic of :mod:`isoscurv.autodiff`, so the same code evaluates plain
values, value/gradient/Hessian jets and the joint (x, y) jets used by the
spray.  Finite differences are reserved for the test suite.

The two-dimensional constructions are conformally flat,
``alpha = e^sigma |y|``, with ``beta`` either of constant length ``b``
(``b e^sigma (xi y1 + eta y2) / sqrt(xi^2 + eta^2)``) or general
(``e^sigma (xi y1 + eta y2)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Jet
from .errors import DomainError, ParamError
from .phifn import PhiModel

CONFORMAL_CONST_B = "CONFORMAL_CONST_B"
CONFORMAL_GENERAL = "CONFORMAL_GENERAL"
EXAMPLE_1_1 = "EXAMPLE_1_1"
EXAMPLE_5_1 = "EXAMPLE_5_1"
FLAT_PARALLEL = "FLAT_PARALLEL"
RANDERS_CONTROL = "RANDERS_CONTROL"

CATALOG_IDS = (
    CONFORMAL_CONST_B,
    CONFORMAL_GENERAL,
    EXAMPLE_1_1,
    EXAMPLE_5_1,
    FLAT_PARALLEL,
    RANDERS_CONTROL,
)


@dataclass(frozen=True)
class Jet2:
    """Value, gradient and Hessian of a scalar or tensor field at a point.

    For a tensor field of shape ``S``, ``gradient`` has shape ``S + (n,)`` and
    ``hessian`` shape ``S + (n, n)``.
    """

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray


def eval_jet(field: Callable, x: Sequence[float]) -> Jet2:
    """Second-order jet of ``field`` at ``x`` by forward-mode differentiation."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    out = field(Jet.seed(x, 2))
    arr = np.asarray(out, dtype=object)
    shape = arr.shape
    val = np.empty(shape)
    grad = np.empty(shape + (n,))
    hess = np.empty(shape + (n, n))
    for idx in np.ndindex(*shape) if shape else [()]:
        e = arr[idx] if shape else out
        if isinstance(e, Jet):
            val[idx] = e.value
            grad[idx] = e.gradient()
            hess[idx] = e.hessian()
        else:
            val[idx] = float(e)
            grad[idx] = 0.0
            hess[idx] = 0.0
    return Jet2(val, grad, hess)


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    """``sum c_e x^e + sum w ln(1 + q |x|^2)``.

    ``poly`` maps exponent tuples to coefficients; ``log_radial`` lists
    ``(w, q)`` pairs.  Enough to express every construction in the catalog
    while keeping closed forms.
    """

    poly: tuple = ()
    log_radial: tuple = ()

    @classmethod
    def from_dict(cls, d: dict | float | int, name: str = "field") -> "ScalarField":
        if isinstance(d, (int, float)):
            return cls(poly=(((0, 0), float(d)),))
        unknown = set(d) - {"poly", "log_radial"}
        if unknown:
            raise ParamError(f"{name}: unknown key {sorted(unknown)[0]!r}")
        poly = []
        for term in d.get("poly", []):
            try:
                exps, coef = term
                poly.append((tuple(int(e) for e in exps), float(coef)))
            except (TypeError, ValueError):
                raise ParamError(f"{name}.poly: malformed term {term!r}") from None
        logs = []
        for term in d.get("log_radial", []):
            try:
                w, q = term
                logs.append((float(w), float(q)))
            except (TypeError, ValueError):
                raise ParamError(f"{name}.log_radial: malformed term {term!r}") from None
        return cls(tuple(poly), tuple(logs))

    def to_dict(self) -> dict:
        return {
            "poly": [[list(e), c] for e, c in self.poly],
            "log_radial": [[w, q] for w, q in self.log_radial],
        }

    def __call__(self, x: Sequence):
        out = 0.0
        for exps, coef in self.poly:
            term = coef
            for xi, e in zip(x, exps):
                for _ in range(e):
                    term = term * xi
            out = out + term
        if self.log_radial:
            r2 = sum(xi * xi for xi in x)
            for w, q in self.log_radial:
                out = out + w * ad.log(1.0 + q * r2)
        return out

    def plus(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.poly + other.poly, self.log_radial + other.log_radial)

    def is_zero(self) -> bool:
        return not self.log_radial and all(c == 0 for _, c in self.poly)

    def domain_ok(self, x: np.ndarray) -> bool:
        r2 = float(np.dot(x, x))
        return all(1.0 + q * r2 > 0 for _, q in self.log_radial)


def const_field(c: float) -> ScalarField:
    return ScalarField(poly=(((0, 0), float(c)),))


def coord(i: int, c: float = 1.0) -> ScalarField:
    e = [0, 0]
    e[i] = 1
    return ScalarField(poly=((tuple(e), float(c)),))


@dataclass(frozen=True)
class FieldTriple:
    sigma: ScalarField
    xi: ScalarField
    eta: ScalarField

    def jets(self, x: Sequence[float]) -> tuple[Jet2, Jet2, Jet2]:
        return eval_jet(self.sigma, x), eval_jet(self.xi, x), eval_jet(self.eta, x)


def sigma_example_5_1(a1: float, a2: float) -> ScalarField:
    """-(1/4){ln[1 + (2a2 + a1^2)|x|^2] + 3 ln[1 + (2a2 - 3a1^2)|x|^2]}."""
    return ScalarField(log_radial=((-0.25, 2 * a2 + a1 * a1), (-0.75, 2 * a2 - 3 * a1 * a1)))


def rotation_triple(sigma: ScalarField) -> FieldTriple:
    """xi = x2, eta = -x1, so that b^2 = |x|^2 for the general construction."""
    return FieldTriple(sigma, coord(1), coord(0, -1.0))


# ---------------------------------------------------------------------------
# metric specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricSpec:
    """A concrete (alpha, beta, phi) on a single chart.

    ``alpha_field`` and ``beta_field`` take a coordinate sequence of generic
    numbers (floats or jets) and return ``a_ij`` as nested lists and ``b_i``
    as a list.  ``radius`` bounds the declared chart disk.
    """

    n: int
    alpha_field: Callable[[Sequence], list]
    beta_field: Callable[[Sequence], list]
    phi: PhiModel
    catalog_id: str
    params: dict = field(default_factory=dict)
    radius: float = 1.0
    triple: FieldTriple | None = None
    const_b: float | None = None
    _guards: tuple = ()

    def check(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DomainError(f"expected a point of dimension {self.n}, got shape {x.shape}")
        if not np.all(np.isfinite(x)) or float(np.dot(x, x)) >= self.radius**2:
            raise DomainError(f"x={x.tolist()} outside the chart disk of radius {self.radius}")
        for guard in self._guards:
            msg = guard(x)
            if msg:
                raise DomainError(f"x={x.tolist()}: {msg}")
        return x

    def a(self, x) -> list:
        return self.alpha_field(x)

    def b(self, x) -> list:
        return self.beta_field(x)

    def a_jet(self, x: Sequence[float]) -> Jet2:
        return eval_jet(self.alpha_field, self.check(x))

    def b_jet(self, x: Sequence[float]) -> Jet2:
        return eval_jet(self.beta_field, self.check(x))

    def a_matrix(self, x: Sequence[float]) -> np.ndarray:
        x = self.check(x)
        return np.array([[ad.value(e) for e in row] for row in self.alpha_field(x)], dtype=float)

    def b_vector(self, x: Sequence[float]) -> np.ndarray:
        x = self.check(x)
        return np.array([ad.value(e) for e in self.beta_field(x)], dtype=float)

    def b_norm2(self, x: Sequence[float]) -> float:
        a = self.a_matrix(x)
        bv = self.b_vector(x)
        return float(bv @ np.linalg.solve(a, bv))

    def with_phi(self, phi: PhiModel) -> "MetricSpec":
        params = dict(self.params, phi=phi.to_dict())
        return MetricSpec(
            self.n, self.alpha_field, self.beta_field, phi, self.catalog_id, params,
            self.radius, self.triple, self.const_b, self._guards,
        )

    def sample_points(self, rng: np.random.Generator, count: int, rmax: float | None = None,
                      min_b: float = 0.0, max_tries: int = 100000) -> np.ndarray:
        """Uniform points in the disk of radius ``rmax`` inside the domain."""
        rmax = 0.9 * self.radius if rmax is None else rmax
        pts = []
        tries = 0
        while len(pts) < count:
            tries += 1
            if tries > max_tries:
                raise DomainError("could not draw enough points inside the domain")
            r = rmax * math.sqrt(rng.uniform())
            th = rng.uniform(0.0, 2 * math.pi)
            x = np.array([r * math.cos(th), r * math.sin(th)])
            if self.n > 2:
                x = np.concatenate([x, np.zeros(self.n - 2)])
            try:
                self.check(x)
                if min_b > 0 and math.sqrt(self.b_norm2(x)) <= min_b:
                    continue
            except DomainError:
                continue
            pts.append(x)
        return np.array(pts)


def _conformal_alpha(sigma: ScalarField):
    def alpha(x):
        e2 = ad.exp(2.0 * sigma(x))
        return [[e2, 0.0], [0.0, e2]]

    return alpha


def _general_beta(t: FieldTriple):
    def beta(x):
        e = ad.exp(t.sigma(x))
        return [e * t.xi(x), e * t.eta(x)]

    return beta


def _const_b_beta(t: FieldTriple, b: float):
    def beta(x):
        xi, eta = t.xi(x), t.eta(x)
        scale = b * ad.exp(t.sigma(x)) / ad.sqrt(xi * xi + eta * eta)
        return [scale * xi, scale * eta]

    return beta


def _triple_guards(t: FieldTriple, phi: PhiModel, norm: Callable | None):
    def logs_ok(x):
        for name, f in (("sigma", t.sigma), ("xi", t.xi), ("eta", t.eta)):
            if not f.domain_ok(x):
                return f"log argument of {name} not positive"
        return None

    def frame_ok(x):
        if float(t.xi(x)) ** 2 + float(t.eta(x)) ** 2 <= 1e-24:
            return "xi^2 + eta^2 = 0"
        return None

    def phi_ok(x):
        if norm is None:
            return None
        b = norm(x)
        if not b < phi.b_o or not phi.in_domain(b):
            return f"||beta|| = {b} outside the domain of phi"
        return None

    return (logs_ok, frame_ok, phi_ok)


def _get(params: dict, key: str, default):
    return params[key] if key in params else default


_DEFAULT_CONST_B = {
    "b": 0.5,
    "sigma": {"poly": [[[1, 0], 0.2], [[0, 2], -0.15], [[1, 1], 0.1]]},
    "xi": {"poly": [[[0, 0], 1.0], [[0, 1], 0.25], [[2, 0], 0.1]]},
    "eta": {"poly": [[[1, 0], 0.3], [[0, 0], -0.1], [[1, 1], 0.2]]},
    "phi": {"variant": "class-iv", "k1": 1, "k2": 2, "sign": 1},
}

_DEFAULT_GENERAL = {
    "sigma": {"poly": [[[1, 0], -0.1], [[0, 1], 0.15], [[2, 0], 0.1], [[0, 2], -0.05]]},
    "xi": {"poly": [[[0, 0], 0.3], [[0, 1], 0.2], [[1, 1], 0.1]]},
    "eta": {"poly": [[[0, 0], -0.2], [[1, 0], 0.25], [[0, 2], 0.1]]},
    "phi": {"variant": "excluded", "k1": 1.0, "k2": 1.0, "k3": 0.4},
}

_DEFAULT_RANDERS = {
    "sigma": {"poly": [[[1, 0], 0.1], [[0, 1], -0.2], [[1, 1], 0.15]]},
    "xi": {"poly": [[[0, 0], 0.3], [[0, 1], 0.2]]},
    "eta": {"poly": [[[1, 0], -0.2], [[1, 1], 0.1], [[0, 0], 0.1]]},
}

_KNOWN_PARAMS = {
    CONFORMAL_CONST_B: {"b", "sigma", "xi", "eta", "phi", "radius"},
    CONFORMAL_GENERAL: {"sigma", "xi", "eta", "phi", "radius"},
    EXAMPLE_1_1: {"sigma_cubic", "phi", "radius"},
    EXAMPLE_5_1: {"a1", "a2", "sigma_cubic", "radius"},
    FLAT_PARALLEL: {"b", "phi", "radius", "n"},
    RANDERS_CONTROL: {"sigma", "xi", "eta", "radius"},
}


def build_catalog_spec(catalog_id: str, params: dict | None = None) -> MetricSpec:
    """Instantiate one of the catalog constructions.

    ``sigma_cubic`` (examples only) adds ``c (x^1)^3`` to sigma, the negative
    control used to show the pipeline detects a broken example.
    """
    params = dict(params or {})
    cid = catalog_id.upper().replace("-", "_")
    if cid not in _KNOWN_PARAMS:
        raise ParamError(f"unknown catalog id {catalog_id!r}")
    unknown = set(params) - _KNOWN_PARAMS[cid]
    if unknown:
        raise ParamError(f"{cid}: unknown parameter {sorted(unknown)[0]!r}")
    radius = float(_get(params, "radius", 1.0))

    if cid == FLAT_PARALLEL:
        n = int(_get(params, "n", 2))
        bvec = [float(v) for v in _get(params, "b", [0.5, 0.0] + [0.0] * (n - 2))]
        if len(bvec) != n:
            raise ParamError("FLAT_PARALLEL: len(b) must equal n")
        phi = PhiModel.from_dict(_get(params, "phi", {"variant": "randers"}))
        bnorm = math.sqrt(sum(v * v for v in bvec))
        if not bnorm < phi.b_o:
            raise ParamError(f"FLAT_PARALLEL: ||b|| = {bnorm} outside the domain of phi")
        eye = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
        return MetricSpec(
            n, lambda x: [row[:] for row in eye], lambda x: list(bvec), phi, cid,
            {"b": bvec, "phi": phi.to_dict(), "n": n}, radius, None, bnorm,
        )

    if cid in (EXAMPLE_1_1, EXAMPLE_5_1):
        if cid == EXAMPLE_1_1:
            sigma = ScalarField(log_radial=((-0.25, 4.0),))
            phi = PhiModel.from_dict(_get(params, "phi", {"variant": "class-iv", "k1": 0, "k2": 4, "sign": 1}))
            echo = {"phi": phi.to_dict()}
        else:
            a1 = float(_get(params, "a1", 1.0))
            a2 = float(_get(params, "a2", 1.5))
            if a1 == 0:
                raise ParamError("EXAMPLE_5_1: a1 = 0 gives k1 = k2 (excluded)")
            k1, k2 = _exact(2 * _q(a2) - 3 * _q(a1) ** 2), _exact(2 * _q(a2) + _q(a1) ** 2)
            phi = PhiModel.class_iv(k1, k2, 1 if a1 > 0 else -1)
            sigma = sigma_example_5_1(a1, a2)
            echo = {"a1": a1, "a2": a2}
        cubic = float(_get(params, "sigma_cubic", 0.0))
        if cubic:
            sigma = sigma.plus(ScalarField(poly=(((3, 0), cubic),)))
            echo["sigma_cubic"] = cubic
        triple = rotation_triple(sigma)
        norm = lambda x: math.hypot(x[0], x[1])
        return MetricSpec(
            2, _conformal_alpha(sigma), _general_beta(triple), phi, cid, echo, radius,
            triple, None, _triple_guards(triple, phi, norm),
        )

    defaults = {
        CONFORMAL_CONST_B: _DEFAULT_CONST_B,
        CONFORMAL_GENERAL: _DEFAULT_GENERAL,
        RANDERS_CONTROL: _DEFAULT_RANDERS,
    }[cid]
    merged = {**defaults, **params}
    triple = FieldTriple(
        ScalarField.from_dict(merged["sigma"], "sigma"),
        ScalarField.from_dict(merged["xi"], "xi"),
        ScalarField.from_dict(merged["eta"], "eta"),
    )
    if triple.xi.is_zero() and triple.eta.is_zero():
        raise ParamError(f"{cid}: xi and eta are both identically zero")
    phi = PhiModel.randers() if cid == RANDERS_CONTROL else PhiModel.from_dict(merged["phi"])
    echo = {k: v for k, v in merged.items() if k != "radius"}
    echo["phi"] = phi.to_dict()
    if cid == CONFORMAL_CONST_B:
        b = float(merged["b"])
        if not 0 < b < phi.b_o:
            raise ParamError(f"CONFORMAL_CONST_B: b = {b} must lie in (0, b_o)")
        beta = _const_b_beta(triple, b)
        guards = _triple_guards(triple, phi, None)
        const_b = b
    else:
        beta = _general_beta(triple)
        norm = lambda x: math.hypot(float(triple.xi(x)), float(triple.eta(x)))
        guards = _triple_guards(triple, phi, norm)
        const_b = None
    return MetricSpec(
        2, _conformal_alpha(triple.sigma), beta, phi, cid, echo, radius, triple, const_b, guards,
    )


def _q(v: float):
    from fractions import Fraction

    return Fraction(v).limit_denominator(10**6)


def _exact(v):
    return int(v) if v.denominator == 1 else v
