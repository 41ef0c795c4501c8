"""Forward-mode automatic differentiation with truncated multivariate Taylor jets.

A :class:`Jet` holds the Taylor coefficients of a smooth function of ``nvars``
variables around a base point, truncated at total degree ``order``.  With
``order=1`` this is an ordinary dual number, with ``order=2`` a hyper-dual
number; the finsler layer uses ``order=3`` in the joint (x, y) variables so
that the y-divergence of the spray comes out of a single pass.

The free functions :func:`sqrt`, :func:`exp`, :func:`log` and :func:`artanh`
accept floats, numpy arrays or jets, which lets one closed-form expression
serve for plain evaluation, vectorised quadrature and differentiation.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np


class _Basis:
    """Monomials of total degree <= order, graded by degree.

    The ordering of each degree block does not depend on ``order``, so the
    basis of a lower order is a prefix of the basis of a higher one.
    """

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        exps: list[tuple[int, ...]] = []
        for deg in range(order + 1):
            exps.extend(_exponents(nvars, deg))
        self.exps = exps
        self.size = len(exps)
        self.index = {e: i for i, e in enumerate(exps)}
        self.degree = np.array([sum(e) for e in exps])
        # multiplication table
        ii, jj, kk = [], [], []
        for i, ei in enumerate(exps):
            for j, ej in enumerate(exps):
                if sum(ei) + sum(ej) <= order:
                    ii.append(i)
                    jj.append(j)
                    kk.append(self.index[tuple(a + b for a, b in zip(ei, ej))])
        self.mul_i = np.array(ii, dtype=np.intp)
        self.mul_j = np.array(jj, dtype=np.intp)
        self.mul_k = np.array(kk, dtype=np.intp)
        self.scatter = np.zeros((self.size, len(kk)))
        self.scatter[self.mul_k, np.arange(len(kk))] = 1.0
        # factorial weights turning coefficients into partial derivatives
        self.fact = np.array(
            [math.prod(math.factorial(a) for a in e) for e in exps], dtype=float
        )


def _exponents(nvars: int, deg: int):
    if nvars == 1:
        yield (deg,)
        return
    for first in range(deg, -1, -1):
        for rest in _exponents(nvars - 1, deg - first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def basis(nvars: int, order: int) -> _Basis:
    return _Basis(nvars, order)


class Jet:
    """Truncated Taylor expansion; ``c`` has shape ``(basis size,) + batch``.

    A trailing batch shape evaluates many base points at once (used for
    vectorised derivative tables of phi).
    """

    __slots__ = ("c", "b")
    __array_ufunc__ = None

    def __init__(self, coeffs: np.ndarray, b: _Basis):
        self.c = coeffs
        self.b = b

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, nvars: int, order: int) -> "Jet":
        b = basis(nvars, order)
        value = np.asarray(value, dtype=float)
        c = np.zeros((b.size,) + value.shape)
        c[0] = value
        return cls(c, b)

    @classmethod
    def variable(cls, value, var: int, nvars: int, order: int) -> "Jet":
        b = basis(nvars, order)
        value = np.asarray(value, dtype=float)
        c = np.zeros((b.size,) + value.shape)
        c[0] = value
        if order >= 1:
            e = [0] * nvars
            e[var] = 1
            c[b.index[tuple(e)]] = 1.0
        return cls(c, b)

    @classmethod
    def seed(cls, point: Sequence[float], order: int) -> list["Jet"]:
        """Independent variables ``point[i] + dv_i``."""
        n = len(point)
        return [cls.variable(float(p), i, n, order) for i, p in enumerate(point)]

    # accessors ----------------------------------------------------------
    @property
    def value(self):
        v = self.c[0]
        return float(v) if v.ndim == 0 else v

    @property
    def order(self) -> int:
        return self.b.order

    @property
    def nvars(self) -> int:
        return self.b.nvars

    def coeff(self, exps: Sequence[int]):
        return self.c[self.b.index[tuple(exps)]]

    def d(self, *vars: int) -> float:
        """Partial derivative with respect to the listed variables."""
        e = [0] * self.b.nvars
        for v in vars:
            e[v] += 1
        i = self.b.index.get(tuple(e))
        if i is None:
            raise ValueError(f"derivative of degree {len(vars)} exceeds jet order")
        out = self.c[i] * self.b.fact[i]
        return float(out) if out.ndim == 0 else out

    def gradient(self) -> np.ndarray:
        return np.array([self.d(i) for i in range(self.nvars)])

    def hessian(self) -> np.ndarray:
        n = self.nvars
        h = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                h[i, j] = h[j, i] = self.d(i, j)
        return h

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        nb = basis(self.nvars, order)
        return Jet(self.c[: nb.size].copy(), nb)

    def diff(self, var: int) -> "Jet":
        """Derivative as a jet; exact through one degree less."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        nb = basis(self.nvars, self.order - 1)
        out = np.zeros((nb.size,) + self.c.shape[1:])
        for i, e in enumerate(self.b.exps):
            if e[var] and sum(e) <= self.order:
                lower = list(e)
                lower[var] -= 1
                j = nb.index.get(tuple(lower))
                if j is not None:
                    out[j] += e[var] * self.c[i]
        return Jet(out, nb)

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.b is self.b:
                return self, other
            if other.nvars != self.nvars:
                raise ValueError("jets over different variable sets")
            o = min(self.order, other.order)
            return self.truncate(o), other.truncate(o)
        return None

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is None:
            c = self.c.copy()
            c[0] += other
            return Jet(c, self.b)
        a, b = pair
        return Jet(a.c + b.c, a.b)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.b)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        pair = self._coerce(other)
        if pair is None:
            return Jet(self.c * other, self.b)
        a, b = pair
        bs = a.b
        prod = a.c[bs.mul_i] * b.c[bs.mul_j]
        return Jet(np.tensordot(bs.scatter, prod, axes=1), bs)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.c / other, self.b)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, int) and p >= 0:
            out = Jet.constant(1.0, self.nvars, self.order)
            base = self
            while p:
                if p & 1:
                    out = out * base
                p >>= 1
                if p:
                    base = base * base
            return out
        return self.power(float(p))

    def __repr__(self):
        return f"Jet(value={self.value!r}, nvars={self.nvars}, order={self.order})"

    # elementary functions -------------------------------------------------
    def compose(self, derivs: Sequence[float]) -> "Jet":
        """f(self) given f and its derivatives at ``self.value``.

        ``derivs[k]`` is the k-th derivative; at least ``order + 1`` entries.
        """
        if len(derivs) < self.order + 1:
            raise ValueError("not enough derivatives for the jet order")
        h = Jet(self.c.copy(), self.b)
        h.c[0] = 0.0
        out = Jet.constant(derivs[0], self.nvars, self.order)
        hk = None
        for k in range(1, self.order + 1):
            hk = h if hk is None else hk * h
            out = out + hk * (derivs[k] / math.factorial(k))
        return out

    def power(self, p: float) -> "Jet":
        x0 = self.c[0]
        derivs = []
        coef = 1.0
        for k in range(self.order + 1):
            derivs.append(coef * np.power(x0, p - k))
            coef *= p - k
        return self.compose(derivs)

    def reciprocal(self) -> "Jet":
        x0 = self.c[0]
        if np.any(x0 == 0.0):
            raise ZeroDivisionError("jet with zero value")
        derivs = [(-1) ** k * math.factorial(k) / x0 ** (k + 1) for k in range(self.order + 1)]
        return self.compose(derivs)

    def sqrt(self) -> "Jet":
        if np.any(self.c[0] <= 0.0):
            raise ValueError("sqrt of non-positive jet")
        return self.power(0.5)

    def exp(self) -> "Jet":
        e = np.exp(self.c[0])
        return self.compose([e] * (self.order + 1))

    def log(self) -> "Jet":
        x0 = self.c[0]
        if np.any(x0 <= 0.0):
            raise ValueError("log of non-positive jet")
        derivs = [np.log(x0)]
        derivs += [(-1) ** (k - 1) * math.factorial(k - 1) / x0 ** k for k in range(1, self.order + 1)]
        return self.compose(derivs)


def sqrt(x):
    return x.sqrt() if isinstance(x, Jet) else np.sqrt(x)


def exp(x):
    return x.exp() if isinstance(x, Jet) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, Jet) else np.log(x)


def artanh(x):
    if isinstance(x, Jet):
        return 0.5 * ((1.0 + x).log() - (1.0 - x).log())
    return np.arctanh(x)


def value(x) -> float:
    return x.value if isinstance(x, Jet) else float(x)


def taylor1(f, s0, order: int) -> np.ndarray:
    """Derivatives ``f(s0), f'(s0), ..., f^(order)(s0)`` stacked on axis 0.

    ``s0`` may be an array; the result then has shape ``(order + 1,) + s0.shape``.
    """
    s0 = np.asarray(s0, dtype=float)
    t = Jet.variable(s0, 0, 1, order)
    out = f(t)
    if not isinstance(out, Jet):
        res = np.zeros((order + 1,) + s0.shape)
        res[0] = out
        return res
    fact = out.b.fact.reshape((-1,) + (1,) * s0.ndim)
    return out.c * fact
