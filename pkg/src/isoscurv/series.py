"""Exact truncated power series in s with coefficients polynomial in B = b^2.

Coefficients live in ``Q[B]`` tensored with degree-1 forms in a handful of
scalar unknowns (k, c, eps, nu, lam, delta).  This is enough to expand the
isotropy equations of an (alpha, beta)-metric around s = 0, read off the
coefficient of every power of s, and solve the resulting linear systems over
the rational-function field ``Q(B)``.  Treating B as an indeterminate (rather
than substituting a number) is what makes the solutions honest when ||beta||
is not constant: the unknowns are allowed to be functions of B.

Scalars are :class:`fractions.Fraction` by default.  When a requested
profile has an irrational first coefficient the engine carries 200-bit
:mod:`mpmath` floats instead and comparisons use :data:`INEXACT_TOL`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath

from .errors import (
    DegenerateSystemError,
    InconsistentSystemError,
    NonInvertibleError,
    OrderError,
    ParamError,
    SeriesError,
    SymbolDegreeError,
)

CONST = "1"
SYMBOLS = ("k", "c", "eps", "nu", "lam", "delta")
INEXACT_TOL = mpmath.mpf("1e-30")
MP_PREC = 200
DEFAULT_ORDER = 12


def _is_zero(v) -> bool:
    # 200-bit floats carry rounding noise near 1e-60; anything below the
    # comparison tolerance is treated as an exact zero
    if isinstance(v, mpmath.mpf):
        return abs(v) < INEXACT_TOL
    return v == 0


def _exact(v) -> bool:
    return isinstance(v, (int, Fraction))


# ---------------------------------------------------------------------------
# polynomials in B
# ---------------------------------------------------------------------------


class PolyB:
    """Dense polynomial in B, lowest degree first, no trailing zeros."""

    __slots__ = ("c",)

    def __init__(self, coeffs: Iterable = ()):
        c = [Fraction(v) if isinstance(v, int) else v for v in coeffs]
        while c and _is_zero(c[-1]):
            c.pop()
        self.c = tuple(c)

    @classmethod
    def B(cls) -> "PolyB":
        return cls((0, 1))

    @classmethod
    def lift(cls, v) -> "PolyB":
        return v if isinstance(v, PolyB) else cls((v,))

    @property
    def degree(self) -> int:
        return len(self.c) - 1

    def is_zero(self) -> bool:
        return not self.c

    def is_const(self) -> bool:
        return len(self.c) <= 1

    def const(self):
        return self.c[0] if self.c else Fraction(0)

    def lc(self):
        return self.c[-1]

    def __add__(self, other):
        o = PolyB.lift(other).c
        a = self.c
        if len(a) < len(o):
            a, o = o, a
        return PolyB(tuple(x + y for x, y in zip(a, o)) + a[len(o):])

    __radd__ = __add__

    def __neg__(self):
        return PolyB(-x for x in self.c)

    def __sub__(self, other):
        return self + (-PolyB.lift(other))

    def __rsub__(self, other):
        return PolyB.lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, PolyB):
            return PolyB(x * other for x in self.c)
        if not self.c or not other.c:
            return PolyB()
        out = [0] * (len(self.c) + len(other.c) - 1)
        for i, x in enumerate(self.c):
            if _is_zero(x):
                continue
            for j, y in enumerate(other.c):
                out[i + j] += x * y
        return PolyB(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        return (self - PolyB.lift(other)).is_zero()

    __hash__ = None

    def __call__(self, B):
        out = 0
        for x in reversed(self.c):
            out = out * B + x
        return out

    def divmod(self, other: "PolyB") -> tuple["PolyB", "PolyB"]:
        if other.is_zero():
            raise NonInvertibleError("polynomial division by zero")
        r = list(self.c)
        q = [0] * max(len(r) - len(other.c) + 1, 0)
        lc = other.lc()
        while len(r) >= len(other.c) and r:
            k = len(r) - len(other.c)
            f = r[-1] / lc
            q[k] = f
            for i, y in enumerate(other.c):
                r[i + k] -= f * y
            r.pop()
            while r and _is_zero(r[-1]):
                r.pop()
        return PolyB(q), PolyB(r)

    def monic(self) -> "PolyB":
        return self * (1 / self.lc()) if self.c else self

    def max_abs(self):
        return max((abs(x) for x in self.c), default=0)

    def __repr__(self):
        return f"PolyB({_fmt_poly(self)})"

    def __str__(self):
        return _fmt_poly(self)


def _fmt_poly(p: PolyB, var: str = "B") -> str:
    if not p.c:
        return "0"
    parts = []
    for i, x in enumerate(p.c):
        if _is_zero(x):
            continue
        mon = "" if i == 0 else (var if i == 1 else f"{var}^{i}")
        xs = str(x)
        if mon:
            parts.append(mon if x == 1 else f"-{mon}" if x == -1 else f"({xs})*{mon}")
        else:
            parts.append(xs)
    return " + ".join(parts).replace("+ -", "- ")


def poly_gcd(a: PolyB, b: PolyB) -> PolyB:
    if not all(_exact(x) for x in a.c + b.c):
        return PolyB((1,))
    while not b.is_zero():
        a, b = b, a.divmod(b)[1]
    return a.monic() if not a.is_zero() else PolyB((1,))


# ---------------------------------------------------------------------------
# rational functions of B
# ---------------------------------------------------------------------------


class RatFunc:
    """num(B) / den(B) in lowest terms with a monic denominator (exact case)."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=None):
        num = PolyB.lift(num)
        den = PolyB((1,)) if den is None else PolyB.lift(den)
        if den.is_zero():
            raise NonInvertibleError("zero denominator")
        if num.is_zero():
            self.num, self.den = PolyB(), PolyB((1,))
            return
        # common powers of B first; this also covers the inexact case, where
        # no general gcd is attempted
        while num.c and den.c and _is_zero(num.c[0]) and _is_zero(den.c[0]):
            num, den = PolyB(num.c[1:]), PolyB(den.c[1:])
        g = poly_gcd(num, den)
        if g.degree > 0:
            num, den = num.divmod(g)[0], den.divmod(g)[0]
        lc = den.lc()
        self.num, self.den = num * (1 / lc), den * (1 / lc)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __add__(self, other):
        o = other if isinstance(other, RatFunc) else RatFunc(other)
        return RatFunc(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return RatFunc(-self.num, self.den)

    def __sub__(self, other):
        return self + (-(other if isinstance(other, RatFunc) else RatFunc(other)))

    def __mul__(self, other):
        o = other if isinstance(other, RatFunc) else RatFunc(other)
        return RatFunc(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = other if isinstance(other, RatFunc) else RatFunc(other)
        if o.is_zero():
            raise NonInvertibleError("division by the zero rational function")
        return RatFunc(self.num * o.den, self.den * o.num)

    def __call__(self, B):
        d = self.den(B)
        if d == 0:
            raise NonInvertibleError(f"pole at B={B}")
        return self.num(B) / d

    def __eq__(self, other):
        o = other if isinstance(other, RatFunc) else RatFunc(other)
        return (self.num * o.den - o.num * self.den).is_zero()

    __hash__ = None

    def __repr__(self):
        return f"RatFunc({self})"

    def __str__(self):
        if self.den == PolyB((1,)):
            return str(self.num)
        return f"({self.num}) / ({self.den})"

    def to_json(self) -> dict:
        return {"num": [str(x) for x in self.num.c], "den": [str(x) for x in self.den.c]}


# ---------------------------------------------------------------------------
# coefficient ring: Q[B] + sum_sym Q[B] * sym
# ---------------------------------------------------------------------------


class Lin:
    """An affine-linear form in the symbolic unknowns with PolyB coefficients."""

    __slots__ = ("t",)

    def __init__(self, terms: dict | None = None):
        self.t = {k: v for k, v in (terms or {}).items() if not v.is_zero()}

    @classmethod
    def lift(cls, v) -> "Lin":
        if isinstance(v, Lin):
            return v
        return cls({CONST: PolyB.lift(v)})

    @classmethod
    def symbol(cls, name: str, coef=1) -> "Lin":
        if name not in SYMBOLS:
            raise ParamError(f"unknown symbol {name!r}")
        return cls({name: PolyB.lift(coef)})

    def symbols(self) -> set[str]:
        return {k for k in self.t if k != CONST}

    def part(self, sym: str) -> PolyB:
        return self.t.get(sym, PolyB())

    @property
    def const(self) -> PolyB:
        return self.part(CONST)

    def is_zero(self) -> bool:
        return not self.t

    def is_scalar(self) -> bool:
        return not self.symbols() and self.const.is_const()

    def __add__(self, other):
        o = Lin.lift(other)
        out = dict(self.t)
        for k, v in o.t.items():
            out[k] = out[k] + v if k in out else v
        return Lin(out)

    __radd__ = __add__

    def __neg__(self):
        return Lin({k: -v for k, v in self.t.items()})

    def __sub__(self, other):
        return self + (-Lin.lift(other))

    def __rsub__(self, other):
        return Lin.lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Lin):
            p = PolyB.lift(other)
            return Lin({k: v * p for k, v in self.t.items()})
        sa, sb = self.symbols(), other.symbols()
        if sa and sb:
            raise SymbolDegreeError(f"product of symbolic terms {sorted(sa)} x {sorted(sb)}")
        if sa:
            return self * other.const
        return other * self.const

    __rmul__ = __mul__

    def __eq__(self, other):
        return (self - Lin.lift(other)).is_zero()

    __hash__ = None

    def substitute(self, values: dict) -> RatFunc:
        out = RatFunc(self.const)
        for sym in self.symbols():
            out = out + RatFunc(self.t[sym]) * values[sym]
        return out

    def __repr__(self):
        if not self.t:
            return "0"
        parts = []
        for k in sorted(self.t, key=lambda k: (k != CONST, k)):
            p = str(self.t[k])
            parts.append(p if k == CONST else f"({p})*{k}")
        return " + ".join(parts)


# ---------------------------------------------------------------------------
# series
# ---------------------------------------------------------------------------


class SeriesS:
    """c_0 + c_1 s + ... + c_N s^N + O(s^(N+1)) with :class:`Lin` coefficients."""

    __slots__ = ("N", "c")

    def __init__(self, coeffs: Sequence, N: int | None = None):
        c = [Lin.lift(v) for v in coeffs]
        if N is None:
            N = len(c) - 1
        if N < 0:
            raise OrderError("negative truncation order")
        c = c[: N + 1] + [Lin()] * (N + 1 - len(c))
        self.N = N
        self.c = tuple(c)

    # constructors
    @classmethod
    def const(cls, v, N: int) -> "SeriesS":
        return cls([v], N)

    @classmethod
    def s(cls, N: int) -> "SeriesS":
        return cls([0, 1], N)

    @classmethod
    def B(cls, N: int) -> "SeriesS":
        return cls([PolyB.B()], N)

    @classmethod
    def symbol(cls, name: str, N: int) -> "SeriesS":
        return cls([Lin.symbol(name)], N)

    # access
    def coeff(self, i: int) -> Lin:
        if i > self.N:
            raise OrderError(f"coefficient s^{i} beyond truncation order {self.N}")
        return self.c[i]

    def scalars(self) -> list:
        """Scalar coefficients of a numeric series."""
        out = []
        for x in self.c:
            if not x.is_scalar():
                raise SeriesError("series has B or symbol dependence")
            out.append(x.const.const())
        return out

    def truncate(self, N: int) -> "SeriesS":
        if N > self.N:
            raise OrderError(f"cannot extend a series of order {self.N} to {N}")
        return SeriesS(self.c[: N + 1], N)

    def is_zero(self) -> bool:
        return all(x.is_zero() for x in self.c)

    # arithmetic
    def _other(self, other) -> "SeriesS":
        if isinstance(other, SeriesS):
            if other.N != self.N:
                raise OrderError(f"mismatched truncation orders {self.N} and {other.N}")
            return other
        return SeriesS.const(other, self.N)

    def __add__(self, other):
        o = self._other(other)
        return SeriesS([a + b for a, b in zip(self.c, o.c)], self.N)

    __radd__ = __add__

    def __neg__(self):
        return SeriesS([-a for a in self.c], self.N)

    def __sub__(self, other):
        return self + (-self._other(other))

    def __rsub__(self, other):
        return self._other(other) - self

    def __mul__(self, other):
        if not isinstance(other, SeriesS):
            return SeriesS([a * Lin.lift(other) for a in self.c], self.N)
        o = self._other(other)
        N = self.N
        out = [Lin() for _ in range(N + 1)]
        for i, a in enumerate(self.c):
            if a.is_zero():
                continue
            for j in range(N + 1 - i):
                b = o.c[j]
                if not b.is_zero():
                    out[i + j] = out[i + j] + a * b
        return SeriesS(out, N)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._other(other)
        v0 = o.c[0]
        if not v0.is_scalar() or _is_zero(v0.const.const()):
            raise NonInvertibleError("divisor needs an invertible scalar constant term")
        inv0 = 1 / v0.const.const()
        w: list[Lin] = []
        for j in range(self.N + 1):
            acc = self.c[j]
            for i in range(1, j + 1):
                if not o.c[i].is_zero():
                    acc = acc - o.c[i] * w[j - i]
            w.append(acc * inv0)
        return SeriesS(w, self.N)

    def __rtruediv__(self, other):
        return self._other(other) / self

    def __pow__(self, p: int):
        if not isinstance(p, int):
            raise TypeError("integer powers only")
        if p < 0:
            return SeriesS.const(1, self.N) / (self ** (-p))
        out = SeriesS.const(1, self.N)
        for _ in range(p):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, SeriesS):
            return NotImplemented
        return self.N == other.N and (self - other).is_zero()

    __hash__ = None

    def sqrt(self) -> "SeriesS":
        u0 = self.c[0]
        if self.c[0].symbols() or not u0.is_scalar() or u0.const.const() != 1:
            raise NonInvertibleError("sqrt needs constant term exactly 1")
        for x in self.c:
            if x.symbols():
                raise SymbolDegreeError("sqrt of a series with symbolic coefficients")
        r = [Lin.lift(1)]
        half = Fraction(1, 2)
        for j in range(1, self.N + 1):
            acc = self.c[j]
            for i in range(1, j):
                acc = acc - r[i] * r[j - i]
            r.append(acc * half)
        return SeriesS(r, self.N)

    def derive(self) -> "SeriesS":
        """d/ds; exact through order N - 1."""
        if self.N == 0:
            raise OrderError("derivative of an order-0 series")
        return SeriesS([self.c[i] * i for i in range(1, self.N + 1)], self.N - 1)

    def integrate(self) -> "SeriesS":
        """Antiderivative vanishing at s = 0; exact through order N + 1."""
        return SeriesS([Lin()] + [self.c[i] * Fraction(1, i + 1) for i in range(self.N + 1)], self.N + 1)

    def at_B(self, B) -> "SeriesS":
        return SeriesS([Lin({k: PolyB((v(B),)) for k, v in x.t.items()}) for x in self.c], self.N)

    def __repr__(self):
        terms = [f"[{x}]s^{i}" for i, x in enumerate(self.c) if not x.is_zero()]
        return " + ".join(terms or ["0"]) + f" + O(s^{self.N + 1})"


def series_op(kind: str, *args):
    """Dispatch by name: add, mul, div, sqrt, derive, integrate, scalar."""
    if kind == "add":
        return args[0] + args[1]
    if kind == "mul":
        return args[0] * args[1]
    if kind == "div":
        return args[0] / args[1]
    if kind == "sqrt":
        return args[0].sqrt()
    if kind == "derive":
        return args[0].derive()
    if kind == "integrate":
        return args[0].integrate()
    if kind == "scalar":
        return args[0] * args[1]
    raise ParamError(f"unknown series op {kind!r}")


def numeric_series(coeffs: Sequence, N: int) -> SeriesS:
    return SeriesS([Fraction(c) if isinstance(c, (int, str)) else c for c in coeffs], N)


def series_close(u: SeriesS, v: SeriesS, tol=None) -> bool:
    """Exact equality, or coefficientwise |u - v| <= tol for inexact scalars."""
    if tol is None:
        return u == v
    d = u - v if u.N == v.N else u.truncate(min(u.N, v.N)) - v.truncate(min(u.N, v.N))
    return all(p.max_abs() <= tol for x in d.c for p in x.t.values())


# ---------------------------------------------------------------------------
# class (iv) profile as a series
# ---------------------------------------------------------------------------


def _rational_sqrt(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None


def _mpf(q):
    if isinstance(q, mpmath.mpf):
        return q
    q = Fraction(q)
    return mpmath.mpf(q.numerator) / q.denominator


to_mpf = _mpf


@dataclass(frozen=True)
class PhiSeries:
    series: SeriesS
    a1: object
    a2: object
    exact: bool

    @property
    def tol(self):
        return None if self.exact else INEXACT_TOL


def phi_series_class_iv(k1, k2, sign: int = 1, n_dim: int = 2, N: int = DEFAULT_ORDER) -> PhiSeries:
    """Taylor series of the class (iv) profile from its log-derivative.

    phi'/phi = (1/4) d/ds log((1+k1 s^2)(1+k2 s^2)) + tau(s),
    tau = a1 / ((1+k1 s^2) sqrt(1+k2 s^2)) with a1 = sign*sqrt(k2-k1)/2,
    integrated term by term from phi(0) = 1.
    """
    if n_dim != 2:
        raise ParamError("the class (iv) family is two-dimensional")
    k1, k2 = Fraction(k1), Fraction(k2)
    if not k2 > k1:
        raise ParamError(f"class (iv) requires k2 > k1, got {k1}, {k2}")
    if sign not in (1, -1):
        raise ParamError("sign must be +1 or -1")
    root = _rational_sqrt((k2 - k1) / 4)
    exact = root is not None
    if exact:
        a1 = sign * root
        one = Fraction(1)
        K1, K2 = k1, k2
    else:
        mpmath.mp.prec = MP_PREC
        K1, K2 = _mpf(k1), _mpf(k2)
        a1 = sign * mpmath.sqrt((K2 - K1) / 4)
        one = mpmath.mpf(1)
    a2 = (K1 + 3 * K2) / 8
    s = SeriesS.s(N)
    s2 = s * s
    p1 = one + s2 * K1
    p2 = one + s2 * K2
    L = (s * K1 / p1 + s * K2 / p2) * Fraction(1, 2) + SeriesS.const(a1, N) / (p1 * p2.sqrt())
    Ls = [x.const.const() for x in L.c]
    phi = [one]
    for j in range(N):
        acc = sum((phi[i] * Ls[j - i] for i in range(j + 1)), 0 * one)
        phi.append(acc / (j + 1))
    return PhiSeries(SeriesS(phi, N), a1, a2, exact)


def phi_series_from_model_coeffs(coeffs: Sequence, N: int) -> SeriesS:
    return numeric_series(list(coeffs), N)


def excluded_series(a1, a2, N: int = DEFAULT_ORDER) -> SeriesS:
    """a1 s + sqrt(1 + 2 a2 s^2)."""
    s = SeriesS.s(N)
    return s * Fraction(a1) + (SeriesS.const(1, N) + s * s * (2 * Fraction(a2))).sqrt()


# ---------------------------------------------------------------------------
# the cleared isotropy equations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PackSeries:
    """Q, Q', Q'', Delta, Phi and the clearing factors, all at a common order."""

    phi: SeriesS
    d1: SeriesS
    d2: SeriesS
    d3: SeriesS
    s: SeriesS
    Bs: SeriesS
    D0: SeriesS  # phi - s phi'
    E: SeriesS  # phi - s phi' + (B - s^2) phi''
    Q: SeriesS
    Qp: SeriesS
    Qpp: SeriesS
    Delta: SeriesS
    Phi: SeriesS


def pack_series(phi: SeriesS, n_dim: int) -> PackSeries:
    """Build Q, Q', Q'', Delta and Phi from phi with B kept symbolic.

    Q' and Q'' come from differentiating the Q series, so the working order
    is three below the order of phi.
    """
    if phi.c[0] != Lin.lift(1):
        raise ParamError("phi series must start with phi(0) = 1")
    if phi.N < 4:
        raise OrderError("phi series too short")
    W = phi.N - 3
    d1 = phi.derive()
    d2 = d1.derive()
    d3 = d2.derive()
    s_full = SeriesS.s(d1.N)
    Q_full = d1 / (phi.truncate(d1.N) - s_full * d1)
    Qp_full = Q_full.derive()
    Qpp = Qp_full.derive()
    cut = lambda u: u.truncate(W)
    phiW, d1W, d2W, d3W = cut(phi), cut(d1), cut(d2), d3
    s = SeriesS.s(W)
    Bs = SeriesS.B(W)
    Q, Qp = cut(Q_full), cut(Qp_full)
    w = Bs - s * s
    D0 = phiW - s * d1W
    E = D0 + w * d2W
    Delta = 1 + s * Q + w * Qp
    Phi = -(Q - s * Qp) * (Delta * n_dim + s * Q + 1) - w * (1 + s * Q) * Qpp
    # Delta (phi - s phi')^2 = phi E is the identity that turns the divisions
    # by Delta into the polynomial clearing factors
    if not (Delta * D0 * D0 - phiW * E).is_zero():
        raise SeriesError("Delta clearing identity failed; series inconsistent")
    return PackSeries(phiW, d1W, d2W, d3W, s, Bs, D0, E, Q, Qp, Qpp, Delta, Phi)


def gamma18_series(phi: SeriesS, n_dim: int) -> SeriesS:
    """First isotropy equation (k, c, eps, nu terms) multiplied by 2 phi E^2, E = phi - s phi' + (B - s^2) phi''.

    With Psi = Q'/(2 Delta) and Delta = phi E / D0^2 the products simplify to
    2 phi E^2 Psi = Q' E D0^2 and 2 phi E^2 Phi/(2 Delta^2) = Phi D0^4 / phi.
    """
    p = pack_series(phi, n_dim)
    W = p.s.N
    k, c, eps, nu = (SeriesS.symbol(x, W) for x in ("k", "c", "eps", "nu"))
    s, Bs = p.s, p.Bs
    D0sq = p.D0 * p.D0
    term_psi = -2 * s * (k - eps * Bs) * (p.Qp * p.E * D0sq)
    term_phi = (k - eps * s * s) * (p.Phi * D0sq * D0sq / p.phi)
    term_c = c * (2 * (n_dim + 1)) * p.phi * p.phi * p.E * p.E
    term_nu = -2 * s * nu * p.phi * p.E * p.E
    return term_psi + term_phi + term_c + term_nu


def gamma20_series(phi: SeriesS, n_dim: int) -> SeriesS:
    """Second isotropy equation (lam, delta terms) in the form LHS - delta = 0, times phi (s phi' - phi) E^2."""
    p = pack_series(phi, n_dim)
    W = p.s.N
    lam, delta = SeriesS.symbol("lam", W), SeriesS.symbol("delta", W)
    s, Bs = p.s, p.Bs
    D0cube = p.D0 * p.D0 * p.D0
    two_psi = p.Qp * p.E * D0cube  # 2 Psi * phi D0 E^2
    phi_over = p.Phi * D0cube * p.D0 * p.D0 / p.phi  # Phi/Delta^2 * phi D0 E^2
    lhs = -two_psi - p.Q * phi_over - lam * (s * phi_over - Bs * two_psi) - delta * p.phi * p.D0 * p.E * p.E
    return -lhs


# ---------------------------------------------------------------------------
# linear algebra over Q(B)
# ---------------------------------------------------------------------------

UNIQUE_TRIVIAL = "UNIQUE_TRIVIAL"
UNIQUE_NONTRIVIAL = "UNIQUE_NONTRIVIAL"
UNDERDETERMINED = "UNDERDETERMINED"


@dataclass
class LinearSolveResult:
    status: str
    unknowns: tuple
    values: dict | None
    coefficients: list  # the p_i used, as Lin
    rank: int
    nullspace: list = field(default_factory=list)
    checked_orders: list = field(default_factory=list)

    def residuals(self) -> list[RatFunc]:
        """p_i with the solution substituted; all zero for a valid solve."""
        if self.values is None:
            raise DegenerateSystemError("no unique solution to substitute")
        return [p.substitute(self.values) for p in self.coefficients]

    def value_at(self, name: str, B):
        return self.values[name](B)

    def to_json(self) -> dict:
        out = {"status": self.status, "unknowns": list(self.unknowns), "rank": self.rank,
               "orders": len(self.coefficients)}
        if self.values is not None:
            out["values"] = {k: str(v) for k, v in self.values.items()}
        if self.nullspace:
            out["nullspace"] = [{k: str(v) for k, v in vec.items()} for vec in self.nullspace]
        return out


def _rref(rows: list[list[RatFunc]], ncols: int):
    rows = [list(r) for r in rows]
    pivots = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(rows)) if not rows[i][col].is_zero()), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = RatFunc(1) / rows[r][col]
        rows[r] = [x * inv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and not rows[i][col].is_zero():
                f = rows[i][col]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


def solve_linear(eqs: Sequence[Lin], unknowns: Sequence[str]):
    """Solve sum_u M[i,u] u + const_i = 0 over Q(B).

    Returns (rank, particular solution or None if inconsistent, nullspace basis).
    """
    m = len(unknowns)
    aug = [[RatFunc(e.part(u)) for u in unknowns] + [RatFunc(-e.const)] for e in eqs]
    rows, pivots = _rref(aug, m)
    rank = len(pivots)
    for row in rows[rank:]:
        if not row[m].is_zero():
            return rank, None, []
    sol = {u: RatFunc(0) for u in unknowns}
    for i, col in enumerate(pivots):
        sol[unknowns[col]] = rows[i][m]
    free = [j for j in range(m) if j not in pivots]
    null = []
    for fj in free:
        vec = {u: RatFunc(0) for u in unknowns}
        vec[unknowns[fj]] = RatFunc(1)
        for i, col in enumerate(pivots):
            vec[unknowns[col]] = -rows[i][fj]
        null.append(vec)
    return rank, sol, null


def _orders_check(phi: SeriesS, orders_used: int) -> None:
    if phi.N < orders_used + 4:
        raise OrderError(f"phi order {phi.N} too small for p_0..p_{orders_used} (need >= {orders_used + 4})")


def gamma18_solve(phi: SeriesS, n_dim: int = 2, orders_used: int = 5,
                  raise_on_degenerate: bool = False) -> LinearSolveResult:
    """Solve p_0 = ... = p_m = 0 of the first cleared equation for (k, c, eps, nu)."""
    _orders_check(phi, orders_used)
    g = gamma18_series(phi, n_dim)
    ps = [g.coeff(i) for i in range(orders_used + 1)]
    unknowns = ("k", "c", "eps", "nu")
    rank, sol, null = solve_linear(ps, unknowns)
    if sol is None:
        raise InconsistentSystemError("homogeneous system reported inconsistent")
    if rank < len(unknowns):
        if raise_on_degenerate:
            raise DegenerateSystemError(f"rank {rank} < {len(unknowns)}: non-trivial solutions exist")
        return LinearSolveResult(UNDERDETERMINED, unknowns, None, ps, rank, null)
    status = UNIQUE_TRIVIAL if all(v.is_zero() for v in sol.values()) else UNIQUE_NONTRIVIAL
    return LinearSolveResult(status, unknowns, sol, ps, rank)


def gamma20_solve(phi: SeriesS, n_dim: int = 2, orders_used: int = 5,
                  check_consistency: bool = True) -> LinearSolveResult:
    """Solve p_0 = p_1 = 0 of the second cleared equation for (lam, delta).

    Every higher p_i up to ``orders_used`` must then vanish identically in B,
    otherwise :class:`InconsistentSystemError` is raised.
    """
    _orders_check(phi, orders_used)
    g = gamma20_series(phi, n_dim)
    ps = [g.coeff(i) for i in range(orders_used + 1)]
    unknowns = ("lam", "delta")
    rank, sol, null = solve_linear(ps[:2], unknowns)
    if sol is None or rank < 2:
        return LinearSolveResult(UNDERDETERMINED, unknowns, None, ps, rank, null)
    checked = []
    for i, p in enumerate(ps[2:], start=2):
        r = p.substitute(sol)
        if not r.is_zero():
            if check_consistency:
                raise InconsistentSystemError(f"p_{i} = {r} != 0 after substituting (lam, delta)")
        else:
            checked.append(i)
    status = UNIQUE_TRIVIAL if all(v.is_zero() for v in sol.values()) else UNIQUE_NONTRIVIAL
    return LinearSolveResult(status, unknowns, sol, ps, rank, [], checked)


def lambda_delta_closed(a1, a2) -> tuple[RatFunc, RatFunc]:
    """Closed forms of (lam, delta) for the two-dimensional class (iv) profile."""
    a1, a2 = Fraction(a1), Fraction(a2)
    den = PolyB((1, 2 * a2))
    lam = RatFunc(PolyB((2 * (a1 * a1 - a2), (3 * a1 * a1 - 2 * a2) * (2 * a2 + a1 * a1))), den)
    delta = RatFunc(PolyB((1, 2 * a2 + a1 * a1)) * (3 * a1 * a1 - 2 * a2), den)
    return lam, delta


def r_coefficient_closed(k1, k2) -> RatFunc:
    """(3k1 + k2 + 4 k1 k2 B) / (4 + (k1 + 3k2) B), the b_i s_j + b_j s_i factor."""
    k1, k2 = Fraction(k1), Fraction(k2)
    return RatFunc(PolyB((3 * k1 + k2, 4 * k1 * k2)), PolyB((4, k1 + 3 * k2)))


# ---------------------------------------------------------------------------
# the three ODE residuals
# ---------------------------------------------------------------------------


def ode_residuals_f024(phi: SeriesS, a1, a2, N: int) -> tuple[SeriesS, SeriesS, SeriesS]:
    """Evaluate the differential polynomials f0, f2, f4 on a series phi, truncated at N."""
    if phi.N < N + 3:
        raise OrderError(f"phi order {phi.N} < N + 3 = {N + 3}")
    a1, a2 = (Fraction(a1), Fraction(a2)) if _exact(a1) and _exact(a2) else (a1, a2)
    d1 = phi.derive()
    d2 = d1.derive()
    d3 = d2.derive()
    p, p1, p2, p3 = (u.truncate(N) for u in (phi, d1, d2, d3))
    s = SeriesS.s(N)
    s2 = s * s
    D = p - s * p1  # phi - s phi'
    A = 2 * a2 + a1 * a1
    K = 2 * a2 - 3 * a1 * a1
    one = SeriesS.const(1, N)

    f0 = (
        (2 * (a1 * a1 - a2) * s * D + p1) * s2 * p * p3
        - s2 * (one + K * s2) * p * p2 * p2
        + ((one - 2 * a2 * s2) * D * D + (4 + 2 * (3 * a1 * a1 - 4 * a2) * s2) * s * p1 * D + 6 * s2 * p1 * p1) * p2
        + ((3 * a1 * a1 - 2 * a2) * D * D + (4 * a2 - 3 * a1 * a1) * s * p1 * D - 3 * p1 * p1) * D
    )
    f2 = (
        ((A * (-K) * s2 + 2 * (a2 - a1 * a1)) * s * D - (one - 2 * a2 * s2) * p1) * p * p3
        + (one - A * s2) * (one + K * s2) * p * p2 * p2
        + ((A * (-K) * s2 + 4 * a1 * a1) * D * D + (4 * A * (-K) * s2 + 2 * (6 * a2 - a1 * a1)) * s * p1 * D
           + 3 * (4 * a2 * s2 - 1) * p1 * p1) * p2
        + (A * K * (3 * s * p1 - p) * D - 6 * a2 * p1 * p1) * D
    )
    f4 = (
        (A * K * s * D - 2 * a2 * p1) * p * p3
        + A * (one + K * s2) * p * p2 * p2
        + (A * K * D * (3 * s * p1 - p) - 6 * a2 * p1 * p1) * p2
    )
    return f0, f2, f4


# ---------------------------------------------------------------------------
# f(b) as a series in b
# ---------------------------------------------------------------------------


def wallis_ratio(j: int, n: int):
    """int_0^pi sin^(n-2) t cos^j t dt / int_0^pi sin^(n-2) t dt (zero for odd j)."""
    if j % 2:
        return Fraction(0)
    out = Fraction(1)
    for i in range(1, j // 2 + 1):
        out *= Fraction(2 * i - 1, n - 2 + 2 * i)
    return out


@dataclass(frozen=True)
class FbCheck:
    from_integral: SeriesS
    from_closed_form: SeriesS
    equal: bool
    exact: bool

    def to_json(self) -> dict:
        fmt = lambda u: [str(x.const.const()) for x in u.c]
        return {"from_integral": fmt(self.from_integral), "from_closed_form": fmt(self.from_closed_form),
                "equal": self.equal, "exact": self.exact}


def fb_series(phi: SeriesS, n_dim: int = 2, M: int | None = None) -> SeriesS:
    """Series in b of f(b) from the integral definition, via Wallis ratios."""
    M = phi.N if M is None else M
    if M > phi.N:
        raise OrderError(f"M = {M} exceeds the phi order {phi.N}")
    p = phi.truncate(M)
    g = SeriesS.const(1, M) / (p ** n_dim)
    den = [g.c[j] * wallis_ratio(j, n_dim) for j in range(M + 1)]
    return SeriesS.const(1, M) / SeriesS(den, M)


def fb_series_check(phi: SeriesS, a1=None, a2=None, n_dim: int = 2, M: int = 10, tol=None) -> FbCheck:
    """Compare the integral f(b) series with sqrt(1 + (2 a2 - 3 a1^2) b^2)."""
    if M > phi.N - 2 and phi.N >= 2 and M > phi.N:
        raise OrderError(f"M = {M} too large for a phi series of order {phi.N}")
    if a1 is None:
        a1 = phi.c[1].const.const()
    if a2 is None:
        a2 = phi.c[2].const.const()
    lhs = fb_series(phi, n_dim, M)
    b = SeriesS.s(M)
    rhs = (SeriesS.const(1, M) + b * b * (2 * a2 - 3 * a1 * a1)).sqrt()
    exact = all(_exact(x.const.const()) for x in phi.c)
    return FbCheck(lhs, rhs, series_close(lhs, rhs, tol), exact)
