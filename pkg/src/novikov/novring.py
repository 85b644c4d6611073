"""Exact arithmetic in Z[[t]][t^-1].

Truncated integer Laurent series, integer polynomials, and rational functions
of the shape ``P(t) / (t^m Q(t))`` with ``Q(0) = 1``.  Everything here works on
Python ints, so coefficients never overflow.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

import numpy as np


class NotInvertible(ArithmeticError):
    """Lowest coefficient of a series is not a unit of Z."""


class NoFit(ValueError):
    """No rational function of the requested degree matches the data."""


def _trim(coeffs: Iterable[int]) -> tuple[int, ...]:
    c = [int(a) for a in coeffs]
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class IntPoly:
    """Integer polynomial ``c0 + c1 t + ... + cd t^d``; zero is ``()``."""

    coeffs: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim(self.coeffs))

    @classmethod
    def const(cls, c: int) -> "IntPoly":
        return cls((c,))

    @classmethod
    def monomial(cls, k: int, c: int = 1) -> "IntPoly":
        return cls((0,) * k + (c,))

    @property
    def degree(self) -> int:
        """Degree, with ``-1`` for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __getitem__(self, k: int) -> int:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0

    def __neg__(self):
        return IntPoly(tuple(-a for a in self.coeffs))

    def __add__(self, other):
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return IntPoly(tuple(self[i] + other[i] for i in range(n)))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        if self.is_zero() or other.is_zero():
            return IntPoly()
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return IntPoly(tuple(out))

    __rmul__ = __mul__

    def content(self) -> int:
        g = 0
        for a in self.coeffs:
            g = gcd(g, a)
        return g

    def __call__(self, t):
        acc = 0
        for a in reversed(self.coeffs):
            acc = acc * t + a
        return acc

    def valuation(self) -> int:
        """Largest ``k`` with ``t^k | self`` (``-1`` for zero)."""
        for k, a in enumerate(self.coeffs):
            if a:
                return k
        return -1

    def __repr__(self):
        if self.is_zero():
            return "IntPoly(0)"
        terms = []
        for k, a in enumerate(self.coeffs):
            if a:
                terms.append(f"{a}" if k == 0 else f"{a}*t^{k}")
        return "IntPoly(" + " + ".join(terms) + ")"


def _as_poly(x) -> IntPoly:
    if isinstance(x, IntPoly):
        return x
    if isinstance(x, int):
        return IntPoly((x,))
    raise TypeError(f"cannot use {type(x).__name__} as IntPoly")


# -- polynomial division over Q ---------------------------------------------

def _qdivmod(a: Sequence, b: Sequence) -> tuple[list[Fraction], list[Fraction]]:
    a = [Fraction(x) for x in a]
    b = [Fraction(x) for x in b]
    while b and b[-1] == 0:
        b.pop()
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 0)
    r = a[:]
    while len(r) >= len(b) and any(r):
        while r and r[-1] == 0:
            r.pop()
        if len(r) < len(b):
            break
        c = r[-1] / b[-1]
        shift = len(r) - len(b)
        q[shift] = c
        for i, bi in enumerate(b):
            r[shift + i] -= c * bi
        r.pop()
    while r and r[-1] == 0:
        r.pop()
    return q, r


def poly_divexact(a: IntPoly, b: IntPoly) -> IntPoly:
    """Exact quotient ``a / b`` in Z[t]; raises if the division is not exact."""
    q, r = _qdivmod(a.coeffs, b.coeffs)
    if r:
        raise ArithmeticError(f"{b} does not divide {a}")
    if any(c.denominator != 1 for c in q):
        raise ArithmeticError(f"quotient of {a} by {b} is not integral")
    return IntPoly(tuple(int(c) for c in q))


def _primitive(coeffs: Sequence[Fraction]) -> IntPoly:
    if not coeffs:
        return IntPoly()
    den = 1
    for c in coeffs:
        den = den * c.denominator // gcd(den, c.denominator)
    ints = [int(c * den) for c in coeffs]
    p = IntPoly(tuple(ints))
    g = p.content()
    return IntPoly(tuple(a // g for a in p.coeffs))


def poly_gcd(a: IntPoly, b: IntPoly) -> IntPoly:
    """Primitive gcd over Z[t], normalised to a positive leading coefficient."""
    x = [Fraction(c) for c in a.coeffs]
    y = [Fraction(c) for c in b.coeffs]
    while y:
        _, r = _qdivmod(x, y)
        x, y = y, r
    g = _primitive(x)
    if g.coeffs and g.coeffs[-1] < 0:
        g = -g
    return g


# -- Laurent series ----------------------------------------------------------

@dataclass(frozen=True)
class LaurentSeries:
    """``sum_{k=lead}^{lead+K-1} a_k t^k + O(t^(lead+K))``.

    Canonical form strips leading zeros (raising ``lead``, lowering ``K``), so the
    precision ``lead + K`` is preserved.  A zero series carries ``K = 0`` and
    ``lead`` equal to its precision.
    """

    lead: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        c = [int(a) for a in self.coeffs]
        lead = int(self.lead)
        i = 0
        while i < len(c) and c[i] == 0:
            i += 1
        object.__setattr__(self, "lead", lead + i)
        object.__setattr__(self, "coeffs", tuple(c[i:]))

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[int], lead: int = 0, terms: int | None = None):
        """Series with given leading coefficients, zero-padded to ``terms`` terms."""
        c = [int(a) for a in coeffs]
        if terms is not None:
            if terms < len(c):
                c = c[:terms]
            else:
                c += [0] * (terms - len(c))
        return cls(lead, tuple(c))

    @property
    def truncation(self) -> int:
        return len(self.coeffs)

    @property
    def precision(self) -> int:
        """First exponent whose coefficient is unknown."""
        return self.lead + len(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __getitem__(self, k: int) -> int:
        if k >= self.precision:
            raise IndexError(f"coefficient of t^{k} lies beyond the known window")
        if k < self.lead:
            return 0
        return self.coeffs[k - self.lead]

    def window(self, start: int, stop: int) -> list[int]:
        return [self[k] for k in range(start, stop)]

    def truncate(self, precision: int) -> "LaurentSeries":
        """Forget every coefficient from ``t^precision`` on."""
        if precision >= self.precision:
            return self
        if precision <= self.lead:
            return LaurentSeries(precision, ())
        return LaurentSeries(self.lead, self.coeffs[: precision - self.lead])

    def shift(self, j: int) -> "LaurentSeries":
        """Multiply by ``t^j``."""
        return LaurentSeries(self.lead + j, self.coeffs)

    def __neg__(self):
        return LaurentSeries(self.lead, tuple(-a for a in self.coeffs))

    def __add__(self, other: "LaurentSeries") -> "LaurentSeries":
        return series_add(self, other)

    def __sub__(self, other: "LaurentSeries") -> "LaurentSeries":
        return series_add(self, -other)

    def __mul__(self, other: "LaurentSeries") -> "LaurentSeries":
        return series_mul(self, other)

    def __repr__(self):
        body = ", ".join(str(a) for a in self.coeffs)
        return f"LaurentSeries(lead={self.lead}, [{body}], K={self.truncation})"


def series_add(a: LaurentSeries, b: LaurentSeries) -> LaurentSeries:
    prec = min(a.precision, b.precision)
    lead = min(a.lead, b.lead, prec)
    return LaurentSeries(lead, tuple(a[k] + b[k] for k in range(lead, prec)))


def series_mul(a: LaurentSeries, b: LaurentSeries) -> LaurentSeries:
    """Exact product; the known window is the narrower of the two."""
    lead = a.lead + b.lead
    K = min(a.truncation, b.truncation)
    out = [0] * K
    for i in range(K):
        ai = a.coeffs[i]
        if ai:
            for j in range(K - i):
                out[i + j] += ai * b.coeffs[j]
    return LaurentSeries(lead, tuple(out))


def series_inverse(a: LaurentSeries, terms: int) -> LaurentSeries:
    """Inverse in Z[[t]][t^-1], accurate to ``min(terms, a.truncation)`` terms."""
    if a.is_zero() or a.coeffs[0] not in (1, -1):
        raise NotInvertible(f"lowest coefficient of {a!r} is not +-1")
    K = min(terms, a.truncation)
    u = a.coeffs[0]
    inv = [0] * K
    for k in range(K):
        s = 1 if k == 0 else 0
        for j in range(1, k + 1):
            s -= a.coeffs[j] * inv[k - j]
        inv[k] = s * u  # u = 1/u for a unit
    return LaurentSeries(-a.lead, tuple(inv))


# -- rational functions ------------------------------------------------------

@dataclass(frozen=True)
class NovikovRational:
    """``P(t) / (t^m Q(t))`` with integer polynomials and ``Q(0) = 1``.

    Construction canonicalises: common factors are cancelled, ``m`` is made
    minimal and the sign is fixed by ``Q(0) = 1``.
    """

    P: IntPoly
    m: int = 0
    Q: IntPoly = IntPoly((1,))

    def __post_init__(self):
        P, Q, m = _as_poly(self.P), _as_poly(self.Q), int(self.m)
        if m < 0:
            raise ValueError("shift m must be non-negative")
        if Q.is_zero():
            raise ZeroDivisionError("denominator is zero")
        if P.is_zero():
            P, Q, m = IntPoly(), IntPoly((1,)), 0
        else:
            g = poly_gcd(P, Q)
            if g.degree > 0 or abs(g[0]) != 1:
                P, Q = poly_divexact(P, g), poly_divexact(Q, g)
            # t-factors of Q move into the shift
            v = Q.valuation()
            if v > 0:
                Q = IntPoly(Q.coeffs[v:])
                m += v
            v = min(P.valuation(), m)
            if v > 0:
                P = IntPoly(P.coeffs[v:])
                m -= v
            if Q[0] < 0:
                P, Q = -P, -Q
            if Q[0] != 1:
                raise ValueError(f"Q(0) must be 1 after reduction, got {Q[0]}")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "m", m)

    def __repr__(self):
        return f"NovikovRational(P={self.P.coeffs}, m={self.m}, Q={self.Q.coeffs})"


def expand_rational(r: NovikovRational, terms: int) -> LaurentSeries:
    """First ``terms`` coefficients of ``t^-m P/Q``, starting at ``t^-m``."""
    q = r.Q.coeffs
    a = [0] * terms
    for k in range(terms):
        s = r.P[k]
        for j in range(1, min(k, len(q) - 1) + 1):
            s -= q[j] * a[k - j]
        a[k] = s
    return LaurentSeries(-r.m, tuple(a))


def _berlekamp_massey(seq: Sequence[int]) -> list[Fraction]:
    """Shortest connection polynomial C (C[0] = 1) of ``seq`` over Q."""
    s = [Fraction(x) for x in seq]
    C = [Fraction(1)]
    B = [Fraction(1)]
    L, shift, b = 0, 1, Fraction(1)
    for n in range(len(s)):
        d = s[n]
        for i in range(1, L + 1):
            if i < len(C):
                d += C[i] * s[n - i]
        if d == 0:
            shift += 1
            continue
        coef = d / b
        T = C[:]
        need = len(B) + shift
        if len(C) < need:
            C += [Fraction(0)] * (need - len(C))
        for i, bi in enumerate(B):
            C[i + shift] -= coef * bi
        if 2 * L <= n:
            L = n + 1 - L
            B, b, shift = T, d, 1
        else:
            shift += 1
    C = C[: L + 1] + [Fraction(0)] * max(0, L + 1 - len(C))
    return C


def fit_rational(s: LaurentSeries, max_deg: int) -> NovikovRational:
    """Minimal rational function reproducing every known term of ``s``.

    Searches ``P/(t^m Q)`` with ``deg P, deg Q <= max_deg`` (after pulling out
    the leading power of ``t``) by exact recurrence synthesis over Q.  Raises
    :class:`NoFit` when no such function exists or when the only candidate has
    non-integral ``Q``.
    """
    if s.is_zero():
        return NovikovRational(IntPoly())
    n = s.truncation
    if n < 2 * max_deg + 2:
        raise ValueError(f"need at least {2 * max_deg + 2} known terms, have {n}")
    C = _berlekamp_massey(s.coeffs)
    L = len(C) - 1
    while len(C) > 1 and C[-1] == 0:
        C.pop()
    if any(c.denominator != 1 for c in C):
        raise NoFit("minimal recurrence has non-integral coefficients")
    Q = IntPoly(tuple(int(c) for c in C))
    P = IntPoly((Q * IntPoly(s.coeffs)).coeffs[:L])
    if Q.degree > max_deg or P.degree > max_deg:
        raise NoFit(f"linear complexity {L} exceeds degree bound {max_deg}")
    if s.lead >= 0:
        return NovikovRational(P * IntPoly.monomial(s.lead), 0, Q)
    return NovikovRational(P, -s.lead, Q)


def growth_estimate(r: NovikovRational) -> float:
    """Reciprocal of the smallest root modulus of ``Q`` (0 for polynomials)."""
    if r.P.is_zero() or r.Q.degree <= 0:
        return 0.0
    c = np.array(r.Q.coeffs[::-1], dtype=float)
    roots = np.roots(c)
    dc = np.polyder(c)
    # Newton polish to a 1e-9 residual
    for _ in range(50):
        val = np.polyval(c, roots)
        if np.all(np.abs(val) <= 1e-9 * np.maximum(1.0, np.abs(roots) ** len(c))):
            break
        der = np.polyval(dc, roots)
        ok = der != 0
        roots = np.where(ok, roots - val / np.where(ok, der, 1), roots)
    return float(1.0 / np.min(np.abs(roots)))


def growth_bound(r: NovikovRational, k: int) -> float:
    """Upper bound on ``|a_k|`` for the power-series part of ``r``.

    ``C * sigma^k * (k+1)^deg Q`` with ``C = sum|p_i| * (sum|q_i|)^deg Q``.  An
    integral ``Q`` with ``Q(0) = 1`` has ``sigma >= 1``; for constant ``Q`` the
    bound uses base 1, which covers the finitely many nonzero terms.
    """
    d = max(r.Q.degree, 0)
    C = sum(abs(p) for p in r.P.coeffs) * sum(abs(q) for q in r.Q.coeffs) ** d
    sigma = max(growth_estimate(r), 1.0)
    return C * sigma**k * (k + 1) ** d


# -- JSON ---------------------------------------------------------------------

def poly_to_json(p: IntPoly) -> list[str]:
    return [str(a) for a in p.coeffs]


def poly_from_json(data) -> IntPoly:
    return IntPoly(tuple(int(a) for a in data))


def series_to_json(s: LaurentSeries) -> dict:
    return {"lead": s.lead, "coeffs": [str(a) for a in s.coeffs], "truncation": s.truncation}


def series_from_json(data) -> LaurentSeries:
    coeffs = [int(a) for a in data["coeffs"]]
    K = int(data.get("truncation", len(coeffs)))
    if K != len(coeffs):
        raise ValueError("truncation does not match the number of coefficients")
    return LaurentSeries(int(data["lead"]), tuple(coeffs))


def rational_to_json(r: NovikovRational) -> dict:
    return {"P": poly_to_json(r.P), "m": r.m, "Q": poly_to_json(r.Q)}


def rational_from_json(data) -> NovikovRational:
    return NovikovRational(poly_from_json(data["P"]), int(data["m"]), poly_from_json(data["Q"]))
