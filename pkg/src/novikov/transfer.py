"""Incidence series from an integer transfer endomorphism.

Given an endomorphism ``A`` of Z^r, a class ``p`` and a functional ``lam``, the
series ``sum_k lam(A^k p) t^k`` equals ``lam . adj(I - At) . p / det(I - At)``.
Both polynomials are produced by fraction-free elimination over Z[t];
:func:`brute_force_series` evaluates the powers directly as a cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .novring import IntPoly, LaurentSeries, NovikovRational, poly_divexact


class DimensionMismatch(ValueError):
    pass


class TorsionNotSupported(ValueError):
    """Only free groups Z^r are handled; torsion summands are refused."""


@dataclass(frozen=True)
class Endomorphism:
    matrix: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(a) for a in row) for row in self.matrix)
        if not rows or any(len(row) != len(rows) for row in rows):
            raise DimensionMismatch("endomorphism matrix must be square and non-empty")
        object.__setattr__(self, "matrix", rows)

    @property
    def rank(self) -> int:
        return len(self.matrix)

    def apply(self, v: Sequence[int]) -> list[int]:
        return [sum(a * b for a, b in zip(row, v)) for row in self.matrix]


@dataclass(frozen=True)
class MonodromyData:
    h: Endomorphism
    class_x: tuple[int, ...]
    class_y: tuple[int, ...]
    shift: int = 0

    def __post_init__(self):
        h = self.h if isinstance(self.h, Endomorphism) else Endomorphism(self.h)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "class_x", tuple(int(a) for a in self.class_x))
        object.__setattr__(self, "class_y", tuple(int(a) for a in self.class_y))
        _check_dims(h, self.class_y, self.class_x)
        if self.shift < 0:
            raise ValueError("shift must be non-negative")


def _check_dims(A: Endomorphism, lam, p):
    if len(lam) != A.rank or len(p) != A.rank:
        raise DimensionMismatch(
            f"rank {A.rank} endomorphism with |lambda|={len(lam)}, |p|={len(p)}"
        )


def _as_endo(A) -> Endomorphism:
    return A if isinstance(A, Endomorphism) else Endomorphism(A)


def det_and_adjugate_action(A, p: Sequence[int]) -> tuple[IntPoly, list[IntPoly]]:
    """Return ``det(I - At)`` and ``adj(I - At) p`` over Z[t].

    Bareiss elimination on the augmented matrix ``[I - At | p]``.  The leading
    principal minors of ``I - At`` are 1 at ``t = 0``, so no pivoting is needed.
    """
    A = _as_endo(A)
    r = A.rank
    if len(p) != r:
        raise DimensionMismatch(f"|p|={len(p)} for rank {r}")
    M = [
        [IntPoly(((1 if i == j else 0), -A.matrix[i][j])) for j in range(r)]
        + [IntPoly((int(p[i]),))]
        for i in range(r)
    ]
    prev = IntPoly((1,))
    for k in range(r - 1):
        piv = M[k][k]
        for i in range(k + 1, r):
            for j in range(k + 1, r + 1):
                M[i][j] = poly_divexact(piv * M[i][j] - M[i][k] * M[k][j], prev)
            M[i][k] = IntPoly()
        prev = piv
    det = M[r - 1][r - 1]
    # fraction-free back substitution; x holds Cramer numerators
    x: list[IntPoly] = [IntPoly()] * r
    for i in range(r - 1, -1, -1):
        acc = det * M[i][r]
        for j in range(i + 1, r):
            acc = acc - M[i][j] * x[j]
        x[i] = poly_divexact(acc, M[i][i])
    return det, x


def generating_series(A, lam: Sequence[int], p: Sequence[int]) -> NovikovRational:
    """``sum_{k>=0} lam(A^k p) t^k`` as a reduced ``P/Q`` with ``Q(0) = 1``."""
    A = _as_endo(A)
    _check_dims(A, lam, p)
    det, adj_p = det_and_adjugate_action(A, p)
    P = IntPoly()
    for l, xi in zip(lam, adj_p):
        P = P + int(l) * xi
    return NovikovRational(P, 0, det)


def brute_force_series(A, lam: Sequence[int], p: Sequence[int], terms: int) -> LaurentSeries:
    """Coefficients ``lam(A^k p)``, ``k < terms``, by repeated matrix-vector products."""
    A = _as_endo(A)
    _check_dims(A, lam, p)
    if terms < 0:
        raise ValueError("terms must be non-negative")
    v = [int(a) for a in p]
    out = []
    for _ in range(terms):
        out.append(sum(int(l) * a for l, a in zip(lam, v)))
        v = A.apply(v)
    return LaurentSeries(0, tuple(out))


def incidence_series(d: MonodromyData) -> NovikovRational:
    """``t^-m`` times the generating series of ``(h, [y], [x])``."""
    r = generating_series(d.h, d.class_y, d.class_x)
    return NovikovRational(r.P, r.m + d.shift, r.Q)


def monodromy_from_json(data: dict) -> MonodromyData:
    if any(int(a) != 0 for a in data.get("torsion", [])):
        raise TorsionNotSupported("torsion coefficients are not supported")
    try:
        h = [[int(a) for a in row] for row in data["h"]]
        lam = [int(a) for a in data["lambda"]]
        p = [int(a) for a in data["p"]]
        m = int(data.get("m", 0))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed monodromy data: {exc}") from exc
    return MonodromyData(Endomorphism(h), tuple(p), tuple(lam), m)


def monodromy_to_json(d: MonodromyData) -> dict:
    return {
        "h": [[str(a) for a in row] for row in d.h.matrix],
        "lambda": [str(a) for a in d.class_y],
        "p": [str(a) for a in d.class_x],
        "m": d.shift,
    }
