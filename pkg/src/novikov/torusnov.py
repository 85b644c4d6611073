"""Novikov complex of a circle-valued Morse function on the 2-torus.

The function is ``f(x, y) = x + g(x, y) mod 1`` with the default perturbation
``g = (a / 2 pi) sin(2 pi x) cos(2 pi y)``.  On the infinite cyclic cover
``R x S^1`` it lifts to ``F(x~, y) = x~ + g``; the deck generator ``t`` acts by
``x~ -> x~ - 1`` so that ``F(z t) = F(z) - 1``.

Incidence coefficients ``n_k(p, q)`` count descending gradient lines from the
lift of ``p`` with ``x~`` in ``[0, 1)`` to the lift of ``q`` shifted by
``t^k``.  Lines leaving a saddle are found by shooting along its unstable
eigenvector.  Lines leaving a maximum are the jumps of its descending fan: rays
on a small circle are followed down to the minima, and every ray bracket whose
endpoints land in different places is refined until it pins a separatrix, which
must pass through a saddle.

Sign convention.  Each saddle ``q`` carries a fixed unstable direction ``e_q``
(the lexicographically positive unit eigenvector for the negative Hessian
eigenvalue).  The branch leaving ``q`` along ``+e_q`` counts ``+1`` and the one
along ``-e_q`` counts ``-1``.  A maximum is oriented by the standard orientation
of the plane, so fan angles increase counterclockwise, and a separatrix into
``q`` counts ``+1`` exactly when the rays just counterclockwise of it leave
``q`` along ``+e_q``.  With these choices the boundary of the fan telescopes
and ``d1 d2 = 0``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .novring import (
    IntPoly,
    LaurentSeries,
    NoFit,
    NovikovRational,
    expand_rational,
    fit_rational,
    growth_bound,
    growth_estimate,
    rational_to_json,
)

TWO_PI = 2.0 * math.pi
GRAD_TOL = 1e-10
HESSIAN_MARGIN = 1e-6


class DegenerateCritical(ValueError):
    pass


class Unresolved(RuntimeError):
    pass


class IndexMismatch(ValueError):
    pass


# -- the system -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Perturbation:
    """``g`` with its gradient and Hessian, all vectorised over ``(..., 2)``."""

    value: Callable
    gradient: Callable
    hessian: Callable


def default_perturbation(a: float) -> Perturbation:
    c = a / TWO_PI

    def value(z):
        return c * np.sin(TWO_PI * z[..., 0]) * np.cos(TWO_PI * z[..., 1])

    def gradient(z):
        sx, cx = np.sin(TWO_PI * z[..., 0]), np.cos(TWO_PI * z[..., 0])
        sy, cy = np.sin(TWO_PI * z[..., 1]), np.cos(TWO_PI * z[..., 1])
        return np.stack([a * cx * cy, -a * sx * sy], axis=-1)

    def hessian(z):
        sx, cx = np.sin(TWO_PI * z[..., 0]), np.cos(TWO_PI * z[..., 0])
        sy, cy = np.sin(TWO_PI * z[..., 1]), np.cos(TWO_PI * z[..., 1])
        d = -TWO_PI * a * sx * cy
        o = -TWO_PI * a * cx * sy
        return np.stack([np.stack([d, o], -1), np.stack([o, d], -1)], -2)

    return Perturbation(value, gradient, hessian)


@dataclass(frozen=True, eq=False)
class TorusMorseSystem:
    """``f = x + g`` on the flat torus, optionally with an extra field added to the gradient.

    ``extra`` must be 1-periodic in both coordinates and vanish near the
    critical points of ``f``; it models a C0-small change of the gradient.
    """

    amplitude: float = 1.3
    perturbation: Perturbation | None = None
    extra: Callable | None = None

    @property
    def g(self) -> Perturbation:
        return self.perturbation or default_perturbation(self.amplitude)

    def F(self, z):
        z = np.asarray(z, dtype=float)
        return z[..., 0] + self.g.value(z)

    def grad(self, z):
        z = np.asarray(z, dtype=float)
        out = self.g.gradient(z)
        out[..., 0] += 1.0
        return out

    def hessian(self, z):
        return self.g.hessian(np.asarray(z, dtype=float))

    def descending(self, z):
        """The field ``-(grad F + extra)`` whose trajectories are counted."""
        v = -self.grad(z)
        if self.extra is not None:
            v = v - self.extra(z)
        return v

    def with_extra(self, extra: Callable | None) -> "TorusMorseSystem":
        return TorusMorseSystem(self.amplitude, self.perturbation, extra)


@dataclass(frozen=True)
class CriticalPoint:
    name: str
    position: tuple[float, float]
    index: int
    hessian_eigenvalues: tuple[float, float]
    value: float
    orientation: tuple[float, float] | None = None  # e_q for saddles

    @property
    def lift(self) -> float:
        return self.position[0]

    def to_json(self) -> dict:
        out = {"name": self.name, "position": list(self.position), "index": self.index,
               "F": self.value, "hessian_eigenvalues": list(self.hessian_eigenvalues)}
        if self.orientation is not None:
            out["unstable_direction"] = list(self.orientation)
        return out


def _periodic(d):
    return d - np.rint(d)


def _lex_positive(v):
    v = np.asarray(v, dtype=float)
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return v / np.linalg.norm(v)


def find_critical_points(sys: TorusMorseSystem, seeds: int = 64, iterations: int = 60) -> list[CriticalPoint]:
    """Newton's method on ``grad F = 0`` from a ``seeds x seeds`` grid, deduplicated mod 1.

    Maxima are listed first, then saddles, then minima; within a kind points are
    ordered by position.  Raises :class:`DegenerateCritical` if some zero has a
    Hessian determinant below the margin.
    """
    axis = (np.arange(seeds) + 0.5) / seeds
    z = np.stack(np.meshgrid(axis, axis, indexing="ij"), -1).reshape(-1, 2)
    with np.errstate(all="ignore"):
        for _ in range(iterations):
            H = sys.hessian(z)
            G = sys.grad(z)
            det = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
            ok = np.abs(det) > 1e-14
            dz = np.zeros_like(z)
            dz[ok, 0] = (H[ok, 1, 1] * G[ok, 0] - H[ok, 0, 1] * G[ok, 1]) / det[ok]
            dz[ok, 1] = (-H[ok, 1, 0] * G[ok, 0] + H[ok, 0, 0] * G[ok, 1]) / det[ok]
            z = np.where(np.isfinite(dz), z - dz, np.nan)
        z = np.mod(z, 1.0)
        z[z > 1 - 1e-12] = 0.0
        good = np.all(np.isfinite(z), axis=1)
        z = z[good]
        z = z[np.linalg.norm(sys.grad(z), axis=1) <= GRAD_TOL]
    found: list[np.ndarray] = []
    for p in z:
        if all(np.linalg.norm(_periodic(p - q)) > 1e-6 for q in found):
            found.append(p)
    raw = []
    for p in found:
        w = np.linalg.eigvalsh(sys.hessian(p))
        if abs(w[0] * w[1]) < HESSIAN_MARGIN:
            raise DegenerateCritical(f"Hessian at {p.tolist()} has determinant {w[0] * w[1]:.3g}")
        raw.append((int(np.sum(w < 0)), p, w))
    raw.sort(key=lambda r: (-r[0], round(r[1][0], 9), round(r[1][1], 9)))
    kinds = {2: "max", 1: "sad", 0: "min"}
    counters = {0: 0, 1: 0, 2: 0}
    out = []
    for index, p, w in raw:
        name = f"{kinds[index]}{counters[index]}"
        counters[index] += 1
        e = None
        if index == 1:
            vals, vecs = np.linalg.eigh(sys.hessian(p))
            e = tuple(float(c) for c in _lex_positive(vecs[:, 0]))
        out.append(CriticalPoint(name, (float(p[0]), float(p[1])), index,
                                 (float(w[0]), float(w[1])), float(sys.F(p)), e))
    return out


def euler_characteristic(points: list[CriticalPoint]) -> int:
    return sum((-1) ** p.index for p in points)


# -- shooting -----------------------------------------------------------------------

@dataclass(frozen=True)
class ShootingConfig:
    rays: int = 256
    rho0: float = 1e-4
    rho1: float = 1e-3
    step: float = 1e-2
    t_max: float = 60.0
    floor: float = 1e-9
    cluster_gap: float = 1e-6
    sections: int = 16


DEEP, STUCK = -1, -2


def _rk4(f, z, h):
    k1 = f(z)
    k2 = f(z + 0.5 * h * k1)
    k3 = f(z + 0.5 * h * k2)
    k4 = f(z + h * k3)
    return z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _descend(sys, z0, minima, floor_level, cfg, record=False):
    """Follow descending trajectories until they enter a minimum ball.

    Returns labels ``(code, lift)`` per start, where ``code`` is the minimum's
    position in ``minima`` (or DEEP / STUCK) and ``lift`` the ``x~``-translate
    of that minimum which was hit, plus the recorded paths if requested.
    """
    z = np.array(z0, dtype=float)
    n = len(z)
    mins = np.array([m.position for m in minima]).reshape(-1, 2)
    code = np.full(n, STUCK)
    lift = np.zeros(n, dtype=int)
    alive = np.ones(n, dtype=bool)
    paths = [[p.copy()] for p in z] if record else None
    steps = int(math.ceil(cfg.t_max / cfg.step))
    for _ in range(steps):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        zi = _rk4(sys.descending, z[idx], cfg.step)
        z[idx] = zi
        if record:
            for j, p in zip(idx, zi):
                paths[j].append(p.copy())
        if len(mins):
            dx = zi[:, None, 0] - mins[None, :, 0]
            kk = np.rint(dx)
            d2 = (dx - kk) ** 2 + _periodic(zi[:, None, 1] - mins[None, :, 1]) ** 2
            j = np.argmin(d2, axis=1)
            hit = d2[np.arange(len(idx)), j] < cfg.rho1**2
            code[idx[hit]] = j[hit]
            lift[idx[hit]] = kk[np.arange(len(idx)), j][hit].astype(int)
            alive[idx[hit]] = False
        deep = alive[idx] & (sys.F(zi) <= floor_level)
        code[idx[deep]] = DEEP
        alive[idx[deep]] = False
    labels = list(zip(code.tolist(), lift.tolist()))
    if record:
        return labels, z, [np.array(p) for p in paths]
    return labels, z


@dataclass(frozen=True)
class Connection:
    """One descending line from ``source`` to ``target`` shifted by ``t^k``."""

    source: str
    target: str
    k: int
    sign: int
    parameter: float


def shoot_unstable(sys: TorusMorseSystem, p: CriticalPoint, ray_count: int = 256,
                   cfg: ShootingConfig = ShootingConfig(), depth: float = 12.0,
                   source_lift: int = 0, points: list[CriticalPoint] | None = None):
    """Launch the descending fan of ``p`` and follow it down.

    Index-1 points get the two rays ``p +- rho0 e_p``; maxima get ``ray_count``
    rays on the circle of radius ``rho0``.  Returns ``(parameters, labels,
    endpoints)`` where ``labels`` are ``(minimum name or 'deep'/'stuck', k)``
    with ``k`` the power of ``t`` relative to the source lift.
    """
    if p.index < 1:
        raise IndexMismatch("minima have no descending fan")
    points = points if points is not None else find_critical_points(sys)
    minima = [c for c in points if c.index == 0]
    centre = np.array([p.position[0] - source_lift, p.position[1]])
    if p.index == 1:
        params = np.array([1.0, -1.0])
        starts = centre + cfg.rho0 * params[:, None] * np.array(p.orientation)
    else:
        params = TWO_PI * np.arange(ray_count) / ray_count
        starts = centre + cfg.rho0 * np.stack([np.cos(params), np.sin(params)], -1)
    labels, ends = _descend(sys, starts, minima, p.value + source_lift - depth, cfg)
    return params, [_name_label(lab, minima, source_lift) for lab in labels], ends


def _name_label(lab, minima, source_lift):
    code, lift = lab
    if code == DEEP:
        return ("deep", 0)
    if code == STUCK:
        return ("stuck", 0)
    # target lift x~ = x_q - k_abs, and lift = rint(x~ - x_q)
    return (minima[code].name, -lift - source_lift)


def _closest_saddle(path, saddles):
    best = (math.inf, None, 0, 0)
    for s in saddles:
        dx = path[:, 0] - s.position[0]
        kk = np.rint(dx)
        d = np.hypot(dx - kk, _periodic(path[:, 1] - s.position[1]))
        i = int(np.argmin(d))
        if d[i] < best[0]:
            best = (float(d[i]), s, int(kk[i]), i)
    return best


def _exit_branch(path, s: CriticalPoint, kk: int, rho: float) -> int:
    rel = np.stack([path[:, 0] - s.position[0] - kk, _periodic(path[:, 1] - s.position[1])], -1)
    d = np.linalg.norm(rel, axis=1)
    i = int(np.argmin(d))
    after = np.nonzero(d[i:] > 2 * rho)[0]
    if after.size == 0:
        return 0
    return int(np.sign(rel[i + after[0]] @ np.array(s.orientation)))


def _fan_connections(sys, p, points, cfg, source_lift, depth):
    saddles = [c for c in points if c.index == 1]
    minima = [c for c in points if c.index == 0]
    centre = np.array([p.position[0] - source_lift, p.position[1]])
    floor_level = p.value + source_lift - depth

    def rays(thetas):
        starts = centre + cfg.rho0 * np.stack([np.cos(thetas), np.sin(thetas)], -1)
        return _descend(sys, starts, minima, floor_level, cfg)[0]

    # half-step offset keeps the initial rays off symmetry axes of the fan
    thetas = TWO_PI * (np.arange(cfg.rays + 1) + 0.5) / cfg.rays
    labels = rays(thetas[:-1])
    labels.append(labels[0])
    brackets = []
    pending = [(thetas[i], thetas[i + 1], labels[i], labels[i + 1])
               for i in range(cfg.rays) if labels[i] != labels[i + 1]]
    while pending:
        lo, hi, la, lb = pending.pop()
        if hi - lo < cfg.floor:
            brackets.append((lo, hi))
            continue
        ts = np.linspace(lo, hi, cfg.sections + 1)
        inner = rays(ts[1:-1])
        labs = [la] + inner + [lb]
        for i in range(cfg.sections):
            if labs[i] != labs[i + 1]:
                pending.append((ts[i], ts[i + 1], labs[i], labs[i + 1]))
    brackets.sort()
    for (a, _), (b, _) in zip(brackets, brackets[1:]):
        if b - a < cfg.cluster_gap:
            raise Unresolved(f"separatrices of {p.name} closer than {cfg.cluster_gap} at {a}")
    out = []
    for lo, hi in brackets:
        mid = 0.5 * (lo + hi)
        th = np.array([lo, mid, hi])
        starts = centre + cfg.rho0 * np.stack([np.cos(th), np.sin(th)], -1)
        _, _, paths = _descend(sys, starts, minima, floor_level, cfg, record=True)
        dist, s, kk, _ = _closest_saddle(paths[1], saddles)
        if s is None or dist > cfg.rho1:
            raise Unresolved(f"separatrix of {p.name} at angle {mid:.12f} misses every saddle")
        b_hi = _exit_branch(paths[2], s, kk, cfg.rho1)
        b_lo = _exit_branch(paths[0], s, kk, cfg.rho1)
        if b_hi == 0 or b_hi != -b_lo:
            raise Unresolved(f"cannot tell the branches apart at {s.name} (angle {mid:.12f})")
        out.append(Connection(p.name, s.name, -kk - source_lift, b_hi, float(mid)))
    return out


@functools.lru_cache(maxsize=256)
def _connections_cached(sys, p, points, cfg, source_lift, depth):
    if p.index == 1:
        params, labels, _ = shoot_unstable(sys, p, cfg=cfg, depth=depth,
                                           source_lift=source_lift, points=list(points))
        return tuple(Connection(p.name, lab[0], lab[1], int(sgn), float(sgn))
                     for sgn, lab in zip(params, labels) if lab[0] not in ("deep", "stuck"))
    return tuple(_fan_connections(sys, p, list(points), cfg, source_lift, depth))


def connections_from(sys: TorusMorseSystem, p: CriticalPoint, points: list[CriticalPoint],
                     cfg: ShootingConfig = ShootingConfig(), source_lift: int = 0,
                     depth: float = 12.0) -> tuple[Connection, ...]:
    """Every descending line leaving ``p`` toward a critical point of index one lower."""
    return _connections_cached(sys, p, tuple(points), cfg, source_lift, depth)


# -- counting ---------------------------------------------------------------------------

@dataclass
class FlowLineCount:
    source: CriticalPoint
    target: CriticalPoint
    counts: dict[int, int]
    kmin: int
    K: int
    connections: list = field(default_factory=list)

    def series(self) -> LaurentSeries:
        return LaurentSeries.from_coeffs(
            [self.counts.get(k, 0) for k in range(self.kmin, self.K + 1)], self.kmin)

    def to_json(self) -> dict:
        return {"source": self.source.name, "target": self.target.name, "kmin": self.kmin,
                "K": self.K, "counts": {str(k): n for k, n in sorted(self.counts.items())}}


def count_flow_lines(sys: TorusMorseSystem, p: CriticalPoint, q: CriticalPoint, K: int,
                     points: list[CriticalPoint] | None = None,
                     cfg: ShootingConfig = ShootingConfig(),
                     source_lift: int = 0, target_lift: int = 0) -> FlowLineCount:
    """Signed counts ``n_k`` of lines from ``p t^source_lift`` to ``q t^(target_lift + source_lift + k)``.

    The window starts at the first ``k`` compatible with ``F`` decreasing along
    the line and ends at ``K``.  Lines outside the window are ignored.
    """
    if p.index - q.index != 1:
        raise IndexMismatch(f"index must drop by one, got {p.index} -> {q.index}")
    points = points if points is not None else find_critical_points(sys)
    kmin = math.floor(q.value - target_lift - p.value) + 1
    spread = max(c.value for c in points) - min(c.value for c in points)
    depth = max(12.0, K + abs(target_lift) + 4 + spread)
    counts: dict[int, int] = {}
    used = []
    for c in connections_from(sys, p, points, cfg, source_lift, depth):
        k = c.k - target_lift
        if c.target != q.name:
            continue
        if k < kmin:
            raise Unresolved(f"line {p.name}->{q.name} at k={k} rises in F")
        if k <= K:
            counts[k] = counts.get(k, 0) + c.sign
            used.append(c)
    counts = {k: n for k, n in counts.items() if n != 0}
    return FlowLineCount(p, q, counts, kmin, K, used)


# -- the complex ----------------------------------------------------------------------------

@dataclass
class NovikovMatrixEntry:
    count: FlowLineCount
    fitted: NovikovRational | None
    held_out_ok: bool | None
    growth_ok: bool | None

    @property
    def counted(self) -> LaurentSeries:
        return self.count.series()

    def to_json(self) -> dict:
        return {
            "counts": self.count.to_json()["counts"], "kmin": self.count.kmin,
            "fitted": rational_to_json(self.fitted) if self.fitted is not None else None,
            "held_out_ok": self.held_out_ok, "growth_ok": self.growth_ok,
            "growth_rate": growth_estimate(self.fitted) if self.fitted is not None else None,
        }


@dataclass
class BoundaryMatrix:
    rows: list[CriticalPoint]
    cols: list[CriticalPoint]
    entries: list[list[NovikovMatrixEntry]]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)

    def to_json(self) -> dict:
        return {"rows": [r.name for r in self.rows], "cols": [c.name for c in self.cols],
                "entries": [[e.to_json() for e in row] for row in self.entries]}


def fit_entry(count: FlowLineCount, max_deg_cap: int, held_out: int = 2):
    """Fit the counted series leaving ``held_out`` terms out, then check them."""
    s = count.series()
    if s.is_zero():
        return NovikovRational(IntPoly()), True, True
    train = s.truncate(s.precision - held_out)
    max_deg = min(max_deg_cap, (train.truncation - 2) // 2)
    if max_deg < 0:
        return None, None, None
    try:
        r = fit_rational(train, max_deg)
    except NoFit:
        return None, False, None
    full = expand_rational(r, s.precision + r.m)
    ok = all(full[k] == s[k] for k in range(s.lead, s.precision))
    growth = all(abs(s[k]) <= growth_bound(r, k + r.m) * (1 + 1e-9)
                 for k in range(max(s.lead, -r.m), s.precision))
    return r, ok, growth


def assemble_novikov(sys: TorusMorseSystem, K: int = 8, cfg: ShootingConfig = ShootingConfig(),
                     points: list[CriticalPoint] | None = None) -> dict[int, BoundaryMatrix]:
    """Boundary matrices ``{2: d2, 1: d1}`` with counted and fitted entries.

    ``d_s`` has a row per index-``s`` point and a column per index-``s-1`` point.
    """
    points = points if points is not None else find_critical_points(sys)
    cap = len(points)
    out = {}
    for s in (2, 1):
        rows = [c for c in points if c.index == s]
        cols = [c for c in points if c.index == s - 1]
        entries = []
        for p in rows:
            row = []
            for q in cols:
                cnt = count_flow_lines(sys, p, q, K, points, cfg)
                r, ok, growth = fit_entry(cnt, cap)
                row.append(NovikovMatrixEntry(cnt, r, ok, growth))
            entries.append(row)
        out[s] = BoundaryMatrix(rows, cols, entries)
    return out


@dataclass
class DSquaredReport:
    K: int
    ok: bool
    nonzero: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"K": self.K, "ok": self.ok, "nonzero": self.nonzero}


def check_d_squared(d2: BoundaryMatrix, d1: BoundaryMatrix, K: int) -> DSquaredReport:
    """Coefficients of ``d1 o d2`` up to ``t^K``; every one must vanish.

    Composition follows rows: ``(d1 o d2)[p][m] = sum_q d2[p][q] d1[q][m]``.
    Raises ValueError if the counted windows are too short to decide order ``K``.
    """
    report = DSquaredReport(K, True)
    for i, p in enumerate(d2.rows):
        for j, m in enumerate(d1.cols):
            total: dict[int, int] = {}
            for l, q in enumerate(d2.cols):
                a = d2.entries[i][l].count
                b = d1.entries[l][j].count
                if a.K + b.kmin < K or b.K + a.kmin < K:
                    raise ValueError(f"counts for {p.name}->{q.name}->{m.name} stop before order {K}")
                for ka, na in a.counts.items():
                    for kb, nb in b.counts.items():
                        if ka + kb <= K:
                            total[ka + kb] = total.get(ka + kb, 0) + na * nb
            bad = {k: v for k, v in sorted(total.items()) if v != 0}
            if bad:
                report.ok = False
                report.nonzero.append({"source": p.name, "target": m.name,
                                       "coefficients": {str(k): v for k, v in bad.items()}})
    return report


def flip_one_sign(d2: BoundaryMatrix, d1: BoundaryMatrix) -> BoundaryMatrix:
    """Copy of ``d2`` with the sign of one counted line reversed (fault injection).

    Picks the first line whose target saddle has a nonzero row in ``d1``.
    """
    for i, row in enumerate(d2.entries):
        for l, e in enumerate(row):
            if e.count.counts and any(x.count.counts for x in d1.entries[l]):
                k, n = next(iter(sorted(e.count.counts.items())))
                counts = dict(e.count.counts)
                counts[k] = n - 2 * (1 if n > 0 else -1)
                cnt = FlowLineCount(e.count.source, e.count.target,
                                    {kk: v for kk, v in counts.items() if v}, e.count.kmin, e.count.K)
                entries = [list(r) for r in d2.entries]
                entries[i][l] = NovikovMatrixEntry(cnt, None, None, None)
                return BoundaryMatrix(d2.rows, d2.cols, entries)
    raise ValueError("no line to flip")


# -- perturbations ------------------------------------------------------------------------------

def _smooth_step(u):
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


def make_bump(points: list[CriticalPoint], delta: float, center=(0.25, 0.25),
              direction=(1.0, 1.0), width: float = 0.1, rho2: float = 0.05) -> Callable:
    """Periodic Gaussian bump of height ``delta`` vanishing within ``rho2`` of every critical point."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    c = np.asarray(center, dtype=float)
    crit = np.array([p.position for p in points]).reshape(-1, 2)

    def bump(z):
        z = np.asarray(z, dtype=float)
        r2 = np.sum(_periodic(z - c) ** 2, axis=-1)
        if len(crit):
            dc = np.min(np.linalg.norm(_periodic(z[..., None, :] - crit), axis=-1), axis=-1)
            cut = _smooth_step(dc / rho2 - 1.0)
        else:
            cut = 1.0
        return (delta * np.exp(-r2 / (2 * width**2)) * cut)[..., None] * d

    return bump


@dataclass
class PerturbationReport:
    delta: float
    K: int
    identical: bool
    differences: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"delta": self.delta, "K": self.K, "identical": self.identical,
                "differences": self.differences}


def all_counts(sys, K, points, cfg=ShootingConfig()) -> dict[tuple[str, str], dict[int, int]]:
    out = {}
    for p in points:
        for q in points:
            if p.index - q.index == 1:
                out[(p.name, q.name)] = count_flow_lines(sys, p, q, K, points, cfg).counts
    return out


def compare_counts(before, after, K, delta=0.0) -> PerturbationReport:
    rep = PerturbationReport(delta, K, True)
    for key in sorted(before):
        a, b = before[key], after[key]
        for k in sorted(set(a) | set(b)):
            if k <= K and a.get(k, 0) != b.get(k, 0):
                rep.identical = False
                rep.differences.append({"source": key[0], "target": key[1], "k": k,
                                        "before": a.get(k, 0), "after": b.get(k, 0)})
    return rep


def perturb_and_recount(sys: TorusMorseSystem, delta: float, K: int = 5,
                        cfg: ShootingConfig = ShootingConfig(), **bump_kw) -> PerturbationReport:
    """Recount every ``n_k`` (``k <= K``) after adding a bump of height ``delta`` to the gradient."""
    points = find_critical_points(sys)
    before = all_counts(sys, K, points, cfg)
    bumped = sys.with_extra(make_bump(points, delta, **bump_kw) if delta else None)
    after = all_counts(bumped, K, points, cfg)
    return compare_counts(before, after, K, delta)


def torus_report(amplitude: float = 1.3, K: int = 8, cfg: ShootingConfig = ShootingConfig(),
                 check_order: int | None = None) -> dict:
    """Everything the command line prints for one system."""
    sys = TorusMorseSystem(amplitude)
    points = find_critical_points(sys)
    mats = assemble_novikov(sys, K, cfg, points)
    order = K - 2 if check_order is None else check_order
    d2sq = check_d_squared(mats[2], mats[1], order) if points else DSquaredReport(order, True)
    counts = {}
    fitted = {}
    growth = {}
    for s in (2, 1):
        m = mats[s]
        for p, row in zip(m.rows, m.entries):
            for q, e in zip(m.cols, row):
                key = f"{p.name}->{q.name}"
                counts[key] = e.count.to_json()["counts"]
                fitted[key] = rational_to_json(e.fitted) if e.fitted is not None else None
                growth[key] = {"rate": growth_estimate(e.fitted) if e.fitted is not None else None,
                               "within_bound": e.growth_ok, "held_out_ok": e.held_out_ok}
    return {
        "amplitude": amplitude, "terms": K,
        "critical_points": [p.to_json() for p in points],
        "euler_characteristic": euler_characteristic(points),
        "counts": counts, "fitted": fitted, "growth": growth,
        "d_squared_ok": d2sq.ok, "d_squared": d2sq.to_json(),
    }
