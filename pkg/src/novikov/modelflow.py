"""The standard chart flow and its residence-time bounds.

On ``R^k x R^(n-k)`` the field ``v0(x, y) = (x, -y)`` has the explicit flow
``(x0 e^t, y0 e^-t)``, so ``|gamma(t)|^2 = a e^(2t) + b e^(-2t)`` with
``a = |x0|^2, b = |y0|^2``.  Every residence time below is obtained by locating
the level crossings of that two-term exponential on its monotone pieces and
measuring the resulting intervals; nothing is integrated step by step.

The A-construction rescales ``v0`` by a radial profile ``lambda(|z|)``.  Its
orbits are those of ``v0`` and only the clock changes, so its residence time is
the quadrature of ``1/lambda`` along the ``v0`` orbit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize

BISECT_XTOL = 1e-12
LN_4_SQRT15 = math.log(4.0 + math.sqrt(15.0))


class NoIntersection(ValueError):
    """The trajectory never meets the region in question."""


class InvalidParams(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ModelPoint:
    """A point ``(x, y)``: ``x`` unstable coordinates, ``y`` stable ones."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "y", np.atleast_1d(np.asarray(self.y, dtype=float)))
        if self.x.ndim != 1 or self.y.ndim != 1:
            raise ValueError("x and y must be vectors")

    @classmethod
    def from_vector(cls, z, k: int) -> "ModelPoint":
        z = np.asarray(z, dtype=float)
        return cls(z[:k], z[k:])

    @property
    def n(self) -> int:
        return self.x.size + self.y.size

    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    def __repr__(self):
        return f"ModelPoint(x={self.x.tolist()}, y={self.y.tolist()})"


@dataclass(frozen=True)
class AnnulusSpec:
    R: float
    r: float

    def __post_init__(self):
        if not self.R > self.r > 0:
            raise InvalidParams(f"need R > r > 0, got R={self.R}, r={self.r}")


class Residence(NamedTuple):
    time: float
    length: float


def lln(x: float) -> float:
    """``ln(x^2 + sqrt(x^4 - 1))``, i.e. ``arccosh(x^2)``; defined for x >= 1."""
    if x < 1:
        raise ValueError("LLN is defined for x >= 1")
    return math.log(x * x + math.sqrt(x**4 - 1.0))


def f0(z: ModelPoint) -> float:
    return float(-z.x @ z.x + z.y @ z.y)


def model_trajectory(z0: ModelPoint, t: float) -> ModelPoint:
    return ModelPoint(z0.x * math.exp(t), z0.y * math.exp(-t))


def _coefficients(z0: ModelPoint) -> tuple[float, float]:
    return float(z0.x @ z0.x), float(z0.y @ z0.y)


def _radius_sq(a: float, b: float, t: float) -> float:
    return a * math.exp(2 * t) + b * math.exp(-2 * t)


def _solve_monotone(fn, lo: float, hi: float) -> float:
    """Root of ``fn`` on ``[lo, hi]`` where ``fn`` is monotone and changes sign."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    return optimize.bisect(fn, lo, hi, xtol=BISECT_XTOL, maxiter=400)


def _expand_bracket(fn, t0: float, direction: float) -> tuple[float, float]:
    """Walk from ``t0`` in ``direction`` until ``fn`` changes sign."""
    f_start = fn(t0)
    step = 1.0
    t = t0
    for _ in range(200):
        t_next = t + direction * step
        if np.sign(fn(t_next)) != np.sign(f_start):
            return (min(t, t_next), max(t, t_next))
        t, step = t_next, step * 2
    raise RuntimeError("failed to bracket a level crossing")


def _sublevel(a: float, b: float, c: float) -> tuple[float, float] | None:
    """Time interval on which ``|gamma(t)|^2 <= c`` (endpoints may be infinite)."""
    if a == 0 and b == 0:
        return (-math.inf, math.inf) if c >= 0 else None
    g = lambda t: _radius_sq(a, b, t) - c
    if a > 0 and b > 0:
        t_min = 0.25 * math.log(b / a)
        if g(t_min) > 0:
            return None
        left = _solve_monotone(g, *_expand_bracket(g, t_min, -1.0)) if g(t_min) < 0 else t_min
        right = _solve_monotone(g, *_expand_bracket(g, t_min, +1.0)) if g(t_min) < 0 else t_min
        return (left, right)
    if a > 0:  # |gamma|^2 increasing
        t0 = 0.5 * math.log(c / a)
        return (-math.inf, _solve_monotone(g, t0 - 1.0, t0 + 1.0))
    t0 = 0.5 * math.log(b / c)
    return (_solve_monotone(g, t0 - 1.0, t0 + 1.0), math.inf)


def _minus(outer, inner) -> list[tuple[float, float]]:
    """``outer`` minus ``inner`` for intervals with ``inner`` inside ``outer``."""
    if outer is None:
        return []
    if inner is None:
        return [outer]
    pieces = [(outer[0], inner[0]), (inner[1], outer[1])]
    return [(lo, hi) for lo, hi in pieces if hi > lo and math.isfinite(hi - lo)]


def annulus_intervals(z0: ModelPoint, R: float, r: float) -> list[tuple[float, float]]:
    """Times at which the trajectory lies in ``r <= |z| <= R``."""
    a, b = _coefficients(z0)
    out = _minus(_sublevel(a, b, R * R), _sublevel(a, b, r * r))
    if not out:
        raise NoIntersection("trajectory misses the annulus")
    return out


def annulus_residence(z0: ModelPoint, spec: AnnulusSpec) -> Residence:
    """Time and arc length of the trajectory through ``B(0,R) \\ B(0,r)``."""
    a, b = _coefficients(z0)
    intervals = annulus_intervals(z0, spec.R, spec.r)
    speed = lambda t: math.sqrt(_radius_sq(a, b, t))  # |v0(z)| = |z|
    time = sum(hi - lo for lo, hi in intervals)
    length = sum(
        integrate.quad(speed, lo, hi, epsabs=1e-13, epsrel=1e-9, limit=200)[0]
        for lo, hi in intervals
    )
    return Residence(time, length)


def annulus_time_bound(spec: AnnulusSpec) -> float:
    return lln(spec.R / spec.r)


def lens_residence(z0: ModelPoint, r: float) -> float:
    """Time spent in ``{|f0| <= r^2} \\ B(0, r)``."""
    a, b = _coefficients(z0)
    if a == 0 and b == 0:
        raise NoIntersection("fixed point at the origin")
    if a == 0 or b == 0:
        # f0 = +-|z|^2 along the axis: the set meets the orbit in one point
        return 0.0
    # f0(gamma(t)) = -a e^2t + b e^-2t decreases strictly and vanishes at t_mid
    level = lambda c: (lambda t: -a * math.exp(2 * t) + b * math.exp(-2 * t) - c)
    t_mid = 0.25 * math.log(b / a)
    g_hi, g_lo = level(r * r), level(-r * r)
    t_enter = _solve_monotone(g_hi, *_expand_bracket(g_hi, t_mid, -1.0))
    t_exit = _solve_monotone(g_lo, *_expand_bracket(g_lo, t_mid, +1.0))
    inside = _sublevel(a, b, r * r)
    time = t_exit - t_enter
    if inside is not None:
        lo, hi = max(inside[0], t_enter), min(inside[1], t_exit)
        time -= max(0.0, hi - lo)
    return time


LENS_TIME_BOUND = 2.0


def quickness_halving(N: int, beta: float) -> float:
    """Quickness constant after halving the chart radii: ``beta + 8N``."""
    if N < 0:
        raise ValueError("N must be non-negative")
    assert LN_4_SQRT15 <= 8.0
    return beta + 8 * N


# -- A-construction -----------------------------------------------------------

def _psi(u):
    return math.exp(-1.0 / u) if u > 0 else 0.0


def smooth_step(u: float) -> float:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    if u <= 0:
        return 0.0
    if u >= 1:
        return 1.0
    p, q = _psi(u), _psi(1.0 - u)
    return p / (p + q)


@dataclass(frozen=True)
class AConstructionParams:
    """Rescaling data for one chart.

    ``B`` is the norm of the gradient and ``D`` its chart constant (>= 1).  With
    ``bump="none"`` the cutoff is identically zero and the field is the plain
    ``v0`` (only allowed with ``Gamma == 1``).
    """

    r: float
    mu: float
    delta: float
    Gamma: float
    B: float
    D: float
    bump: str = "smooth"

    def __post_init__(self):
        if not 0 < self.mu < self.r:
            raise InvalidParams("need 0 < mu < r")
        if self.Gamma < 1 or self.D < 1 or self.B <= 0:
            raise InvalidParams("need Gamma >= 1, D >= 1, B > 0")
        if self.bump == "none":
            if self.Gamma != 1:
                raise InvalidParams("the unrescaled profile needs Gamma == 1")
            return
        if self.bump != "smooth":
            raise InvalidParams(f"unknown bump {self.bump!r}")
        if not 0 < self.delta < (self.r - self.mu) / 2:
            raise InvalidParams("need 0 < delta < (r - mu)/2")
        cap = self.collar_cap
        if not (lln(self.r / (self.r - self.delta)) < cap and lln((self.mu + self.delta) / self.mu) < cap):
            raise InvalidParams("collar condition LLN(...) < min(Dr/2B, 1/2) fails")

    @property
    def collar_cap(self) -> float:
        return min(self.D * self.r / (2 * self.B), 0.5)

    @property
    def residence_bound(self) -> float:
        return 3 * self.D * self.r / self.B


def choose_delta(r: float, mu: float, B: float, D: float, safety: float = 2.0) -> float:
    """Largest collar width meeting the collar condition with a ``safety`` margin.

    ``LLN(x) < c`` is equivalent to ``x < sqrt(cosh c)``, so both constraints
    invert in closed form.
    """
    c = min(D * r / (2 * B), 0.5) / safety
    x = math.sqrt(math.cosh(c))
    d = min(r - r / x, mu * (x - 1.0))
    return min(d, (r - mu) / 2 * (1 - 1e-9))


def bump_theta(params: AConstructionParams, t: float) -> float:
    """Cutoff: 0 near ``mu`` and ``r``, 1 on ``[mu + delta, r - delta]``."""
    if params.bump == "none":
        return 0.0
    mu, r, d = params.mu, params.r, params.delta
    if t <= mu + d:
        return smooth_step((t - mu - d / 4) / (0.75 * d))
    if t >= r - d:
        return smooth_step((r - d / 4 - t) / (0.75 * d))
    return 1.0


def a_lambda_profile(params: AConstructionParams, t: float) -> float:
    """Speed factor ``lambda(|z|)``; equal to ``Gamma`` outside the chart."""
    if t < 0:
        raise ValueError("radius must be non-negative")
    B, D, G = params.B, params.D, params.Gamma
    if params.bump == "none":
        return 1.0
    if t > params.r:
        return G
    th = bump_theta(params, t)
    if t <= params.mu + params.delta:
        return 1.0 if th == 0 else (1 - th) + th * B / (D * t)
    if t < params.r - params.delta:
        return B / (D * t)
    return G * (1 - th) + th * B / (D * t)


def a_field(params: AConstructionParams, z: np.ndarray, k: int) -> np.ndarray:
    """``v1(z) = lambda(|z|) v0(z)`` with the first ``k`` coordinates unstable."""
    z = np.asarray(z, dtype=float)
    v0 = np.concatenate([z[:k], -z[k:]])
    return a_lambda_profile(params, float(np.linalg.norm(z))) * v0


def a_field_residence(params: AConstructionParams, z0: ModelPoint) -> float:
    """Time the rescaled trajectory spends in ``B(0,r) \\ B(0,mu)``."""
    a, b = _coefficients(z0)
    intervals = annulus_intervals(z0, params.r, params.mu)
    radius = lambda s: math.sqrt(_radius_sq(a, b, s))
    integrand = lambda s: 1.0 / a_lambda_profile(params, radius(s))
    d = params.delta
    marks = [params.mu + d / 4, params.mu + d, params.r - d, params.r - d / 4]
    total = 0.0
    for lo, hi in intervals:
        cuts = set()
        for m in marks:
            ends = _sublevel(a, b, m * m)
            if ends is not None:
                cuts.update(t for t in ends if lo < t < hi)
        grid = [lo, *sorted(cuts), hi]
        for s0, s1 in zip(grid[:-1], grid[1:]):
            total += integrate.quad(integrand, s0, s1, epsabs=1e-13, epsrel=1e-8, limit=200)[0]
    return total


# -- Monte-Carlo sweeps ---------------------------------------------------------

def _random_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def random_shell_point(rng: np.random.Generator, n: int, k: int, inner: float, outer: float) -> ModelPoint:
    rad = rng.uniform(inner, outer)
    return ModelPoint.from_vector(rad * _random_direction(rng, n), k)


def annulus_sweep(n_samples: int, seed: int, max_dim: int = 6):
    """Rows ``(id, start, time, bound, slack)`` for random starts in random annuli."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_samples):
        n = int(rng.integers(1, max_dim + 1))
        k = int(rng.integers(0, n + 1))
        r = float(rng.uniform(0.1, 2.0))
        R = r * float(rng.uniform(1.05, 4.0))
        spec = AnnulusSpec(R, r)
        z0 = random_shell_point(rng, n, k, r, R)
        res = annulus_residence(z0, spec)
        bound = annulus_time_bound(spec)
        rows.append({
            "id": i, "start": z0.vector().tolist(), "k": k, "R": R, "r": r,
            "time": res.time, "bound": bound, "slack": bound - res.time,
            "length": res.length, "length_bound": 2 * R, "length_slack": 2 * R - res.length,
        })
    return rows


def lens_sweep(n_samples: int, seed: int, max_dim: int = 6):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_samples):
        n = int(rng.integers(2, max_dim + 1))
        k = int(rng.integers(1, n))
        r = float(rng.uniform(0.1, 2.0))
        # a start inside the lens: pick |z|, then split the mass so |f0| <= r^2
        rad = r * float(rng.uniform(1.0, 3.0))
        f_target = r * r * float(rng.uniform(-1.0, 1.0))
        xx = (rad * rad - f_target) / 2
        yy = (rad * rad + f_target) / 2
        x = math.sqrt(max(xx, 0.0)) * _random_direction(rng, k)
        y = math.sqrt(max(yy, 0.0)) * _random_direction(rng, n - k)
        z0 = ModelPoint(x, y)
        time = lens_residence(z0, r)
        rows.append({
            "id": i, "start": z0.vector().tolist(), "k": k, "r": r,
            "time": time, "bound": LENS_TIME_BOUND, "slack": LENS_TIME_BOUND - time,
        })
    return rows


DEFAULT_A_PARAMS = (
    # (r, mu, Gamma, B, D)
    (1.0, 0.3, 1.0, 1.0, 1.0),
    (1.0, 0.1, 3.0, 2.0, 1.5),
    (2.0, 0.5, 1.5, 0.5, 1.0),
    (0.5, 0.2, 10.0, 5.0, 4.0),
    (3.0, 1.0, 2.0, 10.0, 1.2),
)


def default_a_params() -> list[AConstructionParams]:
    out = []
    for r, mu, G, B, D in DEFAULT_A_PARAMS:
        out.append(AConstructionParams(r, mu, choose_delta(r, mu, B, D), G, B, D))
    return out


def aconstruction_sweep(n_samples: int, seed: int, params_list=None, max_dim: int = 6):
    rng = np.random.default_rng(seed)
    params_list = default_a_params() if params_list is None else params_list
    rows = []
    i = 0
    for j, params in enumerate(params_list):
        for _ in range(n_samples):
            n = int(rng.integers(1, max_dim + 1))
            k = int(rng.integers(0, n + 1))
            z0 = random_shell_point(rng, n, k, params.mu, params.r)
            time = a_field_residence(params, z0)
            bound = params.residence_bound
            rows.append({
                "id": i, "param_set": j, "start": z0.vector().tolist(), "k": k,
                "time": time, "bound": bound, "slack": bound - time,
            })
            i += 1
    return rows
