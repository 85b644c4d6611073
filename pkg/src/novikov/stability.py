"""C0-stability of integral curves under small perturbations of the field.

The tools here integrate pairs of nearby fields with a fixed-step RK4 scheme,
compare the observed separation with the Gronwall envelope
``eps e^(Dt) + (alpha/D)(e^(Dt) - 1)``, locate transversal crossings of a level
set, and check that exit behaviour from a compact sample survives a
perturbation.

Fields are plain callables mapping arrays of shape ``(..., n)`` to the same
shape; they must broadcast over leading axes so batches of starts can be
integrated together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

RICHARDSON_FACTOR = 2**4 - 1
ERROR_BUDGET_MULTIPLIER = 10.0


class StepTooLarge(RuntimeError):
    pass


class BoundViolated(AssertionError):
    def __init__(self, t: float, separation: float, bound: float):
        super().__init__(f"separation {separation:.6g} exceeds bound {bound:.6g} at t={t:.6g}")
        self.t = t
        self.separation = separation
        self.bound = bound


class NoSignChange(ValueError):
    pass


class MultipleCrossings(ValueError):
    pass


@dataclass(frozen=True)
class FieldSpec:
    """A C1 vector field with a declared bound ``lipschitz`` on ``|dv|``."""

    evaluation: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    support_radius: float = 1.0
    name: str = ""

    def __call__(self, x):
        return self.evaluation(np.asarray(x, dtype=float))


def spot_check_lipschitz(v: FieldSpec, dim: int, n_pairs: int = 2000, seed: int = 0) -> float:
    """Largest observed ``|v(a) - v(b)| / |a - b|`` over random nearby pairs."""
    rng = np.random.default_rng(seed)
    R = v.support_radius
    a = rng.uniform(-R, R, size=(n_pairs, dim))
    b = a + rng.normal(scale=1e-3 * R, size=(n_pairs, dim))
    num = np.linalg.norm(v(a) - v(b), axis=-1)
    den = np.linalg.norm(a - b, axis=-1)
    return float(np.max(num / den))


def rk4_step(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_path(f, x0, n_steps: int, h: float) -> np.ndarray:
    out = np.empty((n_steps + 1,) + np.shape(x0))
    out[0] = x0
    x = np.asarray(x0, dtype=float)
    for i in range(n_steps):
        x = rk4_step(f, x, h)
        out[i + 1] = x
    return out


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    step: float
    error_estimate: float
    integrator_order: int = 4

    def at(self, f, t: float) -> np.ndarray:
        """State at time ``t``: one partial RK4 step from the preceding grid node."""
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1))
        if self.step < 0:
            i = int(np.clip(np.searchsorted(-self.times, -t, side="right") - 1, 0, len(self.times) - 1))
        dt = t - self.times[i]
        if dt == 0:
            return self.states[i].copy()
        return rk4_step(f, self.states[i], dt)


def integrate_ivp(v, x0, T: float, h: float, tol: float | None = 1e-6) -> TrajectoryRecord:
    """Fixed-step RK4 on ``[0, T]`` with a halved-step Richardson error estimate.

    ``T`` may be negative for backward integration.  The step is shrunk so that
    it divides ``|T|`` exactly.  ``error_estimate`` is ``max |y_h - y_{h/2}| *
    16/15`` over the grid, an estimate of the error of ``states``.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    x0 = np.asarray(x0, dtype=float)
    n = max(1, math.ceil(abs(T) / h - 1e-12)) if T != 0 else 0
    step = T / n if n else 0.0
    coarse = _rk4_path(v, x0, n, step)
    fine = _rk4_path(v, x0, 2 * n, step / 2)[::2]
    diff = np.linalg.norm(np.reshape(coarse - fine, (n + 1, -1)), axis=1)
    err = float(diff.max()) * (RICHARDSON_FACTOR + 1) / RICHARDSON_FACTOR if n else 0.0
    if tol is not None and err > tol:
        raise StepTooLarge(f"Richardson error {err:.3g} exceeds tolerance {tol:.3g}; reduce h")
    times = np.linspace(0.0, T, n + 1)
    return TrajectoryRecord(times, coarse, step, err)


def gronwall_bound(eps: float, alpha: float, D: float, t):
    """``eps e^(Dt) + (alpha/D)(e^(Dt) - 1)``."""
    if D <= 0:
        raise ValueError("D must be positive")
    g = np.exp(D * np.asarray(t, dtype=float))
    out = eps * g + (alpha / D) * (g - 1.0)
    return float(out) if np.ndim(out) == 0 else out


def measure_gap(u: FieldSpec, w: FieldSpec, dim: int, per_axis: int = 64, cap: int = 10**6) -> float:
    """Sup of ``|u - w|`` over a grid on the box ``[-R, R]^dim``."""
    R = max(u.support_radius, w.support_radius)
    m = max(2, min(per_axis, int(cap ** (1.0 / dim))))
    axis = np.linspace(-R, R, m)
    pts = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    best = 0.0
    for chunk in np.array_split(pts, max(1, len(pts) // 65536)):
        best = max(best, float(np.linalg.norm(u(chunk) - w(chunk), axis=-1).max()))
    return best


@dataclass
class SeparationReport:
    case: str
    t_worst: float
    separation: float
    bound: float
    slack: float
    alpha: float
    eps: float
    D: float
    times: np.ndarray = field(repr=False, default=None)
    separations: np.ndarray = field(repr=False, default=None)
    bounds: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {
            "case": self.case, "t_worst": self.t_worst, "separation": self.separation,
            "bound": self.bound, "slack": self.slack, "alpha": self.alpha,
            "eps": self.eps, "D": self.D,
        }


def separation_check(u: FieldSpec, w: FieldSpec, x0, y0, T: float, h: float = 1e-2,
                     alpha: float | None = None, case: str = "", per_axis: int = 64) -> SeparationReport:
    """Compare ``|gamma_u(t) - eta_w(t)|`` against the Gronwall envelope.

    ``alpha`` defaults to the gap measured on a sample grid.  Raises
    :class:`BoundViolated` at the first grid time where the separation exceeds
    the envelope plus ``10x`` the summed integration error estimates.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    dim = x0.size
    if alpha is None:
        alpha = measure_gap(u, w, dim, per_axis=per_axis)
    eps = float(np.linalg.norm(x0 - y0))
    D = u.lipschitz
    gam = integrate_ivp(u, x0, T, h, tol=None)
    eta = integrate_ivp(w, y0, T, h, tol=None)
    sep = np.linalg.norm(np.reshape(gam.states - eta.states, (len(gam.times), -1)), axis=1)
    envelope = gronwall_bound(eps, alpha, D, gam.times)
    budget = ERROR_BUDGET_MULTIPLIER * (gam.error_estimate + eta.error_estimate)
    slack = envelope + budget - sep
    bad = np.nonzero(slack < 0)[0]
    if bad.size:
        i = int(bad[0])
        raise BoundViolated(float(gam.times[i]), float(sep[i]), float(envelope[i] + budget))
    i = int(np.argmin(slack))
    return SeparationReport(
        case, float(gam.times[i]), float(sep[i]), float(envelope[i]), float(slack[i]),
        float(alpha), eps, D, gam.times, sep, envelope,
    )


@dataclass
class CrossingResult:
    tau0: float
    point: np.ndarray
    bracket: tuple[float, float]


def _numeric_grad(g, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h * max(1.0, abs(x[i]))
        out[i] = (g(x + e) - g(x - e)) / (2 * e[i])
    return out


def crossing_time(w, x0, level: Callable[[np.ndarray], float], window: tuple[float, float],
                  h: float = 1e-3, grad: Callable | None = None, samples: int = 200) -> CrossingResult:
    """Unique time in ``window`` at which the ``w``-trajectory of ``x0`` meets ``level = 0``.

    The trajectory is integrated with RK4; between grid nodes it is evaluated by
    a partial RK4 step, which serves as dense output for the bisection.
    Uniqueness is checked by requiring ``d/dt level(gamma(t))`` to keep one sign
    at ``samples`` points of the window.
    """
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError("window must have positive length")
    x0 = np.asarray(x0, dtype=float)
    start = integrate_ivp(w, x0, lo, h, tol=None).states[-1] if lo != 0 else x0
    rec = integrate_ivp(w, start, hi - lo, h, tol=None)
    times = rec.times + lo
    gvals = np.array([level(s) for s in rec.states])
    if gvals[0] == 0:
        return CrossingResult(lo, rec.states[0].copy(), (lo, lo))
    if np.sign(gvals[0]) == np.sign(gvals[-1]):
        raise NoSignChange(f"level has the same sign at both ends of [{lo}, {hi}]")
    grad = grad or (lambda x: _numeric_grad(level, x))
    idx = np.unique(np.linspace(0, len(times) - 1, samples).round().astype(int))
    rates = np.array([float(np.dot(grad(rec.states[i]), w(rec.states[i]))) for i in idx])
    if not (np.all(rates > 0) or np.all(rates < 0)):
        raise MultipleCrossings("level is not crossed transversally in one direction on the window")
    j = int(np.nonzero(np.sign(gvals[1:]) != np.sign(gvals[0]))[0][0])
    a, b = times[j], times[j + 1]
    base = rec.states[j]
    s_a = np.sign(gvals[j])
    point = rec.states[j + 1]
    for _ in range(200):
        mid = 0.5 * (a + b)
        point = rk4_step(w, base, mid - times[j])
        gm = level(point)
        if gm == 0 or (b - a) <= 1e-15 * max(1.0, abs(mid)):
            break
        if np.sign(gm) == s_a:
            a = mid
        else:
            b = mid
    tau = 0.5 * (a + b)
    point = rk4_step(w, base, tau - times[j])
    return CrossingResult(tau, point, (float(times[j]), float(times[j + 1])))


@dataclass
class ReachReport:
    n_samples: int
    v_failures: list = field(default_factory=list)
    w_failures: list = field(default_factory=list)
    max_exit_shift: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.v_failures and not self.w_failures

    def to_json(self) -> dict:
        return {
            "n_samples": self.n_samples, "passed": self.passed,
            "v_failures": self.v_failures, "w_failures": self.w_failures,
            "max_exit_shift": self.max_exit_shift,
        }


def exit_points(f, starts: np.ndarray, inside: Callable[[np.ndarray], np.ndarray],
                t_max: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """First boundary point of each trajectory (NaN where none before ``t_max``).

    ``inside`` maps an ``(m, n)`` array to a boolean mask.  Exit points are
    refined by bisection on partial RK4 steps to ``1e-12`` in time.
    """
    x = np.array(starts, dtype=float)
    m = len(x)
    out = np.full_like(x, np.nan)
    t_exit = np.full(m, np.nan)
    alive = np.asarray(inside(x), dtype=bool).copy()
    t = 0.0
    while alive.any() and t < t_max:
        idx = np.nonzero(alive)[0]
        prev = x[idx]
        nxt = rk4_step(f, prev, h)
        left = ~np.asarray(inside(nxt), dtype=bool)
        x[idx] = nxt
        for j in np.nonzero(left)[0]:
            a, b = 0.0, h
            while b - a > 1e-12:
                mid = 0.5 * (a + b)
                if inside(rk4_step(f, prev[j:j + 1], mid))[0]:
                    a = mid
                else:
                    b = mid
            out[idx[j]] = rk4_step(f, prev[j:j + 1], b)[0]
            t_exit[idx[j]] = t + b
        alive[idx[left]] = False
        t += h
    return out, t_exit


def reach_check(v, w, K: Sequence, exit_region: Callable, neighborhood: Callable,
                inside: Callable, t_max: float = 50.0, h: float = 1e-2,
                jitter: float = 0.0, copies: int = 0, seed: int = 0) -> ReachReport:
    """Do ``w``-trajectories from the sample ``K`` exit where ``v``-trajectories do?

    ``exit_region(p)`` tests a ``v`` exit point; ``neighborhood(p_w, p_v)`` tests
    the ``w`` exit point against the ``v`` exit point from the same start.  The
    sample can be enlarged with ``copies`` jittered replicas of every point.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if copies and jitter > 0:
        rng = np.random.default_rng(seed)
        extra = [K + rng.uniform(-jitter, jitter, size=K.shape) for _ in range(copies)]
        K = np.concatenate([K, *extra])
        K = K[np.asarray(inside(K), dtype=bool)]
    v_exit, _ = exit_points(v, K, inside, t_max, h)
    w_exit, _ = exit_points(w, K, inside, t_max, h)
    report = ReachReport(len(K))
    for i, (x, pv, pw) in enumerate(zip(K, v_exit, w_exit)):
        if np.isnan(pv).any() or not exit_region(pv):
            report.v_failures.append({"index": i, "start": x.tolist(),
                                      "exit": None if np.isnan(pv).any() else pv.tolist()})
            continue
        if np.isnan(pw).any():
            report.w_failures.append({"index": i, "start": x.tolist(), "exit": None,
                                      "reason": "no exit before t_max"})
            continue
        report.max_exit_shift = max(report.max_exit_shift, float(np.linalg.norm(pw - pv)))
        if not neighborhood(pw, pv):
            report.w_failures.append({"index": i, "start": x.tolist(), "exit": pw.tolist(),
                                      "reason": "exit point outside neighbourhood"})
    return report


# -- stock fields used by the demos and the CLI ---------------------------------

def linear_field(D: float, shift: float = 0.0, dim: int = 1) -> FieldSpec:
    """``x' = D x + shift`` (unbounded support; ``support_radius`` sets the gap grid)."""
    return FieldSpec(lambda x: D * x + shift, D, 1.0, f"linear(D={D}, shift={shift})")


def saddle_field() -> FieldSpec:
    """``(x, -y)``: the standard chart flow on the plane."""
    return FieldSpec(lambda z: z * np.array([1.0, -1.0]), 1.0, 1.0, "saddle")


def bump_perturbation(base: FieldSpec, amplitude: float, direction, center, width: float) -> FieldSpec:
    """``base + amplitude * exp(-|z - c|^2 / 2 width^2) * direction`` (unit direction)."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    c = np.asarray(center, dtype=float)

    def ev(z):
        r2 = np.sum((z - c) ** 2, axis=-1, keepdims=True)
        return base.evaluation(z) + amplitude * np.exp(-r2 / (2 * width**2)) * d

    # Gaussian profile has Lipschitz constant amplitude * e^(-1/2) / width
    lip = base.lipschitz + amplitude * math.exp(-0.5) / width
    return FieldSpec(ev, lip, base.support_radius, f"{base.name}+bump({amplitude})")


def sine_field(M: np.ndarray, c: np.ndarray) -> FieldSpec:
    """``x -> M sin(x) + c`` with declared bound ``||M||_2`` on the derivative."""
    M = np.asarray(M, dtype=float)
    c = np.asarray(c, dtype=float)
    return FieldSpec(lambda x: np.sin(x) @ M.T + c, float(np.linalg.norm(M, 2)), 3.0, "sine")


def sine_perturbation(base: FieldSpec, amplitude: float, freq: np.ndarray, phase: np.ndarray) -> FieldSpec:
    freq = np.asarray(freq, dtype=float)
    phase = np.asarray(phase, dtype=float)
    return FieldSpec(lambda x: base.evaluation(x) + amplitude * np.sin(freq * x + phase),
                     base.lipschitz, base.support_radius, f"{base.name}+sin({amplitude})")


def box_inside(half_width: float = 1.0):
    return lambda z: np.max(np.abs(np.atleast_2d(z)), axis=-1) < half_width

