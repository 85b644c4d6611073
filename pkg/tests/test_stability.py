import math

import numpy as np
import pytest

from novikov.modelflow import ModelPoint, model_trajectory
from novikov.stability import (
    BoundViolated,
    FieldSpec,
    MultipleCrossings,
    NoSignChange,
    StepTooLarge,
    box_inside,
    bump_perturbation,
    crossing_time,
    gronwall_bound,
    integrate_ivp,
    linear_field,
    reach_check,
    rk4_step,
    saddle_field,
    separation_check,
    sine_field,
    sine_perturbation,
    spot_check_lipschitz,
)


# -- integration ----------------------------------------------------------------

def test_zero_field_is_constant():
    zero = FieldSpec(lambda x: np.zeros_like(x), 1.0)
    rec = integrate_ivp(zero, [0.3, -2.0], 5.0, 0.1)
    assert np.all(rec.states == np.array([0.3, -2.0]))
    assert rec.error_estimate == 0


def test_exponential():
    rec = integrate_ivp(linear_field(1.0), [1.0], 1.0, 1e-2)
    assert rec.states[-1][0] == pytest.approx(math.e, abs=1e-8)
    assert rec.times[-1] == 1.0 and rec.integrator_order == 4


def test_matches_model_flow():
    z0 = ModelPoint([0.4, -0.2], [0.7])
    rec = integrate_ivp(FieldSpec(lambda z: z * np.array([1.0, 1.0, -1.0]), 1.0), z0.vector(), 2.0, 1e-2)
    assert np.allclose(rec.states[-1], model_trajectory(z0, 2.0).vector(), atol=1e-8)


def test_record_steps_are_consistent():
    f = sine_field(np.array([[1.0, 0.5], [-0.3, 0.8]]), np.array([0.1, 0.0]))
    rec = integrate_ivp(f, [0.2, 0.1], 1.0, 0.05)
    for i in range(len(rec.times) - 1):
        assert np.allclose(rk4_step(f, rec.states[i], rec.step), rec.states[i + 1], atol=1e-15)


def test_step_too_large():
    with pytest.raises(StepTooLarge):
        integrate_ivp(linear_field(5.0), [1.0], 3.0, 0.5)


def test_error_estimate_is_fourth_order():
    f = sine_field(np.array([[1.2, -0.4], [0.7, 0.9]]), np.array([0.3, -0.1]))
    e1 = integrate_ivp(f, [0.5, -0.2], 2.0, 0.1, tol=None).error_estimate
    e2 = integrate_ivp(f, [0.5, -0.2], 2.0, 0.05, tol=None).error_estimate
    assert e1 / e2 >= 12


def test_deterministic():
    f = sine_field(np.eye(2), np.zeros(2))
    a = integrate_ivp(f, [1.0, 2.0], 1.0, 0.01)
    b = integrate_ivp(f, [1.0, 2.0], 1.0, 0.01)
    assert np.array_equal(a.states, b.states)


def test_lipschitz_spot_check():
    M = np.array([[2.0, 1.0], [0.0, 1.0]])
    f = sine_field(M, np.zeros(2))
    assert spot_check_lipschitz(f, 2) <= f.lipschitz + 1e-9


# -- Gronwall -------------------------------------------------------------------

def test_gronwall_formula():
    assert gronwall_bound(0, 0, 1.0, 3.0) == 0
    assert gronwall_bound(1, 0, 1.0, 1.0) == pytest.approx(math.e)
    assert gronwall_bound(0, 2.0, 2.0, 0.7) == pytest.approx(math.exp(1.4) - 1)


def test_equality_case():
    D, alpha = 1.0, 1e-3
    rep = separation_check(linear_field(D), linear_field(D, alpha), [0.5], [0.5], 3.0, h=1e-2)
    assert rep.alpha == pytest.approx(alpha, rel=1e-12)
    for t in (0.5, 1.0, 2.0, 3.0):
        i = int(np.argmin(abs(rep.times - t)))
        assert rep.times[i] == pytest.approx(t)
        exact = gronwall_bound(0.0, alpha, D, t)
        assert rep.separations[i] == pytest.approx(exact, rel=1e-6)


def test_identical_fields_do_not_separate():
    f = sine_field(np.eye(2), np.array([0.1, 0.2]))
    rep = separation_check(f, f, [0.1, 0.1], [0.1, 0.1], 2.0)
    assert rep.separation == 0.0


def test_offset_linear_equality():
    rep = separation_check(linear_field(1.0), linear_field(1.0), [1.0], [1.01], 2.0)
    assert rep.separations[-1] == pytest.approx(0.01 * math.exp(2.0), rel=1e-8)


def test_bound_violation_detected():
    # declare a Lipschitz constant that is too small
    liar = FieldSpec(lambda x: 2.0 * x, 0.5)
    with pytest.raises(BoundViolated) as err:
        separation_check(liar, liar, [1.0], [1.1], 2.0)
    assert err.value.t > 0


def test_random_nonlinear_pairs():
    rng = np.random.default_rng(12)
    for i in range(20):
        n = int(rng.integers(1, 4))
        M = rng.normal(size=(n, n))
        u = sine_field(M, rng.normal(size=n) * 0.2)
        w = sine_perturbation(u, 10 ** rng.uniform(-4, -2), rng.uniform(0.5, 3, n), rng.uniform(0, 6, n))
        x0 = rng.uniform(-1, 1, n)
        y0 = x0 + rng.normal(scale=1e-3, size=n)
        rep = separation_check(u, w, x0, y0, 2.0, h=1e-2, per_axis=32, case=str(i))
        assert rep.slack >= 0


# -- crossings --------------------------------------------------------------------

V0 = saddle_field()


def test_crossing_model_level():
    x0, y0, c = 0.3, 0.9, 0.1
    res = crossing_time(V0, [x0, y0], lambda z: -z[0] ** 2 + z[1] ** 2 - c, (-1.0, 2.0))
    a, b = x0**2, y0**2
    u = (-c + math.sqrt(c * c + 4 * a * b)) / (2 * a)
    assert res.tau0 == pytest.approx(0.5 * math.log(u), abs=1e-10)
    assert abs(-res.point[0] ** 2 + res.point[1] ** 2 - c) <= 1e-10
    assert res.bracket[0] <= res.tau0 <= res.bracket[1]


def test_crossing_straight_line():
    f = FieldSpec(lambda z: np.broadcast_to(np.array([1.0, 0.0]), np.shape(z)).copy(), 1.0)
    res = crossing_time(f, [0.3, 0.5], lambda z: z[0], (-1.0, 1.0))
    assert res.tau0 == pytest.approx(-0.3, abs=1e-12)


def test_crossing_no_sign_change():
    f = FieldSpec(lambda z: np.broadcast_to(np.array([1.0, 0.0]), np.shape(z)).copy(), 1.0)
    with pytest.raises(NoSignChange):
        crossing_time(f, [0.3, 0.5], lambda z: z[0], (0.0, 1.0))


def test_crossing_multiple():
    rot = FieldSpec(lambda z: np.stack([-z[..., 1], z[..., 0]], axis=-1), 1.0)
    # x = cos t meets 1/2 three times in the window, ends on opposite sides
    with pytest.raises(MultipleCrossings):
        crossing_time(rot, [1.0, 0.0], lambda z: z[0] - 0.5, (0.0, 2.5 * math.pi))


def test_crossing_stability_regression():
    x0 = [0.3, 0.9]
    g = lambda z: -z[0] ** 2 + z[1] ** 2 - 0.1  # noqa: E731
    base = crossing_time(V0, x0, g, (-1.0, 2.0)).tau0
    devs = []
    for delta in (1e-2, 1e-3, 1e-4):
        w = FieldSpec(lambda z, d=delta: V0.evaluation(z) + d * np.array([1.0, 1.0]) / math.sqrt(2), 1.0)
        devs.append(abs(crossing_time(w, x0, g, (-1.0, 2.0)).tau0 - base))
    assert devs[0] > devs[1] > devs[2] > 0


# -- reachability ------------------------------------------------------------------

def _reach_setup():
    xs = np.concatenate([np.linspace(-0.9, -0.2, 5), np.linspace(0.2, 0.9, 5)])
    ys = np.linspace(-0.9, 0.9, 7)
    K = np.array([[x, y] for x in xs for y in ys])
    exit_region = lambda p: abs(abs(p[0]) - 1) < 1e-6  # noqa: E731
    near = lambda pw, pv: np.linalg.norm(pw - pv) < 0.05  # noqa: E731
    return K, exit_region, near


def test_reach_identity_passes():
    K, ex, near = _reach_setup()
    rep = reach_check(V0, V0, K, ex, near, box_inside(1.0))
    assert rep.passed and rep.max_exit_shift == 0


def test_reach_small_bump_passes():
    K, ex, near = _reach_setup()
    w = bump_perturbation(V0, 1e-3, [0.0, 1.0], [0.0, 0.0], 0.3)
    rep = reach_check(V0, w, K, ex, near, box_inside(1.0), jitter=0.02, copies=1)
    assert rep.passed and 0 < rep.max_exit_shift < 0.05


def test_reach_large_bump_fails():
    K, ex, near = _reach_setup()
    w = bump_perturbation(V0, 0.5, [0.0, 1.0], [0.0, 0.0], 0.3)
    rep = reach_check(V0, w, K, ex, near, box_inside(1.0))
    assert not rep.passed and rep.w_failures and not rep.v_failures


def test_reach_reports_bad_v_exit():
    K, _, near = _reach_setup()
    rep = reach_check(V0, V0, K, lambda p: p[0] > 0, near, box_inside(1.0))
    assert rep.v_failures and all(f["start"][0] < 0 for f in rep.v_failures)
