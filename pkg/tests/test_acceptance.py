"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import math
import random
import time

import numpy as np
import pytest

from novikov.modelflow import LN_4_SQRT15, aconstruction_sweep, annulus_sweep, lens_sweep
from novikov.novring import IntPoly, NovikovRational, expand_rational, fit_rational
from novikov.stability import (
    gronwall_bound,
    linear_field,
    separation_check,
    sine_field,
    sine_perturbation,
)
from novikov.torusnov import (
    ShootingConfig,
    TorusMorseSystem,
    all_counts,
    assemble_novikov,
    check_d_squared,
    compare_counts,
    euler_characteristic,
    find_critical_points,
    make_bump,
)
from novikov.transfer import brute_force_series, generating_series


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} :: {detail}")
        return ok
    return emit


def test_1_transfer_oracle(report):
    rng = random.Random(1)
    start = time.perf_counter()
    bad = 0
    for _ in range(200):
        r = rng.randint(1, 6)
        A = [[rng.randint(-3, 3) for _ in range(r)] for _ in range(r)]
        lam = [rng.randint(-3, 3) for _ in range(r)]
        p = [rng.randint(-3, 3) for _ in range(r)]
        g = generating_series(A, lam, p)
        if g.Q[0] != 1 or expand_rational(g, 20) != brute_force_series(A, lam, p, 20):
            bad += 1
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 10
    assert report(1, "generating series = brute force", ok, f"mismatches={bad} time={elapsed:.2f}s")


def test_2_round_trip(report):
    rng = random.Random(2)
    start = time.perf_counter()
    bad = 0
    for _ in range(100):
        P = [rng.randint(-10, 10) for _ in range(rng.randint(1, 6))]
        Q = [1] + [rng.randint(-10, 10) for _ in range(rng.randint(0, 5))]
        r = NovikovRational(IntPoly(tuple(P)), rng.randint(0, 3), IntPoly(tuple(Q)))
        if fit_rational(expand_rational(r, 24), 5) != r:
            bad += 1
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 5
    assert report(2, "expand -> fit round trip", ok, f"failures={bad} time={elapsed:.2f}s")


def test_3_annulus(report):
    start = time.perf_counter()
    rows = annulus_sweep(1000, seed=3)
    elapsed = time.perf_counter() - start
    slack = min(r["slack"] for r in rows)
    const = math.log(2**2 + math.sqrt(2**4 - 1))
    ok = slack >= -1e-9 and abs(const - 2.0634) < 1e-4 and LN_4_SQRT15 <= 8 and elapsed < 5
    assert report(3, "annulus residence <= LLN(R/r)", ok,
                  f"min slack={slack:.3e} ln(4+sqrt15)={const:.6f} time={elapsed:.2f}s")


def test_4_lens(report):
    start = time.perf_counter()
    rows = lens_sweep(1000, seed=4)
    elapsed = time.perf_counter() - start
    worst = max(r["time"] for r in rows)
    ok = worst <= 2 + 1e-9 and elapsed < 5
    assert report(4, "lens residence <= 2", ok, f"max time={worst:.6f} time={elapsed:.2f}s")


def test_5_aconstruction(report):
    start = time.perf_counter()
    rows = aconstruction_sweep(200, seed=5)
    elapsed = time.perf_counter() - start
    slack = min(r["slack"] for r in rows)
    sets = len({r["param_set"] for r in rows})
    ok = slack >= -1e-6 and sets == 5 and len(rows) == 1000 and elapsed < 30
    assert report(5, "rescaled residence <= 3Dr/B", ok,
                  f"min slack={slack:.4f} sets={sets} time={elapsed:.2f}s")


def test_6_gronwall(report):
    start = time.perf_counter()
    D, alpha = 1.0, 1e-3
    rep = separation_check(linear_field(D), linear_field(D, alpha), [0.5], [0.5], 3.0, h=1e-2)
    worst_rel = 0.0
    for t in (0.5, 1.0, 2.0, 3.0):
        i = int(np.argmin(abs(rep.times - t)))
        exact = gronwall_bound(0.0, alpha, D, t)
        worst_rel = max(worst_rel, abs(rep.separations[i] - exact) / exact)
    rng = np.random.default_rng(6)
    min_slack = math.inf
    for i in range(50):
        n = int(rng.integers(1, 4))
        u = sine_field(rng.normal(size=(n, n)), rng.normal(size=n) * 0.2)
        w = sine_perturbation(u, 10 ** rng.uniform(-4, -2), rng.uniform(0.5, 3, n), rng.uniform(0, 6, n))
        x0 = rng.uniform(-1, 1, n)
        r = separation_check(u, w, x0, x0 + rng.normal(scale=1e-3, size=n), 2.0, per_axis=32)
        min_slack = min(min_slack, r.slack)
    elapsed = time.perf_counter() - start
    ok = worst_rel <= 1e-6 and min_slack >= 0 and elapsed < 30
    assert report(6, "Gronwall equality case and 50 nonlinear pairs", ok,
                  f"max rel err={worst_rel:.2e} min slack={min_slack:.3e} time={elapsed:.2f}s")


def test_7_torus_end_to_end(report):
    start = time.perf_counter()
    sys_ = TorusMorseSystem(1.3)
    pts = find_critical_points(sys_)
    mats = assemble_novikov(sys_, 8, points=pts)
    d2 = check_d_squared(mats[2], mats[1], 6)
    entries = [e for s in (2, 1) for row in mats[s].entries for e in row]
    long_enough = [e for e in entries if e.counted.truncation >= 8]
    fits_ok = all(e.fitted is not None and e.fitted.Q[0] == 1 and e.held_out_ok for e in long_enough)
    growth_ok = all(e.growth_ok for e in entries if e.fitted is not None)
    elapsed = time.perf_counter() - start
    chi = euler_characteristic(pts)
    ok = (chi == 0 and len(pts) > 0 and d2.ok and fits_ok and growth_ok and len(long_enough) == len(entries)
          and elapsed < 300)
    assert report(7, "torus complex: chi, d^2 = 0, fits, growth", ok,
                  f"points={len(pts)} chi={chi} d2_ok={d2.ok} fitted={len(long_enough)}/{len(entries)} "
                  f"held_out_ok={fits_ok} growth_ok={growth_ok} time={elapsed:.1f}s")


def test_8_count_stability(report):
    start = time.perf_counter()
    sys_ = TorusMorseSystem(1.3)
    pts = find_critical_points(sys_)
    base = all_counts(sys_, 5, pts)
    bumped = all_counts(sys_.with_extra(make_bump(pts, 1e-3)), 5, pts)
    halved = all_counts(TorusMorseSystem(1.3), 5, pts, ShootingConfig(step=5e-3))
    r_bump = compare_counts(base, bumped, 5, 1e-3)
    r_half = compare_counts(base, halved, 5)
    elapsed = time.perf_counter() - start
    nonzero = sum(len(c) for c in base.values())
    ok = r_bump.identical and r_half.identical and nonzero > 0 and elapsed < 300
    assert report(8, "counts stable under 1e-3 bump and step halving", ok,
                  f"bump diffs={len(r_bump.differences)} halving diffs={len(r_half.differences)} "
                  f"nonzero entries={nonzero} time={elapsed:.1f}s")
