"""Command line entry point: ``novikov <command> [action] [options]``.

Every run prints a machine-readable report (JSON with sorted keys, or CSV for
sweeps).  Exit status is 0 when every checked bound holds, 1 when one is
violated and 2 when the input is malformed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import modelflow, novring, stability, torusnov, transfer

EXIT_OK, EXIT_VIOLATED, EXIT_MALFORMED = 0, 1, 2

TOLERANCES = {"annulus": 1e-9, "lens": 1e-9, "aconstruction": 1e-6}


class MalformedInput(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    action: str | None = None
    input: str | None = None
    terms: int = 8
    max_deg: int = 5
    tolerance: float | None = None
    step: float = 1e-2
    rays: int = 256
    amplitude: float = 1.3
    seed: int = 0
    samples: int = 1000
    format: str = "json"
    output: str | None = None
    options: dict = field(default_factory=dict)


def _load_json(source: str | None):
    if source is None:
        raise MalformedInput("--input is required")
    text = source
    if not source.lstrip().startswith(("{", "[")):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise MalformedInput(f"cannot read {source}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"invalid JSON: {exc}") from exc


def _series_input(data) -> novring.LaurentSeries:
    if isinstance(data, list):
        return novring.LaurentSeries(0, tuple(int(a) for a in data))
    return novring.series_from_json(data)


# -- handlers: each returns (status, payload) -----------------------------------

def _series(cfg: RunConfig):
    data = _load_json(cfg.input)
    if cfg.action == "expand":
        r = novring.rational_from_json(data)
        s = novring.expand_rational(r, cfg.terms)
        return EXIT_OK, {"rational": novring.rational_to_json(r), "series": novring.series_to_json(s)}
    s = _series_input(data)
    try:
        r = novring.fit_rational(s, cfg.max_deg)
    except novring.NoFit as exc:
        return EXIT_OK, {"series": novring.series_to_json(s), "fit": None, "reason": str(exc)}
    return EXIT_OK, {"series": novring.series_to_json(s), "fit": novring.rational_to_json(r),
                     "growth_rate": novring.growth_estimate(r)}


def _transfer(cfg: RunConfig):
    d = transfer.monodromy_from_json(_load_json(cfg.input))
    r = transfer.incidence_series(d)
    counted = transfer.brute_force_series(d.h, d.class_y, d.class_x, cfg.terms).shift(-d.shift)
    expanded = novring.expand_rational(r, cfg.terms + r.m - d.shift)
    match = all(expanded[k] == counted[k] for k in range(-d.shift, cfg.terms - d.shift))
    report = {
        "P": novring.poly_to_json(r.P), "Q": novring.poly_to_json(r.Q), "m": r.m,
        "series": novring.series_to_json(counted), "oracle_match": match,
        "growth_rate": novring.growth_estimate(r),
    }
    return (EXIT_OK if match and r.Q[0] == 1 else EXIT_VIOLATED), report


def _rows_status(rows, tol):
    worst = min(rows, key=lambda r: r["slack"]) if rows else None
    bad = [r for r in rows if r["slack"] < -tol]
    return (EXIT_VIOLATED if bad else EXIT_OK), worst, bad


def _flow(cfg: RunConfig):
    if cfg.action == "quickness":
        N = int(cfg.options.get("N", 0))
        beta = float(cfg.options.get("beta", 0.0))
        if N < 0:
            raise MalformedInput("N must be non-negative")
        const = modelflow.LN_4_SQRT15
        ok = const <= 8
        return (EXIT_OK if ok else EXIT_VIOLATED), {
            "N": N, "beta": beta, "quickness": modelflow.quickness_halving(N, beta),
            "annulus_constant": const, "constant_le_8": ok,
        }
    sweeps = {"annulus": modelflow.annulus_sweep, "lens": modelflow.lens_sweep,
              "aconstruction": modelflow.aconstruction_sweep}
    rows = sweeps[cfg.action](cfg.samples, cfg.seed)
    tol = cfg.tolerance if cfg.tolerance is not None else TOLERANCES[cfg.action]
    status, worst, bad = _rows_status(rows, tol)
    return status, {"rows": rows, "worst": worst, "violations": bad, "tolerance": tol}


def _stability(cfg: RunConfig):
    o = cfg.options
    if cfg.action == "gronwall":
        D, alpha, eps, T = float(o.get("D", 1.0)), float(o.get("alpha", 1e-3)), float(o.get("eps", 0.0)), float(o.get("T", 3.0))
        try:
            rep = stability.separation_check(stability.linear_field(D), stability.linear_field(D, alpha),
                                             [0.5], [0.5 + eps], T, h=cfg.step, case="linear")
        except stability.BoundViolated as exc:
            return EXIT_VIOLATED, {"case": "linear", "violated_at": exc.t,
                                   "separation": exc.separation, "bound": exc.bound}
        return EXIT_OK, rep.to_json()
    if cfg.action == "crossing":
        x0 = [float(o.get("x", 0.3)), float(o.get("y", 0.9))]
        c = float(o.get("level", 0.1))
        delta = float(o.get("delta", 0.0))
        v0 = stability.saddle_field()

        def level(z):
            return -z[0] ** 2 + z[1] ** 2 - c

        w = stability.FieldSpec(lambda z: v0.evaluation(z) + delta * np.array([1.0, 1.0]) / math.sqrt(2), 1.0)
        try:
            base = stability.crossing_time(v0, x0, level, (-2.0, 3.0))
            pert = stability.crossing_time(w, x0, level, (-2.0, 3.0))
        except (stability.NoSignChange, stability.MultipleCrossings) as exc:
            return EXIT_VIOLATED, {"error": type(exc).__name__, "message": str(exc)}
        return EXIT_OK, {"tau0": base.tau0, "tau0_perturbed": pert.tau0,
                         "deviation": abs(pert.tau0 - base.tau0), "delta": delta,
                         "point": base.point.tolist()}
    # reach
    delta = float(o.get("delta", 1e-3))
    v0 = stability.saddle_field()
    w = stability.bump_perturbation(v0, delta, [0.0, 1.0], [0.0, 0.0], 0.3)
    xs = np.concatenate([np.linspace(-0.9, -0.2, 5), np.linspace(0.2, 0.9, 5)])
    K = np.array([[x, y] for x in xs for y in np.linspace(-0.9, 0.9, 7)])
    rep = stability.reach_check(
        v0, w, K, lambda p: abs(abs(p[0]) - 1) < 1e-6,
        lambda pw, pv: np.linalg.norm(pw - pv) < float(o.get("radius", 0.05)),
        stability.box_inside(1.0), h=cfg.step, jitter=0.02, copies=1, seed=cfg.seed)
    return (EXIT_OK if rep.passed else EXIT_VIOLATED), rep.to_json()


def _torus(cfg: RunConfig):
    sc = torusnov.ShootingConfig(rays=cfg.rays, step=cfg.step)
    report = torusnov.torus_report(cfg.amplitude, cfg.terms, sc)
    report["seed"] = cfg.seed
    ok = report["d_squared_ok"] and report["euler_characteristic"] == 0 and all(
        g["held_out_ok"] is not False and g["within_bound"] is not False for g in report["growth"].values())
    return (EXIT_OK if ok else EXIT_VIOLATED), report


HANDLERS = {"series": _series, "transfer": _transfer, "flow": _flow,
            "stability": _stability, "torus": _torus}


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute one command; returns the exit status and the rendered report."""
    try:
        status, payload = HANDLERS[cfg.command](cfg)
    except torusnov.Unresolved as exc:
        status, payload = EXIT_VIOLATED, {"error": "Unresolved", "message": str(exc)}
    except (MalformedInput, ValueError, KeyError, TypeError) as exc:
        status, payload = EXIT_MALFORMED, {"error": type(exc).__name__, "message": str(exc)}
    if cfg.format == "csv" and isinstance(payload, dict) and "rows" in payload:
        return status, _csv(payload["rows"])
    return status, json.dumps(payload, sort_keys=True, indent=1) + "\n"


def _csv(rows) -> str:
    buf = io.StringIO()
    if rows:
        keys = list(rows[0].keys())
        writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: json.dumps(v) if isinstance(v, list) else v for k, v in r.items()})
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="novikov", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, terms=8):
        p.add_argument("--format", choices=["json", "csv"], default="json", help="report format")
        p.add_argument("--output", help="write the report here instead of stdout")
        p.add_argument("--seed", type=int, default=0, help="seed for every randomised sweep")
        p.add_argument("--terms", type=int, default=terms, help="number of series terms K")

    s = sub.add_parser("series", help="Laurent series over Z: expand a rational function or fit one")
    s.add_argument("action", choices=["expand", "fit"])
    s.add_argument("--input", required=True,
                   help="JSON text or file: {P, m, Q} for expand; {lead, coeffs} or a list for fit")
    s.add_argument("--max-deg", type=int, default=5, help="degree bound for P and Q when fitting")
    common(s)

    t = sub.add_parser("transfer", help="incidence series t^-m sum lambda(A^k p) t^k as P/(t^m Q)")
    t.add_argument("--input", required=True, help="JSON {h, lambda, p, m}; integers may be strings")
    common(t, terms=20)

    f = sub.add_parser("flow", help="residence times of the standard model flow (x, -y)")
    f.add_argument("action", choices=["annulus", "lens", "aconstruction", "quickness"])
    f.add_argument("--samples", type=int, default=1000, help="random starts (per parameter set)")
    f.add_argument("--tolerance", type=float, help="allowed negative slack")
    f.add_argument("--N", type=int, default=0, help="quickness: number of charts")
    f.add_argument("--beta", type=float, default=0.0, help="quickness: time spent outside charts")
    common(f)

    st = sub.add_parser("stability", help="C0 stability of trajectories: separation, crossings, exits")
    st.add_argument("action", choices=["gronwall", "crossing", "reach"])
    st.add_argument("--step", type=float, default=1e-2, help="RK4 step h")
    st.add_argument("--D", type=float, default=1.0, help="gronwall: Lipschitz constant")
    st.add_argument("--alpha", type=float, default=1e-3, help="gronwall: field gap")
    st.add_argument("--eps", type=float, default=0.0, help="gronwall: initial offset")
    st.add_argument("--T", type=float, default=3.0, help="gronwall: horizon")
    st.add_argument("--delta", type=float, default=1e-3, help="crossing/reach: perturbation size")
    st.add_argument("--level", type=float, default=0.1, help="crossing: level c of -x^2 + y^2")
    st.add_argument("--x", type=float, default=0.3, help="crossing: start x")
    st.add_argument("--y", type=float, default=0.9, help="crossing: start y")
    st.add_argument("--radius", type=float, default=0.05, help="reach: allowed exit shift")
    common(st)

    tor = sub.add_parser("torus", help="Novikov complex of x + (a/2pi) sin(2pi x) cos(2pi y) on the torus")
    tor.add_argument("--amplitude", type=float, default=1.3, help="amplitude a")
    tor.add_argument("--rays", type=int, default=256, help="rays in each maximum's fan")
    tor.add_argument("--step", type=float, default=1e-2, help="RK4 step h")
    common(tor)
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    opts = {k: getattr(ns, k) for k in ("N", "beta", "D", "alpha", "eps", "T", "delta", "level",
                                         "x", "y", "radius") if hasattr(ns, k)}
    return RunConfig(
        command=ns.command, action=getattr(ns, "action", None), input=getattr(ns, "input", None),
        terms=ns.terms, max_deg=getattr(ns, "max_deg", 5), tolerance=getattr(ns, "tolerance", None),
        step=getattr(ns, "step", 1e-2), rays=getattr(ns, "rays", 256),
        amplitude=getattr(ns, "amplitude", 1.3), seed=ns.seed, samples=getattr(ns, "samples", 1000),
        format=ns.format, output=ns.output, options=opts,
    )


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    status, text = run(config_from_args(ns))
    if ns.output:
        Path(ns.output).write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
