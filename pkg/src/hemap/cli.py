"""Command line entry point: ``hemap <command> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical
failure, 3 violated model assumption.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, cases
from .analyze import analyze, extract_bounds
from .cauchy import cauchy_H, gamma_extrema, integral_a, jump_factor, H_bounds
from .errors import ConfigError, ConvergenceError, HemapError
from .fixpoint import iterate_to_fixed_point, padded_window, truncation_window
from .halanay import (
    HalanayProblem,
    certified_envelope,
    envelope_margin,
    fit_empirical_rate,
    from_report,
    solve_rate,
)
from .model import InitialHistory, load_model
from .sim import integrate, pairwise_gap


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(v):
    return f"{v:.17g}"


def write_csv(path, header, columns):
    rows = zip(*columns)
    with open(path, "w", newline="") if path != "-" else _stdout() as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(float(v)) for v in row])


class _stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()


def manifest(command, config, params, started):
    return {
        "command": command,
        "config": str(Path(config).resolve()) if config and Path(str(config)).exists() else config,
        "params": params,
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "duration_s": round(time.perf_counter() - started, 6),
    }


def _emit_manifest(out, info):
    text = json.dumps(info, indent=2, sort_keys=True)
    if out in (None, "-"):
        print(text, file=sys.stderr)
    else:
        Path(str(out) + ".manifest.json").write_text(text + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def _dumps(obj):
    return json.dumps(obj, indent=2, default=_json_default)


def _load(path):
    if not Path(path).exists():
        raise ConfigError(f"config file not found: {path}")
    return load_model(path)


def _history(model, text, alpha):
    if text is None:
        if model.history is None:
            raise ConfigError("no initial history: pass --history or add one to the config")
        return model.history
    hist = InitialHistory.from_text(text, alpha)
    sigma_bar = model.delay_bound()
    vals = np.asarray(hist(np.linspace(alpha - sigma_bar, alpha, 201)))
    if np.any(vals < 0) or not vals[-1] > 0:
        raise ConfigError("history must be nonnegative with xi(alpha) > 0")
    return hist


# -- commands ----------------------------------------------------------------


def cmd_simulate(args):
    started = time.perf_counter()
    model = _load(args.config)
    hist = _history(model, args.history, args.alpha)
    traj = integrate(model, hist, args.t_end, args.h)
    write_csv(args.out, ("t", "x_left", "x_right"), (traj.times, traj.x_left, traj.x_right))
    params = {"t_end": args.t_end, "h": args.h, "history": args.history, "alpha": hist.alpha,
              "sigma_bar": traj.sigma_bar, "nodes": len(traj.times)}
    _emit_manifest(args.out, manifest("simulate", args.config, params, started))
    return 0


def _verdict_lines(rep):
    yes = lambda b: "yes" if b else "no"
    return [
        f"M2 > 0: {yes(rep.M2_positive)} (M2 = {rep.M2:.6g}, M1 = {rep.M1:.6g})",
        f"existence (unique positive almost periodic solution): {yes(rep.existence_ok)}"
        f" (contraction lhs = {rep.existence_lhs:.6g})",
        f"exponential attractivity: {yes(rep.attractivity_ok)}"
        f" (lhs = {rep.attractivity_lhs:.6g}, sigma_bar <= eta: {yes(rep.delay_vs_eta_ok)})",
    ]


def cmd_verify(args):
    model = _load(args.config)
    rep = analyze(model, samples=args.samples)
    print(_dumps(rep.to_flat()))
    if not args.json:
        for line in _verdict_lines(rep):
            print(line)
        for w in rep.warnings:
            print(f"warning: {w}")
    return 0


def run_fixpoint(model, rep, t_lo, t_hi, h_grid, tol, trunc_tol, max_iter=200):
    lo, hi = padded_window(model, rep, t_lo, t_hi, trunc_tol)
    band = [math.inf, -math.inf]

    def track(n, phi):
        band[0] = min(band[0], float(phi.left.min()), float(phi.right.min()))
        band[1] = max(band[1], float(phi.left.max()), float(phi.right.max()))

    phi, res = iterate_to_fixed_point(model, rep, lo, hi, h_grid, tol, trunc_tol, max_iter, callback=track)
    ratios = [b / a for a, b in zip(res, res[1:]) if a > 0]
    summary = {
        "iterations": len(res),
        "residuals": res,
        "ratios": ratios,
        "W": truncation_window(model, rep, trunc_tol),
        "grid_lo": lo,
        "grid_hi": hi,
        "t_lo": t_lo,
        "t_hi": t_hi,
        "h_grid": h_grid,
        "tol": tol,
        "truncation_tol": trunc_tol,
        "iterate_min": band[0],
        "iterate_max": band[1],
        "M1": rep.M1,
        "M2": rep.M2,
        "existence_lhs": rep.existence_lhs,
    }
    return phi, summary


def cmd_fixpoint(args):
    started = time.perf_counter()
    model = _load(args.config)
    rep = analyze(model)
    phi, summary = run_fixpoint(model, rep, args.t_lo, args.t_hi, args.h_grid, args.tol, args.truncation_tol)
    t, left, right = phi.restrict(args.t_lo, args.t_hi)
    write_csv(args.out, ("t", "phi_left", "phi_right"), (t, left, right))
    summary["manifest"] = manifest("fixpoint", args.config, {k: summary[k] for k in ("h_grid", "tol", "truncation_tol", "t_lo", "t_hi")}, started)
    text = _dumps(summary)
    if args.out in (None, "-"):
        print(text, file=sys.stderr)
    else:
        Path(str(args.out) + ".json").write_text(text + "\n")
    return 0


def cmd_halanay(args):
    Gamma_M = None
    schedule = None
    if args.config:
        model = _load(args.config)
        rep = analyze(model)
        p = from_report(rep)
        over = {k: getattr(args, k) for k in ("R", "S", "tau", "c") if getattr(args, k) is not None}
        if over:
            p = HalanayProblem(**{**p.__dict__, **over})
        schedule = model.schedule
        Gamma_M = gamma_extrema(schedule).Gamma_M
    else:
        missing = [k for k in ("R", "S", "tau") if getattr(args, k) is None]
        if missing:
            raise ConfigError(f"without a config, --{', --'.join(missing)} required")
        p = HalanayProblem(args.R, args.S, args.tau, 1.0 if args.c is None else args.c)
    lam = solve_rate(p)
    out = {
        "lambda": lam,
        "R": p.R,
        "S": p.S,
        "tau": p.tau,
        "c": p.c,
        "g_at_lambda": p.g(lam),
        "envelope": "ybar0 * prod_{T0 < t_k <= t}(1 + gamma_k) * exp(-lambda * (t - T0))",
    }
    if Gamma_M is not None:
        out["Gamma_M"] = Gamma_M
        out["simplified_envelope"] = "ybar0 * Gamma_M * exp(-lambda * (t - T0))"
        if args.t is not None:
            exact, simple = certified_envelope(p, args.ybar0, schedule, args.T0, args.t)
            out.update({"T0": args.T0, "t": args.t, "ybar0": args.ybar0,
                        "envelope_value": exact, "simplified_value": simple})
    print(_dumps(out))
    return 0


def cmd_cauchy(args):
    model = _load(args.config)
    if args.s > args.t:
        raise ConfigError("cauchy needs s <= t")
    b = extract_bounds(model, samples=10**5)
    g = gamma_extrema(model.schedule)
    H = cauchy_H(model, args.t, args.s)
    lower, upper = H_bounds(b.a[0], b.a[1], g, args.t, args.s)
    out = {
        "s": args.s,
        "t": args.t,
        "H": H,
        "jump_factor": jump_factor(model.schedule, args.s, args.t),
        "integral_a": integral_a(model, args.s, args.t),
        "lower": lower,
        "upper": upper,
        "A": g.A,
        "B": g.B,
        "a_L": b.a[0],
        "a_M": b.a[1],
    }
    print(_dumps(out))
    return 0


def _check(lines, ok, text):
    lines.append(f"{'PASS' if ok else 'FAIL'}: {text}")
    return ok


def _reproduce_example1(outdir, lines):
    model = load_model(cases.config("example1"))
    rep = analyze(model)
    (outdir / "report.json").write_text(_dumps(rep.to_flat()) + "\n")
    ok = True
    for x0 in cases.EXAMPLE1_HISTORIES:
        traj = integrate(model, InitialHistory(0.0, x0), 10.0, 1e-3)
        write_csv(outdir / f"trajectory_x0_{x0:g}.csv", ("t", "x_left", "x_right"),
                  (traj.times, traj.x_left, traj.x_right))
        n = np.arange(1, 11)
        err = max(abs(traj.evaluate_at(float(k)) - cases.example1_closed_form(x0, k)) for k in n)
        ok &= _check(lines, err < 1e-8, f"x0={x0:g}: x(n) matches the closed form at n=1..10 (max error {err:.2e})")
        nonneg = traj.times[traj.x_right >= 0]
        since = f"t > {nonneg.max():.6g}" if len(nonneg) else "t >= 0"
        lines.append(f"INFO: x0={x0:g}: right values negative for all {since}")
        if x0 == 1.0:
            after = traj.times >= 1.0
            strict = traj.times > 1.0
            neg1 = bool(np.all(traj.x_right[after] < 0) and np.all(traj.x_left[strict] < 0))
            ok &= _check(lines, neg1, "no positive AP solution: trajectory negative from t = 1+ onward for x(0)=1")
    ok &= _check(lines, not rep.existence_ok, f"existence verdict false (M2 = {rep.M2:.6g})")
    return ok


def _reproduce_example56(outdir, lines):
    model = load_model(cases.config("example56"))
    rep = analyze(model)
    (outdir / "report.json").write_text(_dumps(rep.to_flat()) + "\n")
    ok = True
    for key, (target, tol) in cases.EXAMPLE56_PINS.items():
        val = getattr(rep, key)
        ok &= _check(lines, abs(val - target) <= tol, f"{key} = {val:.6g} (expected {target} +/- {tol:g})")
    ok &= _check(lines, rep.existence_ok and rep.attractivity_ok, "existence and attractivity verdicts true")
    trajs = {}
    for x0 in cases.EXAMPLE56_HISTORIES:
        traj = integrate(model, InitialHistory(0.0, x0), 30.0, 0.01)
        trajs[x0] = traj
        write_csv(outdir / f"trajectory_x0_{x0:g}.csv", ("t", "x_left", "x_right"),
                  (traj.times, traj.x_left, traj.x_right))
    finals = [float(tr.x_left[-1]) for tr in trajs.values()]
    spread = max(finals) - min(finals)
    ok &= _check(lines, spread < 1e-3, f"trajectories agree at t=30 (spread {spread:.2e})")
    lam = solve_rate(from_report(rep))
    xs = list(trajs)
    t, gap = pairwise_gap(trajs[xs[0]], trajs[xs[-1]])
    fit = fit_empirical_rate(t, gap, width=rep.sigma_bar)
    ok &= _check(lines, fit.rate >= 0.9 * lam, f"empirical rate {fit.rate:.4g} >= 0.9 * certified {lam:.4g}")
    p = from_report(rep)
    worst = math.inf
    for i, xa in enumerate(xs):
        for xb in xs[i + 1:]:
            ta, tb = trajs[xa], trajs[xb]
            worst = min(worst, envelope_margin(p, model.schedule, abs(xa - xb), 0.0, ta.times,
                                               np.abs(ta.x_left - tb.x_left), np.abs(ta.x_right - tb.x_right)))
    ok &= _check(lines, worst >= -1e-9, f"all pairwise gaps under the certified envelope (margin {worst:.3g})")
    phi, summary = run_fixpoint(model, rep, 0.0, 10.0, 0.01, 1e-6, 1e-8)
    tt, left, right = phi.restrict(0.0, 10.0)
    write_csv(outdir / "fixpoint.csv", ("t", "phi_left", "phi_right"), (tt, left, right))
    (outdir / "fixpoint.json").write_text(_dumps(summary) + "\n")
    ratios = summary["ratios"][1:]
    ok &= _check(lines, all(r <= 0.95 for r in ratios), f"fixed point in {summary['iterations']} iterations, ratios <= 0.95")
    inside = rep.M2 - 1e-6 <= summary["iterate_min"] and summary["iterate_max"] <= rep.M1 + 1e-6
    ok &= _check(lines, inside, f"iterates within [M2, M1] ({summary['iterate_min']:.4g}, {summary['iterate_max']:.4g})")
    return ok


def cmd_reproduce(args):
    started = time.perf_counter()
    if args.case not in cases.CASES:
        raise ConfigError(f"unknown case {args.case!r} (choose from {', '.join(cases.CASES)})")
    outdir = Path(args.outdir or f"reproduce_{args.case}")
    outdir.mkdir(parents=True, exist_ok=True)
    lines = []
    runner = _reproduce_example1 if args.case == "example1" else _reproduce_example56
    ok = runner(outdir, lines)
    lines.append("PASS" if ok else "FAIL")
    (outdir / "summary.txt").write_text("\n".join(lines) + "\n")
    (outdir / "manifest.json").write_text(_dumps(manifest("reproduce", args.case, {"outdir": str(outdir)}, started)) + "\n")
    print("\n".join(lines))
    return 0 if ok else 2


def build_parser():
    p = _Parser(prog="hemap", description="Impulsive delay equation toolkit.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="integrate the model and write t,x_left,x_right")
    s.add_argument("config")
    s.add_argument("--t-end", type=float, required=True)
    s.add_argument("--h", type=float, default=0.01)
    s.add_argument("--history", help="constant or expression in t for the initial function")
    s.add_argument("--alpha", type=float, default=0.0, help="start time")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="print certification constants and verdicts")
    v.add_argument("config")
    v.add_argument("--json", action="store_true", help="JSON only")
    v.add_argument("--samples", type=int, default=10**6)
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("fixpoint", help="Picard iteration for the almost periodic solution")
    f.add_argument("config")
    f.add_argument("--tol", type=float, default=1e-6)
    f.add_argument("--h-grid", type=float, default=0.01)
    f.add_argument("--t-lo", type=float, default=0.0)
    f.add_argument("--t-hi", type=float, default=10.0)
    f.add_argument("--truncation-tol", type=float, default=1e-8)
    f.add_argument("--out", default="-")
    f.set_defaults(func=cmd_fixpoint)

    h = sub.add_parser("halanay", help="certified exponential decay rate")
    h.add_argument("config", nargs="?")
    h.add_argument("--R", type=float)
    h.add_argument("--S", type=float)
    h.add_argument("--tau", type=float)
    h.add_argument("--c", type=float)
    h.add_argument("--ybar0", type=float, default=1.0)
    h.add_argument("--T0", type=float, default=0.0)
    h.add_argument("--t", type=float)
    h.set_defaults(func=cmd_halanay)

    c = sub.add_parser("cauchy", help="H(t, s) and its two-sided envelope")
    c.add_argument("config")
    c.add_argument("--s", type=float, required=True)
    c.add_argument("--t", type=float, required=True)
    c.set_defaults(func=cmd_cauchy)

    r = sub.add_parser("reproduce", help="run a pinned worked case end to end")
    r.add_argument("case")
    r.add_argument("--outdir")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.residuals:
            print(f"residuals: {exc.residuals}", file=sys.stderr)
        return exc.exit_code
    except HemapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
