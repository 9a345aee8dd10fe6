"""Command line front end.

    rswshock gen-data --config C --out DIR
    rswshock run      --config C [--data SNAP] --out-dir DIR [--threads N]
    rswshock trace    --run DIR
    rswshock analyze  --run DIR
    rswshock burgers  [--n 1 2 3 4] --out DIR
    rswshock oracle   [--n 1] --out DIR

Exit codes: 0 success (including a detected blow-up), 2 bad config or run
directory, 3 solver failure before any steepening.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as rio
from . import pipeline
from .acoustic import (InsufficientSteepening, advance_bundle, estimate_blowup_time, seed_bundle,
                       trajectory_table)
from .burgers import BurgersProfile, burgers1d_oracle, profile_derivative, solve_profile
from .diagnostics import rate_fit
from .rswsolver import Derived

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
# a failure is a solver bug rather than physics unless the gradient had grown this much
STEEPENED_RATIO = 5.0


def _err(msg: str) -> None:
    print(f"rswshock: error: {msg}", file=sys.stderr)


def _config(path) -> dict:
    return rio.load_config(path) if path else rio.resolve_config({"pulse": {}})


def _out(args_path, cfg=None) -> Path:
    p = args_path or (cfg["output"]["dir"] if cfg else "run")
    return rio.out_root(p)


# ------------------------------------------------------------------ commands

def cmd_gen_data(args) -> int:
    cfg = _config(args.config)
    state, report = pipeline.generate(cfg)
    out = _out(args.out, cfg)
    out.mkdir(parents=True, exist_ok=True)
    rio.save_snapshot(state, out / "initial.rsw")
    rio.write_json({"config": rio.echo_profiles(cfg), "grid": state.grid.to_dict(), "report": report},
                   out / "generation.json")
    print(f"wrote {out / 'initial.rsw'}  T_pred={report.get('T_pred')}  "
          f"shock_expected={report.get('shock_expected')}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args.config)
    data = args.data
    if data is not None:
        data = rio.out_root(data)
        if data.is_dir():
            data = data / "initial.rsw"
        if not data.exists():
            _err(f"data snapshot {data} not found")
            return EXIT_CONFIG
    out = _out(args.out_dir, cfg)
    res, man = pipeline.execute(cfg, out, data=data, threads=args.threads, seed=args.seed)
    ratio = man["max_grad_ratio"] or 0.0
    print(f"{res.status} ({res.reason}) after {res.steps} steps, t={res.final_state.t:.6g}, "
          f"max|d1 v1| grew {ratio:.3g}x")
    if res.status in ("NonFinite", "PositivityLoss") and ratio < STEEPENED_RATIO:
        _err(res.message or res.status)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_trace(args) -> int:
    """Re-trace rays through the stored snapshots, one midpoint step per snapshot interval.
    This is coarse compared with the inline tracing in `run`."""
    run_dir = rio.out_root(args.run)
    snaps = rio.list_snapshots(run_dir)
    if len(snaps) < 2:
        _err(f"{run_dir} needs at least two snapshots")
        return EXIT_CONFIG
    man = pipeline._read_manifest(run_dir)
    cfg = man["config"]
    delta = float(man["generation"]["delta"])
    r = cfg["rays"]
    d_prev = Derived(rio.load_snapshot(snaps[0]))
    b = seed_bundle(d_prev, delta, r["n_u"], r["n_theta"], r["closure"], r["mu_stop"], record_every=1)
    for p in snaps[1:]:
        d_next = Derived(rio.load_snapshot(p))
        advance_bundle(b, d_prev, d_next)
        d_prev = d_next
    rio.write_series(trajectory_table(b), run_dir / "rays_trace.csv",
                     ("t", "u_label", "theta_label", "x1", "x2", "mu", "alive"))
    print(f"traced {b.size} rays through {len(snaps)} snapshots; mu_min={b.mu_min():.6g}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    run_dir = rio.out_root(args.run)
    rep = pipeline.analyze(run_dir, holder=not args.no_holder)
    rio.write_json(rep, run_dir / "report.json")
    for name, c in rep.get("checks", {}).items():
        print(f"{name:22s} {'PASS' if c['pass'] else 'FAIL'}  {c['value']}  ({c['threshold']})")
    if rep.get("fit") is None:
        print(f"no blow-up fit: {rep.get('fit_error')}")
    return EXIT_OK


def cmd_burgers(args) -> int:
    out = _out(args.out)
    out.mkdir(parents=True, exist_ok=True)
    y = np.linspace(-args.y_max, args.y_max, args.points)
    for n in args.n:
        tab = BurgersProfile(n).table(y)
        rio.write_series(tab, out / f"burgers_n{n}.csv", ("y", "U", "dU", "residual"))
        print(f"n={n}: max |residual| = {np.max(np.abs(tab[:, 3])):.3e}")
    return EXIT_OK


def burgers_ladder(n: int = 1, n_t: int = 200, t_frac: float = 0.99, half_width: float = 0.05,
                   n_x: int = 20001) -> dict:
    """max|u_x| of the Burgers solution from u0 = U_n along a time ladder, plus fits."""
    x = np.linspace(-half_width, half_width, n_x)

    def u0(z):
        return solve_profile(z, n)

    def du0(z):
        return profile_derivative(solve_profile(z, n), n)

    _, T = burgers1d_oracle(u0, 0.0, x, du0=du0, window=(-1.0, 1.0))
    ts = T * t_frac * np.linspace(0.0, 1.0, n_t)
    g = []
    for t in ts:
        u, _ = burgers1d_oracle(u0, float(t), x, du0=du0, window=(-1.0, 1.0))
        g.append(float(np.max(np.abs(np.gradient(u, x)))))
    series = {"t": ts, "max_grad_v1": np.array(g), "mu_min": np.full(n_t, np.nan)}
    fit = estimate_blowup_time(series)
    rf = rate_fit(series, fit.T_grad)
    return {"n": n, "T_exact": T, "T_grad": fit.T_grad, "exponent": rf.exponent, "t": ts,
            "max_grad": np.array(g)}


def cmd_oracle(args) -> int:
    out = _out(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        r = burgers_ladder(args.n)
    except InsufficientSteepening as e:
        _err(str(e))
        return EXIT_RUNTIME
    rio.write_series(np.column_stack([r["t"], r["max_grad"]]), out / "oracle.csv", ("t", "max_grad"))
    summary = {k: r[k] for k in ("n", "T_exact", "T_grad", "exponent")}
    summary["rel_error_T"] = abs(r["T_grad"] - r["T_exact"]) / r["T_exact"]
    rio.write_json(summary, out / "oracle.json")
    print(json.dumps(rio._clean(summary)))
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rswshock", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--threads", type=int, default=None, help="worker threads (default from config)")
        p.add_argument("--seed", type=int, default=0, help="recorded in the manifest")

    p = sub.add_parser("gen-data", help="build initial data and its generation report")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--out", type=str, default=None)
    common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("run", help="evolve, trace rays and record the monitored series")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--data", type=str, default=None, help="snapshot or gen-data directory")
    p.add_argument("--out-dir", "--out", dest="out_dir", type=str, default=None)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trace", help="approximate re-trace of rays through stored snapshots")
    p.add_argument("--run", type=str, required=True)
    common(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("analyze", help="fit blow-up time and rates, Hoelder tables, report.json")
    p.add_argument("--run", type=str, required=True)
    p.add_argument("--no-holder", action="store_true", help="skip the snapshot continuations")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("burgers", help="self-similar profile tables")
    p.add_argument("--n", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--y-max", type=float, default=10.0)
    p.add_argument("--out", type=str, default="burgers")
    common(p)
    p.set_defaults(func=cmd_burgers)

    p = sub.add_parser("oracle", help="1D Burgers blow-up ladder and its fits")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--out", type=str, default="oracle")
    common(p)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (rio.ConfigError, rio.SchemaError, rio.FormatError) as e:
        _err(str(e))
        return EXIT_CONFIG
    except FileNotFoundError as e:
        _err(str(e))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
