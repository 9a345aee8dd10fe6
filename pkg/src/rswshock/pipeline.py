"""Orchestration shared by the command line and the acceptance suite: generate
initial data from a resolved config, run it with the monitor, and analyse a
finished run directory."""
from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as rio
from .acoustic import InsufficientSteepening, estimate_blowup_time, trajectory_table
from .burgers import emit_selfsimilar_state
from .diagnostics import MonitorConfig, RunMonitor, EXTRA_COLUMNS, holder_quotient, rate_fit
from .grid import GridSpec
from .pulsegen import emit_initial_state, generation_report, pulse_domain, resolve_pulse
from .rswsolver import EDGE_ROWS, SERIES_COLUMNS, Derived, FluidState, continue_run, run

RATE_COLUMNS = ("max_grad_v1", "max_grad_h", "max_grad_zeta")
HOLDER_COLUMNS = ("t", "q_xi_1", "q_zeta_1", "q_rho_alpha", "q_rho_1")
RAY_COLUMNS = ("u_label", "theta_label", "x1", "x2", "T1", "T2", "mu", "alive", "collapsed")
# fractions of T* at which the Hoelder and Lipschitz quotients are compared
HOLDER_TIMES = (0.5, 0.99)


# ------------------------------------------------------------- generation

def _delta(cfg) -> float:
    return cfg["selfsimilar"]["delta"] if cfg["source"] == "selfsimilar" else cfg["pulse"]["delta"]


def build_grid(cfg, t_horizon: float = 1.0) -> GridSpec:
    g = cfg["grid"]
    if g["x1_min"] is not None or g["x1_max"] is not None:
        if g["x1_min"] is None or g["x1_max"] is None:
            raise rio.ConfigError("give both grid.x1_min and grid.x1_max, or neither")
        return GridSpec(g["n1"], g["n2"], g["x1_min"], g["x1_max"], g["x2_period"])
    comoving = cfg["solver"]["window"] == "comoving"
    return pulse_domain(_delta(cfg), g["n1"], g["n2"], t_horizon, comoving, g["length"], g["x2_period"])


def generate(cfg) -> tuple[FluidState, dict]:
    """Initial state and generation report for a resolved config."""
    if cfg["source"] is None:
        raise rio.ConfigError("config needs a pulse or a selfsimilar section")
    if cfg["source"] == "selfsimilar":
        ss = cfg["selfsimilar"]
        grid = build_grid(cfg)
        state, data = emit_selfsimilar_state(ss["delta"], grid, ss["n"], ss["ramp_fraction"])
        rep = dict(data.report)
        rep["shock_expected"] = True
        return state, rep
    spec = rio.build_pulse_spec(cfg)
    data = resolve_pulse(spec, cfg["pulse"]["n_s"], cfg["pulse"]["n_theta"])
    rep = generation_report(data, spec)
    T = rep["T_pred"]
    grid = build_grid(cfg, T if math.isfinite(T) else 1.0)
    state = emit_initial_state(data, spec, grid)
    rep = generation_report(data, spec, state)
    return state, rep


def default_t_end(report: dict) -> float:
    T = report.get("T_pred", math.inf)
    return 1.5 * T if T is not None and math.isfinite(T) and T > 0 else 1.0


def monitor_config(cfg, report: dict) -> MonitorConfig:
    r, dg = cfg["rays"], cfg["diagnostics"]
    delta = _delta(cfg)
    T = report.get("T_pred", 1.0)
    reach = min(T, 10.0) if T is not None and math.isfinite(T) else 1.0
    rng = tuple(dg["particle_x1"]) if dg["particle_x1"] is not None else (1.0 - delta, 1.0 + reach)
    return MonitorConfig(delta=delta, rays=r["enabled"], n_u=r["n_u"], n_theta=r["n_theta"],
                         closure=r["closure"], mu_stop=r["mu_stop"], record_every=r["record_every"],
                         particles=dg["particles"], particle_range=rng, particle_n1=dg["particle_n1"],
                         particle_n2=dg["particle_n2"], zeta=dg["zeta"], region_margin=dg["region_margin"])


# -------------------------------------------------------------------- run

def _manifest_hash(m: dict) -> str:
    return rio.content_hash({k: v for k, v in m.items() if k not in ("created", "wall_time", "hash")})


def execute(cfg, out_dir, data=None, threads: int | None = None, seed: int = 0, log=sys.stderr):
    """Run a resolved config, writing series.csv, extra.csv, rays.csv, particles.csv,
    snapshots/, plots and manifest.json into ``out_dir``.  Returns (RunResult, manifest)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if data is not None:
        state = rio.load_snapshot(data)
        _, report = generate(cfg)
    else:
        state, report = generate(cfg)
    if threads is not None:
        cfg = dict(cfg, solver=dict(cfg["solver"], threads=int(threads)))
    scfg = rio.build_solver_config(cfg, default_t_end(report))
    mon = RunMonitor(monitor_config(cfg, report))
    with rio.SeriesWriter(out / "series.csv", SERIES_COLUMNS) as w:
        res = run(state, scfg, monitor=mon, out_dir=out, series_writer=w, log=log)
    rio.write_series(mon.extra, out / "extra.csv", EXTRA_COLUMNS)
    b = mon.bundle
    if b is not None:
        rio.write_series(np.column_stack([b.u_label, b.theta_label, b.x1, b.x2, b.T1, b.T2, b.mu,
                                          b.alive, b.collapsed]), out / "rays.csv", RAY_COLUMNS)
        if b.record_every:
            rio.write_series(trajectory_table(b), out / "ray_paths.csv",
                             ("t", "u_label", "theta_label", "x1", "x2", "mu", "alive"))
    p = mon.particles
    if p is not None:
        rio.write_series(np.column_stack([p.x1, p.x2, p.xi0, p.xi_now, p.alive, p.dormant]),
                         out / "particles.csv", ("x1", "x2", "xi0", "xi_now", "alive", "dormant"))
    manifest = {
        "version": __version__,
        "config": rio.echo_profiles(cfg),
        "solver": {k: getattr(scfg, k) for k in scfg.__dataclass_fields__},
        "generation": report,
        "status": res.status, "reason": res.reason, "message": res.message,
        "steps": res.steps, "t_final": res.final_state.t,
        "trip_time": res.trip_time, "switch_time": res.switch_time,
        "initial_max_grad_v1": res.initial_max_grad_v1, "stop_gradient": res.stop_gradient,
        "max_grad_ratio": float(np.nanmax(res.series["max_grad_v1"]) / res.initial_max_grad_v1)
        if res.initial_max_grad_v1 > 0 else None,
        "collapse_time": b.collapse_time if b is not None else None,
        "seed": seed,
        "snapshots": [Path(s).name for s in res.snapshots],
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "wall_time": res.wall_time,
    }
    manifest["hash"] = _manifest_hash(manifest)
    rio.write_json(manifest, out / "manifest.json")
    rio.emit_plots(out)
    return res, manifest


# ---------------------------------------------------------------- analyse

def _solver_from_manifest(man: dict):
    from .rswsolver import SolverConfig
    s = dict(man["solver"])
    return SolverConfig(**s)


def state_at(run_dir, t: float, man: dict | None = None) -> FluidState:
    """State at time t, continued from the latest stored snapshot at or before t."""
    run_dir = Path(run_dir)
    man = man or _read_manifest(run_dir)
    snaps = rio.list_snapshots(run_dir)
    if not snaps:
        raise rio.FormatError(f"no snapshots in {run_dir}")
    best = None
    for p in snaps:
        s = rio.load_snapshot(p)
        if s.t <= t and (best is None or s.t > best.t):
            best = s
    if best is None:
        raise ValueError(f"no snapshot at or before t={t}")
    if best.t == t:
        return best
    return continue_run(best, _solver_from_manifest(man), t).final_state


def holder_row(state: FluidState, alpha: float, max_sep: float) -> list:
    """Quotients over the whole box minus the edge bands.  xi is mostly 1 near the front, and
    its variation sits in the fluid the pulse leaves behind, so a pulse-centred region
    would only see round-off there."""
    d = Derived(state)
    g = state.grid
    rows = slice(EDGE_ROWS, g.n1 - EDGE_ROWS)
    return [state.t, holder_quotient(d.xi, g, 1.0, max_sep, rows),
            holder_quotient(d.zeta, g, 1.0, max_sep, rows),
            holder_quotient(state.rho, g, alpha, max_sep, rows),
            holder_quotient(state.rho, g, 1.0, max_sep, rows)]


def holder_table(run_dir, T_star: float, alpha: float, delta: float, max_sep: float | None = None,
                 fractions=HOLDER_TIMES, man: dict | None = None) -> np.ndarray:
    max_sep = max_sep if max_sep is not None else 0.5 * delta
    man = man or _read_manifest(run_dir)
    rows = [holder_row(state_at(run_dir, f * T_star, man), alpha, max_sep) for f in fractions]
    return np.array(rows)


def _read_manifest(run_dir) -> dict:
    p = Path(run_dir) / "manifest.json"
    if not p.exists():
        raise rio.FormatError(f"{p} missing")
    import json
    return json.loads(p.read_text())


def xi_band(run_dir, t_max: float):
    """max |xi - 1| over the box (edge bands excluded) at every stored snapshot with t <= t_max."""
    best = None
    for p in rio.list_snapshots(run_dir):
        s = rio.load_snapshot(p)
        if s.t <= t_max:
            d = Derived(s)
            v = float(np.max(np.abs(d.xi[EDGE_ROWS:-EDGE_ROWS] - 1.0)))
            best = v if best is None else max(best, v)
    return best


def _check(value, ok: bool, threshold: str) -> dict:
    return {"value": value, "threshold": threshold, "pass": bool(ok)}


def analyze(run_dir, holder: bool = True) -> dict:
    """Fits, exponents, Hoelder tables and one pass/fail entry per single-run check."""
    run_dir = Path(run_dir)
    if not (run_dir / "series.csv").exists():
        raise rio.FormatError(f"{run_dir / 'series.csv'} missing")
    S = rio.read_series(run_dir / "series.csv")
    if S["t"].size == 0:
        raise rio.FormatError("series.csv has no rows")
    man = _read_manifest(run_dir)
    cfg = man["config"]
    gen = man["generation"]
    dg = cfg["diagnostics"]
    delta = float(gen["delta"])
    checks: dict = {}
    rep: dict = {"run": str(run_dir), "status": man["status"], "kind": gen.get("kind"), "delta": delta}
    try:
        fit = estimate_blowup_time(S, dg["fit_ratio_lo"], dg["fit_ratio_hi"])
    except InsufficientSteepening as e:
        rep["fit"] = None
        rep["fit_error"] = str(e)
        rep["checks"] = checks
        return rep
    T = fit.T_grad
    rep["fit"] = fit.to_dict()
    T_pred = gen.get("T_pred")
    rep["T_pred"] = T_pred
    if T_pred is not None and math.isfinite(T_pred):
        # [0.60, 0.75] for the normalised pulse with T_pred = 2/3
        lo, hi = 0.9 * T_pred, 1.125 * T_pred
        checks["shock_time"] = _check(T, lo <= T <= hi, f"[{lo:.6g}, {hi:.6g}]")

    rates = {}
    for c in RATE_COLUMNS:
        try:
            r = rate_fit(S, T, c, dg["rate_ratio_lo"], dg["fit_ratio_hi"])
            rates[c] = {"exponent": r.exponent, "prefactor": r.prefactor, "resid": r.resid,
                        "window": list(r.window), "n": r.n}
        except InsufficientSteepening as e:
            rates[c] = {"exponent": math.nan, "error": str(e)}
    rep["rates"] = rates
    ex = [rates[c]["exponent"] for c in RATE_COLUMNS]
    checks["blowup_rate"] = _check(ex, all(-1.2 <= e <= -0.8 for e in ex), "[-1.2, -0.8]")

    t = S["t"]
    pre = t <= 0.9 * T
    g = S["max_grad_v1"]
    growth = float(np.nanmax(g) / g[0])
    rep["max_grad_growth"] = growth
    if gen.get("kind") == "pulse":
        k = float(gen["ds_phi1_max"]) * delta ** float(gen.get("iota", 0.0))
        mu = S["mu_min"][pre]
        if np.isfinite(mu).any():
            err = float(np.nanmax(np.abs(mu - (1.0 - 1.5 * k * t[pre]))))
            checks["mu_prediction"] = _check(err, err <= 10 * delta, f"<= {10 * delta:.6g}")
        drift = float(np.nanmax(S["xi_drift"][pre])) if np.isfinite(S["xi_drift"][pre]).any() else math.nan
        checks["pv_drift"] = _check(drift, drift <= 1e-2, "<= 0.01")
        lf = float(np.nanmax(S["sup_Lf_rho"][pre]))
        rd = float(np.nanmax(S["riemann_diff"][pre]))
        checks["good_direction"] = _check({"sup_Lf_rho": lf, "riemann_diff": rd, "growth": growth},
                                          lf <= 20 * delta and rd <= 20 * delta and growth >= 20,
                                          f"<= {20 * delta:.6g} with growth >= 20")
        band = xi_band(run_dir, 0.9 * T)
        if band is not None:
            checks["pv_band"] = _check(band, band <= 5 * delta, f"<= {5 * delta:.6g}")
    m = S["mass"]
    dur = max(float(t[-1] - t[0]), 1e-300)
    mdrift = float(np.max(np.abs(m - m[0]))) / dur
    checks["mass"] = _check(mdrift, mdrift <= 1e-10, "<= 1e-10 per unit time")

    if holder:
        n = int(gen.get("n", 1)) if gen.get("kind") == "selfsimilar" else 1
        alpha = 1.0 / (2 * n + 1)
        # the ratios move ~4% per 0.5% of T*; the mu intercept is the sharper estimate
        T_h = fit.T_mu if math.isfinite(fit.T_mu) else T
        try:
            tab = holder_table(run_dir, T_h, alpha, delta, dg["holder_max_sep"], man=man)
        except (rio.FormatError, ValueError) as e:
            rep["holder_error"] = str(e)
        else:
            rio.write_series(tab, run_dir / "holder.csv", HOLDER_COLUMNS)
            a, b = tab[0], tab[-1]
            ratios = {c: float(b[i] / a[i]) if a[i] > 0 else math.inf
                      for i, c in enumerate(HOLDER_COLUMNS) if i > 0}
            rep["holder"] = {"alpha": alpha, "T_star": T_h, "fractions": list(HOLDER_TIMES),
                             "table": tab.tolist(), "ratios": ratios}
            if gen.get("kind") == "pulse" and cfg["solver"]["window"] != "fixed":
                rep["holder"]["note"] = ("comoving window drops the fluid behind the pulse; "
                                         "lipschitz_dichotomy needs a fixed window")
            elif gen.get("kind") == "pulse":
                checks["lipschitz_dichotomy"] = _check(
                    {"xi": ratios["q_xi_1"], "zeta": ratios["q_zeta_1"]},
                    ratios["q_xi_1"] <= 3 and ratios["q_zeta_1"] >= 10, "xi <= 3, zeta >= 10")
            else:
                checks["holder"] = _check(
                    {"rho_alpha": ratios["q_rho_alpha"], "rho_1": ratios["q_rho_1"]},
                    ratios["q_rho_alpha"] <= 2 and ratios["q_rho_1"] >= 10, "alpha <= 2, Lipschitz >= 10")
    rep["checks"] = checks
    rep["multi_run_checks"] = ["pv_refinement", "scaling_trend", "determinism"]
    rio.emit_plots(run_dir)
    return rep
