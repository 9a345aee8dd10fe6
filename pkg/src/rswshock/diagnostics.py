"""Measurements on evolved solutions: vorticity transport, good-direction smallness,
blow-up rates and Hoelder quotients, plus the per-step monitor used by ``run``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import acoustic
from .acoustic import InsufficientSteepening
from .grid import GridSpec, interp_points
from .rswsolver import EDGE_ROWS, Derived, FluidState


# --------------------------------------------------------------------- regions

def pulse_rows(grid: GridSpec, t: float, delta: float, margin: float = 0.1) -> slice:
    """Rows with x1 in [1 - delta - margin, 1 + t + margin], minus the edge bands."""
    x = grid.x1
    lo = int(np.searchsorted(x, 1.0 - delta - margin))
    hi = int(np.searchsorted(x, 1.0 + t + margin, side="right"))
    lo = max(lo, EDGE_ROWS)
    hi = min(hi, grid.n1 - EDGE_ROWS)
    return slice(lo, max(lo, hi))


def _supabs(f, rows: slice) -> float:
    part = f[rows]
    return float(np.max(np.abs(part))) if part.size else 0.0


# ------------------------------------------------------------------- particles

@dataclass
class ParticleSet:
    x1: np.ndarray
    x2: np.ndarray
    xi0: np.ndarray
    xi_now: np.ndarray
    alive: np.ndarray
    # frozen ahead of the box, where the fluid is exactly at rest
    dormant: np.ndarray
    drift_series: list = field(default_factory=list)

    @property
    def n_alive(self) -> int:
        return int(self.alive.sum())

    def drift(self) -> float:
        a = self.alive
        return float(np.max(np.abs(self.xi_now[a] - self.xi0[a]))) if a.any() else 0.0


def _xi_at(derived: Derived, x1, x2):
    vals, inside = interp_points([derived.xi], derived.state.grid, x1, x2)
    return vals[0], inside


def seed_particles(derived: Derived, x1_range, n1: int = 16, n2: int = 8) -> ParticleSet:
    """Lattice of particles; those ahead of the box start dormant with xi = 1 (rest state)."""
    g = derived.state.grid
    X1, X2 = np.meshgrid(np.linspace(x1_range[0], x1_range[1], n1),
                         (np.arange(n2) + 0.25) * (g.x2_period / n2), indexing="ij")
    x1, x2 = X1.ravel(), X2.ravel()
    xi, inside = _xi_at(derived, x1, x2)
    ahead = x1 > g.x1_max
    xi0 = np.where(inside, xi, np.where(ahead, 1.0, np.nan))
    alive = inside | ahead
    p = ParticleSet(x1, x2, xi0, xi0.copy(), alive, ahead & ~inside)
    p.drift_series.append((derived.state.t, p.drift()))
    return p


def _vel(derived, x1, x2):
    s = derived.state
    v, inside = interp_points([s.v1, s.v2], s.grid, x1, x2)
    return v[0], v[1], inside


REAR_MARGIN = 8


def advect_particles(p: ParticleSet, d_prev: Derived, d_next: Derived,
                     rear_margin: int = REAR_MARGIN) -> ParticleSet:
    """Midpoint RK2 along v; xi sampled at the new positions.  Particles closer than
    ``rear_margin`` cells to the rear edge are retired: the clamped ghosts pollute xi there."""
    dt = d_next.state.t - d_prev.state.t
    g = d_next.state.grid
    # wake particles the box has reached
    wake = p.dormant & (p.x1 <= g.x1_max - 2 * g.dx1)
    p.dormant &= ~wake
    act = p.alive & ~p.dormant
    if act.any() and dt > 0:
        x1, x2 = p.x1[act], p.x2[act]
        a1, a2, i0 = _vel(d_prev, x1, x2)
        y1, y2 = x1 + 0.5 * dt * a1, x2 + 0.5 * dt * a2
        b1, b2, ib = _vel(d_prev, y1, y2)
        c1, c2, ic = _vel(d_next, y1, y2)
        n1 = x1 + dt * 0.5 * (b1 + c1)
        n2 = x2 + dt * 0.5 * (b2 + c2)
        xi, inn = _xi_at(d_next, n1, n2)
        ok = i0 & ib & ic & inn & (n1 >= g.x1_min + rear_margin * g.dx1)
        idx = np.nonzero(act)[0]
        p.x1[idx[ok]] = n1[ok]
        p.x2[idx[ok]] = np.mod(n2[ok], g.x2_period)
        p.xi_now[idx[ok]] = xi[ok]
        p.alive[idx[~ok]] = False
    p.drift_series.append((d_next.state.t, p.drift()))
    return p


# ------------------------------------------------------------ point monitors

def riemann_difference(derived: Derived, bundle: acoustic.RayBundle | None, delta: float,
                       rows: slice | None = None) -> float:
    """sup |mu T.grad(rho - v1)|: at live rays with their own (mu, T); elsewhere in the pulse
    region with T = (-1, 0) and mu = eta, skipping cells within 2 dx1 of a ray's x1 band."""
    s = derived.state
    g = s.grid
    if rows is None:
        rows = pulse_rows(g, s.t, delta)
    best = 0.0
    mask_rows = np.ones(g.n1, dtype=bool)
    if bundle is not None:
        live = bundle.alive & ~bundle.collapsed
        if live.any():
            vals, inside = interp_points([s.h, derived.d1h, derived.d2h, derived.d1v1, derived.d2v1],
                                         g, bundle.x1[live], bundle.x2[live])
            h, h1, h2, a1, a2 = vals
            q = np.abs(bundle.mu[live] * (bundle.T1[live] * (h1 / h - a1) + bundle.T2[live] * (h2 / h - a2)))
            q = q[inside]
            if q.size:
                best = float(q.max())
            lo, hi = bundle.x1[live].min() - 2 * g.dx1, bundle.x1[live].max() + 2 * g.dx1
            mask_rows = (g.x1 < lo) | (g.x1 > hi)
    sel = np.zeros(g.n1, dtype=bool)
    sel[rows] = True
    sel &= mask_rows
    if sel.any():
        best = max(best, float(derived.row_stats[4][sel].max()))
    return best


def lf_rho(derived: Derived) -> np.ndarray:
    """L_f rho = d_t rho + (v1 + eta) d1 rho + v2 d2 rho with d_t rho from the equations."""
    s = derived.state
    return derived.eta * derived.d1h / s.h - derived.div


def lf_v1(derived: Derived) -> np.ndarray:
    s = derived.state
    return derived.eta * derived.d1v1 + s.v2 - derived.d1h


def _rowsup(stat: np.ndarray, rows: slice) -> float:
    part = stat[rows]
    return float(part.max()) if part.size else 0.0


def supnorm_monitor(derived: Derived, delta: float, threshold: float = 20.0, rows=None) -> dict:
    s = derived.state
    if rows is None:
        rows = pulse_rows(s.grid, s.t, delta)
    a = _rowsup(derived.row_stats[2], rows)
    b = _rowsup(derived.row_stats[3], rows)
    return {"sup_Lf_rho": a, "sup_Lf_v1": b, "flag": bool(max(a, b) > threshold * delta),
            "C_rho": a / delta, "C_v1": b / delta}


def emitted_state_report(state: FluidState, delta: float) -> dict:
    d = Derived(state)
    rows = pulse_rows(state.grid, state.t, delta)
    xi_dev = _supabs(d.xi - 1.0, rows)
    mon = supnorm_monitor(d, delta, rows=rows)
    return {"max_xi_minus_1": xi_dev, "C_xi": xi_dev / delta, "sup_Lf_rho": mon["sup_Lf_rho"],
            "sup_Lf_v1": mon["sup_Lf_v1"], "riemann_diff": riemann_difference(d, None, delta, rows),
            "max_grad_v1": _supabs(d.d1v1, rows)}


# --------------------------------------------------------------- Hoelder norms

def holder_offsets(max_k: int, n_offsets: int = 24) -> np.ndarray:
    """Every offset up to 8, then geometrically spaced offsets up to max_k."""
    if max_k < 1:
        return np.array([], dtype=int)
    small = np.arange(1, min(8, max_k) + 1)
    if max_k <= 8:
        return small
    big = np.unique(np.round(np.geomspace(9, max_k, max(n_offsets - 8, 1))).astype(int))
    return np.unique(np.concatenate([small, big]))


def holder_quotient(f, grid: GridSpec, alpha: float, max_sep: float, rows: slice | None = None,
                    max_pairs: int = 1_000_000, return_detail: bool = False):
    """max |f(p) - f(q)| / |p - q|**alpha over same-row x1 pairs and same-column x2 pairs
    with separation <= max_sep.

    Offsets: all up to 8 cells, geometric beyond.  If the pair count exceeds
    ``max_pairs`` the start positions of offsets beyond 8 are strided by the
    smallest integer that meets the budget (offsets <= 8 always use every pair).
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if max_sep < 2 * grid.dx1:
        raise ValueError("max_sep must be at least 2 dx1")
    f = np.asarray(f, dtype=float)
    if rows is not None:
        f = f[rows]
    n1, n2 = f.shape
    k1 = holder_offsets(min(int(max_sep / grid.dx1), n1 - 1))
    k2 = holder_offsets(min(int(max_sep / grid.dx2), n2 // 2))
    small = [k for k in k1 if k <= 8]
    big = [k for k in k1 if k > 8]
    base = sum((n1 - k) * n2 for k in small) + len(k2) * n1 * n2
    extra = sum((n1 - k) * n2 for k in big)
    stride = 1
    if extra and base + extra > max_pairs:
        stride = int(math.ceil(extra / max(max_pairs - base, 1)))
    best, best_at = 0.0, None
    for k in k1:
        st = stride if k > 8 else 1
        d = np.abs(f[k::st] - f[: n1 - k: st]) if st == 1 else np.abs(f[k:][::st] - f[: n1 - k][::st])
        q = float(d.max()) / (k * grid.dx1) ** alpha if d.size else 0.0
        if q > best:
            best, best_at = q, ("x1", int(k))
    for k in k2:
        d = np.abs(np.roll(f, -k, axis=1) - f)
        q = float(d.max()) / (k * grid.dx2) ** alpha
        if q > best:
            best, best_at = q, ("x2", int(k))
    if return_detail:
        return best, {"stride": stride, "argmax": best_at, "offsets_x1": k1.tolist(),
                      "offsets_x2": k2.tolist()}
    return best


# ----------------------------------------------------------------- rate fits

@dataclass
class RateFit:
    exponent: float
    prefactor: float
    resid: float
    window: tuple
    n: int


def rate_fit(series: dict, T_star: float, column: str = "max_grad_v1", ratio_lo: float = 1.0,
             ratio_hi: float = 10.0) -> RateFit:
    """Slope of log g against log(T* - t) over one decade of steepening of max|d1 v1|.

    The window is shared by all columns: samples on the monotone run where
    max|d1 v1| / its initial value lies in [ratio_lo, ratio_hi] (default one decade).
    """
    if not math.isfinite(T_star):
        raise InsufficientSteepening("no finite blow-up time")
    t = np.asarray(series["t"], dtype=float)
    m = acoustic.grad_fit_mask(series, ratio_lo, ratio_hi)
    g = np.asarray(series[column], dtype=float)
    m &= (t < T_star) & np.isfinite(g) & (g > 0)
    if m.sum() < 5:
        raise InsufficientSteepening("fewer than 5 samples in the rate window")
    x = np.log(T_star - t[m])
    y = np.log(g[m])
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return RateFit(float(coef[0]), float(np.exp(coef[1])), resid, (float(t[m][0]), float(t[m][-1])),
                   int(m.sum()))


# --------------------------------------------------------------- run monitor

@dataclass
class MonitorConfig:
    delta: float = 0.05
    rays: bool = True
    n_u: int = 64
    n_theta: int = 16
    closure: str = "h"
    mu_stop: float = 0.05
    ray_front: float = 1.0
    record_every: int = 0
    particles: bool = True
    particle_range: tuple | None = None
    particle_n1: int = 96
    particle_n2: int = 8
    zeta: bool = True
    region_margin: float = 0.1


EXTRA_COLUMNS = ("t", "sup_Lf_v1", "lf_flag", "m_disc", "rays_alive", "rays_collapsed",
                 "particles_active", "mass_box")


class RunMonitor:
    """Fills the monitored series columns each step; keeps rays and particles."""

    def __init__(self, cfg: MonitorConfig):
        self.cfg = cfg
        self.bundle: acoustic.RayBundle | None = None
        self.particles: ParticleSet | None = None
        self.extra: list = []

    def _row(self, d: Derived) -> dict:
        c = self.cfg
        s = d.state
        rows = pulse_rows(s.grid, s.t, c.delta, c.region_margin)
        mon = supnorm_monitor(d, c.delta, rows=rows)
        st = d.row_stats
        out = {"max_grad_v1": _rowsup(st[0], rows), "max_grad_h": _rowsup(st[1], rows),
               "sup_Lf_rho": mon["sup_Lf_rho"],
               "riemann_diff": riemann_difference(d, self.bundle, c.delta, rows)}
        if c.zeta:
            out["max_grad_zeta"] = _rowsup(d.d1zeta_rows, rows)
        b = self.bundle
        if b is not None:
            out["mu_min"] = b.mu_min()
        if self.particles is not None:
            out["xi_drift"] = self.particles.drift()
        m_disc = math.nan
        if b is not None and b.m is not None:
            live = b.alive & ~b.collapsed
            if live.any():
                mm, ma = b.m[live], b.m_alt[live]
                scale = max(float(np.max(np.abs(mm))), 1e-12)
                m_disc = float(np.max(np.abs(mm - ma))) / scale
        self.extra.append([s.t, mon["sup_Lf_v1"], float(mon["flag"]), m_disc,
                           float(b.alive.sum()) if b is not None else math.nan,
                           float(b.collapsed.sum()) if b is not None else math.nan,
                           float((self.particles.alive & ~self.particles.dormant).sum())
                           if self.particles is not None else math.nan, s.box_mass()])
        return out

    def start(self, state: FluidState, d: Derived) -> dict:
        c = self.cfg
        if c.rays:
            self.bundle = acoustic.seed_bundle(d, c.delta, c.n_u, c.n_theta, c.closure, c.mu_stop,
                                               c.ray_front, c.record_every)
        if c.particles:
            rng = c.particle_range or (1.0 - c.delta, 1.65)
            self.particles = seed_particles(d, rng, c.particle_n1, c.particle_n2)
        return self._row(d)

    def step(self, prev: FluidState, nxt: FluidState, d_prev: Derived, d_next: Derived) -> dict:
        if self.bundle is not None:
            acoustic.advance_bundle(self.bundle, d_prev, d_next)
        if self.particles is not None:
            advect_particles(self.particles, d_prev, d_next)
        return self._row(d_next)
