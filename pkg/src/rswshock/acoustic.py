"""Acoustic characteristics, the unit normal T and the inverse foliation density mu.

Rays follow L = B - eta T, with T the unit gradient of the eikonal u
(u = 1 - x1 initially, so T = (-1, 0)) and X = (-T2, T1) the unit tangent to
the level curves.  mu = eta / |grad u| starts equal to eta and reaches zero
where neighbouring characteristics cross.

Three closures for L mu are available:

``h``        m + mu e with m = -(3/2)(mu/eta) T.grad h
``v``        m_alt + mu e with m_alt = (3/2) mu T.(grad v).T
``eikonal``  mu (L eta / eta + T.(grad v).T - T.grad eta), the exact evolution
             implied by transporting grad u along the ray

where e = (1/2)eta^-1 T^i L v^i + (1/2)eta^-2 L h - eta^-1 (T1 v2 - T2 v1) and
L-derivatives come from the equations of motion, never from time differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, interp_points, OutOfDomain  # noqa: F401  (re-exported)

CLOSURES = ("h", "v", "eikonal")
# order of the sampled fields
_FIELDS = ("h", "v1", "v2", "d1h", "d2h", "d1v1", "d2v1", "d1v2", "d2v2")


class InsufficientSteepening(ValueError):
    pass


def sample_fields(derived, x1, x2):
    """The nine fields a ray needs, bilinearly interpolated; returns (array[9, n], inside)."""
    s = derived.state
    return interp_points([s.h, s.v1, s.v2, derived.d1h, derived.d2h, derived.d1v1, derived.d2v1,
                          derived.d1v2, derived.d2v2], s.grid, x1, x2)


def ray_rhs(T1, T2, mu, F, closure: str = "h"):
    """Right-hand sides for (x1, x2, T1, T2, mu) given sampled fields F (rows as in _FIELDS).

    Returns (dx1, dx2, dT1, dT2, dmu, m, m_alt).
    """
    h, v1, v2, h1, h2, a11, a12, a21, a22 = F  # aij = d_j v^i
    eta = np.sqrt(h)
    X1, X2 = -T2, T1
    dx1 = v1 - eta * T1
    dx2 = v2 - eta * T2
    Xv1 = X1 * a11 + X2 * a12
    Xv2 = X1 * a21 + X2 * a22
    Xeta = (X1 * h1 + X2 * h2) / (2.0 * eta)
    c = -(T1 * Xv1 + T2 * Xv2) + Xeta
    dT1 = c * X1
    dT2 = c * X2
    Th = T1 * h1 + T2 * h2
    Tv1 = T1 * a11 + T2 * a12
    Tv2 = T1 * a21 + T2 * a22
    TTv = T1 * Tv1 + T2 * Tv2
    m = -1.5 * mu / eta * Th
    m_alt = 1.5 * mu * TTv
    div = a11 + a22
    Lv1 = (v2 - h1) - eta * Tv1
    Lv2 = (-v1 - h2) - eta * Tv2
    Lh = -h * div - eta * Th
    if closure == "eikonal":
        dmu = mu * (Lh / (2.0 * h) + TTv - Th / (2.0 * eta))
    else:
        e = 0.5 / eta * (T1 * Lv1 + T2 * Lv2) + 0.5 / h * Lh - (T1 * v2 - T2 * v1) / eta
        dmu = (m if closure == "h" else m_alt) + mu * e
    return dx1, dx2, dT1, dT2, dmu, m, m_alt


@dataclass
class RayBundle:
    u_label: np.ndarray
    theta_label: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    mu: np.ndarray
    alive: np.ndarray
    collapsed: np.ndarray
    closure: str = "h"
    mu_stop: float = 0.05
    m: np.ndarray | None = None
    m_alt: np.ndarray | None = None
    norm_drift: float = 0.0
    mu_min_series: list = field(default_factory=list)
    collapse_time: float | None = None
    trajectory: list = field(default_factory=list)
    record_every: int = 0
    _steps: int = 0

    @property
    def size(self) -> int:
        return self.u_label.size

    def mu_min(self) -> float:
        live = self.alive
        return float(self.mu[live].min()) if live.any() else math.nan

    def record(self, t):
        self.trajectory.append(np.column_stack([np.full(self.size, t), self.u_label, self.theta_label,
                                                self.x1, self.x2, self.mu, self.alive]))


def seed_bundle(derived, delta: float, n_u: int = 64, n_theta: int = 16, closure: str = "h",
                mu_stop: float = 0.05, front: float = 1.0, record_every: int = 0) -> RayBundle:
    """Rays on the lattice u in [0, delta], theta in [0, period); x1 = front - u, mu = eta, T = (-1, 0)."""
    if closure not in CLOSURES:
        raise ValueError(f"closure must be one of {CLOSURES}")
    g = derived.state.grid
    u = np.linspace(0.0, delta, n_u)
    th = np.arange(n_theta) * (g.x2_period / n_theta)
    U, TH = np.meshgrid(u, th, indexing="ij")
    U, TH = U.ravel(), TH.ravel()
    x1 = front - U
    x2 = TH.copy()
    F, inside = sample_fields(derived, x1, x2)
    mu = np.where(inside, np.sqrt(F[0]), np.nan)
    b = RayBundle(U, TH, x1, x2, -np.ones_like(U), np.zeros_like(U), mu, inside.copy(),
                  np.zeros(U.size, dtype=bool), closure, mu_stop, record_every=record_every)
    out = ray_rhs(b.T1, b.T2, np.where(inside, mu, 1.0), np.where(inside, F, 1.0), closure)
    b.m, b.m_alt = out[5], out[6]
    b.mu_min_series.append((derived.state.t, b.mu_min()))
    if record_every:
        b.record(derived.state.t)
    return b


def advance_bundle(b: RayBundle, d_prev, d_next) -> RayBundle:
    """Midpoint RK2 for every live, uncollapsed ray; fields at the half step are the average
    of the two bracketing states, each sampled on its own grid."""
    dt = d_next.state.t - d_prev.state.t
    act = b.alive & ~b.collapsed
    if act.any() and dt > 0:
        x1, x2, T1, T2, mu = b.x1[act], b.x2[act], b.T1[act], b.T2[act], b.mu[act]
        F0, in0 = sample_fields(d_prev, x1, x2)
        k = ray_rhs(T1, T2, mu, np.where(in0, F0, 1.0), b.closure)
        h = 0.5 * dt
        y1, y2 = x1 + h * k[0], x2 + h * k[1]
        S1, S2, M = T1 + h * k[2], T2 + h * k[3], mu + h * k[4]
        Fa, ina = sample_fields(d_prev, y1, y2)
        Fb, inb = sample_fields(d_next, y1, y2)
        ok = in0 & ina & inb
        Fm = np.where(ok, 0.5 * (Fa + Fb), 1.0)
        k2 = ray_rhs(S1, S2, M, Fm, b.closure)
        nx1, nx2 = x1 + dt * k2[0], x2 + dt * k2[1]
        nT1, nT2 = T1 + dt * k2[2], T2 + dt * k2[3]
        nrm = np.sqrt(nT1 ** 2 + nT2 ** 2)
        if ok.any():
            b.norm_drift = max(b.norm_drift, float(np.max(np.abs(nrm[ok] - 1.0))))
        g = d_next.state.grid
        ok &= (nx1 >= g.x1_min) & (nx1 <= g.x1_max)
        idx = np.nonzero(act)[0]
        b.x1[idx], b.x2[idx] = nx1, np.mod(nx2, g.x2_period)
        b.T1[idx], b.T2[idx] = nT1 / nrm, nT2 / nrm
        b.mu[idx] = mu + dt * k2[4]
        b.m[idx], b.m_alt[idx] = k2[5], k2[6]
        b.alive[idx[~ok]] = False
        newly = b.alive & ~b.collapsed & (b.mu <= b.mu_stop)
        if newly.any():
            b.collapsed |= newly
            if b.collapse_time is None:
                b.collapse_time = d_next.state.t
    b.mu_min_series.append((d_next.state.t, b.mu_min()))
    b._steps += 1
    if b.record_every and b._steps % b.record_every == 0:
        b.record(d_next.state.t)
    return b


def predicted_mu_min(t, ds_phi1_max: float, amplitude: float = 1.0):
    return 1.0 - 1.5 * np.asarray(t) * amplitude * ds_phi1_max


@dataclass
class BlowupFit:
    T_grad: float
    T_mu: float
    resid_grad: float
    resid_mu: float
    grad_window: tuple
    mu_window: tuple
    n_grad: int
    n_mu: int

    def to_dict(self):
        return {"T_grad": self.T_grad, "T_mu": self.T_mu, "resid_grad": self.resid_grad,
                "resid_mu": self.resid_mu, "grad_window": list(self.grad_window),
                "mu_window": list(self.mu_window), "n_grad": self.n_grad, "n_mu": self.n_mu}


def _linfit(t, y):
    A = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return coef[0], coef[1], resid


def grad_fit_mask(series: dict, ratio_lo: float = 2.0, ratio_hi: float = 10.0, column="max_grad_v1"):
    g = np.asarray(series[column], dtype=float)
    t = np.asarray(series["t"], dtype=float)
    g0 = g[0]
    r = g / g0
    # only the monotone steepening run up to the first crossing of ratio_hi
    top = np.nonzero(r >= ratio_hi)[0]
    end = top[0] + 1 if top.size else t.size
    m = np.zeros(t.size, dtype=bool)
    m[:end] = (r[:end] >= ratio_lo) & np.isfinite(r[:end])
    return m


def estimate_blowup_time(series: dict, ratio_lo: float = 2.0, ratio_hi: float = 10.0,
                         mu_window=(0.1, 0.5)) -> BlowupFit:
    """Intercepts of the linear fits of 1/max|d1 v1| and of mu_min against t."""
    g = np.asarray(series["max_grad_v1"], dtype=float)
    t = np.asarray(series["t"], dtype=float)
    if g.size == 0 or not g[0] > 0:
        raise InsufficientSteepening("no initial gradient")
    if np.count_nonzero(g > 5.0 * g[0]) < 10:
        raise InsufficientSteepening("fewer than 10 samples beyond 5x the initial gradient")
    m = grad_fit_mask(series, ratio_lo, ratio_hi)
    if m.sum() < 3:
        raise InsufficientSteepening("fit window too short")
    a, b, rg = _linfit(t[m], 1.0 / g[m])
    T_grad = -b / a if a < 0 else math.inf
    mu = np.asarray(series.get("mu_min", np.full(t.size, np.nan)), dtype=float)
    mm = np.isfinite(mu) & (mu >= mu_window[0]) & (mu <= mu_window[1])
    if mm.sum() >= 3:
        c, e, rm = _linfit(t[mm], mu[mm])
        T_mu = -e / c if c < 0 else math.inf
    else:
        T_mu, rm = math.nan, math.nan
    return BlowupFit(float(T_grad), float(T_mu), rg, rm, (float(t[m][0]), float(t[m][-1])),
                     (float(t[mm][0]), float(t[mm][-1])) if mm.any() else (math.nan, math.nan),
                     int(m.sum()), int(mm.sum()))


def trajectory_table(b: RayBundle) -> np.ndarray:
    if not b.trajectory:
        return np.empty((0, 7))
    return np.vstack(b.trajectory)
