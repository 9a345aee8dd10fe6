"""Short-pulse initial data on the strip and its predicted shock time.

The pulse lives in ``1 - delta <= x1 <= 1`` and is described by functions of
``s = (1 - x1)/delta`` and ``theta = x2``.  Given the free profiles
``(f1, f2, phi2)`` the remaining profiles follow from

    d_s Phi = delta f2 - d_s^2 phi2,      Phi(0) = 0
    d_theta phi1 + phi1 = Phi             (theta-periodic)
    d_s phi0 = d_s phi1 + delta f1,       phi0(0) = 0

and the fields are ``rho = a delta phi0``, ``v1 = a delta phi1``,
``v2 = a delta^2 phi2`` with ``a = delta**iota``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline

from .grid import GridSpec
from .profiles import (Bump, Profile, Term, ThetaShape, compressive_seed, profile_from_dict)
from .rswsolver import FluidState


class DegenerateSpec(ValueError):
    """Normalisation requested for data whose d_s phi1 vanishes identically."""


class GridTooCoarse(ValueError):
    """The grid does not resolve the pulse width."""


MIN_CELLS_PER_PULSE = 32


@dataclass(frozen=True)
class PulseSpec:
    delta: float = 0.05
    iota: float = 0.0
    f1: Profile = Profile()
    f2: Profile = Profile()
    phi2: Profile = Profile()
    normalize_target: float | None = None
    period: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta <= 0.2:
            raise ValueError("delta must lie in (0, 0.2]")
        if not -1.0 < self.iota < 1.0:
            raise ValueError("iota must lie in (-1, 1)")
        if self.normalize_target is not None and not self.normalize_target > 0:
            raise ValueError("normalize_target must be positive")
        for name in ("f1", "f2", "phi2"):
            sup = getattr(self, name).support()
            if sup is not None and not (0.0 < sup[0] and sup[1] < 1.0):
                raise ValueError(f"{name} must be supported strictly inside (0, 1), got {sup}")

    @property
    def amplitude(self) -> float:
        return self.delta ** self.iota

    def to_dict(self) -> dict:
        return {"delta": self.delta, "iota": self.iota, "f1": self.f1.to_dict(), "f2": self.f2.to_dict(),
                "phi2": self.phi2.to_dict(), "normalize_target": self.normalize_target,
                "period": self.period}

    @classmethod
    def from_dict(cls, d: dict) -> "PulseSpec":
        return cls(delta=float(d.get("delta", 0.05)), iota=float(d.get("iota", 0.0)),
                   f1=profile_from_dict(d.get("f1")), f2=profile_from_dict(d.get("f2")),
                   phi2=profile_from_dict(d.get("phi2")),
                   normalize_target=d.get("normalize_target"), period=float(d.get("period", 1.0)))


def standard_pulse(delta: float = 0.05, iota: float = 0.0, normalize_target: float | None = 1.0,
                   period: float = 1.0) -> PulseSpec:
    """The default compressive pulse with a cos-modulated seed and a zero-mean f1."""
    seed = Profile((Term(1.0, compressive_seed(), ThetaShape(((1, 0.5, 0.0),))),))
    f1 = Profile((Term(0.5, Bump(0.10, 0.50), ThetaShape(((1, 0.0, 0.5),))),
                  Term(-0.5, Bump(0.50, 0.90), ThetaShape(((1, 0.0, 0.5),)))))
    return PulseSpec(delta=delta, iota=iota, f1=f1, phi2=seed, normalize_target=normalize_target,
                     period=period)


def periodic_resolvent(rhs: np.ndarray, period: float) -> np.ndarray:
    """theta-periodic solution of d_theta f + f = rhs along the last axis.

    Equivalent to the integrating-factor convolution
    f(theta) = (1 - e^{-P})^{-1} int_0^P e^{-sigma} rhs(theta - sigma) d sigma,
    evaluated exactly on the trigonometric interpolant of the samples.
    """
    n = rhs.shape[-1]
    k = np.fft.rfftfreq(n, d=period / n)
    c = np.fft.rfft(rhs, axis=-1) / (1.0 + 2j * np.pi * k)
    return np.fft.irfft(c, n=n, axis=-1)


def spectral_dtheta(f: np.ndarray, period: float) -> np.ndarray:
    n = f.shape[-1]
    k = np.fft.rfftfreq(n, d=period / n)
    c = np.fft.rfft(f, axis=-1) * (2j * np.pi * k)
    if n % 2 == 0:
        c[..., -1] = 0.0
    return np.fft.irfft(c, n=n, axis=-1)


@dataclass
class PulseData:
    s: np.ndarray
    theta: np.ndarray
    phi0: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    Phi: np.ndarray
    ds_phi0: np.ndarray
    ds_phi1: np.ndarray
    ds_phi2: np.ndarray
    ds_phi1_max: float
    delta: float
    iota: float
    period: float
    scale: float = 1.0
    smallness_report: dict = field(default_factory=dict)

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.phi0) or np.any(self.phi1) or np.any(self.phi2))

    def sample(self, s, x2):
        """Profiles phi0, phi1, phi2 at points (s, x2); s is clipped to [0, 1]."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        x2 = np.asarray(x2, dtype=float)
        out = []
        for f, df in ((self.phi0, self.ds_phi0), (self.phi1, self.ds_phi1), (self.phi2, self.ds_phi2)):
            out.append(_FourierHermite(self.s, f, df, self.period).eval(s, x2))
        return out


class _FourierHermite:
    """Cubic Hermite in s of the theta-Fourier coefficients; exact spectral synthesis in theta."""

    def __init__(self, s, f, df, period):
        n = f.shape[1]
        self.n = n
        self.period = period
        c = np.fft.rfft(f, axis=1) / n
        dc = np.fft.rfft(df, axis=1) / n
        self.nk = c.shape[1]
        self.spline = CubicHermiteSpline(s, np.concatenate([c.real, c.imag], axis=1),
                                         np.concatenate([dc.real, dc.imag], axis=1), axis=0)

    def eval(self, s, x2):
        cc = self.spline(s)
        c = cc[:, : self.nk] + 1j * cc[:, self.nk:]
        k = np.arange(self.nk)
        w = np.full(self.nk, 2.0)
        w[0] = 1.0
        if self.n % 2 == 0:
            w[-1] = 1.0
        basis = np.exp(2j * np.pi * np.outer(k, x2) / self.period) * w[:, None]
        return (c @ basis).real


def _resolve_once(spec: PulseSpec, f2: Profile, phi2: Profile, n_s: int, n_theta: int):
    s = np.linspace(0.0, 1.0, n_s)
    theta = np.arange(n_theta) * (spec.period / n_theta)
    d = spec.delta
    F1 = spec.f1.eval(s, theta, spec.period)[0]
    F2 = f2.eval(s, theta, spec.period)[0]
    p2, p2s, p2ss = phi2.eval(s, theta, spec.period)
    ds_Phi = d * F2 - p2ss
    Phi = cumulative_simpson(ds_Phi, x=s, axis=0, initial=0.0)
    phi1 = periodic_resolvent(Phi, spec.period)
    ds_phi1 = periodic_resolvent(ds_Phi, spec.period)
    ds_phi0 = ds_phi1 + d * F1
    phi0 = phi1 + d * cumulative_simpson(F1, x=s, axis=0, initial=0.0)
    return dict(s=s, theta=theta, phi0=phi0, phi1=phi1, phi2=p2, Phi=Phi, ds_phi0=ds_phi0,
                ds_phi1=ds_phi1, ds_phi2=p2s, ds_phi2s=p2ss, F1=F1, F2=F2)


def resolve_pulse(spec: PulseSpec, n_s: int = 1025, n_theta: int = 128) -> PulseData:
    if n_s < 64 or n_theta < 64:
        raise ValueError("n_s and n_theta must be >= 64")
    f2, phi2 = spec.f2, spec.phi2
    r = _resolve_once(spec, f2, phi2, n_s, n_theta)
    scale = 1.0
    if spec.normalize_target is not None:
        m = float(r["ds_phi1"].max())
        if not m > 0:
            raise DegenerateSpec("max d_s phi1 is not positive; cannot normalise")
        scale = spec.normalize_target / m
        f2, phi2 = f2.scaled(scale), phi2.scaled(scale)
        r = _resolve_once(spec, f2, phi2, n_s, n_theta)
    data = PulseData(s=r["s"], theta=r["theta"], phi0=r["phi0"], phi1=r["phi1"], phi2=r["phi2"],
                     Phi=r["Phi"], ds_phi0=r["ds_phi0"], ds_phi1=r["ds_phi1"], ds_phi2=r["ds_phi2"],
                     ds_phi1_max=float(r["ds_phi1"].max()), delta=spec.delta, iota=spec.iota,
                     period=spec.period, scale=scale)
    data.smallness_report = _smallness(spec, r)
    return data


def _smallness(spec: PulseSpec, r: dict) -> dict:
    """Good-direction derivatives L_f = dt + (v1 + eta) d1 + v2 d2 on the initial slice."""
    d, a, P = spec.delta, spec.amplitude, spec.period
    rho = a * d * r["phi0"]
    h = np.exp(rho)
    eta = np.exp(0.5 * rho)
    dth_phi1 = spectral_dtheta(r["phi1"], P)
    dth_phi2 = spectral_dtheta(r["phi2"], P)
    dsth_phi1 = spectral_dtheta(r["ds_phi1"], P)
    omega = -a * d * (r["ds_phi2"] + dth_phi1)
    Lrho = a * (r["ds_phi1"] - eta * r["ds_phi0"] - d * d * dth_phi2)
    Lv1 = a * (-eta * r["ds_phi1"] + d * d * r["phi2"] + h * r["ds_phi0"])
    Lxi = eta / h * a * (r["ds_phi2s"] + dsth_phi1 + (1.0 + omega) * r["ds_phi0"])
    xi_m1 = (1.0 + omega) / h - 1.0
    scale = d ** (1.0 + spec.iota)
    out = {"sup_Lf_rho": float(np.abs(Lrho).max()), "sup_Lf_v1": float(np.abs(Lv1).max()),
           "sup_Lf_xi": float(np.abs(Lxi).max()),
           "sup_sum": float((np.abs(Lrho) + np.abs(Lv1) + np.abs(Lxi)).max()),
           "sup_xi_minus_1": float(np.abs(xi_m1).max()),
           "sup_riemann": float((a * np.abs(r["ds_phi0"] - r["ds_phi1"])).max())}
    out.update({"C_" + k[4:]: v / scale for k, v in list(out.items())})
    out["reference_scale"] = scale
    return out


def predict_blowup(data: PulseData, spec: PulseSpec | None = None) -> float:
    """Zero of 1 - (3/2) t a max d_s phi1; +inf when no compression is present."""
    iota = data.iota if spec is None else spec.iota
    delta = data.delta if spec is None else spec.delta
    k = delta ** iota * data.ds_phi1_max
    if not k > 0:
        return math.inf
    return 2.0 / (3.0 * k)


def shock_expected(data: PulseData) -> bool:
    return bool(data.delta ** data.iota * data.ds_phi1_max >= 1.0 - 1e-9)


def pulse_domain(delta: float, n1: int, n2: int, t_horizon: float = 1.0, comoving: bool = False,
                 length: float = 0.2, period: float = 1.0) -> GridSpec:
    """Default box: fixed covers the pulse plus the distance travelled; comoving is a short box
    that starts just behind the pulse and is dragged along by the solver."""
    lo = 1.0 - delta - (0.15 if comoving else 0.25)
    hi = lo + length if comoving else 1.0 + 1.25 * max(t_horizon, 1.0)
    return GridSpec(n1, n2, lo, hi, period)


def emit_initial_state(data: PulseData, spec: PulseSpec, grid: GridSpec) -> FluidState:
    if abs(grid.x2_period - data.period) > 1e-14:
        raise ValueError("grid x2 period differs from the profile period")
    if spec.delta / grid.dx1 < MIN_CELLS_PER_PULSE:
        raise GridTooCoarse(f"only {spec.delta / grid.dx1:.1f} cells across the pulse; need "
                            f">= {MIN_CELLS_PER_PULSE}")
    if data.is_zero:
        return FluidState.rest(grid)
    s = (1.0 - grid.x1) / spec.delta
    p0, p1, p2 = data.sample(s, grid.x2)
    ahead = (s <= 0.0)[:, None]
    a, d = spec.amplitude, spec.delta
    rho = np.where(ahead, 0.0, a * d * p0)
    v1 = np.where(ahead, 0.0, a * d * p1)
    v2 = np.where(ahead, 0.0, a * d * d * p2)
    return FluidState(0.0, grid, np.exp(rho), v1, v2)


def generation_report(data: PulseData, spec: PulseSpec, state: FluidState | None = None) -> dict:
    rep = {"kind": "pulse", "delta": spec.delta, "iota": spec.iota, "ds_phi1_max": data.ds_phi1_max,
           "normalization_scale": data.scale, "T_pred": predict_blowup(data, spec),
           "shock_expected": shock_expected(data), "smallness": data.smallness_report}
    if state is not None:
        from .diagnostics import emitted_state_report
        rep["emitted"] = emitted_state_report(state, spec.delta)
    return rep
