"""Self-similar Burgers profiles, the cusp-forming initial data built from them,
and a characteristic-method oracle for 1D Burgers.

The stable profile of index n is the odd decreasing solution of

    -(1/2n) U + ((2n+1)/(2n) y + U) U' = 0,

given implicitly by y = -U - U**(2n+1).  Its 2D companion

    W(x1, x2) = <x2>**(1/n) U(<x2>**(-(2n+1)/n) x1),   <x2> = sqrt(1 + x2**2),

solves -(1/2n) W + ((2n+1)/(2n) x1 + W) d1 W + (1/2) x2 d2 W = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import GridSpec, centred_x2, ddx1
from .profiles import Plateau
from .rswsolver import FluidState

MIN_CELLS_SELFSIMILAR = 64


class PastBlowup(ValueError):
    """Requested time is at or past the characteristic crossing time."""


class GridTooCoarse(ValueError):
    pass


def _ipow(x, p: int):
    """x**p for a positive integer p by repeated squaring (much cheaper than libm pow)."""
    out = None
    base = x
    while p:
        if p & 1:
            out = base if out is None else out * base
        p >>= 1
        if p:
            base = base * base
    return out


def solve_profile(y, n: int = 1):
    """Real root U of U + U**(2n+1) + y = 0 (vectorised)."""
    if int(n) != n or n < 1:
        raise ValueError("n must be an integer >= 1")
    y = np.asarray(y, dtype=float)
    p = 2 * n + 1
    # U and U**p share the sign of -y, so |U| <= min(|y|, |y|**(1/p))
    ay = np.abs(y)
    hi = np.minimum(ay, ay ** (1.0 / p))
    lo = -hi
    # bisection on the increasing map U -> U + U**p + y
    for _ in range(8):
        mid = 0.5 * (lo + hi)
        fm = mid + _ipow(mid, p) + y
        lo = np.where(fm < 0, mid, lo)
        hi = np.where(fm < 0, hi, mid)
    u = 0.5 * (lo + hi)
    for _ in range(60):
        u2n = _ipow(u, p - 1)
        f = u + u * u2n + y
        du = f / (1.0 + p * u2n)
        u_new = np.clip(u - du, lo, hi)
        if np.all(np.abs(u_new - u) <= 4e-16 * np.maximum(1.0, np.abs(u_new))):
            u = u_new
            break
        u = u_new
    return u if u.ndim else float(u)


def profile_derivative(U, n: int = 1):
    """U'(y) = -1/(1 + (2n+1) U**(2n)), from differentiating the implicit relation."""
    U = np.asarray(U, dtype=float)
    return -1.0 / (1.0 + (2 * n + 1) * _ipow(U, 2 * n))


def ode_residual(y, n: int = 1):
    U = solve_profile(y, n)
    dU = profile_derivative(U, n)
    return -U / (2 * n) + ((2 * n + 1) / (2 * n) * np.asarray(y) + U) * dU


@dataclass(frozen=True)
class BurgersProfile:
    n: int = 1

    def __call__(self, y):
        return solve_profile(y, self.n)

    def derivative(self, y):
        return profile_derivative(solve_profile(y, self.n), self.n)

    def table(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        U = solve_profile(y, self.n)
        return np.column_stack([y, U, profile_derivative(U, self.n), ode_residual(y, self.n)])


def _bracket(x2):
    return np.sqrt(1.0 + np.asarray(x2, dtype=float) ** 2)


def eval_2d_profile(x1, x2, n: int = 1):
    r = _bracket(x2)
    return r ** (1.0 / n) * solve_profile(r ** (-(2.0 * n + 1.0) / n) * np.asarray(x1, dtype=float), n)


def eval_2d_profile_grad(x1, x2, n: int = 1):
    """(W, d1 W, d2 W) by the chain rule."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    r = _bracket(x2)
    a = 1.0 / n
    b = -(2.0 * n + 1.0) / n
    z = r ** b * x1
    U = solve_profile(z, n)
    dU = profile_derivative(U, n)
    dr = x2 / r
    W = r ** a * U
    d1 = r ** (a + b) * dU
    d2 = a * r ** (a - 1) * dr * U + r ** a * dU * b * r ** (b - 1) * dr * x1
    return W, d1, d2


def profile_2d_residual(x1, x2, n: int = 1):
    W, d1, d2 = eval_2d_profile_grad(x1, x2, n)
    return -W / (2 * n) + ((2 * n + 1) / (2 * n) * np.asarray(x1) + W) * d1 + 0.5 * np.asarray(x2) * d2


def cutoff(x1, delta: float, ramp_fraction: float = 0.25):
    """gamma: equal to 1 on the middle of [1 - delta, 1], vanishing outside it."""
    return Plateau(1.0 - delta, 1.0, ramp_fraction * delta).eval(x1)[0]


@dataclass
class SelfSimilarData:
    delta: float
    n: int
    W0: np.ndarray
    gamma: np.ndarray
    report: dict


def emit_selfsimilar_state(delta: float, grid: GridSpec, n: int = 1,
                           ramp_fraction: float = 0.25) -> tuple[FluidState, SelfSimilarData]:
    """rho = -delta gamma(x1) W((1 - delta/2 - x1)/delta, x2); v1 = rho, v2 = 0."""
    if not 0 < delta <= 0.2:
        raise ValueError("delta must lie in (0, 0.2]")
    if delta / grid.dx1 < MIN_CELLS_SELFSIMILAR:
        raise GridTooCoarse(f"{delta / grid.dx1:.1f} cells across delta; need >= {MIN_CELLS_SELFSIMILAR}")
    X1, X2 = grid.mesh()
    y = (1.0 - 0.5 * delta - X1) / delta
    W0 = eval_2d_profile(y, centred_x2(X2, grid.x2_period), n)
    gam = cutoff(X1, delta, ramp_fraction)
    rho = -delta * gam * W0
    state = FluidState(0.0, grid, np.exp(rho), rho.copy(), np.zeros(grid.shape))
    d1rho = ddx1(rho, grid)
    i, j = np.unravel_index(np.argmin(d1rho), d1rho.shape)
    rep = {"kind": "selfsimilar", "delta": delta, "n": n, "min_d1_rho": float(d1rho.min()),
           "argmin_x1": float(grid.x1[i]), "argmin_x2": float(grid.x2[j]),
           "centre_x1": 1.0 - 0.5 * delta,
           "T_pred": 2.0 / (3.0 * max(-float(d1rho.min()), 1e-300))}
    return state, SelfSimilarData(delta, n, W0, gam, rep)


def burgers1d_oracle(u0: Callable, t: float, x, du0: Callable | None = None,
                     window: tuple[float, float] | None = None, n_probe: int = 20001):
    """Solution of u_t + u u_x = 0 at time t by inverting x = x0 + t u0(x0).

    Returns ``(u(x, t), T_exact)`` with ``T_exact = -1/min u0'`` (min taken
    on ``window`` or on the span of ``x``).
    """
    x = np.asarray(x, dtype=float)
    lo, hi = window if window is not None else (float(x.min()), float(x.max()))
    probe = np.linspace(lo, hi, n_probe)
    if du0 is not None:
        slope = float(np.min(du0(probe)))
    else:
        slope = float(np.min(np.diff(u0(probe)) / np.diff(probe)))
    T = math.inf if slope >= 0 else -1.0 / slope
    if t >= T:
        raise PastBlowup(f"t={t} >= T*={T}")
    if t == 0:
        return u0(x), T
    umax = float(np.max(u0(probe)))
    umin = float(np.min(u0(probe)))
    a = x - t * umax - 1e-12
    b = x - t * umin + 1e-12
    # the range of u0 was sampled on the window only; widen until x0 is bracketed
    for _ in range(64):
        fa = a + t * u0(a) - x
        fb = b + t * u0(b) - x
        if np.all(fa <= 0) and np.all(fb >= 0):
            break
        w = b - a
        a = np.where(fa > 0, a - w, a)
        b = np.where(fb < 0, b + w, b)
    if du0 is None:
        for _ in range(200):
            m = 0.5 * (a + b)
            f = m + t * u0(m) - x
            a = np.where(f < 0, m, a)
            b = np.where(f < 0, b, m)
            if np.max(b - a) <= 1e-13:
                break
        x0 = 0.5 * (a + b)
        return u0(x0), T
    # x0 -> x0 + t u0(x0) is increasing for t < T: Newton, kept inside the bracket
    x0 = 0.5 * (a + b)
    for _ in range(100):
        u = u0(x0)
        f = x0 + t * u - x
        a = np.where(f < 0, x0, a)
        b = np.where(f < 0, b, x0)
        step = x0 - f / (1.0 + t * du0(x0))
        bad = ~((step >= a) & (step <= b))
        nxt = np.where(bad, 0.5 * (a + b), step)
        if np.max(np.abs(nxt - x0)) <= 4e-16 * max(1.0, float(np.max(np.abs(x0)))):
            x0 = nxt
            break
        x0 = nxt
    return u0(x0), T
