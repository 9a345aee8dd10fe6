"""Compactly supported C-infinity shapes built from exp(-1/z).

Each s-shape returns its value and first two derivatives so that consumers
never difference them numerically.  Shapes are plain frozen dataclasses with a
``to_dict``/``shape_from_dict`` round trip used by the JSON config.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline


def _edge(z):
    """E(z) = exp(-1/z) for z > 0, else 0, with E' and E''."""
    z = np.asarray(z, dtype=float)
    pos = z > 0
    zs = np.where(pos, z, 1.0)
    e = np.where(pos, np.exp(-1.0 / zs), 0.0)
    e1 = e / zs ** 2
    e2 = e * (1.0 - 2.0 * zs) / zs ** 4
    return e, e1, e2


def smoothstep(z):
    """C-infinity step: 0 for z <= 0, 1 for z >= 1; returns (value, d/dz, d2/dz2)."""
    z = np.asarray(z, dtype=float)
    a, a1, a2 = _edge(z)
    b, b1, b2 = _edge(1.0 - z)
    b1 = -b1
    D = a + b
    D1 = a1 + b1
    N = a1 * b - a * b1
    N1 = a2 * b - a * b2
    return a / D, N / D ** 2, (N1 * D - 2.0 * N * D1) / D ** 3


def mollifier(z):
    """exp(4 - 1/(z(1-z))) on (0, 1), peak 1 at z = 1/2; returns (value, d/dz, d2/dz2)."""
    z = np.asarray(z, dtype=float)
    inside = (z > 0) & (z < 1)
    zs = np.where(inside, z, 0.5)
    q = 1.0 / (zs * (1.0 - zs))
    q1 = -(1.0 - 2.0 * zs) * q ** 2
    q2 = 2.0 * q ** 2 + 2.0 * (1.0 - 2.0 * zs) ** 2 * q ** 3
    f = np.where(inside, np.exp(4.0 - q), 0.0)
    return f, -q1 * f, (q1 ** 2 - q2) * f


@dataclass(frozen=True)
class Bump:
    """Mollifier rescaled to (lo, hi), peak 1 at the midpoint."""
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("bump needs hi > lo")

    @property
    def support(self):
        return (self.lo, self.hi)

    def eval(self, s):
        w = self.hi - self.lo
        f, f1, f2 = mollifier((np.asarray(s, dtype=float) - self.lo) / w)
        return f, f1 / w, f2 / w ** 2

    def to_dict(self):
        return {"kind": "bump", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Plateau:
    """Flat top equal to 1 on [lo+ramp, hi-ramp], smooth ramps, zero outside (lo, hi)."""
    lo: float
    hi: float
    ramp: float

    def __post_init__(self):
        if not (self.ramp > 0 and self.hi - self.lo >= 2 * self.ramp):
            raise ValueError("plateau needs ramp > 0 and hi - lo >= 2 ramp")

    @property
    def support(self):
        return (self.lo, self.hi)

    def eval(self, s):
        s = np.asarray(s, dtype=float)
        r = self.ramp
        a, a1, a2 = smoothstep((s - self.lo) / r)
        b, b1, b2 = smoothstep((self.hi - s) / r)
        return a * b, (a1 * b - a * b1) / r, (a2 * b - 2.0 * a1 * b1 + a * b2) / r ** 2

    def to_dict(self):
        return {"kind": "plateau", "lo": self.lo, "hi": self.hi, "ramp": self.ramp}


@dataclass(frozen=True)
class Curvature:
    """The shape a with a(0) = a'(0) = 0 and a'' = -g, g = sum of weighted parts.

    g must have zero integral and zero first moment so that a is again
    compactly supported.
    """
    parts: tuple  # of (weight, shape)
    n_fine: int = 8193

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple((float(w), sh) for w, sh in self.parts))
        s = np.linspace(0.0, 1.0, self.n_fine)
        g = self.g(s)
        a1 = -cumulative_simpson(g, x=s, initial=0.0)
        a0 = cumulative_simpson(a1, x=s, initial=0.0)
        scale = max(np.max(np.abs(a0)), 1e-300)
        if abs(a1[-1]) > 1e-9 * scale * 10 or abs(a0[-1]) > 1e-9 * scale:
            raise ValueError("curvature parts must have zero integral and zero first moment")
        object.__setattr__(self, "_a", CubicHermiteSpline(s, a0, a1))
        object.__setattr__(self, "_a1", CubicHermiteSpline(s, a1, -g))

    def g(self, s):
        out = np.zeros_like(np.asarray(s, dtype=float))
        for w, sh in self.parts:
            out = out + w * sh.eval(s)[0]
        return out

    @property
    def support(self):
        return (min(sh.support[0] for _, sh in self.parts), max(sh.support[1] for _, sh in self.parts))

    def eval(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        return self._a(s), self._a1(s), -self.g(s)

    def to_dict(self):
        return {"kind": "curvature", "parts": [[w, sh.to_dict()] for w, sh in self.parts]}


def shape_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "bump":
        return Bump(float(d["lo"]), float(d["hi"]))
    if kind == "plateau":
        return Plateau(float(d["lo"]), float(d["hi"]), float(d["ramp"]))
    if kind == "curvature":
        return Curvature(tuple((float(w), shape_from_dict(sh)) for w, sh in d["parts"]))
    raise ValueError(f"unknown shape kind {kind!r}")


@dataclass(frozen=True)
class ThetaShape:
    """1 + sum_k (a_k cos(2 pi k theta / P) + b_k sin(2 pi k theta / P))."""
    modes: tuple = ()  # of (k, a_k, b_k)

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple((int(k), float(a), float(b)) for k, a, b in self.modes))
        for k, _, _ in self.modes:
            if k < 1:
                raise ValueError("theta modes need k >= 1")

    def eval(self, theta, period=1.0):
        theta = np.asarray(theta, dtype=float)
        out = np.ones_like(theta)
        for k, a, b in self.modes:
            arg = 2.0 * np.pi * k * theta / period
            out = out + a * np.cos(arg) + b * np.sin(arg)
        return out

    def to_dict(self):
        return {"modes": [list(m) for m in self.modes]}


@dataclass(frozen=True)
class Term:
    amplitude: float
    s: object
    theta: ThetaShape = ThetaShape()

    def to_dict(self):
        return {"amplitude": self.amplitude, "s": self.s.to_dict(), "theta": self.theta.to_dict()}


@dataclass(frozen=True)
class Profile:
    """Finite sum of separable terms amplitude * S(s) * Theta(theta)."""
    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def is_zero(self):
        return all(t.amplitude == 0 for t in self.terms)

    def support(self):
        if not self.terms:
            return None
        return (min(t.s.support[0] for t in self.terms), max(t.s.support[1] for t in self.terms))

    def scaled(self, lam: float) -> "Profile":
        return Profile(tuple(Term(lam * t.amplitude, t.s, t.theta) for t in self.terms))

    def eval(self, s, theta, period=1.0):
        """Values and first two s-derivatives on the tensor grid s x theta."""
        s = np.asarray(s, dtype=float)
        theta = np.asarray(theta, dtype=float)
        out = np.zeros((3, s.size, theta.size))
        for t in self.terms:
            th = t.theta.eval(theta, period)
            for k, v in enumerate(t.s.eval(s)):
                out[k] += t.amplitude * np.outer(v, th)
        return out

    def to_dict(self):
        return {"terms": [t.to_dict() for t in self.terms]}


def profile_from_dict(d) -> Profile:
    if d is None or d == "zero":
        return Profile()
    terms = []
    for t in d.get("terms", []):
        th = t.get("theta", {})
        terms.append(Term(float(t.get("amplitude", 1.0)), shape_from_dict(t["s"]),
                          ThetaShape(tuple(tuple(m) for m in th.get("modes", [])))))
    return Profile(tuple(terms))


def compressive_seed() -> Curvature:
    """Default seed shape: a flat compressive core in the middle of the pulse, balanced by
    two flat expansive lobes so the seed has compact support."""
    return Curvature(((1.0, Plateau(0.30, 0.70, 0.08)),
                      (-0.8, Plateau(0.03, 0.29, 0.06)),
                      (-0.8, Plateau(0.71, 0.97, 0.06))))
