"""Compiled stencil kernels.

Every kernel works on a block of x1 rows ``[i0, i1)`` and writes only into
those rows of its output arrays, so blocks can be run on separate threads
without changing a single bit of the result.  x1 neighbours beyond the ends
are clamped to the edge row (copy ghosts); x2 wraps.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

_C8 = 8.0 / 12.0
_C1 = 1.0 / 12.0


# velocities below this are flushed to zero: the decaying tail ahead of a front
# otherwise fills with subnormal numbers, whose arithmetic is very slow
TINY = 1e-100


@njit(nogil=True, cache=True, inline="always")
def _ftz(x):
    return 0.0 if abs(x) < TINY else x


@njit(nogil=True, cache=True, inline="always", fastmath=True)
def _c4_cell(rows, j, jm2, jm1, jp1, jp2, r1, r2, rot, k1, k2):
    # rows: (h, u, w) at x1 offsets 0, -1, +1, -2, +2
    hc, ha, hb, hA, hB, uc, ua, ub, uA, uB, wc, wa, wb, wA, wB = rows
    h0, u0, w0 = hc[j], uc[j], wc[j]
    hl, hr, hL, hR = hc[jm1], hc[jp1], hc[jm2], hc[jp2]
    ul, ur, uL, uR = uc[jm1], uc[jp1], uc[jm2], uc[jp2]
    wl, wr, wL, wR = wc[jm1], wc[jp1], wc[jm2], wc[jp2]

    fx = (_C8 * (hb[j] * ub[j] - ha[j] * ua[j]) - _C1 * (hB[j] * uB[j] - hA[j] * uA[j])) * r1
    fy = (_C8 * (hr * wr - hl * wl) - _C1 * (hR * wR - hL * wL)) * r2
    h1 = (_C8 * (hb[j] - ha[j]) - _C1 * (hB[j] - hA[j])) * r1
    h2 = (_C8 * (hr - hl) - _C1 * (hR - hL)) * r2
    u1 = (_C8 * (ub[j] - ua[j]) - _C1 * (uB[j] - uA[j])) * r1
    u2 = (_C8 * (ur - ul) - _C1 * (uR - uL)) * r2
    w1 = (_C8 * (wb[j] - wa[j]) - _C1 * (wB[j] - wA[j])) * r1
    w2 = (_C8 * (wr - wl) - _C1 * (wR - wL)) * r2

    dh = -(fx + fy) - (k1 * (hA[j] - 4.0 * ha[j] + 6.0 * h0 - 4.0 * hb[j] + hB[j])
                       + k2 * (hL - 4.0 * hl + 6.0 * h0 - 4.0 * hr + hR))
    du = (-(u0 * u1 + w0 * u2) + rot * w0 - h1
          - (k1 * (uA[j] - 4.0 * ua[j] + 6.0 * u0 - 4.0 * ub[j] + uB[j])
             + k2 * (uL - 4.0 * ul + 6.0 * u0 - 4.0 * ur + uR)))
    dw = (-(u0 * w1 + w0 * w2) - rot * u0 - h2
          - (k1 * (wA[j] - 4.0 * wa[j] + 6.0 * w0 - 4.0 * wb[j] + wB[j])
             + k2 * (wL - 4.0 * wl + 6.0 * w0 - 4.0 * wr + wR)))
    return dh, du, dw


@njit(nogil=True, cache=True, fastmath=True)
def central4_stage(h, u, w, h0, u0, w0, a, b, c, dx1, dx2, rot, nu1, nu2, out, i0, i1):
    """out = a*y0 + b*y + c*L(y) with L the 4th-order centred tendency of y = (h, u, w).

    Mass is in flux form, momentum in advective form, and each direction carries
    hyperviscosity -nu_i d_i^4.  a = b = 0, c = 1 gives the tendency itself.
    """
    n1, n2 = h.shape
    r1 = 1.0 / dx1
    r2 = 1.0 / dx2
    k1 = nu1 / dx1 ** 4
    k2 = nu2 / dx2 ** 4
    th = np.empty(n2)
    tu = np.empty(n2)
    tw = np.empty(n2)
    for i in range(i0, i1):
        im1 = max(i - 1, 0)
        im2 = max(i - 2, 0)
        ip1 = min(i + 1, n1 - 1)
        ip2 = min(i + 2, n1 - 1)
        rows = (h[i], h[im1], h[ip1], h[im2], h[ip2], u[i], u[im1], u[ip1], u[im2], u[ip2],
                w[i], w[im1], w[ip1], w[im2], w[ip2])
        # the interior loop has plain offsets so it vectorises; the 4 wrapped columns follow
        for j in range(2, n2 - 2):
            th[j], tu[j], tw[j] = _c4_cell(rows, j, j - 2, j - 1, j + 1, j + 2, r1, r2, rot, k1, k2)
        for j in (0, 1, n2 - 2, n2 - 1):
            th[j], tu[j], tw[j] = _c4_cell(rows, j, (j - 2) % n2, (j - 1) % n2, (j + 1) % n2,
                                           (j + 2) % n2, r1, r2, rot, k1, k2)
        for j in range(n2):
            out[0, i, j] = a * h0[i, j] + b * h[i, j] + c * th[j]
            out[1, i, j] = _ftz(a * u0[i, j] + b * u[i, j] + c * tu[j])
            out[2, i, j] = _ftz(a * w0[i, j] + b * w[i, j] + c * tw[j])


@njit(nogil=True, cache=True)
def _llf_flux(hL, mL, nL, hR, mR, nR):
    # flux through a face normal to the first momentum component
    uL = mL / hL
    uR = mR / hR
    a = max(abs(uL) + np.sqrt(hL), abs(uR) + np.sqrt(hR))
    f0 = 0.5 * (mL + mR) - 0.5 * a * (hR - hL)
    f1 = 0.5 * (mL * uL + 0.5 * hL * hL + mR * uR + 0.5 * hR * hR) - 0.5 * a * (mR - mL)
    f2 = 0.5 * (nL * uL + nR * uR) - 0.5 * a * (nR - nL)
    return f0, f1, f2


@njit(nogil=True, cache=True)
def rusanov_stage(h, m1, m2, h0, p0, q0, a, b, c, dx1, dx2, rot, out, i0, i1):
    """out = a*y0 + b*y + c*L(y) for first-order local Lax-Friedrichs on (h, h v1, h v2)
    with the Coriolis source."""
    n1, n2 = h.shape
    r1 = 1.0 / dx1
    r2 = 1.0 / dx2
    for i in range(i0, i1):
        im1 = max(i - 1, 0)
        ip1 = min(i + 1, n1 - 1)
        for j in range(n2):
            jm1 = j - 1 if j >= 1 else j - 1 + n2
            jp1 = j + 1 if j + 1 < n2 else j + 1 - n2
            a0, a1, a2 = _llf_flux(h[im1, j], m1[im1, j], m2[im1, j], h[i, j], m1[i, j], m2[i, j])
            b0, b1, b2 = _llf_flux(h[i, j], m1[i, j], m2[i, j], h[ip1, j], m1[ip1, j], m2[ip1, j])
            # x2 faces: swap momentum roles
            c0, c2, c1 = _llf_flux(h[i, jm1], m2[i, jm1], m1[i, jm1], h[i, j], m2[i, j], m1[i, j])
            d0, d2, d1 = _llf_flux(h[i, j], m2[i, j], m1[i, j], h[i, jp1], m2[i, jp1], m1[i, jp1])
            dh = -(b0 - a0) * r1 - (d0 - c0) * r2
            dm1 = -(b1 - a1) * r1 - (d1 - c1) * r2 + rot * m2[i, j]
            dm2 = -(b2 - a2) * r1 - (d2 - c2) * r2 - rot * m1[i, j]
            out[0, i, j] = a * h0[i, j] + b * h[i, j] + c * dh
            out[1, i, j] = _ftz(a * p0[i, j] + b * m1[i, j] + c * dm1)
            out[2, i, j] = _ftz(a * q0[i, j] + b * m2[i, j] + c * dm2)


@njit(nogil=True, cache=True)
def _d1_row(f, i, j, n1, r1):
    if 2 <= i < n1 - 2:
        return (_C8 * (f[i + 1, j] - f[i - 1, j]) - _C1 * (f[i + 2, j] - f[i - 2, j])) * r1
    if i == 0:
        return (-25.0 * f[0, j] + 48.0 * f[1, j] - 36.0 * f[2, j] + 16.0 * f[3, j] - 3.0 * f[4, j]) * _C1 * r1
    if i == 1:
        return (-3.0 * f[0, j] - 10.0 * f[1, j] + 18.0 * f[2, j] - 6.0 * f[3, j] + f[4, j]) * _C1 * r1
    k = n1 - 1
    if i == k:
        return (25.0 * f[k, j] - 48.0 * f[k - 1, j] + 36.0 * f[k - 2, j] - 16.0 * f[k - 3, j] + 3.0 * f[k - 4, j]) * _C1 * r1
    return (3.0 * f[k, j] + 10.0 * f[k - 1, j] - 18.0 * f[k - 2, j] + 6.0 * f[k - 3, j] - f[k - 4, j]) * _C1 * r1


@njit(nogil=True, cache=True)
def gradients(h, u, w, dx1, dx2, out, i0, i1):
    """out[0..5] = d1h, d2h, d1u, d2u, d1w, d2w (same stencils as grid.ddx1/ddx2)."""
    n1, n2 = h.shape
    r1 = 1.0 / dx1
    r2 = 1.0 / dx2
    for i in range(i0, i1):
        interior = 2 <= i < n1 - 2
        for j in range(n2):
            jm1 = j - 1 if j >= 1 else j - 1 + n2
            jm2 = j - 2 if j >= 2 else j - 2 + n2
            jp1 = j + 1 if j + 1 < n2 else j + 1 - n2
            jp2 = j + 2 if j + 2 < n2 else j + 2 - n2
            out[1, i, j] = (_C8 * (h[i, jp1] - h[i, jm1]) - _C1 * (h[i, jp2] - h[i, jm2])) * r2
            out[3, i, j] = (_C8 * (u[i, jp1] - u[i, jm1]) - _C1 * (u[i, jp2] - u[i, jm2])) * r2
            out[5, i, j] = (_C8 * (w[i, jp1] - w[i, jm1]) - _C1 * (w[i, jp2] - w[i, jm2])) * r2
        if interior:
            for j in range(n2):
                out[0, i, j] = (_C8 * (h[i + 1, j] - h[i - 1, j]) - _C1 * (h[i + 2, j] - h[i - 2, j])) * r1
                out[2, i, j] = (_C8 * (u[i + 1, j] - u[i - 1, j]) - _C1 * (u[i + 2, j] - u[i - 2, j])) * r1
                out[4, i, j] = (_C8 * (w[i + 1, j] - w[i - 1, j]) - _C1 * (w[i + 2, j] - w[i - 2, j])) * r1
        else:
            for j in range(n2):
                out[0, i, j] = _d1_row(h, i, j, n1, r1)
                out[2, i, j] = _d1_row(u, i, j, n1, r1)
                out[4, i, j] = _d1_row(w, i, j, n1, r1)


@njit(nogil=True, cache=True)
def wave_speed_rows(h, u, w, out, i0, i1):
    """Per-row maxima of |v| + sqrt(h); the caller reduces rows in fixed order."""
    n2 = h.shape[1]
    for i in range(i0, i1):
        m = 0.0
        for j in range(n2):
            s = np.sqrt(u[i, j] * u[i, j] + w[i, j] * w[i, j]) + np.sqrt(h[i, j])
            if s > m:
                m = s
        out[i] = m


def row_blocks(n1: int, threads: int) -> list[tuple[int, int]]:
    threads = max(1, min(int(threads), n1))
    edges = np.linspace(0, n1, threads + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


class RowExecutor:
    """Runs a row kernel over fixed row blocks, optionally on a thread pool."""

    def __init__(self, threads: int = 1):
        self.threads = max(1, int(threads))
        self._pool = ThreadPoolExecutor(self.threads) if self.threads > 1 else None

    def __call__(self, kernel, n1, *args):
        blocks = row_blocks(n1, self.threads)
        if self._pool is None or len(blocks) == 1:
            for a, b in blocks:
                kernel(*args, a, b)
            return
        futures = [self._pool.submit(kernel, *args, a, b) for a, b in blocks]
        for fut in futures:
            fut.result()

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None



@njit(nogil=True, cache=True)
def monitor_rows(h, u, w, grad, stats, zeta, xi, i0, i1):
    """Row maxima of |d1 v1|, |d1 h|, |L_f rho|, |L_f v1|, |eta (d1 rho - d1 v1)|, plus zeta and xi."""
    n2 = h.shape[1]
    for i in range(i0, i1):
        m0 = 0.0
        m1 = 0.0
        m2 = 0.0
        m3 = 0.0
        m4 = 0.0
        for j in range(n2):
            hc = h[i, j]
            eta = np.sqrt(hc)
            d1h = grad[0, i, j]
            d1u = grad[2, i, j]
            om = grad[4, i, j] - grad[3, i, j]
            zeta[i, j] = om / hc
            xi[i, j] = (om + 1.0) / hc
            lr = abs(eta * d1h / hc - (d1u + grad[5, i, j]))
            lv = abs(eta * d1u + w[i, j] - d1h)
            rd = abs(eta * (d1h / hc - d1u))
            m0 = max(m0, abs(d1u))
            m1 = max(m1, abs(d1h))
            m2 = max(m2, lr)
            m3 = max(m3, lv)
            m4 = max(m4, rd)
        stats[0, i] = m0
        stats[1, i] = m1
        stats[2, i] = m2
        stats[3, i] = m3
        stats[4, i] = m4


@njit(nogil=True, cache=True)
def d1_rowmax(f, dx1, out, i0, i1):
    """Row maxima of |d1 f| with the grid.ddx1 stencils."""
    n1, n2 = f.shape
    r1 = 1.0 / dx1
    for i in range(i0, i1):
        m = 0.0
        for j in range(n2):
            m = max(m, abs(_d1_row(f, i, j, n1, r1)))
        out[i] = m


@njit(nogil=True, cache=True)
def trailing_front(h, u, w, start, tol):
    """Largest row >= start differing from the last row by more than tol, else -1."""
    n1, n2 = h.shape
    k = n1 - 1
    for i in range(n1 - 1, start - 1, -1):
        for j in range(n2):
            d = abs(h[i, j] - h[k, j]) + abs(u[i, j] - u[k, j]) + abs(w[i, j] - w[k, j])
            if d > tol:
                return i
    return -1


@njit(nogil=True, cache=True)
def bilinear_points(fields, x1_min, x1_max, dx1, dx2, period, x1, x2, out, inside):
    """Bilinear samples of each field in the tuple at the points (x1, x2); NaN outside [x1_min, x1_max]."""
    n1, n2 = fields[0].shape
    nf = len(fields)
    for p in range(x1.size):
        a = x1[p]
        y = x2[p]
        ok = a >= x1_min and a <= x1_max and np.isfinite(y)
        inside[p] = ok
        if not ok:
            for k in range(nf):
                out[k, p] = np.nan
            continue
        a = min(max((a - x1_min) / dx1 - 0.5, 0.0), n1 - 1.0)
        i0 = min(int(np.floor(a)), n1 - 2)
        wa = a - i0
        b = (y % period) / dx2 - 0.5
        jf = np.floor(b)
        wb = b - jf
        j0 = int(jf) % n2
        j1 = (j0 + 1) % n2
        for k in range(nf):
            f = fields[k]
            out[k, p] = ((1 - wa) * ((1 - wb) * f[i0, j0] + wb * f[i0, j1])
                         + wa * ((1 - wb) * f[i0 + 1, j0] + wb * f[i0 + 1, j1]))


@njit(nogil=True, cache=True)
def rest_tail_start(h, u, w):
    """First row of the trailing block that is exactly a uniform rest state (v = 0, h constant
    along x2, every row equal to the last); n1 if the last row is not such a state."""
    n1, n2 = h.shape
    k = n1 - 1
    for j in range(n2):
        if u[k, j] != 0.0 or w[k, j] != 0.0 or h[k, j] != h[k, 0]:
            return n1
    for i in range(n1 - 1, -1, -1):
        for j in range(n2):
            if h[i, j] != h[k, 0] or u[i, j] != 0.0 or w[i, j] != 0.0:
                return i + 1
    return 0
