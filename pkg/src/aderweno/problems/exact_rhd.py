"""Exact Riemann solver for special-relativistic hydrodynamics.

Ideal-gas EOS, zero tangential velocities. The star pressure is the root of
the velocity-matching function: behind a shock the post-state follows from
the Taub adiabat and the relativistic jump conditions; behind a rarefaction
it follows the isentrope and the relativistic Riemann invariant. Sampling is
self-similar in xi = x/t; fan interiors are resolved by a per-point pressure
root-solve, so every returned point satisfies the wave relations exactly.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .exact_euler import RiemannError

__all__ = ["RHDRP", "solve_rhd_rp"]


def _hstate(rho, p, g):
    return 1.0 + g / (g - 1.0) * p / rho


def _cs(rho, p, h, g):
    return np.sqrt(g * p / (rho * h))


class _Side:
    """Precomputed quantities of one initial state."""

    def __init__(self, V, g):
        self.rho, self.v, self.p = float(V[0]), float(V[1]), float(V[4])
        if self.rho <= 0.0 or self.p <= 0.0:
            raise RiemannError("nonpositive density or pressure")
        self.h = _hstate(self.rho, self.p, g)
        self.c = _cs(self.rho, self.p, self.h, g)
        self.W = 1.0 / np.sqrt(1.0 - self.v ** 2)
        self.K = self.p / self.rho ** g  # isentrope constant


def _shock_state(a: _Side, p, g, s):
    """(v*, rho*, shock speed) behind a shock facing direction s = +-1.

    Post enthalpy from the Taub adiabat (quadratic for the ideal EOS), then
    the shock speed from the invariant mass flux j and the post velocity
    from W*(Vs - v*) = j / (rho* Ws).
    """
    dp = a.p - p
    aa = 1.0 + (g - 1.0) * dp / (g * p)
    bb = -(g - 1.0) * dp / (g * p)
    cc = a.h * dp / a.rho - a.h ** 2
    disc = bb * bb - 4.0 * aa * cc
    h = (-bb + np.sqrt(disc)) / (2.0 * aa)
    rho = g * p / ((g - 1.0) * (h - 1.0))
    j2 = (p - a.p) / (a.h / a.rho - h / rho)
    j = np.sqrt(j2)
    rw2 = (a.rho * a.W) ** 2
    Vs = (rw2 * a.v + s * j2 * np.sqrt(1.0 + rw2 * (1.0 - a.v ** 2) / j2)) \
        / (rw2 + j2)
    Ws = 1.0 / np.sqrt(1.0 - Vs * Vs)
    k = j / (rho * Ws)
    v = (Vs - s * k * np.sqrt(1.0 - Vs * Vs + k * k)) / (1.0 + k * k)
    return v, rho, Vs


def _fan_state(a: _Side, p, g, s):
    """(v*, rho*, c*) behind a rarefaction facing direction s = +-1.

    s = +1 for the left wave, -1 for the right wave (the invariant signs).
    """
    rho = (p / a.K) ** (1.0 / g)
    h = _hstate(rho, p, g)
    c = _cs(rho, p, h, g)
    gh = np.sqrt(g - 1.0)
    ratio = ((gh + a.c) * (gh - c)) / ((gh - a.c) * (gh + c))
    A = (1.0 + a.v) / (1.0 - a.v) * ratio ** (s * 2.0 / gh)
    v = (A - 1.0) / (A + 1.0)
    return v, rho, c


def _vstar(side: _Side, p, g, left):
    """Flow velocity behind the wave attached to one side."""
    if p > side.p:
        v, _, _ = _shock_state(side, p, g, -1.0 if left else 1.0)
    else:
        v, _, _ = _fan_state(side, p, g, 1.0 if left else -1.0)
    return v


class RHDRP:
    """Solved relativistic Riemann problem (tangential velocities zero)."""

    def __init__(self, VL, VR, gamma, pstar, ustar):
        self.VL = np.asarray(VL, dtype=np.float64)
        self.VR = np.asarray(VR, dtype=np.float64)
        self.gamma = float(gamma)
        self.pstar = float(pstar)
        self.ustar = float(ustar)
        g = self.gamma
        self.L = _Side(self.VL, g)
        self.R = _Side(self.VR, g)
        if pstar > self.L.p:
            _, self.rho_sl, Vs = _shock_state(self.L, pstar, g, -1.0)
            self.s_left = (Vs,)
        else:
            v, rho, c = _fan_state(self.L, pstar, g, 1.0)
            self.rho_sl = rho
            head = (self.L.v - self.L.c) / (1.0 - self.L.v * self.L.c)
            tail = (ustar - c) / (1.0 - ustar * c)
            self.s_left = (head, tail)
        if pstar > self.R.p:
            _, self.rho_sr, Vs = _shock_state(self.R, pstar, g, 1.0)
            self.s_right = (Vs,)
        else:
            v, rho, c = _fan_state(self.R, pstar, g, -1.0)
            self.rho_sr = rho
            tail = (ustar + c) / (1.0 + ustar * c)
            head = (self.R.v + self.R.c) / (1.0 + self.R.v * self.R.c)
            self.s_right = (tail, head)
        self.pattern = ("R" if pstar <= self.L.p else "S") + \
                       ("R" if pstar <= self.R.p else "S")

    def wave_speeds(self):
        return self.s_left, self.ustar, self.s_right

    def _fan_point(self, xi, left):
        """Primitive (rho, v, p) inside a rarefaction fan at xi."""
        side = self.L if left else self.R
        g = self.gamma
        s = 1.0 if left else -1.0

        def speed(p):
            v, _, c = _fan_state(side, p, g, s)
            return (v - s * c) / (1.0 - s * v * c) - xi

        lo, hi = sorted((self.pstar, side.p))
        flo, fhi = speed(lo), speed(hi)
        if flo * fhi > 0.0:  # xi at a fan edge within roundoff
            p = lo if abs(flo) < abs(fhi) else hi
        else:
            p = brentq(speed, lo, hi, xtol=1.0e-15, rtol=8.9e-16)
        v, rho, _ = _fan_state(side, p, g, s)
        return rho, v, p

    def sample(self, xi):
        """Primitive (..., 5) state at similarity coordinates xi = x/t."""
        xi = np.asarray(xi, dtype=np.float64)
        flat = np.atleast_1d(xi).ravel()
        out = np.zeros((flat.size, 5))
        for i, x in enumerate(flat):
            if x < self.ustar:
                if self.pstar > self.L.p:
                    if x < self.s_left[0]:
                        r, v, p = self.L.rho, self.L.v, self.L.p
                    else:
                        r, v, p = self.rho_sl, self.ustar, self.pstar
                else:
                    head, tail = self.s_left
                    if x < head:
                        r, v, p = self.L.rho, self.L.v, self.L.p
                    elif x > tail:
                        r, v, p = self.rho_sl, self.ustar, self.pstar
                    else:
                        r, v, p = self._fan_point(x, True)
            else:
                if self.pstar > self.R.p:
                    if x > self.s_right[0]:
                        r, v, p = self.R.rho, self.R.v, self.R.p
                    else:
                        r, v, p = self.rho_sr, self.ustar, self.pstar
                else:
                    tail, head = self.s_right
                    if x > head:
                        r, v, p = self.R.rho, self.R.v, self.R.p
                    elif x < tail:
                        r, v, p = self.rho_sr, self.ustar, self.pstar
                    else:
                        r, v, p = self._fan_point(x, False)
            out[i, 0], out[i, 1], out[i, 4] = r, v, p
        return out.reshape(xi.shape + (5,)) if xi.shape else out[0]

    def profile(self, x, t, x0=0.0):
        if t <= 0.0:
            x = np.asarray(x, dtype=np.float64)
            return np.where((x < x0)[..., None], self.VL, self.VR)
        return self.sample((np.asarray(x, dtype=np.float64) - x0) / t)


def solve_rhd_rp(VL, VR, gamma=5.0 / 3.0, tol=1.0e-10):
    """Solve the relativistic Riemann problem for primitive states VL, VR."""
    VL = np.asarray(VL, dtype=np.float64)
    VR = np.asarray(VR, dtype=np.float64)
    if np.any(np.abs(VL[2:4]) > 0.0) or np.any(np.abs(VR[2:4]) > 0.0):
        raise RiemannError("tangential velocities are not supported")
    g = float(gamma)
    L = _Side(VL, g)
    R = _Side(VR, g)
    if max(abs(L.v), abs(R.v)) >= 1.0:
        raise RiemannError("superluminal input velocity")

    def match(p):
        return _vstar(L, p, g, True) - _vstar(R, p, g, False)

    pmin = 1.0e-16 * min(L.p, R.p)
    if match(pmin) <= 0.0:
        raise RiemannError("initial states generate vacuum")
    pmax = max(L.p, R.p)
    fmax = match(pmax)
    it = 0
    while fmax > 0.0:
        pmax *= 8.0
        fmax = match(pmax)
        it += 1
        if it > 60:
            raise RiemannError("failed to bracket the star pressure")
    pstar = brentq(match, pmin, pmax, xtol=tol * 1.0e-4, rtol=1.0e-15,
                   maxiter=300)
    if abs(match(pstar)) > tol:
        raise RiemannError(f"velocity matching residual {match(pstar):.2e} "
                           f"exceeds {tol}")
    ustar = 0.5 * (_vstar(L, pstar, g, True) + _vstar(R, pstar, g, False))
    return RHDRP(VL, VR, g, pstar, ustar)
