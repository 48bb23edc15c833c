"""Exact Riemann solver for the ideal-gas Euler equations.

Star-region pressure from Newton iteration on the standard two-sided
pressure function (shock branch via Rankine-Hugoniot, rarefaction branch via
the isentrope); the sampled solution is self-similar in xi = x/t. Tangential
velocities jump passively at the contact.
"""

from __future__ import annotations

import numpy as np

__all__ = ["RiemannError", "EulerRP", "solve_euler_rp"]


class RiemannError(ValueError):
    """Vacuum-generating data or a failed pressure iteration."""


def _fk(p, rho, pk, c, g):
    """One-sided pressure function f_K and its derivative."""
    if p > pk:
        A = 2.0 / ((g + 1.0) * rho)
        B = (g - 1.0) / (g + 1.0) * pk
        q = np.sqrt(A / (p + B))
        f = (p - pk) * q
        df = q * (1.0 - 0.5 * (p - pk) / (p + B))
    else:
        pr = p / pk
        f = 2.0 * c / (g - 1.0) * (pr ** ((g - 1.0) / (2.0 * g)) - 1.0)
        df = pr ** (-(g + 1.0) / (2.0 * g)) / (rho * c)
    return f, df


class EulerRP:
    """Solved Riemann problem; sample(xi) returns primitive states."""

    def __init__(self, VL, VR, gamma, pstar, ustar):
        self.VL = np.asarray(VL, dtype=np.float64)
        self.VR = np.asarray(VR, dtype=np.float64)
        self.gamma = float(gamma)
        self.pstar = float(pstar)
        self.ustar = float(ustar)
        g = self.gamma
        rl, ul, pl = self.VL[0], self.VL[1], self.VL[4]
        rr, ur, pr = self.VR[0], self.VR[1], self.VR[4]
        self.cl = np.sqrt(g * pl / rl)
        self.cr = np.sqrt(g * pr / rr)
        gp = (g + 1.0) / (2.0 * g)
        gm = (g - 1.0) / (g + 1.0)
        if pstar > pl:  # left shock
            self.rho_sl = rl * ((pstar / pl + gm) / (gm * pstar / pl + 1.0))
            self.s_left = (ul - self.cl * np.sqrt(gp * pstar / pl + (1.0 - gp)),)
        else:  # left fan
            self.rho_sl = rl * (pstar / pl) ** (1.0 / g)
            csl = self.cl * (pstar / pl) ** ((g - 1.0) / (2.0 * g))
            self.s_left = (ul - self.cl, ustar - csl)
        if pstar > pr:  # right shock
            self.rho_sr = rr * ((pstar / pr + gm) / (gm * pstar / pr + 1.0))
            self.s_right = (ur + self.cr * np.sqrt(gp * pstar / pr + (1.0 - gp)),)
        else:  # right fan
            self.rho_sr = rr * (pstar / pr) ** (1.0 / g)
            csr = self.cr * (pstar / pr) ** ((g - 1.0) / (2.0 * g))
            self.s_right = (ustar + csr, ur + self.cr)
        self.pattern = ("R" if pstar <= pl else "S") + \
                       ("R" if pstar <= pr else "S")

    def wave_speeds(self):
        """(left wave speeds, contact, right wave speeds); fans give 2."""
        return self.s_left, self.ustar, self.s_right

    def sample(self, xi):
        """Primitive (..., 5) state at similarity coordinates xi = x/t."""
        xi = np.asarray(xi, dtype=np.float64)
        g = self.gamma
        rl, ul, pl = self.VL[0], self.VL[1], self.VL[4]
        rr, ur, pr = self.VR[0], self.VR[1], self.VR[4]
        out = np.zeros(xi.shape + (5,))
        rho = np.empty_like(xi)
        u = np.empty_like(xi)
        p = np.empty_like(xi)
        left_of_contact = xi < self.ustar
        # left side
        if self.pstar > pl:
            s = self.s_left[0]
            inl = xi < s
            rho = np.where(inl, rl, self.rho_sl)
            u = np.where(inl, ul, self.ustar)
            p = np.where(inl, pl, self.pstar)
        else:
            sh, st = self.s_left
            cm = (2.0 / (g + 1.0)) * (self.cl + 0.5 * (g - 1.0) * (ul - xi))
            rf = rl * (cm / self.cl) ** (2.0 / (g - 1.0))
            uf = (2.0 / (g + 1.0)) * (self.cl + 0.5 * (g - 1.0) * ul + xi)
            pf = pl * (cm / self.cl) ** (2.0 * g / (g - 1.0))
            rho = np.where(xi < sh, rl, np.where(xi < st, rf, self.rho_sl))
            u = np.where(xi < sh, ul, np.where(xi < st, uf, self.ustar))
            p = np.where(xi < sh, pl, np.where(xi < st, pf, self.pstar))
        # right side overrides where xi >= contact
        if self.pstar > pr:
            s = self.s_right[0]
            rho_r = np.where(xi > s, rr, self.rho_sr)
            u_r = np.where(xi > s, ur, self.ustar)
            p_r = np.where(xi > s, pr, self.pstar)
        else:
            st, sh = self.s_right
            cm = (2.0 / (g + 1.0)) * (self.cr - 0.5 * (g - 1.0) * (ur - xi))
            rf = rr * (cm / self.cr) ** (2.0 / (g - 1.0))
            uf = (2.0 / (g + 1.0)) * (-self.cr + 0.5 * (g - 1.0) * ur + xi)
            pf = pr * (cm / self.cr) ** (2.0 * g / (g - 1.0))
            rho_r = np.where(xi > sh, rr, np.where(xi > st, rf, self.rho_sr))
            u_r = np.where(xi > sh, ur, np.where(xi > st, uf, self.ustar))
            p_r = np.where(xi > sh, pr, np.where(xi > st, pf, self.pstar))
        rho = np.where(left_of_contact, rho, rho_r)
        u = np.where(left_of_contact, u, u_r)
        p = np.where(left_of_contact, p, p_r)
        out[..., 0] = rho
        out[..., 1] = u
        out[..., 2] = np.where(left_of_contact, self.VL[2], self.VR[2])
        out[..., 3] = np.where(left_of_contact, self.VL[3], self.VR[3])
        out[..., 4] = p
        return out

    def profile(self, x, t, x0=0.0):
        """Sampled primitives on physical coordinates at time t > 0."""
        if t <= 0.0:
            x = np.asarray(x, dtype=np.float64)
            out = np.where((x < x0)[..., None], self.VL, self.VR)
            return out
        return self.sample((np.asarray(x, dtype=np.float64) - x0) / t)


def solve_euler_rp(VL, VR, gamma=1.4, tol=1.0e-12, maxit=200):
    """Solve the Riemann problem for primitive states VL, VR."""
    VL = np.asarray(VL, dtype=np.float64)
    VR = np.asarray(VR, dtype=np.float64)
    g = float(gamma)
    rl, ul, pl = VL[0], VL[1], VL[4]
    rr, ur, pr = VR[0], VR[1], VR[4]
    if min(rl, rr, pl, pr) <= 0.0:
        raise RiemannError("nonpositive density or pressure in input states")
    cl = np.sqrt(g * pl / rl)
    cr = np.sqrt(g * pr / rr)
    if 2.0 * (cl + cr) / (g - 1.0) <= ur - ul:
        raise RiemannError("initial states generate vacuum")
    # two-rarefaction guess, clipped away from zero
    z = (g - 1.0) / (2.0 * g)
    p = ((cl + cr - 0.5 * (g - 1.0) * (ur - ul))
         / (cl / pl ** z + cr / pr ** z)) ** (1.0 / z)
    p = max(p, 1.0e-14 * min(pl, pr))
    for _ in range(maxit):
        fl, dfl = _fk(p, rl, pl, cl, g)
        fr, dfr = _fk(p, rr, pr, cr, g)
        dp = (fl + fr + ur - ul) / (dfl + dfr)
        pn = p - dp
        if pn <= 0.0:
            pn = 0.5 * p
        if abs(pn - p) < tol * 0.5 * (pn + p):
            p = pn
            break
        p = pn
    else:
        raise RiemannError(f"pressure iteration stalled at p = {p}")
    fl, _ = _fk(p, rl, pl, cl, g)
    fr, _ = _fk(p, rr, pr, cr, g)
    ustar = 0.5 * (ul + ur) + 0.5 * (fr - fl)
    return EulerRP(VL, VR, g, p, ustar)
