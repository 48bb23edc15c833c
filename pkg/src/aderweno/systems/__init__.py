"""PDE system descriptors: Euler, special-relativistic hydro (RHD),
relativistic MHD with GLM divergence cleaning, and the Baer-Nunziato
two-phase model.

A :class:`System` bundles the compiled kernels with metadata (variable
names, which primitive slots are velocities, whether sources or genuine
non-conservative products exist) and owns the conversion counter that the
solver asserts against.
"""

from __future__ import annotations

import numpy as np

from . import kernels as K

__all__ = ["System", "make_system", "ConversionCounter", "RecoveryError"]


class RecoveryError(RuntimeError):
    """Conserved-to-primitive inversion failed (unphysical state)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConversionCounter:
    """Tally of cons2prim state conversions.

    ``core`` counts conversions done by the scheme itself (the quantity the
    pipeline invariants are stated in); ``diagnostic`` counts conversions for
    output/error-norm purposes.
    """

    def __init__(self):
        self.core = 0
        self.diagnostic = 0

    def reset(self):
        self.core = 0
        self.diagnostic = 0


_DEFS = {
    "euler": (K.EULER, 5, ["rho", "vx", "vy", "vz", "p"]),
    "rhd": (K.RHD, 5, ["rho", "vx", "vy", "vz", "p"]),
    "rmhd": (K.RMHD, 9, ["rho", "vx", "vy", "vz", "p", "Bx", "By", "Bz", "phi"]),
    "baer-nunziato": (K.BN, 11, ["rho1", "v1x", "v1y", "v1z", "p1",
                                 "rho2", "v2x", "v2y", "v2z", "p2", "phi1"]),
}


class System:
    def __init__(self, name: str, params: np.ndarray):
        sid, nu, names = _DEFS[name]
        self.name = name
        self.sysid = sid
        self.nu = nu
        self.variable_names = names
        self.params = np.ascontiguousarray(params, dtype=np.float64)
        self.counter = ConversionCounter()
        self.relativistic = sid in (K.RHD, K.RMHD)
        self.has_source = sid in (K.RMHD, K.BN)
        self.has_nc = sid == K.BN
        # primitive indices holding velocity vectors (one tuple per vector)
        if sid == K.BN:
            self.velocity_slots = ((1, 2, 3), (6, 7, 8))
        else:
            self.velocity_slots = ((1, 2, 3),)

    # -- conversions ------------------------------------------------------

    def prim2cons(self, V):
        V = np.asarray(V, dtype=np.float64)
        flat = np.ascontiguousarray(V.reshape(-1, self.nu))
        Q = np.empty_like(flat)
        K.prim2cons_batch(self.sysid, self.params, flat, Q)
        return Q.reshape(V.shape)

    def cons2prim(self, Q, count=True, diagnostic=False, strict=True):
        """Recover primitives; raises :class:`RecoveryError` on failure.

        Every state in the batch increments the conversion counter (the
        ``diagnostic`` bucket if flagged).  With ``strict=False`` no error
        is raised; returns (V, bad) where ``bad`` marks failed states.
        """
        Q = np.asarray(Q, dtype=np.float64)
        flat = np.ascontiguousarray(Q.reshape(-1, self.nu))
        V = np.empty_like(flat)
        status = np.empty(flat.shape[0], dtype=np.int64)
        nbad = K.cons2prim_batch(self.sysid, self.params, flat, V, status)
        if count:
            if diagnostic:
                self.counter.diagnostic += flat.shape[0]
            else:
                self.counter.core += flat.shape[0]
        if not strict:
            return V.reshape(Q.shape), (status != 0).reshape(Q.shape[:-1])
        if nbad:
            idx = int(np.nonzero(status)[0][0])
            raise RecoveryError(
                f"{self.name}: conserved-to-primitive recovery failed for "
                f"{nbad} of {flat.shape[0]} states (first at flat index {idx})",
                index=idx)
        return V.reshape(Q.shape)

    # -- pointwise physics ------------------------------------------------

    def flux(self, V, d):
        V = np.asarray(V, dtype=np.float64)
        flat = np.ascontiguousarray(V.reshape(-1, self.nu))
        F = np.empty_like(flat)
        K.flux_batch(self.sysid, self.params, flat, d, F)
        return F.reshape(V.shape)

    def source(self, V):
        V = np.asarray(V, dtype=np.float64)
        flat = np.ascontiguousarray(V.reshape(-1, self.nu))
        S = np.empty_like(flat)
        K.source_batch(self.sysid, self.params, flat, S)
        return S.reshape(V.shape)

    def max_speed(self, V, d):
        V = np.asarray(V, dtype=np.float64)
        flat = np.ascontiguousarray(V.reshape(-1, self.nu))
        s = np.empty(flat.shape[0])
        K.max_speed_batch(self.sysid, self.params, flat, d, s)
        return s.reshape(V.shape[:-1]) if V.ndim > 1 else float(s[0])

    def jacobian_M(self, V):
        """dQ/dV at one or many states."""
        V = np.asarray(V, dtype=np.float64)
        flat = np.ascontiguousarray(V.reshape(-1, self.nu))
        M = np.empty((flat.shape[0], self.nu, self.nu))
        K.jacobian_m_batch(self.sysid, self.params, flat, M)
        return M.reshape(V.shape + (self.nu,))

    def jacobian_M_fd(self, V, step=1.0e-7):
        """Central finite-difference dQ/dV (verification reference)."""
        V = np.asarray(V, dtype=np.float64)
        M = np.empty((self.nu, self.nu))
        for j in range(self.nu):
            h = max(step, step * abs(V[j]))
            Vp = V.copy()
            Vm = V.copy()
            Vp[j] += h
            Vm[j] -= h
            M[:, j] = (self.prim2cons(Vp) - self.prim2cons(Vm)) / (2 * h)
        return M

    def nonconservative_B(self, V, d):
        """Full B_d(V) matrix; zero except for Baer-Nunziato."""
        V = np.asarray(V, dtype=np.float64)
        B = np.zeros((self.nu, self.nu))
        if self.has_nc:
            pI = V[9]
            vId = V[1 + d]
            B[1 + d, 10] = -pI
            B[4, 10] = -pI * vId
            B[6 + d, 10] = pI
            B[9, 10] = pI * vId
            B[10, 10] = vId
        return B

    def admissible(self, V):
        V = np.asarray(V, dtype=np.float64)
        flat = np.ascontiguousarray(V.reshape(-1, self.nu))
        ok = np.empty(flat.shape[0], dtype=np.bool_)
        K.admissible_batch(self.sysid, self.params, flat, ok)
        return ok.reshape(V.shape[:-1]) if V.ndim > 1 else bool(ok[0])

    def quasilinear_apply(self, V, gradV, flux_div):
        """sum_d C_d dV/dx_d = M^-1 [flux_div + sum_d B_d M dV/dx_d].

        ``gradV`` has shape (ndir, nu) (physical-space derivatives) and
        ``flux_div`` is the already-formed sum_d d f^d / d x_d at the point.
        """
        V = np.asarray(V, dtype=np.float64)
        gradV = np.atleast_2d(np.asarray(gradV, dtype=np.float64))
        M = self.jacobian_M(V)
        rhs = np.asarray(flux_div, dtype=np.float64).copy()
        if self.has_nc:
            Mg = gradV @ M.T
            for d in range(gradV.shape[0]):
                rhs += self.nonconservative_B(V, d) @ Mg[d]
        return np.linalg.solve(M, rhs)

    def __repr__(self):
        pars = ", ".join(f"{v:g}" for v in self.params)
        return f"System({self.name}, [{pars}])"


def make_system(name: str, **kw) -> System:
    """Build a system descriptor.

    euler / rhd: gamma (default 1.4 / 5/3)
    rmhd: gamma (5/3), kappa (10.0)
    baer-nunziato: gamma1, pi1, gamma2, pi2 (1.4, 0, 1.4, 0),
                   nu_fric, mu_relax (0, 0)
    """
    name = name.lower()
    if name == "euler":
        params = np.array([kw.pop("gamma", 1.4)])
    elif name == "rhd":
        params = np.array([kw.pop("gamma", 5.0 / 3.0)])
    elif name == "rmhd":
        params = np.array([kw.pop("gamma", 5.0 / 3.0), kw.pop("kappa", 10.0)])
    elif name in ("baer-nunziato", "bn"):
        name = "baer-nunziato"
        params = np.array([
            kw.pop("gamma1", 1.4), kw.pop("pi1", 0.0),
            kw.pop("gamma2", 1.4), kw.pop("pi2", 0.0),
            kw.pop("nu_fric", 0.0), kw.pop("mu_relax", 0.0),
        ])
    else:
        raise ValueError(f"unknown system {name!r}")
    if kw:
        raise ValueError(f"unknown parameters for {name}: {sorted(kw)}")
    return System(name, params)
