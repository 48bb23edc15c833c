"""Interface numerical fluxes in primitive-jump form.

Both fluxes share one skeleton: the centered average of the two physical
fluxes minus half a dissipation matrix applied to the conserved jump, where
the conserved jump is rebuilt from the primitive one through the
path-averaged Jacobian (Roe matrix). Rusanov takes the dissipation matrix
s_max * I; the Osher-type flux integrates |A| of the conserved quasilinear
matrix along the same segment path. Every path integral here uses one
3-point Gauss-Legendre rule, so the Roe jump identity holds to quadrature
accuracy on nonlinear systems and exactly whenever dQ/dV is at most
quadratic along the segment.

The module also exposes the path jump terms D(vL, vR) that genuine
non-conservative products contribute at interfaces (zero for conservative
systems).
"""

from __future__ import annotations

import numpy as np

from .systems import System
from .systems import kernels as K

__all__ = ["PathRule", "SEGMENT", "OsherError", "roe_matrix", "rusanov_flux",
           "osher_flux", "path_jump_D", "quasilinear_eigenvalues"]


class OsherError(RuntimeError):
    """Osher dissipation could not be built (complex or defective spectrum)."""


class PathRule:
    """Straight segment path Psi(s) = vL + s (vR - vL), 3-point GL on [0,1]."""

    def __init__(self):
        self.nodes = K.PATH_S.copy()
        self.weights = K.PATH_W.copy()

    def __call__(self, vl, vr, s):
        vl = np.asarray(vl, dtype=np.float64)
        vr = np.asarray(vr, dtype=np.float64)
        return vl + s * (vr - vl)


SEGMENT = PathRule()


def _pair(system: System, vl, vr):
    """Validate a left/right state pair and flatten to (n, nu)."""
    vl = np.asarray(vl, dtype=np.float64)
    vr = np.asarray(vr, dtype=np.float64)
    if vl.shape != vr.shape:
        raise ValueError(f"state shapes differ: {vl.shape} vs {vr.shape}")
    if vl.shape[-1] != system.nu:
        raise ValueError(f"{system.name} states have {system.nu} entries, "
                         f"got {vl.shape[-1]}")
    flat_l = np.ascontiguousarray(vl.reshape(-1, system.nu))
    flat_r = np.ascontiguousarray(vr.reshape(-1, system.nu))
    return flat_l, flat_r, vl.shape


def _check_dir(d):
    d = int(d)
    if d not in (0, 1, 2):
        raise ValueError(f"direction must be 0, 1 or 2, got {d}")
    return d


def roe_matrix(system: System, vl, vr):
    """Path-averaged Jacobian Mtilde = int dQ/dV(Psi(s)) ds.

    Satisfies Q(vR) - Q(vL) = Mtilde (vR - vL) up to the truncation of the
    3-point path rule (exactly, for Jacobian entries quadratic in s).
    """
    L, R, shape = _pair(system, vl, vr)
    nu = system.nu
    out = np.empty((L.shape[0], nu, nu))
    for i in range(L.shape[0]):
        K.roe_matrix_one(system.sysid, system.params, L[i], R[i], out[i])
    return out.reshape(shape + (nu,))


def rusanov_flux(system: System, vl, vr, direction):
    """f = 1/2 (f(vL) + f(vR)) - 1/2 s_max Mtilde (vR - vL)."""
    d = _check_dir(direction)
    L, R, shape = _pair(system, vl, vr)
    out = np.empty_like(L)
    K.rusanov_batch(system.sysid, system.params, L, R, d, out)
    return out.reshape(shape)


def osher_flux(system: System, vl, vr, direction):
    """Osher-type flux: dissipation matrix int |A(Psi(s))| ds.

    |A| is evaluated per path point from the spectrum of the conserved
    quasilinear matrix A = (df/dV) (dQ/dV)^-1 + B. Raises
    :class:`OsherError` when the spectrum comes out complex or the
    decomposition fails; Rusanov has no such restriction.
    """
    d = _check_dir(direction)
    if system.sysid == K.RMHD:
        raise ValueError(
            "the osher flux is not offered for rmhd (the divergence-cleaned "
            "eigenstructure is not reliably real-diagonalizable here); "
            "use the rusanov flux")
    L, R, shape = _pair(system, vl, vr)
    out = np.empty_like(L)
    status = np.empty(L.shape[0], dtype=np.int64)
    K.osher_batch(system.sysid, system.params, L, R, d, out, status)
    if status.any():
        bad = int(np.count_nonzero(status))
        idx = int(np.nonzero(status)[0][0])
        raise OsherError(
            f"osher dissipation failed at {bad} of {L.shape[0]} interface "
            f"points (first at flat index {idx}): complex or defective "
            f"eigenstructure; rerun with the rusanov flux")
    return out.reshape(shape)


def path_jump_D(system: System, vl, vr, direction):
    """Interface jump D(vL, vR) = [int B_d(Psi) M(Psi) ds] (vR - vL).

    Identically zero for systems without a genuine non-conservative product.
    """
    d = _check_dir(direction)
    L, R, shape = _pair(system, vl, vr)
    out = np.empty_like(L)
    K.path_jump_batch(system.sysid, system.params, L, R, d, out)
    return out.reshape(shape)


def quasilinear_eigenvalues(system: System, v, direction):
    """Spectrum of A = (df/dV) (dQ/dV)^-1 + B at one state (diagnostic).

    Returns (real parts, imaginary parts) as computed by the same numeric
    eigensolver the Osher dissipation uses.
    """
    d = _check_dir(direction)
    v = np.ascontiguousarray(np.asarray(v, dtype=np.float64))
    if v.shape != (system.nu,):
        raise ValueError(f"expected one state of shape ({system.nu},)")
    wr, wi, st = K.osher_eigenvalues(system.sysid, system.params, v, d)
    if st != 0:
        raise OsherError("eigenvalue iteration did not converge")
    return wr.copy(), wi.copy()
