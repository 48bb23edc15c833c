"""Dual WENO reconstruction on Cartesian grids, dimension by dimension.

Two reconstruction flavors share one nonlinear-weights engine:

- average-preserving WENO on conserved cell averages (each candidate stencil
  interpolates the M+1 cell averages of its cells, so the target average is
  preserved by construction);
- interpolatory WENO on primitive point values at cell centers.

The primitive-variable pipeline chains them: reconstruct the conserved
averages, evaluate each cell polynomial at the barycenter, convert that one
state per cell, then run the interpolatory reconstruction on the converted
center values. Ghost centers are supplied by a boundary-condition callback so
the conversion count stays at exactly one per interior cell.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .basis import NodalBasis, ReconstructionOperator

__all__ = ["WenoParams", "Reconstructor", "weno_combine"]


class WenoParams:
    """Nonlinear weight parameters: omega_s = lam_s / (sigma_s + eps)^r."""

    def __init__(self, eps: float = 1.0e-14, r: int = 8):
        if eps <= 0.0 or r < 1:
            raise ValueError("need eps > 0 and r >= 1")
        self.eps = eps
        self.r = r


def weno_combine(candidates, lam, sigma_mat, params: WenoParams):
    """Blend candidate coefficient vectors with data-dependent weights.

    candidates: (N_s, ..., n) nodal coefficients, one leading entry per
    stencil; lam: (N_s,) linear weights; sigma_mat: (n, n) oscillation
    quadratic form. Returns the (..., n) combination and the (N_s, ...)
    normalized weights.
    """
    cand = np.asarray(candidates, dtype=np.float64)
    sig = np.einsum("s...l,lm,s...m->s...", cand, sigma_mat, cand)
    om = np.asarray(lam, dtype=np.float64).reshape(
        (-1,) + (1,) * (cand.ndim - 2)) / (sig + params.eps) ** params.r
    tot = om.sum(axis=0)
    om = om / tot
    return np.einsum("s...,s...l->...l", om, cand), om


class _SweepOp:
    """One 1D reconstruction direction: stencil gathers + per-stencil solves."""

    def __init__(self, op: ReconstructionOperator, sigma_mat, params):
        self.n = op.basis.n
        self.M = op.basis.M
        self.lam = op.lam
        self.sigma = sigma_mat
        self.params = params
        # transposed solve matrices so gathered windows matmul directly
        self.solveT = [S.T.copy() for S in op.solve]
        # left reach of each stencil: window start = target - L
        self.left = [int(-s[0]) for s in op.stencils]

    def sweep(self, data, axis):
        """WENO-reconstruct along ``axis``; every other axis is carried.

        ``data`` includes M ghost entries on both ends of ``axis``. The
        result drops them and appends a trailing axis of n nodal
        coefficients.
        """
        M, n = self.M, self.n
        ni = data.shape[axis] - 2 * M
        win = sliding_window_view(data, n, axis=axis)
        num = 0.0
        den = 0.0
        sl = [slice(None)] * win.ndim
        for s in range(len(self.solveT)):
            start = M - self.left[s]
            sl[axis] = slice(start, start + ni)
            cand = win[tuple(sl)] @ self.solveT[s]
            sig = np.einsum("...l,lm,...m->...", cand, self.sigma, cand)
            om = self.lam[s] / (sig + self.params.eps) ** self.params.r
            num = num + om[..., None] * cand
            den = den + om
        return num / den[..., None]


class Reconstructor:
    """Both WENO reconstructions for one polynomial degree M.

    Field layout: leading variable axis, then one grid axis per dimension,
    each padded with M ghost cells per side. Reconstructed polynomials append
    one nodal axis per dimension (x nodes before y nodes).
    """

    def __init__(self, basis: NodalBasis, params: WenoParams | None = None):
        self.basis = basis
        self.params = params or WenoParams()
        self.avg = _SweepOp(ReconstructionOperator(basis, "average"),
                            basis.osc, self.params)
        self.pnt = _SweepOp(ReconstructionOperator(basis, "point"),
                            basis.osc, self.params)
        self.center_fallbacks = 0
        self.node_fallbacks = 0

    # -- core sweeps --------------------------------------------------------

    def _reconstruct(self, op, grid):
        ndim = grid.ndim - 1
        if ndim not in (1, 2):
            raise ValueError("expected (nu, NX[, NY]) + ghosts layout")
        out = op.sweep(grid, axis=1)
        if ndim == 2:
            out = op.sweep(out, axis=2)
        return out

    def reconstruct_conserved(self, Qg):
        """Average-preserving reconstruction of ghosted cell averages."""
        return self._reconstruct(self.avg, Qg)

    def reconstruct_primitive(self, Vcg):
        """Interpolatory reconstruction of ghosted center point values."""
        return self._reconstruct(self.pnt, Vcg)

    # -- evaluations --------------------------------------------------------

    def center_values(self, W):
        """Evaluate nodal polynomials at the cell barycenter."""
        atc = self.basis.atc
        ndim = 1 if W.ndim == 3 else 2
        if ndim == 1:
            return W @ atc
        return np.einsum("vxyij,i,j->vxy", W, atc, atc)

    def cell_averages(self, W):
        """Cell averages of the nodal polynomials (GL weights contraction)."""
        w = self.basis.weights
        if W.ndim == 3:
            return W @ w
        return np.einsum("vxyij,i,j->vxy", W, w, w)

    # -- the primitive pipeline --------------------------------------------

    def prim_pipeline(self, system, Qg, fill_prim_ghosts, velocity="v"):
        """Conserved averages -> primitive nodal polynomials, one conversion
        per interior cell.

        ``Qg``: ghosted conserved averages. ``fill_prim_ghosts(grid)`` must
        populate the M-wide halo of the primitive center-value grid in place
        (the interior is already written). ``velocity``: reconstruct plain
        velocities or, for relativistic systems, the proper velocities W*v.
        Returns (p_h, w_h) with w_h the intermediate conserved reconstruction.
        """
        M = self.basis.M
        wh = self.reconstruct_conserved(Qg)
        centers = self.center_values(wh)
        Vc, bad = system.cons2prim(np.moveaxis(centers, 0, -1), strict=False)
        bad |= ~system.admissible(Vc)
        if bad.any():
            # center values near strong fronts can leave the physical set;
            # those cells restart from their (admissible) averages instead
            inner_avg = (slice(None),) + (slice(M, -M),) * (Qg.ndim - 1)
            Qavg = np.moveaxis(Qg[inner_avg], 0, -1)
            Vc[bad] = system.cons2prim(Qavg[bad], diagnostic=True)
        self.center_fallbacks = int(np.count_nonzero(bad))
        grid = np.empty_like(Qg)
        inner = (slice(None),) + (slice(M, -M),) * (Qg.ndim - 1)
        grid[inner] = np.moveaxis(Vc, -1, 0)
        fill_prim_ghosts(grid)
        if velocity == "wv":
            if not system.relativistic:
                raise ValueError("W*v reconstruction needs a relativistic system")
            grid = grid.copy()
            _to_wv(grid, system.velocity_slots)
        elif velocity != "v":
            raise ValueError(f"unknown velocity reconstruction {velocity!r}")
        ph = self.reconstruct_primitive(grid)
        if velocity == "wv":
            _from_wv(ph, system.velocity_slots)
        # nodal admissibility guarantee: if any node of a cell's polynomial
        # leaves the physical set, the cell drops to its constant center state
        ndim = Qg.ndim - 1
        nodes = np.moveaxis(ph, 0, -1)
        ok = system.admissible(nodes)
        cellok = ok.reshape(ok.shape[:ndim] + (-1,)).all(axis=-1)
        self.node_fallbacks = 0
        if not cellok.all():
            tb = ~cellok
            rep = np.moveaxis(Vc[tb], -1, 0)
            ph[(slice(None), tb)] = rep.reshape(rep.shape + (1,) * ndim)
            self.node_fallbacks = int(np.count_nonzero(tb))
        return ph, wh


def _to_wv(grid, slots):
    """In place v -> W v on the leading variable axis (W = Lorentz factor)."""
    for sl in slots:
        v2 = sum(grid[k] ** 2 for k in sl)
        W = 1.0 / np.sqrt(np.maximum(1.0 - v2, 1.0e-14))
        for k in sl:
            grid[k] *= W


def _from_wv(nodal, slots):
    """In place W v -> v on the leading variable axis of nodal data."""
    for sl in slots:
        w2 = sum(nodal[k] ** 2 for k in sl)
        W = np.sqrt(1.0 + w2)
        for k in sl:
            nodal[k] /= W
