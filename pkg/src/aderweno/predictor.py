"""Element-local space-time predictor (nodal DG in space-time, Picard).

The reconstruction polynomial of each cell is evolved inside the cell by the
weak space-time form of the quasilinear system in reference coordinates,

    d v/d tau + sum_d (dt/dx_d) C_d dv/dxi_d = dt M^-1 S.

With the tensor nodal basis, the weak problem factorizes per spatial node
into a small time operator T = psi(1) psi(1)^T - K_tau whose inverse maps the
initial data exactly onto the constant-in-time extension (T^-1 psi(0) = 1).
The Picard sweep therefore reads v = p + T^-1 diag(w_tau) G(v), with G the
nodal collocation of the right side. Three initial-guess strategies are
provided; the Adams-Bashforth guess extrapolates the previous step's
polynomial and silently falls back when it leaves the admissible set.
"""

from __future__ import annotations

import numpy as np

from .basis import NodalBasis
from .systems import System, kernels as K

__all__ = ["PredictorOps", "Predictor", "PredictorError", "GUESSES"]

GUESSES = ("constant", "muscl-cn", "adams-bashforth")


class PredictorError(RuntimeError):
    """Picard iteration hit an inadmissible state inside a cell."""

    def __init__(self, message, cells=None):
        super().__init__(message)
        self.cells = cells


class PredictorOps:
    """Time-direction operators shared by every cell of a run."""

    def __init__(self, basis: NodalBasis):
        self.basis = basis
        n = basis.n
        psi1 = basis.at1
        T = np.outer(psi1, psi1) - basis.stiff
        self.T = T
        self.arhs = np.linalg.solve(T, np.diag(basis.weights))
        # the initial-data column collapses to the constant extension
        ones = np.linalg.solve(T, basis.at0)
        if not np.allclose(ones, 1.0, atol=1.0e-12):
            raise AssertionError("time operator lost the constant state")

    def ab_matrix(self, ratio: float):
        """Extrapolation matrix E[b, l] = psi_l(1 + node_b * ratio).

        The L2 projection of the previous space-time polynomial onto the new
        slab collapses to collocation at the shifted nodes for the nodal
        basis (the mass matrix is diagonal at this quadrature order).
        """
        return self.basis.eval(1.0 + self.basis.nodes * ratio)


class Predictor:
    """Runs the predictor for all cells of one field snapshot."""

    def __init__(self, system: System, basis: NodalBasis, ndim: int,
                 guess: str = "muscl-cn", maxit: int | None = None,
                 tol: float = 1.0e-11):
        if guess not in GUESSES:
            raise ValueError(f"unknown predictor guess {guess!r}")
        self.system = system
        self.basis = basis
        self.ndim = ndim
        self.guess = guess
        self.maxit = basis.M + 2 if maxit is None else int(maxit)
        self.tol = float(tol)
        self.ops = PredictorOps(basis)
        self.ns = basis.n ** ndim
        self.nt = basis.n
        self.last_sweeps = None
        self.ab_fallbacks = 0

    # -- spatial nodal derivatives -----------------------------------------

    def _ref_derivs(self, P):
        """Reference-coordinate derivatives of nodal data (ncell, ns, nu)."""
        D = self.basis.diff
        n = self.basis.n
        nc, _, nu = P.shape
        if self.ndim == 1:
            dP = np.einsum("xl,clk->cxk", D, P)[:, :, None, :]
        else:
            Pg = P.reshape(nc, n, n, nu)
            dx = np.einsum("xl,clyk->cxyk", D, Pg).reshape(nc, self.ns, nu)
            dy = np.einsum("yl,cxlk->cxyk", D, Pg).reshape(nc, self.ns, nu)
            dP = np.stack([dx, dy], axis=2)
        return np.ascontiguousarray(dP)

    # -- initial guesses -----------------------------------------------------

    def _guess_constant(self, P):
        return np.ascontiguousarray(
            np.broadcast_to(P[:, :, None, :],
                            (P.shape[0], self.ns, self.nt, P.shape[2])).copy())

    def _muscl_step(self, P, dt, rvec):
        """One explicit nodal update: G = -dt C.grad p + dt M^-1 S."""
        sysid, par = self.system.sysid, self.system.params
        nc, _, nu = P.shape
        flat = np.ascontiguousarray(P.reshape(-1, nu))
        dP = self._ref_derivs(P).reshape(-1, self.ndim if self.ndim == 2 else 1, nu)
        dF = np.zeros((nc * self.ns, nu))
        for d in range(self.ndim):
            F = np.empty_like(flat)
            K.flux_batch(sysid, par, flat, d, F)
            Fg = F.reshape(nc, self.ns, nu)
            dFd = self._ref_derivs(Fg)[:, :, d, :]
            dF += rvec[d] * dFd.reshape(-1, nu)
        out = np.empty_like(flat)
        status = np.empty(flat.shape[0], np.int64)
        K.prim_rhs_batch(sysid, par, flat, dP, dF, rvec, dt, out, status)
        bad = status != 0
        if bad.any():
            # nodes whose half-step is not evaluable stay frozen in time
            out[bad] = 0.0
        return out.reshape(nc, self.ns, nu)

    def _source_term(self, P, dt):
        """dt M^-1 S at nodal states (zero derivative contribution)."""
        sysid, par = self.system.sysid, self.system.params
        nu = P.shape[-1]
        flat = np.ascontiguousarray(P.reshape(-1, nu))
        zder = np.zeros((flat.shape[0], max(self.ndim, 1), nu))
        zflux = np.zeros_like(flat)
        rvec = np.zeros(max(self.ndim, 1))
        out = np.empty_like(flat)
        status = np.empty(flat.shape[0], np.int64)
        K.prim_rhs_batch(sysid, par, flat, zder, zflux, rvec, dt, out, status)
        if status.any():
            raise PredictorError("inadmissible state in source evaluation")
        return out.reshape(P.shape)

    def _guess_muscl_cn(self, P, dt, rvec):
        G = self._muscl_step(P, dt, rvec)
        if self.system.has_source:
            # Crank-Nicolson average for the source alone: replace the
            # explicit source part dt*S(p) by dt/2*(S(p) + S(p + G))
            S0 = self._source_term(P, dt)
            end = P + G
            ok = self.system.admissible(end).all()
            S1 = self._source_term(end, dt) if ok else S0
            G = G + 0.5 * (S1 - S0)
        v1 = P + G
        tau = self.basis.nodes
        vh = P[:, :, None, :] + tau[None, None, :, None] * (v1 - P)[:, :, None, :]
        return np.ascontiguousarray(vh)

    def _guess_ab(self, P, dt, rvec, prev, dt_prev):
        E = self.ops.ab_matrix(dt / dt_prev)
        vh = np.ascontiguousarray(np.einsum("bl,calk->cabk", E, prev))
        flat = vh.reshape(-1, vh.shape[-1])
        ok = self.system.admissible(flat).reshape(vh.shape[0], -1).all(axis=1)
        bad = np.nonzero(~ok)[0]
        self.ab_fallbacks = int(bad.size)
        if bad.size:
            vh[bad] = self._guess_muscl_cn(P[bad], dt, rvec)
        return vh

    def _sanitize_guess(self, vh, P):
        """Replace invalid guess cells by the constant-in-time extension."""
        nc = vh.shape[0]
        flat = vh.reshape(nc, -1, vh.shape[-1])
        ok = np.isfinite(flat).all(axis=(1, 2))
        ok &= self.system.admissible(flat).all(axis=1)
        bad = np.nonzero(~ok)[0]
        self.guess_fallbacks = int(bad.size)
        if bad.size:
            vh[bad] = P[bad, :, None, :]

    # -- validity of a converged space-time polynomial -----------------------

    def _face_traces(self, vh):
        at0, at1 = self.basis.at0, self.basis.at1
        n = self.basis.n
        if self.ndim == 1:
            yield np.einsum("i,citk->ctk", at0, vh)
            yield np.einsum("i,citk->ctk", at1, vh)
            return
        g = vh.reshape(vh.shape[0], n, n, self.nt, vh.shape[-1])
        yield np.einsum("i,cijtk->cjtk", at0, g)
        yield np.einsum("i,cijtk->cjtk", at1, g)
        yield np.einsum("j,cijtk->citk", at0, g)
        yield np.einsum("j,cijtk->citk", at1, g)

    def _cell_valid(self, vh):
        """Finite and admissible at every node and face evaluation point."""
        nc = vh.shape[0]
        nu = vh.shape[-1]
        flat = vh.reshape(nc, -1, nu)
        ok = np.isfinite(flat).all(axis=(1, 2))
        ok &= self.system.admissible(flat).all(axis=1)
        for tr in self._face_traces(vh):
            f = tr.reshape(nc, -1, nu)
            ok &= np.isfinite(f).all(axis=(1, 2))
            ok &= self.system.admissible(f).all(axis=1)
        return ok

    def _space_weights(self):
        w = self.basis.weights
        if self.ndim == 1:
            return w
        return np.outer(w, w).ravel()

    # -- the solve ------------------------------------------------------------

    def predict(self, P, dt, dxs, pipeline="prim", prev=None, dt_prev=None):
        """Evolve nodal reconstructions P (ncell, ns, nu) over one slab.

        Returns (vhat, info): vhat has shape (ncell, ns, nt, nu) and holds
        primitive (pipeline="prim") or conserved (pipeline="cons") nodal
        values; info carries per-cell sweep counts and, for the conserved
        pipeline, the number of cons2prim calls (already added to the
        system's core counter).
        """
        sysid, par = self.system.sysid, self.system.params
        P = np.ascontiguousarray(P, dtype=np.float64)
        rvec = np.ascontiguousarray(dt / np.asarray(dxs, dtype=np.float64))
        self.ab_fallbacks = 0
        self.guess_fallbacks = 0
        self.predictor_fallbacks = 0
        # the nonstationary guesses act on primitive nodal data; conserved
        # unknowns start from the constant extension instead
        if (pipeline == "cons" or self.guess == "constant"
                or (self.guess == "adams-bashforth" and prev is None)):
            vhat = self._guess_constant(P)
        elif self.guess == "muscl-cn":
            vhat = self._guess_muscl_cn(P, dt, rvec)
            self._sanitize_guess(vhat, P)
        else:
            vhat = self._guess_ab(P, dt, rvec, prev, dt_prev)
            self._sanitize_guess(vhat, P)
        ncell = P.shape[0]
        sweeps = np.empty(ncell, np.int64)
        status = np.empty(ncell, np.int64)
        if pipeline == "prim":
            K.predictor_prim_picard(sysid, par, vhat, P, self.ops.arhs,
                                    self.basis.diff, rvec, dt, self.maxit,
                                    self.tol, sweeps, status)
            conversions = 0
            # cells whose iteration left the physical set fall back to the
            # frozen-in-time polynomial (or to a constant state if even its
            # boundary evaluations are out of range)
            bad = status != 0
            bad |= ~self._cell_valid(vhat)
            if bad.any():
                idx = np.nonzero(bad)[0]
                vhat[idx] = P[idx, :, None, :]
                still = idx[~self._cell_valid(vhat[idx])]
                if still.size:
                    w = self._space_weights()
                    rep = np.einsum("s,csk->ck", w, P[still])
                    vhat[still] = rep[:, None, None, :]
                self.predictor_fallbacks = int(idx.size)
        elif pipeline == "cons":
            conversions = K.predictor_cons_picard(
                sysid, par, vhat, P, self.ops.arhs, self.basis.diff, rvec,
                dt, self.maxit, self.tol, sweeps, status)
            self.system.counter.core += int(conversions)
            if status.any():
                cells = np.nonzero(status)[0]
                raise PredictorError(
                    f"predictor hit inadmissible states in {cells.size} "
                    f"cells (first flat cell index {int(cells[0])})",
                    cells=cells)
        else:
            raise ValueError(f"unknown pipeline {pipeline!r}")
        self.last_sweeps = sweeps
        info = {"sweeps": sweeps, "conversions": int(conversions),
                "ab_fallbacks": self.ab_fallbacks,
                "guess_fallbacks": self.guess_fallbacks,
                "predictor_fallbacks": self.predictor_fallbacks}
        return vhat, info

    def sweep_histogram(self):
        if self.last_sweeps is None:
            return np.zeros(0, np.int64)
        return np.bincount(self.last_sweeps, minlength=self.maxit + 1)
