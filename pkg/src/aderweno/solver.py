"""One-step high-order finite-volume update on Cartesian grids.

Per step: fill ghost averages, reconstruct (conserved, or the chained
primitive pipeline), run the element-local space-time predictor, then update
the cell averages with

    ubar^{n+1} = ubar^n - sum_d dt/dx_d [ (fbar_+ - fbar_-)
                                          + 1/2 (Dbar_+ + Dbar_-) ]
                 + dt (Sbar - Pbar),

where fbar are the face/time quadratures of the numerical flux of the two
predictor traces, Dbar the path jump terms of genuine non-conservative
products (half to each neighbor), Sbar the space-time averaged source and
Pbar the volume average of the smooth non-conservative product B M grad(v).
All face and volume quadratures use the nodal Gauss-Legendre points (M+1 per
axis). Boundary conditions act twice: on the ghost cell averages (and ghost
primitive centers) feeding the reconstruction, and directly on the face
traces at domain boundaries.

The update is double-buffered (reads the old field, writes a fresh one) and
aborts on NaN, recovery failure, or inadmissible updated averages.
"""

from __future__ import annotations

import time

import numpy as np

from . import fluxes as FX
from .basis import NodalBasis
from .predictor import Predictor, PredictorError
from .systems import RecoveryError, System
from .weno import Reconstructor, WenoParams

__all__ = ["Grid", "SolverError", "BoundaryCondition", "Periodic", "Outflow",
           "Reflect", "Dirichlet", "PiecewiseX", "ADERSolver", "compute_dt",
           "cell_average_init", "face_flux_time_integral",
           "face_jump_time_integral", "volume_source_and_P_integral"]

_AXIS = {"xlo": 0, "xhi": 0, "ylo": 1, "yhi": 1}
_ISLO = {"xlo": True, "xhi": False, "ylo": True, "yhi": False}

# 3-point Gauss-Legendre on [0,1]: cell-average quadrature for initial data
# and dirichlet ghost averages
_Q3 = 0.5 + np.sqrt(15.0) / 10.0 * np.array([-1.0, 0.0, 1.0])
_W3 = np.array([5.0, 8.0, 5.0]) / 18.0


class SolverError(RuntimeError):
    """Fatal step failure; ``kind`` is 'nan', 'admissibility' or 'config'."""

    def __init__(self, kind, message, cells=None):
        super().__init__(message)
        self.kind = kind
        self.cells = cells


# --------------------------------------------------------------------- grid

class Grid:
    """Cartesian box of nx (x ny) cells with a ghost halo per side.

    ``bcs`` maps side names ('xlo', 'xhi' and in 2D 'ylo', 'yhi') to
    :class:`BoundaryCondition` objects; periodic sides must come in pairs.
    """

    def __init__(self, ndim, nx, ny=1, box=((0.0, 1.0), (0.0, 1.0)),
                 gw=1, bcs=None):
        if ndim not in (1, 2):
            raise SolverError("config", f"ndim must be 1 or 2, got {ndim}")
        if nx < 1 or (ndim == 2 and ny < 1) or gw < 1:
            raise SolverError("config", "need positive extents and ghost width")
        self.ndim = ndim
        self.nx = int(nx)
        self.ny = int(ny) if ndim == 2 else 1
        self.gw = int(gw)
        box = tuple(tuple(float(v) for v in b) for b in box)
        self.box = box[:ndim]
        self.dx = (box[0][1] - box[0][0]) / self.nx
        self.dy = (box[1][1] - box[1][0]) / self.ny if ndim == 2 else 1.0
        if self.dx <= 0.0 or self.dy <= 0.0:
            raise SolverError("config", "domain box must have positive extents")
        self.deltas = (self.dx, self.dy)[:ndim]
        sides = ("xlo", "xhi") if ndim == 1 else ("xlo", "xhi", "ylo", "yhi")
        self.sides = sides
        bcs = dict(bcs or {})
        missing = [s for s in sides if s not in bcs]
        if missing:
            raise SolverError("config", f"missing boundary conditions: {missing}")
        self.bcs = bcs
        for lo, hi in (("xlo", "xhi"), ("ylo", "yhi"))[:ndim]:
            if isinstance(bcs[lo], Periodic) != isinstance(bcs[hi], Periodic):
                raise SolverError("config",
                                  f"periodic sides must pair up ({lo}/{hi})")

    def centers(self, axis):
        """Interior cell-center coordinates along one axis."""
        x0 = self.box[axis][0]
        d = self.deltas[axis]
        npts = self.nx if axis == 0 else self.ny
        return x0 + (np.arange(npts) + 0.5) * d

    def padded_centers(self, axis):
        """Cell-center coordinates including the ghost halo."""
        x0 = self.box[axis][0]
        d = self.deltas[axis]
        npts = (self.nx if axis == 0 else self.ny) + 2 * self.gw
        return x0 + (np.arange(npts) - self.gw + 0.5) * d

    @property
    def ncells(self):
        return self.nx * self.ny


# -------------------------------------------------------- boundary conditions

class BoundaryCondition:
    """Fills ghost slabs of padded (nu, X[, Y]) data and builds outer traces.

    ``data`` is 'cons' (cell averages) or 'prim' (center point values); the
    trace hook receives the inner-side face states and must return the outer
    ones with the same shape.
    """

    kind = "abstract"

    def fill(self, solver, pad, side, data, t):
        raise NotImplementedError

    def outer_trace(self, solver, inner, side, t, dt):
        raise NotImplementedError


def _ghost_view(pad, side, gw):
    """(view with the boundary axis second, interior extent) for one side."""
    ax = _AXIS[side] + 1
    v = np.moveaxis(pad, ax, 1)
    return v, v.shape[1] - 2 * gw


class Periodic(BoundaryCondition):
    kind = "periodic"

    def fill(self, solver, pad, side, data, t):
        v, n = _ghost_view(pad, side, solver.gw)
        g = solver.gw
        if _ISLO[side]:
            v[:, :g] = v[:, n:n + g]
        else:
            v[:, n + g:] = v[:, g:2 * g]

    # traces are wrapped by the solver itself; nothing to do here


class Outflow(BoundaryCondition):
    """Zero-gradient: ghosts copy the nearest interior cell."""

    kind = "outflow"

    def fill(self, solver, pad, side, data, t):
        v, n = _ghost_view(pad, side, solver.gw)
        g = solver.gw
        if _ISLO[side]:
            v[:, :g] = v[:, g:g + 1]
        else:
            v[:, n + g:] = v[:, n + g - 1:n + g]

    def outer_trace(self, solver, inner, side, t, dt):
        return inner.copy()


class Reflect(BoundaryCondition):
    """Mirror wall: flips wall-normal velocities (both phases for the
    two-phase system) and, for divergence-cleaned MHD, the tangential field.
    """

    kind = "reflect"

    def fill(self, solver, pad, side, data, t):
        v, n = _ghost_view(pad, side, solver.gw)
        g = solver.gw
        flips = solver.flip_slots(_AXIS[side])
        if _ISLO[side]:
            v[:, :g] = v[:, 2 * g - 1:g - 1:-1]
            v[flips, :g] *= -1.0
        else:
            v[:, n + g:] = v[:, n + g - 1:n - 1:-1]
            v[flips, n + g:] *= -1.0

    def outer_trace(self, solver, inner, side, t, dt):
        out = inner.copy()
        for s in solver.flip_slots(_AXIS[side]):
            out[..., s] *= -1.0
        return out


class Dirichlet(BoundaryCondition):
    """Prescribed primitive state ``func(x, y, t) -> (..., nu)``.

    Ghost averages integrate the prescribed state with the 3^d-point rule;
    ghost centers and face traces evaluate it pointwise (traces at the exact
    quadrature times of the step).
    """

    kind = "dirichlet"

    def __init__(self, func):
        self.func = func

    def fill(self, solver, pad, side, data, t):
        grid, g = solver.grid, solver.gw
        ax = _AXIS[side]
        d = grid.deltas[ax]
        npts = grid.nx if ax == 0 else grid.ny
        x0, x1 = grid.box[ax]
        if _ISLO[side]:
            gc = x0 + (np.arange(g) - g + 0.5) * d
        else:
            gc = x1 + (np.arange(g) + 0.5) * d
        if grid.ndim == 1:
            if data == "prim":
                vals = np.asarray(self.func(gc, 0.0, t), dtype=np.float64)
            else:
                xq = gc[:, None] + (_Q3[None, :] - 0.5) * d
                Vq = np.asarray(self.func(xq, 0.0, t), dtype=np.float64)
                vals = np.einsum("q,gqk->gk", _W3, solver.system.prim2cons(Vq))
            v, n = _ghost_view(pad, side, g)
            tgt = slice(0, g) if _ISLO[side] else slice(n + g, None)
            v[:, tgt] = np.moveaxis(vals, -1, 0)
            return
        tr = grid.padded_centers(1 - ax)
        if ax == 0:
            X, Y = np.meshgrid(gc, tr, indexing="ij")
        else:
            X, Y = np.meshgrid(tr, gc, indexing="ij")
        if data == "prim":
            vals = np.asarray(self.func(X, Y, t), dtype=np.float64)
        else:
            dtr = grid.deltas[1 - ax]
            ox = (_Q3 - 0.5) * (d if ax == 0 else dtr)
            oy = (_Q3 - 0.5) * (dtr if ax == 0 else d)
            Xq = X[:, :, None, None] + ox[None, None, :, None]
            Yq = Y[:, :, None, None] + oy[None, None, None, :]
            Vq = np.asarray(self.func(Xq, Yq, t), dtype=np.float64)
            vals = np.einsum("p,q,xypqk->xyk", _W3, _W3,
                             solver.system.prim2cons(Vq))
        v = np.moveaxis(np.moveaxis(pad, 0, -1), ax, 0)
        n = v.shape[0] - 2 * g
        tgt = slice(0, g) if _ISLO[side] else slice(n + g, None)
        if ax == 0:
            v[tgt] = vals
        else:
            v[tgt] = np.moveaxis(vals, 0, 1)

    def outer_trace(self, solver, inner, side, t, dt):
        X, Y, T = solver.face_quad_coords(side, t, dt)
        return np.asarray(self.func(X, Y, T), dtype=np.float64)


class PiecewiseX(BoundaryCondition):
    """Two boundary conditions on one y-side, split at x = cut."""

    kind = "piecewise-x"

    def __init__(self, cut, lo_bc, hi_bc):
        self.cut = float(cut)
        self.lo = lo_bc
        self.hi = hi_bc

    def fill(self, solver, pad, side, data, t):
        if _AXIS[side] != 1:
            raise SolverError("config", "PiecewiseX splits y-side fills by x")
        a = pad.copy()
        b = pad.copy()
        self.lo.fill(solver, a, side, data, t)
        self.hi.fill(solver, b, side, data, t)
        mask = solver.grid.padded_centers(0) < self.cut
        g = solver.gw
        n = pad.shape[2] - 2 * g
        tgt = slice(0, g) if _ISLO[side] else slice(n + g, None)
        pad[:, mask, tgt] = a[:, mask, tgt]
        pad[:, ~mask, tgt] = b[:, ~mask, tgt]

    def outer_trace(self, solver, inner, side, t, dt):
        lo = self.lo.outer_trace(solver, inner, side, t, dt)
        hi = self.hi.outer_trace(solver, inner, side, t, dt)
        X, _, _ = solver.face_quad_coords(side, t, dt)
        mask = np.broadcast_to((X < self.cut)[..., None], lo.shape)
        return np.where(mask, lo, hi)


# ----------------------------------------------------------------- utilities

def compute_dt(system: System, V, deltas, cfl):
    """dt = cfl / max over cells of sum_d s_max,d / delta_d."""
    V = np.asarray(V, dtype=np.float64)
    denom = 0.0
    for d, dd in enumerate(deltas):
        denom = denom + system.max_speed(V, d) / dd
    dmax = float(np.max(denom))
    if not np.isfinite(dmax) or dmax <= 0.0:
        raise SolverError("nan", f"signal speeds gave 1/dt = {dmax}")
    return cfl / dmax


def cell_average_init(system: System, grid: Grid, func, npts=3):
    """Conserved cell averages of a pointwise primitive initializer.

    ``func(x, y) -> (..., nu)`` primitive states; per-cell tensor
    Gauss-Legendre quadrature with ``npts`` points per axis.
    """
    if npts == 3:
        qn, qw = _Q3, _W3
    else:
        x, w = np.polynomial.legendre.leggauss(int(npts))
        qn, qw = 0.5 + 0.5 * x, 0.5 * w
    xs = grid.centers(0)[:, None] + (qn[None, :] - 0.5) * grid.dx
    if grid.ndim == 1:
        V = np.asarray(func(xs, 0.0), dtype=np.float64)
        Q = system.prim2cons(V)
        return np.einsum("q,xqk->xk", qw, Q)
    ys = grid.centers(1)[:, None] + (qn[None, :] - 0.5) * grid.dy
    shape = (grid.nx, grid.ny, qn.size, qn.size)
    X = np.broadcast_to(xs[:, None, :, None], shape)
    Y = np.broadcast_to(ys[None, :, None, :], shape)
    V = np.asarray(func(X, Y), dtype=np.float64)
    Q = system.prim2cons(V)
    return np.einsum("p,q,xypqk->xyk", qw, qw, Q)


# ------------------------------------------------------------------- solver

class ADERSolver:
    """Orchestrates reconstruction, prediction and the one-step update."""

    def __init__(self, system: System, grid: Grid, M, pipeline="prim",
                 flux="rusanov", guess="muscl-cn", cfl=0.5, fixed_dt=None,
                 velocity="v", weno_params=None, picard_maxit=None,
                 picard_tol=1.0e-11):
        if not 1 <= M <= 5:
            raise SolverError("config", f"M must be in [1, 5], got {M}")
        if pipeline not in ("prim", "cons"):
            raise SolverError("config", f"unknown pipeline {pipeline!r}")
        if flux not in ("rusanov", "osher"):
            raise SolverError("config", f"unknown flux {flux!r}")
        if flux == "osher" and system.name == "rmhd":
            raise SolverError("config",
                              "the osher flux is not offered for rmhd; "
                              "use the rusanov flux")
        if velocity == "wv" and not system.relativistic:
            raise SolverError("config",
                              "W*v reconstruction needs a relativistic system")
        if grid.gw != M:
            raise SolverError("config",
                              f"grid ghost width {grid.gw} != M = {M}")
        self.system = system
        self.grid = grid
        self.M = int(M)
        self.gw = grid.gw
        self.pipeline = pipeline
        self.flux = flux
        self.cfl = float(cfl)
        self.fixed_dt = None if fixed_dt is None else float(fixed_dt)
        self.velocity = velocity
        self.basis = NodalBasis(M)
        self.recon = Reconstructor(self.basis, weno_params or WenoParams())
        self.pred = Predictor(system, self.basis, grid.ndim, guess=guess,
                              maxit=picard_maxit, tol=picard_tol)
        self.n = self.basis.n
        self.nt = self.basis.n
        self._prev = None
        self._dt_prev = None
        self.steps = 0
        self.picard_hist = np.zeros(self.pred.maxit + 1, np.int64)
        self.ab_fallbacks = 0
        self.fallback_cells = 0

    # -- small helpers ------------------------------------------------------

    def flip_slots(self, axis):
        """Variable indices negated by a wall with normal along ``axis``."""
        sysname = self.system.name
        slots = [1 + axis]
        if sysname == "baer-nunziato":
            slots.append(6 + axis)
        elif sysname == "rmhd":
            slots.extend(b for b in (5, 6, 7) if b != 5 + axis)
        return slots

    def face_quad_coords(self, side, t, dt):
        """(X, Y, T) arrays over the boundary-face quadrature points."""
        grid, n = self.grid, self.n
        nodes = self.basis.nodes
        T = t + nodes * dt
        ax = _AXIS[side]
        edge = grid.box[ax][0] if _ISLO[side] else grid.box[ax][1]
        if grid.ndim == 1:
            X = np.full((self.nt,), edge)
            return X, np.zeros_like(X), T
        tr_ax = 1 - ax
        d = grid.deltas[tr_ax]
        tr = grid.box[tr_ax][0] + (np.arange(grid.ny if ax == 0 else grid.nx)[:, None]
                                   + nodes[None, :]) * d
        shape = (tr.shape[0], n, self.nt)
        A = np.broadcast_to(tr[:, :, None], shape)
        E = np.full(shape, edge)
        T = np.broadcast_to(T[None, None, :], shape)
        if ax == 0:
            return E, A, T
        return A, E, T

    def _fill(self, pad, data, t):
        for side in self.grid.sides:
            self.grid.bcs[side].fill(self, pad, side, data, t)

    def _pad_cons(self, Q, t):
        g, nu = self.gw, self.system.nu
        if self.grid.ndim == 1:
            pad = np.empty((nu, self.grid.nx + 2 * g))
            pad[:, g:-g] = Q.T
        else:
            pad = np.empty((nu, self.grid.nx + 2 * g, self.grid.ny + 2 * g))
            pad[:, g:-g, g:-g] = np.moveaxis(Q, -1, 0)
        self._fill(pad, "cons", t)
        return pad

    def _to_cells(self, W):
        """(nu, nx[, ny], i[, j]) nodal polynomials -> (ncell, ns, nu)."""
        n = self.n
        if self.grid.ndim == 1:
            out = np.moveaxis(W, 0, -1)
            return np.ascontiguousarray(out.reshape(self.grid.nx, n, -1))
        out = np.moveaxis(W, 0, -1)
        return np.ascontiguousarray(
            out.reshape(self.grid.nx * self.grid.ny, n * n, -1))

    def _outer_trace(self, side, inner, t, dt):
        bc = self.grid.bcs[side]
        out = bc.outer_trace(self, inner, side, t, dt)
        if out.shape != inner.shape:
            raise SolverError("config",
                              f"{bc.kind} trace on {side}: shape {out.shape} "
                              f"!= {inner.shape}")
        return out

    def _num_flux(self, VL, VR, d):
        if self.flux == "rusanov":
            return FX.rusanov_flux(self.system, VL, VR, d)
        return FX.osher_flux(self.system, VL, VR, d)

    # -- the step ------------------------------------------------------------

    def step(self, Q, t, dt_cap=np.inf):
        """Advance the conserved averages one step; returns (Qnew, dt, info)."""
        sys = self.system
        grid = self.grid
        nu = sys.nu
        Qpad = self._pad_cons(Q, t)
        if self.pipeline == "prim":
            ph, _ = self.recon.prim_pipeline(
                sys, Qpad, lambda gridv: self._fill(gridv, "prim", t),
                velocity=self.velocity)
            Vdt = np.moveaxis(self.recon.center_values(ph), 0, -1)
            P = self._to_cells(ph)
        else:
            wh = self.recon.reconstruct_conserved(Qpad)
            P = self._to_cells(wh)
            Vdt = sys.cons2prim(Q)
        if self.fixed_dt is not None:
            dt = self.fixed_dt
        else:
            dt = compute_dt(sys, Vdt, grid.deltas, self.cfl)
        dt = min(dt, float(dt_cap))
        if not np.isfinite(dt) or dt <= 0.0:
            raise SolverError("nan", f"nonpositive time step dt = {dt}")
        vhat, info = self.pred.predict(
            P, dt, grid.deltas, pipeline=self.pipeline,
            prev=self._prev, dt_prev=self._dt_prev)
        dU = self._flux_update(vhat, t, dt)
        if sys.has_source or sys.has_nc:
            if self.pipeline == "prim":
                vnod = vhat
            else:
                vnod = sys.cons2prim(vhat)
            dU += dt * self._volume_sp(vnod)
        Qnew = Q + dU
        if not np.isfinite(Qnew).all():
            bad = np.argwhere(~np.isfinite(Qnew).all(axis=-1))
            raise SolverError(
                "nan", f"non-finite averages in {len(bad)} cells after the "
                f"update (first at {tuple(bad[0])})", cells=bad)
        Vnew = sys.cons2prim(Qnew, diagnostic=True)
        ok = sys.admissible(Vnew)
        if not ok.all():
            bad = np.argwhere(~ok)
            raise SolverError(
                "admissibility", f"{len(bad)} inadmissible cell averages "
                f"after the update (first at {tuple(bad[0])})", cells=bad)
        self.steps += 1
        self._prev = vhat if self.pipeline == "prim" else None
        self._dt_prev = dt
        hist = self.pred.sweep_histogram()
        self.picard_hist[:hist.size] += hist
        self.ab_fallbacks += info["ab_fallbacks"]
        info["recon_fallbacks"] = (self.recon.center_fallbacks
                                   + self.recon.node_fallbacks)
        self.fallback_cells += (info["recon_fallbacks"]
                                + info["guess_fallbacks"]
                                + info["predictor_fallbacks"])
        return Qnew, dt, info

    def _flux_update(self, vhat, t, dt):
        sys, grid = self.system, self.grid
        n, nt, nu = self.n, self.nt, self.system.nu
        w = self.basis.weights
        at0, at1 = self.basis.at0, self.basis.at1
        cons = self.pipeline == "cons"
        if grid.ndim == 1:
            nx = grid.nx
            vh = vhat.reshape(nx, n, nt, nu)
            TL = np.einsum("i,xibk->xbk", at0, vh)
            TR = np.einsum("i,xibk->xbk", at1, vh)
            if cons:
                TL = sys.cons2prim(TL)
                TR = sys.cons2prim(TR)
            VLf = np.empty((nx + 1, nt, nu))
            VRf = np.empty_like(VLf)
            VLf[1:] = TR
            VRf[:nx] = TL
            if isinstance(grid.bcs["xlo"], Periodic):
                VLf[0] = TR[nx - 1]
                VRf[nx] = TL[0]
            else:
                VLf[0] = self._outer_trace("xlo", VRf[0], t, dt)
                VRf[nx] = self._outer_trace("xhi", VLf[nx], t, dt)
            Fq = self._num_flux(VLf, VRf, 0)
            fbar = np.einsum("fbk,b->fk", Fq, w)
            dU = -(dt / grid.dx) * (fbar[1:] - fbar[:-1])
            if sys.has_nc:
                Dq = FX.path_jump_D(sys, VLf, VRf, 0)
                Dbar = np.einsum("fbk,b->fk", Dq, w)
                dU -= (dt / grid.dx) * 0.5 * (Dbar[1:] + Dbar[:-1])
            return dU
        nx, ny = grid.nx, grid.ny
        vh = vhat.reshape(nx, ny, n, n, nt, nu)
        dU = np.zeros((nx, ny, nu))
        # x faces
        TL = np.einsum("i,xyijbk->xyjbk", at0, vh)
        TR = np.einsum("i,xyijbk->xyjbk", at1, vh)
        if cons:
            TL = sys.cons2prim(TL)
            TR = sys.cons2prim(TR)
        VLf = np.empty((nx + 1, ny, n, nt, nu))
        VRf = np.empty_like(VLf)
        VLf[1:] = TR
        VRf[:nx] = TL
        if isinstance(grid.bcs["xlo"], Periodic):
            VLf[0] = TR[nx - 1]
            VRf[nx] = TL[0]
        else:
            VLf[0] = self._outer_trace("xlo", VRf[0], t, dt)
            VRf[nx] = self._outer_trace("xhi", VLf[nx], t, dt)
        Fq = self._num_flux(VLf, VRf, 0)
        fbar = np.einsum("fyjbk,j,b->fyk", Fq, w, w)
        dU -= (dt / grid.dx) * (fbar[1:] - fbar[:-1])
        if sys.has_nc:
            Dq = FX.path_jump_D(sys, VLf, VRf, 0)
            Dbar = np.einsum("fyjbk,j,b->fyk", Dq, w, w)
            dU -= (dt / grid.dx) * 0.5 * (Dbar[1:] + Dbar[:-1])
        # y faces
        TD = np.einsum("j,xyijbk->xyibk", at0, vh)
        TU = np.einsum("j,xyijbk->xyibk", at1, vh)
        if cons:
            TD = sys.cons2prim(TD)
            TU = sys.cons2prim(TU)
        VLf = np.empty((nx, ny + 1, n, nt, nu))
        VRf = np.empty_like(VLf)
        VLf[:, 1:] = TU
        VRf[:, :ny] = TD
        if isinstance(grid.bcs["ylo"], Periodic):
            VLf[:, 0] = TU[:, ny - 1]
            VRf[:, ny] = TD[:, 0]
        else:
            VLf[:, 0] = self._outer_trace("ylo", VRf[:, 0], t, dt)
            VRf[:, ny] = self._outer_trace("yhi", VLf[:, ny], t, dt)
        Fq = self._num_flux(VLf, VRf, 1)
        fbar = np.einsum("xfibk,i,b->xfk", Fq, w, w)
        dU -= (dt / grid.dy) * (fbar[:, 1:] - fbar[:, :-1])
        if sys.has_nc:
            Dq = FX.path_jump_D(sys, VLf, VRf, 1)
            Dbar = np.einsum("xfibk,i,b->xfk", Dq, w, w)
            dU -= (dt / grid.dy) * 0.5 * (Dbar[:, 1:] + Dbar[:, :-1])
        return dU

    def _nc_product(self, vnod):
        """Smooth part of the non-conservative terms at the space-time nodes."""
        grid, n, nt, nu = self.grid, self.n, self.nt, self.system.nu
        D = self.basis.diff
        if grid.ndim == 1:
            v = vnod.reshape(grid.nx, n, nt, nu)
            out = np.zeros_like(v)
            phi = v[..., 10]
            pI = v[..., 9]
            dphi = np.einsum("il,xlb->xib", D, phi) / grid.dx
            vI = v[..., 1]
            out[..., 1] -= pI * dphi
            out[..., 4] -= pI * vI * dphi
            out[..., 6] += pI * dphi
            out[..., 9] += pI * vI * dphi
            out[..., 10] += vI * dphi
            return out.reshape(vnod.shape)
        v = vnod.reshape(grid.nx, grid.ny, n, n, nt, nu)
        out = np.zeros_like(v)
        phi = v[..., 10]
        pI = v[..., 9]
        for d in range(2):
            if d == 0:
                dphi = np.einsum("il,xyljb->xyijb", D, phi) / grid.dx
            else:
                dphi = np.einsum("jl,xyilb->xyijb", D, phi) / grid.dy
            vI = v[..., 1 + d]
            out[..., 1 + d] -= pI * dphi
            out[..., 4] -= pI * vI * dphi
            out[..., 6 + d] += pI * dphi
            out[..., 9] += pI * vI * dphi
            out[..., 10] += vI * dphi
        return out.reshape(vnod.shape)

    def _volume_sp(self, vnod):
        """Space-time averaged source minus smooth non-conservative product."""
        sys, grid = self.system, self.grid
        n, nt, nu = self.n, self.nt, self.system.nu
        w = self.basis.weights
        SP = sys.source(vnod) if sys.has_source else np.zeros_like(vnod)
        if sys.has_nc:
            SP = SP - self._nc_product(vnod)
        if grid.ndim == 1:
            r = SP.reshape(grid.nx, n, nt, nu)
            return np.einsum("xibk,i,b->xk", r, w, w)
        r = SP.reshape(grid.nx, grid.ny, n, n, nt, nu)
        return np.einsum("xyijbk,i,j,b->xyk", r, w, w, w)

    # -- time loop -----------------------------------------------------------

    def run(self, Q, t0, t_final, snap_times=(), on_snapshot=None,
            max_steps=10 ** 7):
        """March to t_final (clipping the last step); returns (Q, report)."""
        sys = self.system
        c0_core = sys.counter.core
        c0_diag = sys.counter.diagnostic
        V0 = sys.cons2prim(Q, diagnostic=True)
        if not sys.admissible(V0).all():
            raise SolverError("admissibility", "inadmissible initial data")
        snaps = sorted(float(s) for s in snap_times
                       if t0 < s <= t_final + 1.0e-12)
        t = float(t0)
        wall0 = time.perf_counter()
        self.steps = 0
        self.picard_hist[:] = 0
        self.ab_fallbacks = 0
        self.fallback_cells = 0
        self._prev = None
        self._dt_prev = None
        eps = 1.0e-12 * max(1.0, abs(t_final))
        while t < t_final - eps and self.steps < max_steps:
            cap = t_final - t
            if snaps:
                cap = min(cap, snaps[0] - t)
            Q, dt, _ = self.step(Q, t, dt_cap=cap)
            t += dt
            if snaps and t >= snaps[0] - eps:
                snaps.pop(0)
                if on_snapshot is not None:
                    on_snapshot(t, Q)
        report = {
            "steps": self.steps,
            "t_final": t,
            "wall_time": time.perf_counter() - wall0,
            "cons2prim_core": sys.counter.core - c0_core,
            "cons2prim_diagnostic": sys.counter.diagnostic - c0_diag,
            "picard_histogram": self.picard_hist.copy(),
            "ab_fallbacks": self.ab_fallbacks,
            "fallback_cells": self.fallback_cells,
            "ncells": self.grid.ncells,
        }
        return Q, report


# ------------------------------------------------- single-face/cell wrappers

def _infer_ndim(basis, vh):
    ns = vh.shape[0]
    if ns == basis.n:
        return 1
    if ns == basis.n ** 2:
        return 2
    raise ValueError(f"nodal count {ns} fits neither 1D nor 2D for M = {basis.M}")


def _face_trace(basis, vh, ndim, direction, side):
    """Trace of one cell's space-time nodal values at one face."""
    n = basis.n
    e = basis.at1 if side else basis.at0
    if ndim == 1:
        return np.einsum("i,ibk->bk", e, vh)
    v = vh.reshape(n, n, vh.shape[1], vh.shape[2])
    if direction == 0:
        return np.einsum("i,ijbk->jbk", e, v)
    return np.einsum("j,ijbk->ibk", e, v)


def face_flux_time_integral(system, basis, vhL, vhR, direction,
                            flux="rusanov"):
    """Transverse/time quadrature of the numerical flux of two cell traces.

    ``vhL``/``vhR``: primitive space-time nodal values (ns, nt, nu) of the
    cells left/right of the shared face.
    """
    ndim = _infer_ndim(basis, vhL)
    tl = _face_trace(basis, vhL, ndim, direction, 1)
    tr = _face_trace(basis, vhR, ndim, direction, 0)
    f = (FX.rusanov_flux if flux == "rusanov" else FX.osher_flux)(
        system, tl, tr, direction)
    w = basis.weights
    if ndim == 1:
        return np.einsum("bk,b->k", f, w)
    return np.einsum("jbk,j,b->k", f, w, w)


def face_jump_time_integral(system, basis, vhL, vhR, direction):
    """Same quadrature applied to the non-conservative path jump."""
    ndim = _infer_ndim(basis, vhL)
    tl = _face_trace(basis, vhL, ndim, direction, 1)
    tr = _face_trace(basis, vhR, ndim, direction, 0)
    Dq = FX.path_jump_D(system, tl, tr, direction)
    w = basis.weights
    if ndim == 1:
        return np.einsum("bk,b->k", Dq, w)
    return np.einsum("jbk,j,b->k", Dq, w, w)


def volume_source_and_P_integral(system, basis, vh, deltas):
    """Space-time average Sbar - Pbar of one cell's primitive nodal values."""
    ndim = _infer_ndim(basis, vh)
    n = basis.n
    w = basis.weights
    D = basis.diff
    SP = system.source(vh) if system.has_source else np.zeros_like(vh)
    if system.has_nc:
        if ndim == 1:
            v = vh.reshape(n, vh.shape[1], vh.shape[2])
            dphi = np.einsum("il,lb->ib", D, v[..., 10]) / deltas[0]
            pI, vI = v[..., 9], v[..., 1]
            P = np.zeros_like(v)
            P[..., 1] -= pI * dphi
            P[..., 4] -= pI * vI * dphi
            P[..., 6] += pI * dphi
            P[..., 9] += pI * vI * dphi
            P[..., 10] += vI * dphi
        else:
            v = vh.reshape(n, n, vh.shape[1], vh.shape[2])
            P = np.zeros_like(v)
            pI = v[..., 9]
            for d in range(2):
                if d == 0:
                    dphi = np.einsum("il,ljb->ijb", D, v[..., 10]) / deltas[0]
                else:
                    dphi = np.einsum("jl,ilb->ijb", D, v[..., 10]) / deltas[1]
                vI = v[..., 1 + d]
                P[..., 1 + d] -= pI * dphi
                P[..., 4] -= pI * vI * dphi
                P[..., 6 + d] += pI * dphi
                P[..., 9] += pI * vI * dphi
                P[..., 10] += vI * dphi
        SP = SP - P.reshape(vh.shape)
    if ndim == 1:
        return np.einsum("ibk,i,b->k", SP, w, w)
    r = SP.reshape(n, n, vh.shape[1], vh.shape[2])
    return np.einsum("ijbk,i,j,b->k", r, w, w, w)
