"""Gauss-Legendre quadrature and the nodal polynomial basis.

Everything downstream (WENO stencil matrices, space-time predictor operators,
face quadrature) is built from one object: the Lagrange basis through the
M+1 Gauss-Legendre nodes of the unit interval [0, 1].
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as P


def gauss_legendre(n: int):
    """Nodes and weights of the n-point Gauss-Legendre rule on [0, 1].

    Exact for polynomials of degree <= 2n - 1. Nodes ascending.
    """
    if n < 1:
        raise ValueError("need at least one quadrature node")
    x, w = np.polynomial.legendre.leggauss(n)
    # map from [-1, 1] to [0, 1]
    return 0.5 * (x + 1.0), 0.5 * w


def _lagrange_coeffs(nodes):
    """Monomial coefficients of the Lagrange cardinal polynomials.

    Returns array c[l, k] with psi_l(x) = sum_k c[l, k] x^k.
    """
    n = len(nodes)
    coeffs = np.zeros((n, n))
    for l in range(n):
        poly = np.array([1.0])
        for m in range(n):
            if m == l:
                continue
            poly = P.polymul(poly, np.array([-nodes[m], 1.0]) / (nodes[l] - nodes[m]))
        coeffs[l, : len(poly)] = poly
    return coeffs


class NodalBasis:
    """Lagrange basis {psi_l} at the M+1 Gauss-Legendre nodes on [0, 1].

    Precomputes every matrix the scheme needs:

    - ``at0``, ``at1``, ``atc``: psi_l evaluated at 0, 1, 1/2
    - ``diff``: D[k, l] = psi_l'(node_k), the collocation derivative
    - ``stiff``: K[k, l] = int_0^1 psi_k'(x) psi_l(x) dx
    - ``osc``: the oscillation indicator matrix,
      Sigma[l, m] = sum_{a=1..M} int_0^1 psi_l^(a) psi_m^(a) dx
    """

    def __init__(self, M: int):
        if M < 1:
            raise ValueError("polynomial degree M must be >= 1")
        self.M = M
        self.n = M + 1
        self.nodes, self.weights = gauss_legendre(self.n)
        self._coeffs = _lagrange_coeffs(self.nodes)

        self.at0 = self.eval(0.0)
        self.at1 = self.eval(1.0)
        self.atc = self.eval(0.5)
        self.diff = self.eval_deriv(self.nodes)  # (n nodes, n funcs)

        # exact integrals via antiderivatives of the monomial coefficients
        self.stiff = np.empty((self.n, self.n))
        dcoef = [P.polyder(self._coeffs[k]) for k in range(self.n)]
        for k in range(self.n):
            for l in range(self.n):
                prod = P.polymul(dcoef[k], self._coeffs[l])
                self.stiff[k, l] = _integrate01(prod)

        self.osc = np.zeros((self.n, self.n))
        for a in range(1, M + 1):
            da = [P.polyder(self._coeffs[l], a) for l in range(self.n)]
            for l in range(self.n):
                for m in range(self.n):
                    self.osc[l, m] += _integrate01(P.polymul(da[l], da[m]))

    def eval(self, x):
        """psi_l(x) for scalar or array x; trailing axis indexes l."""
        x = np.asarray(x, dtype=float)
        pw = x[..., None] ** np.arange(self.n)
        return pw @ self._coeffs.T

    def eval_deriv(self, x, order: int = 1):
        """order-th derivative of psi_l at x; trailing axis indexes l."""
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (self.n,))
        for l in range(self.n):
            c = P.polyder(self._coeffs[l], order)
            out[..., l] = P.polyval(x, c)
        return out

    def cell_average_matrix(self, offsets):
        """A[e, l] = integral of psi_l over the shifted cell [o_e, o_e + 1]."""
        A = np.empty((len(offsets), self.n))
        for e, o in enumerate(offsets):
            for l in range(self.n):
                anti = P.polyint(self._coeffs[l])
                A[e, l] = P.polyval(o + 1.0, anti) - P.polyval(float(o), anti)
        return A

    def point_value_matrix(self, offsets):
        """A[e, l] = psi_l evaluated at the shifted cell center o_e + 1/2."""
        return self.eval(np.asarray(offsets, dtype=float) + 0.5)


def _integrate01(coeffs):
    anti = P.polyint(coeffs)
    return P.polyval(1.0, anti) - P.polyval(0.0, anti)


def stencil_family(M: int):
    """Offset lists and linear weights of the one-dimensional WENO stencils.

    Even M: three stencils (centered, fully left-biased, fully right-biased).
    Odd M: four (the two near-centered ones plus the fully biased pair).
    Offsets are relative cell indices; each stencil has M+1 cells and
    contains the target cell (offset 0). Centered stencils carry the large
    linear weight.
    """
    def offs(L, R):
        return np.arange(-L, R + 1)

    if M % 2 == 0:
        half = M // 2
        stencils = [offs(half, half), offs(M, 0), offs(0, M)]
        lam = np.array([1.0e5, 1.0, 1.0])
    else:
        lo, hi = M // 2, M // 2 + 1
        stencils = [offs(hi, lo), offs(lo, hi), offs(M, 0), offs(0, M)]
        lam = np.array([1.0e5, 1.0e5, 1.0, 1.0])
    return stencils, lam


class ReconstructionOperator:
    """Per-stencil solve matrices for one 1D WENO reconstruction.

    kind="average": least squares is not needed — each stencil interpolates
    the M+1 cell averages exactly (square system), preserving the average of
    the target cell. kind="point" interpolates point values at cell centers.
    Matrices map stencil data (ordered by offset) to nodal coefficients.
    """

    def __init__(self, basis: NodalBasis, kind: str = "average"):
        self.basis = basis
        self.kind = kind
        self.stencils, self.lam = stencil_family(basis.M)
        self.solve = []
        for offsets in self.stencils:
            if kind == "average":
                A = basis.cell_average_matrix(offsets)
            elif kind == "point":
                A = basis.point_value_matrix(offsets)
            else:
                raise ValueError(f"unknown reconstruction kind {kind!r}")
            self.solve.append(np.linalg.inv(A))
        self.max_offset = max(int(s.max()) for s in self.stencils)
