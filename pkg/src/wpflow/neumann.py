"""Inverse of the Neumann Laplacian on mean-zero fields.

The reflected-ghost stencil is diagonalised by the orthonormal type-II
discrete cosine transform, which gives an exact O(n log n) solve. A
conjugate-gradient path with mean projection is kept as an independent
cross-check.
"""
from __future__ import annotations

import numpy as np
import scipy.fft

from .errors import NoConvergence, NonZeroMean
from .grid import Grid


class NeumannPlan:
    """Solution operator of ``-lap u = w``, ``mean(u) = 0``.

    Parameters
    ----------
    grid : Grid
    method : {"spectral", "iterative"}
    tol : float
        Relative residual target of the iterative method.
    max_iter : int, optional
        Iteration cap of the iterative method; defaults to ``10 * grid.size``.
    """

    def __init__(self, grid: Grid, method: str = "spectral", tol: float = 1e-12,
                 max_iter: int | None = None):
        if method not in ("spectral", "iterative"):
            raise ValueError(f"unknown method {method!r}")
        self.grid = grid
        self.method = method
        self.tol = tol
        self.max_iter = max_iter or 10 * grid.size
        # symbol of -lap in the cosine basis
        lam = np.zeros(grid.shape)
        for axis, (n, h) in enumerate(zip(grid.counts, grid.spacing)):
            k = np.arange(n)
            lam_axis = (2.0 / h**2) * (1.0 - np.cos(k * np.pi / n))
            shape = [1] * grid.dim
            shape[axis] = n
            lam = lam + lam_axis.reshape(shape)
        lam.setflags(write=False)
        self.eigenvalues = lam

    # -- generic spectral multiplier ----------------------------------------
    def apply_symbol(self, w: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        """Multiply the cosine coefficients of ``w`` by ``symbol``."""
        coeffs = scipy.fft.dctn(w, type=2, norm="ortho")
        return scipy.fft.idctn(coeffs * symbol, type=2, norm="ortho")

    def _check_mean(self, w):
        m = self.grid.mean(w)
        if abs(m) > 1e-10 * (self.grid.norm(w) + 1.0):
            raise NonZeroMean(f"right-hand side has mean {m:.3e}")
        return w - m

    def solve(self, w: np.ndarray) -> np.ndarray:
        rhs = self._check_mean(w)
        if self.method == "spectral":
            inv = np.zeros_like(self.eigenvalues)
            np.divide(1.0, self.eigenvalues, out=inv, where=self.eigenvalues > 0)
            u = self.apply_symbol(rhs, inv)
        else:
            u = self._cg(rhs)
        return u - self.grid.mean(u)

    def _cg(self, rhs):
        g = self.grid
        u = np.zeros_like(rhs)
        r = rhs.copy()
        rr = g.inner(r, r)
        target = (self.tol * g.norm(rhs)) ** 2
        if rr <= target:
            return u
        d = r.copy()
        for _ in range(self.max_iter):
            q = -g.laplacian(d)
            step = rr / g.inner(d, q)
            u += step * d
            r -= step * q
            r -= g.mean(r)
            rr_new = g.inner(r, r)
            if rr_new <= target:
                return u
            d = r + (rr_new / rr) * d
            rr = rr_new
        raise NoConvergence(f"CG did not reach {self.tol:g} in {self.max_iter} iterations")

    def dual_norm_sq(self, w: np.ndarray) -> float:
        """``||grad N(w)||^2``, evaluated as ``<N(w), w>``."""
        return self.grid.inner(self.solve(w), w)


def solve_N(w: np.ndarray, plan: NeumannPlan) -> np.ndarray:
    return plan.solve(w)


def dual_norm_sq(w: np.ndarray, plan: NeumannPlan) -> float:
    return plan.dual_norm_sq(w)
