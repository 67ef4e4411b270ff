"""Uniform cell-centred grids with homogeneous Neumann discrete calculus.

Fields are plain float64 numpy arrays of shape ``grid.shape`` (row-major,
x first). Ghost nodes are reflections of the boundary nodes, so the discrete
Neumann condition and discrete conservation hold exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .errors import GridMismatch


@dataclass(frozen=True)
class Grid:
    """Rectangular grid in one or two dimensions.

    Parameters
    ----------
    extents : tuple of float
        Domain lengths ``(Lx,)`` or ``(Lx, Ly)``.
    counts : tuple of int
        Nodes per axis, at least 4 each.
    """

    extents: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        extents = tuple(float(L) for L in self.extents)
        counts = tuple(int(n) for n in self.counts)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "counts", counts)
        if len(extents) not in (1, 2) or len(counts) != len(extents):
            raise ValueError("grid must be 1D or 2D with one count per extent")
        if any(not np.isfinite(L) or L <= 0 for L in extents):
            raise ValueError(f"extents must be positive, got {extents}")
        if any(n < 4 for n in counts):
            raise ValueError(f"need at least 4 nodes per axis, got {counts}")

    @classmethod
    def line(cls, length: float = 1.0, n: int = 64) -> Grid:
        return cls((length,), (n,))

    @classmethod
    def box(cls, lx: float, ly: float, nx: int, ny: int) -> Grid:
        return cls((lx, ly), (nx, ny))

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @cached_property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.extents, self.counts))

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def measure(self) -> float:
        """Total measure of the domain, equal to the sum of quadrature weights."""
        return float(np.prod(self.extents))

    @cached_property
    def _inv_h2(self) -> tuple[float, float]:
        hx = self.spacing[0]
        ihy2 = 1.0 / self.spacing[1] ** 2 if self.dim == 2 else 0.0
        return 1.0 / hx**2, ihy2

    @cached_property
    def _shape2(self) -> tuple[int, int]:
        return (self.counts[0], self.counts[1] if self.dim == 2 else 1)

    def as2d(self, w: np.ndarray) -> np.ndarray:
        """Contiguous ``(nx, ny)`` view used by the kernels (``ny=1`` in 1D)."""
        if w.shape != self.shape:
            raise GridMismatch(f"field shape {w.shape} does not match grid {self.shape}")
        return np.ascontiguousarray(w, dtype=np.float64).reshape(self._shape2)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Cell-centre coordinates, one broadcastable array per axis."""
        axes = [(np.arange(n) + 0.5) * h for n, h in zip(self.counts, self.spacing)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def constant(self, c: float) -> np.ndarray:
        return np.full(self.shape, float(c))

    # -- quadrature ---------------------------------------------------------
    def integrate(self, w: np.ndarray) -> float:
        """Midpoint-rule integral."""
        return float(np.sum(self.as2d(w))) * self.cell_volume

    def mean(self, w: np.ndarray) -> float:
        return self.integrate(w) / self.measure

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        if u.shape != v.shape:
            raise GridMismatch(f"cannot pair fields of shapes {u.shape} and {v.shape}")
        return float(np.sum(self.as2d(u) * self.as2d(v))) * self.cell_volume

    def norm(self, w: np.ndarray) -> float:
        return float(np.sqrt(self.inner(w, w)))

    # -- stencil ------------------------------------------------------------
    def laplacian(self, w: np.ndarray) -> np.ndarray:
        """3-point (1D) / 5-point (2D) Laplacian with reflected ghost nodes."""
        ihx2, ihy2 = self._inv_h2
        return kernels.laplacian(self.as2d(w), ihx2, ihy2).reshape(self.shape)

    def dirichlet_energy(self, w: np.ndarray) -> float:
        """``-<w, lap w>/2``, the discrete ``|grad w|^2 / 2``."""
        return -0.5 * self.inner(w, self.laplacian(w))

    def eigenvalue(self, modes: tuple[int, ...]) -> float:
        """Eigenvalue of the discrete Laplacian for the cosine mode ``modes``."""
        return -sum(
            (2.0 / h**2) * (1.0 - np.cos(k * np.pi / n))
            for k, h, n in zip(modes, self.spacing, self.counts)
        )

    def cosine_mode(self, modes: tuple[int, ...]) -> np.ndarray:
        """``prod_i cos(k_i pi x_i / L_i)`` sampled at the nodes."""
        out = np.ones(self.shape)
        for k, x, L in zip(modes, self.coords(), self.extents):
            out = out * np.cos(k * np.pi * x / L)
        return out

    # -- stencil-compatible Sobolev norms ----------------------------------
    def h1_norm(self, w: np.ndarray) -> float:
        return float(np.sqrt(self.inner(w, w) + 2.0 * self.dirichlet_energy(w)))

    def h2_norm(self, w: np.ndarray) -> float:
        lap = self.laplacian(w)
        return float(
            np.sqrt(self.inner(w, w) - self.inner(w, lap) + self.inner(lap, lap))
        )
