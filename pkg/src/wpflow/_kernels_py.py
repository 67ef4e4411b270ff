"""Pure numpy versions of the stencil kernels in ``_kernels.pyx``.

Same signatures and conventions: ``(nx, ny)`` arrays, ``ny == 1`` for 1D.
"""
import numpy as np


def laplacian(w, ihx2, ihy2):
    p = np.pad(w, 1, mode="edge")
    return ((p[:-2, 1:-1] - w) + (p[2:, 1:-1] - w)) * ihx2 + (
        (p[1:-1, :-2] - w) + (p[1:-1, 2:] - w)
    ) * ihy2


def chemical_potential(w, ihx2, ihy2, a):
    return -laplacian(w, ihx2, ihy2) + a * (w * w * w - w)


def area_sum(w, ihx2, ihy2, a):
    """Sum over nodes of ``-w*lap(w)/2 + W(w)`` (multiply by cell volume)."""
    q = w * w - 1.0
    return -0.5 * float(np.sum(w * laplacian(w, ihx2, ihy2))) + 0.25 * a * float(
        np.sum(q * q)
    )


def energy_grad(w, ihx2, ihy2, a):
    """Return ``(sum mu**2 / 2, mu, grad)`` with ``grad = -lap(mu) + W''(w) mu``."""
    mu = chemical_potential(w, ihx2, ihy2, a)
    grad = -laplacian(mu, ihx2, ihy2) + a * (3.0 * w * w - 1.0) * mu
    return 0.5 * float(np.sum(mu * mu)), mu, grad
