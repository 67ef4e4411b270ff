"""Backend selection for the stencil kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Setting ``WPF_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py as pure

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("WPF_PURE_PYTHON", "") not in ("1", "true"):
    backend = compiled
    BACKEND = "compiled"
else:
    backend = pure
    BACKEND = "python"

laplacian = backend.laplacian
chemical_potential = backend.chemical_potential
area_sum = backend.area_sum
energy_grad = backend.energy_grad

__all__ = [
    "BACKEND",
    "area_sum",
    "chemical_potential",
    "compiled",
    "energy_grad",
    "laplacian",
    "pure",
]
