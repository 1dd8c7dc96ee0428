"""Kernel backend selection.

The compiled Cython kernels are used when importable; otherwise (or when the
``ISTD_FORGE_PURE_PYTHON`` environment variable is set) the numpy fallback is
used. Both expose ``ssim_scan``, ``label8`` and ``cg_poisson``.
"""

import os

from . import _pykernels

python_backend = _pykernels

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and not os.environ.get("ISTD_FORGE_PURE_PYTHON"):
    active = compiled_backend
    BACKEND = "cython"
else:
    active = python_backend
    BACKEND = "python"

ssim_scan = active.ssim_scan
label8 = active.label8
cg_poisson = active.cg_poisson


def available_backends() -> dict:
    out = {"python": python_backend}
    if compiled_backend is not None:
        out["cython"] = compiled_backend
    return out
