"""Kernel backend selection.

Prefers the compiled extension, falls back to the NumPy implementation when
the extension was not built.  Set SPAHD_DISABLE_EXT=1 to force the fallback
(used by the benchmark and the backend-equivalence tests).
"""

import os

from . import _kernels_py

if os.environ.get("SPAHD_DISABLE_EXT"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

corr_integrand_fill = _impl.corr_integrand_fill
c34_kernel_grids = _impl.c34_kernel_grids


def available_backends():
    """Names of importable backends, compiled first when present."""
    names = []
    try:
        from . import _kernels  # noqa: F401

        names.append("compiled")
    except ImportError:
        pass
    names.append("python")
    return names


def load_backend(name):
    """Fetch a backend module by name ('compiled' or 'python')."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
