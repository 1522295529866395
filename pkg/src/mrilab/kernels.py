"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it has been built; the
numpy fallback in ``_pykernels`` is used otherwise, or whenever the
environment variable ``MRILAB_PURE_PYTHON`` is set to a non-empty value
other than ``0``.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("MRILAB_PURE_PYTHON", "0") in ("", "0"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

grid_lookup = _impl.grid_lookup
poisson_disc = _impl.poisson_disc

__all__ = ["BACKEND", "grid_lookup", "poisson_disc"]
