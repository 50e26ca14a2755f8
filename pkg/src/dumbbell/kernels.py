"""Backend selection for the hot loops.

The compiled extension is used when it imports; set
``DUMBBELL_PURE_PYTHON=1`` to force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("DUMBBELL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def backend(name: str | None = None):
    """Kernel module for ``name`` ('cython' or 'python'); the active one if None."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


assemble_p1 = _impl.assemble_p1
stiffness_apply = _impl.stiffness_apply
pcg_jacobi = _impl.pcg_jacobi
walk_locate = _impl.walk_locate
