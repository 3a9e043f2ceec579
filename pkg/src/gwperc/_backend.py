"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``GWPERC_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("GWPERC_PURE_PYTHON"):
    kernels = _pykernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:  # pragma: no cover - depends on the build
        kernels = _pykernels

BACKEND = "python" if kernels is _pykernels else "compiled"
MODE_UNIFORM = _pykernels.MODE_UNIFORM
MODE_RELATIVE = _pykernels.MODE_RELATIVE
MODE_TABLE = _pykernels.MODE_TABLE
