"""Selects the compiled kernels when available, else the numpy fallback.

Set ``BBGAMMA_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _core_py

if os.environ.get("BBGAMMA_PURE_PYTHON", "") not in ("", "0"):
    core = _core_py
    COMPILED = False
else:
    try:
        from . import _core as core  # type: ignore[attr-defined]
        COMPILED = True
    except ImportError:  # extension not built
        core = _core_py
        COMPILED = False

fallback = _core_py

__all__ = ["core", "fallback", "COMPILED"]
