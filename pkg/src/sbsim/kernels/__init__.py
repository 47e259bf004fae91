"""Hot numeric kernels with backend selection at import time.

Uses the compiled extension when available; falls back to pure Python.
Set SBSIM_PURE_PY=1 to force the fallback (used by the parity tests and
the benchmark). Both backends produce bit-identical results.
"""

import os

from . import pyfallback

if os.environ.get("SBSIM_PURE_PY"):
    _impl = pyfallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = pyfallback
        BACKEND = "python"

thermal_advance = _impl.thermal_advance
thermal_trace = _impl.thermal_trace

__all__ = ["BACKEND", "thermal_advance", "thermal_trace", "pyfallback"]
