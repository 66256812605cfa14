"""Hot kernels, compiled when the extension is available.

``COMPILED`` tells which implementation was selected at import.  Setting the
environment variable ``BSDECHAOS_PURE=1`` forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py as pure

try:
    if os.environ.get("BSDECHAOS_PURE") == "1":
        raise ImportError("pure backend requested")
    from . import _kernels as _impl
    COMPILED = True
except ImportError:
    _impl = pure
    COMPILED = False

node_moments = _impl.node_moments
w2_sorted = _impl.w2_sorted

__all__ = ["COMPILED", "node_moments", "w2_sorted", "pure"]
