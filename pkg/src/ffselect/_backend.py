"""Smoothing backend selection.

The compiled extension is preferred when importable; set
``FFSELECT_BACKEND=python`` to force the pure-numpy fallback or
``FFSELECT_BACKEND=cython`` to require the extension (ImportError if it was
not built). The choice is fixed at import time so that a given process uses
one backend throughout.
"""

from __future__ import annotations

import os

from . import _smooth_np

_requested = os.environ.get("FFSELECT_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = _smooth_np
elif _requested == "cython":
    from . import _smooth_cy as _impl
else:
    try:
        from . import _smooth_cy as _impl
    except ImportError:
        _impl = _smooth_np

BACKEND = "cython" if _impl.__name__.endswith("_smooth_cy") else "python"

EPANECHNIKOV = _smooth_np.EPANECHNIKOV
GAUSSIAN = _smooth_np.GAUSSIAN

build_weights = _impl.build_weights
