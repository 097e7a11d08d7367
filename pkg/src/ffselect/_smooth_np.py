"""Pure-numpy local-linear weight builder.

Fallback used when the compiled extension is unavailable. Both backends
implement the same contract; see :mod:`ffselect._backend`.
"""

from __future__ import annotations

import numpy as np

_INV_SQRT_2PI = 0.3989422804014327

EPANECHNIKOV = 0
GAUSSIAN = 1


def build_weights(
    u_obs: np.ndarray, u_eval: np.ndarray, h: float, family: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Normalized local-linear smoother weights at each evaluation point.

    Returns ``(nw, s0, s1, s2, denom, pos_count)`` where ``nw`` has shape
    ``(len(u_eval), len(u_obs))``, each row of ``nw`` holds the weights whose
    dot product with a response column gives the fitted value at that
    evaluation point, ``s0``/``s1``/``s2`` are the kernel moment sums, and
    ``denom = s2*s0 - s1**2``. Rows where ``denom <= 0`` are left as zeros;
    callers decide how to report them. ``pos_count`` counts observations with
    strictly positive kernel weight per evaluation point.
    """
    d = u_obs[np.newaxis, :] - u_eval[:, np.newaxis]
    z = d / h
    if family == EPANECHNIKOV:
        k = 0.75 * np.maximum(0.0, 1.0 - z * z) / h
    elif family == GAUSSIAN:
        k = np.exp(-0.5 * z * z) * (_INV_SQRT_2PI / h)
    else:
        raise ValueError(f"unknown kernel family code {family}")
    kd = k * d
    s0 = k.sum(axis=1)
    s1 = kd.sum(axis=1)
    s2 = (kd * d).sum(axis=1)
    denom = s2 * s0 - s1 * s1
    pos_count = np.count_nonzero(k > 0.0, axis=1).astype(np.int64)
    safe = np.where(denom > 0.0, denom, 1.0)
    nw = (s2[:, np.newaxis] * k - s1[:, np.newaxis] * kd) / safe[:, np.newaxis]
    nw[denom <= 0.0] = 0.0
    return nw, s0, s1, s2, denom, pos_count
