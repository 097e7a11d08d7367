"""Time the smoother weight kernel: compiled extension vs numpy fallback.

Run as ``python3 benchmarks/bench_smoother.py``. Both implementations are
imported directly, bypassing the FFSELECT_BACKEND switch, and checked
against each other before timing.
"""

import time

import numpy as np

from ffselect import _smooth_np
from ffselect.core import KernelSpec

try:
    from ffselect import _smooth_cy
except ImportError:
    _smooth_cy = None

SIZES = (200, 500, 1000)
FAMILIES = ("epanechnikov", "gaussian")
REPEATS = 7


def _best_of(fn, repeats=REPEATS):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _check_agreement(u, h, code):
    got = _smooth_cy.build_weights(u, u, h, code)
    want = _smooth_np.build_weights(u, u, h, code)
    for a, b in zip(got, want):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def main():
    if _smooth_cy is None:
        print("compiled extension not built; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'n':>6} {'family':>13} {'numpy (ms)':>12} {'cython (ms)':>12} {'speedup':>8}")
    for family in FAMILIES:
        code = KernelSpec(family, 1.0).family_code
        for n in SIZES:
            u = np.sort(rng.uniform(-1.0, 1.0, n))
            h = 1.06 * u.std() * n ** (-0.2)
            _check_agreement(u, h, code)
            t_np = _best_of(lambda: _smooth_np.build_weights(u, u, h, code))
            t_cy = _best_of(lambda: _smooth_cy.build_weights(u, u, h, code))
            print(
                f"{n:>6} {family:>13} {t_np * 1e3:>12.3f} {t_cy * 1e3:>12.3f} "
                f"{t_np / t_cy:>7.1f}x"
            )


if __name__ == "__main__":
    main()
