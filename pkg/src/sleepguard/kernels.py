"""Backend selection for the hot loops.

The compiled extension is used when it was built and importable; otherwise
the pure-Python module is used. Set ``SLEEPGUARD_PURE_PYTHON=1`` to force the
fallback.
"""
import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("SLEEPGUARD_PURE_PYTHON"):
        raise ImportError("pure python requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py


def assign_members(node_x, node_y, eligible, ch_x, ch_y, noise,
                   beta, gamma, i0, alpha, tx_range, impl=None):
    impl = impl or _impl
    return impl.assign_members(
        np.ascontiguousarray(node_x, dtype=np.float64),
        np.ascontiguousarray(node_y, dtype=np.float64),
        np.ascontiguousarray(eligible, dtype=np.uint8),
        np.ascontiguousarray(ch_x, dtype=np.float64),
        np.ascontiguousarray(ch_y, dtype=np.float64),
        np.ascontiguousarray(noise, dtype=np.float64),
        float(beta), float(gamma), float(i0), float(alpha), float(tx_range),
    )


def scan_threshold(times, keys, n_keys, count_threshold, interval_threshold, window, impl=None):
    impl = impl or _impl
    if len(times) == 0:
        return -1
    return int(impl.scan_threshold(
        np.ascontiguousarray(times, dtype=np.float64),
        np.ascontiguousarray(keys, dtype=np.int64),
        int(n_keys), int(count_threshold), float(interval_threshold), float(window),
    ))


def wake_scan(times, accept, base_start, base_end, extend, lo, hi, impl=None):
    """Returns ``(received mask, awake seconds)``; see ``_kernels_py.wake_scan``."""
    impl = impl or _impl
    times = np.ascontiguousarray(times, dtype=np.float64)
    received = np.zeros(times.size, dtype=np.uint8)
    awake = impl.wake_scan(
        times,
        np.ascontiguousarray(accept, dtype=np.uint8),
        np.ascontiguousarray(base_start, dtype=np.float64),
        np.ascontiguousarray(base_end, dtype=np.float64),
        float(extend), float(lo), float(hi), received,
    )
    return received, float(awake)


def backends():
    """Available implementations, reference first."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
