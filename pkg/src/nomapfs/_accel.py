"""Acceleration lane selection.

Hot numeric kernels are compiled with numba's @njit by default. Setting the
environment variable NOMAPFS_NUMBA=0 (or "false"/"off") before import selects
the pure-Python/numpy fallback lane instead; results are numerically
equivalent, only slower. ``python -m nomapfs.bench`` times both lanes.
"""

import os

__all__ = ["NUMBA_ENABLED", "maybe_njit", "lane_name"]


def _env_enabled() -> bool:
    value = os.environ.get("NOMAPFS_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "off", "no")


NUMBA_ENABLED = _env_enabled()

if NUMBA_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:

    def maybe_njit(*args, **kwargs):
        return _njit(*args, **kwargs)

else:

    def maybe_njit(*args, **kwargs):
        # Identity decorator: kernels run as plain Python functions.
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def lane_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
