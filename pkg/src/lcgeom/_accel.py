"""Numba switch.

Set ``LCGEOM_DISABLE_NUMBA=1`` to route every hot kernel through its
vectorized numpy twin. Both paths consume identical pre-drawn randomness,
so results agree up to floating-point reassociation.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("LCGEOM_DISABLE_NUMBA", "").lower() not in (
    "1",
    "true",
    "yes",
)


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise.

    The decorated function is always compiled lazily, so importing the kernel
    module stays cheap even when the numpy path is selected.
    """
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def backend():
    return "numba" if USE_NUMBA else "numpy"
