"""Numba switch.

Set ``RCDETECT_DISABLE_NUMBA=1`` in the environment before importing
``rcdetect`` to force the pure-numpy code paths (useful for debugging and for
platforms without a working LLVM toolchain).
"""

import functools
import os

_FLAG = "RCDETECT_DISABLE_NUMBA"


def _env_disabled():
    return os.environ.get(_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


try:
    import numba as nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    nb = None

USE_NUMBA = nb is not None and not _env_disabled()

if nb is not None:
    njit = functools.partial(nb.njit, cache=True, nogil=True)
else:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
