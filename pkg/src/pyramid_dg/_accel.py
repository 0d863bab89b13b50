"""Select the compiled (numba) or pure-numpy kernel path.

Set ``PYRAMID_DG_NUMBA=0`` to force the numpy path. Numba is optional; when
it is missing the numpy path is used regardless of the flag.
"""

import os

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kw):
        if len(args) == 1 and callable(args[0]) and not kw:
            return args[0]
        return lambda f: f


def numba_requested() -> bool:
    return os.environ.get("PYRAMID_DG_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def use_numba() -> bool:
    return HAVE_NUMBA and numba_requested()
