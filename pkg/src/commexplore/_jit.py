"""Numba switch for the hot kernels.

Set ``COMMEXPLORE_DISABLE_NUMBA=1`` to run every kernel as plain Python over
numpy arrays. Both paths share the kernel source, so results are bitwise
identical on the same platform.
"""

import os

_DISABLED = os.environ.get("COMMEXPLORE_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba as _nb
except ImportError:  # pragma: no cover - exercised with the env flag
    _nb = None

NUMBA_ENABLED = _nb is not None


def njit(fn=None, **kwargs):
    """``numba.njit(cache=True)`` when numba is active, identity otherwise."""
    if fn is None:
        return lambda f: njit(f, **kwargs)
    if _nb is None:
        return fn
    kwargs.setdefault("cache", True)
    return _nb.njit(**kwargs)(fn)
