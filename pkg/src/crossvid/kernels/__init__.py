"""Kernel backend selection.

Two interchangeable lanes: `compiled` (fused Cython loops, built at install
time) and `numpy` (pure fallback). The compiled lane is preferred when the
extension imported cleanly; CROSSVID_BACKEND=numpy|compiled forces a lane.

`active` is rebindable at runtime (used by tests and the benchmark); the
autodiff layer reads it per call.
"""

import os

from . import backend_numpy

_BACKENDS = {"numpy": backend_numpy}

try:
    from . import backend_compiled

    _BACKENDS["compiled"] = backend_compiled
except ImportError:
    backend_compiled = None

active = backend_numpy

_requested = os.environ.get("CROSSVID_BACKEND", "auto")
if _requested == "auto":
    active = _BACKENDS.get("compiled", backend_numpy)
elif _requested in _BACKENDS:
    active = _BACKENDS[_requested]
else:
    raise ImportError(
        f"CROSSVID_BACKEND={_requested!r} not available; "
        f"choices: {sorted(_BACKENDS)} or 'auto'"
    )


def available_backends():
    return dict(_BACKENDS)


def use_backend(name):
    """Rebind the active lane; returns the previous one (for restoring)."""
    global active
    prev = active
    active = _BACKENDS[name]
    return prev
