"""Selection between the compiled and pure-Python execution kernels.

The compiled extension is optional.  At import time we pick the fastest
available backend; the environment variable ``VIBENCH_BACKEND`` (``compiled``
or ``pure``) forces a choice, and every solver entry point also accepts a
``backend=`` argument.  Both backends implement identical floating-point
semantics, so the choice affects speed only -- traces are bit-identical.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"pure": _pykernels}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def default_backend() -> str:
    forced = os.environ.get("VIBENCH_BACKEND")
    if forced:
        if forced not in _BACKENDS:
            raise ValueError(
                f"VIBENCH_BACKEND={forced!r} is not available; "
                f"choose from {sorted(_BACKENDS)}"
            )
        return forced
    return "compiled" if "compiled" in _BACKENDS else "pure"


def get_backend(name: str | None = None):
    """Return (name, kernel module) for the requested or default backend."""
    if name is None or name == "auto":
        name = default_backend()
    try:
        return name, _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; available: {sorted(_BACKENDS)}"
        ) from None
