"""Selects the delivery-loop implementation at import time.

The compiled kernel is used when it was built; set ``AOI_PG_BACKEND=python``
to force the pure-Python loop.
"""

from __future__ import annotations

import os

from . import _pyloop

try:
    from . import _kernel
except ImportError:  # extension not built
    _kernel = None

BACKENDS = {"python": _pyloop.run_steps}
if _kernel is not None:
    BACKENDS["compiled"] = _kernel.run_steps

_requested = os.environ.get("AOI_PG_BACKEND", "").strip().lower()
if _requested and _requested not in ("python", "compiled"):
    raise ImportError(f"AOI_PG_BACKEND must be 'python' or 'compiled', got {_requested!r}")
if _requested == "compiled" and _kernel is None:
    raise ImportError("AOI_PG_BACKEND=compiled but the compiled kernel is not built")

DEFAULT = _requested or ("compiled" if _kernel is not None else "python")


def get_run_steps(name: str | None = None):
    name = name or DEFAULT
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
