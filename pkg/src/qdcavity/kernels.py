"""Backend selection for the trajectory kernel.

The compiled extension is used when importable.  Set ``QDCAVITY_PURE_PYTHON=1``
to force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
jump_trajectories = _kernels_py.jump_trajectories

if os.environ.get("QDCAVITY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        BACKEND = "compiled"
        jump_trajectories = _compiled.jump_trajectories


def backends() -> dict:
    """Every available implementation, keyed by name."""
    out = {"python": _kernels_py.jump_trajectories}
    try:
        from . import _kernels as c

        out["compiled"] = c.jump_trajectories
    except ImportError:
        pass
    return out
