"""Backend selection for the tridiagonal kernels.

The compiled extension is used when it imports; setting the environment
variable ``BOUNDARY_YAMABE_PURE=1`` forces the pure-Python fallback.
"""

import os

from . import _pykernels as pure

compiled = None
if os.environ.get("BOUNDARY_YAMABE_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

active = compiled if compiled is not None else pure
BACKEND = "compiled" if compiled is not None else "python"

thomas = active.thomas
negative_pivots = active.negative_pivots
matvec = active.matvec
