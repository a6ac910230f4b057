"""Backend selection for the phase-space kernels.

The compiled extension is used when it imports; setting ``SIM_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("SIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "compiled"


def _ensure(a):
    return np.ascontiguousarray(a, dtype=float)


def vlasov_rhs(f, cwx, ara, ex, ey, bz, qm, inv_h, inv_2du):
    return _impl.vlasov_rhs(_ensure(f), cwx, ara, _ensure(ex), _ensure(ey), _ensure(bz),
                            float(qm), float(inv_h), float(inv_2du))


def moments(f, cwx, cwy):
    return _impl.moments(_ensure(f), cwx, cwy)
