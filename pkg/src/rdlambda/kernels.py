"""Backend selection for the hot kernels.

The compiled extension is used when importable; set ``RDLAMBDA_PURE_PYTHON=1``
to force the pure-Python implementation. Callers pass float64 arrays.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("RDLAMBDA_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

CONVERGED = _kernels_py.CONVERGED
BELOW_MIN = _kernels_py.BELOW_MIN
ABOVE_MAX = _kernels_py.ABOVE_MAX
MAX_ITER = _kernels_py.MAX_ITER

rate_sum = _impl.rate_sum
central_lambda = _impl.central_lambda
sse_classic = _impl.sse_classic
sse_proposed = _impl.sse_proposed
