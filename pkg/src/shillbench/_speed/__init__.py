"""Backend selection for the per-sample reduction kernels.

The compiled extension is optional.  If it was not built, or if the
``SHILLBENCH_PURE_PYTHON`` environment variable is set to a non-empty
value, the numpy fallback is used instead.  Both backends expose the
same two functions and agree bit-for-bit on integer inputs.
"""

import os

from . import fallback

BACKEND = "python"
row_top_two_f64 = fallback.row_top_two_f64
row_top_two_i64 = fallback.row_top_two_i64

if not os.environ.get("SHILLBENCH_PURE_PYTHON"):
    try:
        from . import kernels as _kernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        row_top_two_f64 = _kernels.row_top_two_f64
        row_top_two_i64 = _kernels.row_top_two_i64

__all__ = ["BACKEND", "row_top_two_f64", "row_top_two_i64"]
