"""Kernel backend selection.

The compiled extension is used when it imports; ``LOCA_PURE_PYTHON=1``
forces the numpy fallback (useful for benchmarking and for checking that
both backends agree).
"""

import os

from loca import _pykernels as python_backend

try:
    if os.environ.get("LOCA_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from loca import _kernels as compiled_backend
except ImportError:
    compiled_backend = None

if compiled_backend is not None:
    _impl = compiled_backend
    BACKEND = "cython"
else:
    _impl = python_backend
    BACKEND = "python"

model_update = _impl.model_update
q_values = _impl.q_values
value_iteration = _impl.value_iteration
true_online_update = _impl.true_online_update
tile_indices = _impl.tile_indices
sum_at = _impl.sum_at
build_predecessors = _impl.build_predecessors
plan_incremental = _impl.plan_incremental

# Compiled tabular phase loop, or None when running on the fallback.
run_tabular_phase = getattr(_impl, "run_tabular_phase", None)
