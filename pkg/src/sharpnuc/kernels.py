"""Kernel dispatch: compiled extension when built, NumPy fallback otherwise.

Set ``SHARPNUC_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py
from ._kernels_py import count_table, rank_states

BACKEND = "python"
plane_wave_sum = _kernels_py.plane_wave_sum
ladder_entries = _kernels_py.ladder_entries

if not os.environ.get("SHARPNUC_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        plane_wave_sum = _ckernels.plane_wave_sum
        ladder_entries = _ckernels.ladder_entries
        BACKEND = "cython"

__all__ = ["BACKEND", "plane_wave_sum", "ladder_entries", "count_table", "rank_states"]
