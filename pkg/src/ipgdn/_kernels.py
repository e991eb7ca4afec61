"""Backend selection for the edge-level kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback. Set ``IPGDN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
segment_sum = _pykernels.segment_sum
block_dot = _pykernels.block_dot
block_scale = _pykernels.block_scale
softmax_rows = _pykernels.softmax_rows
softmax_rows_backward = _pykernels.softmax_rows_backward

if os.environ.get("IPGDN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        segment_sum = _ckernels.segment_sum
        block_dot = _ckernels.block_dot
        block_scale = _ckernels.block_scale
        softmax_rows = _ckernels.softmax_rows
        softmax_rows_backward = _ckernels.softmax_rows_backward
