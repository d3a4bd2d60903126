"""Select the compiled kernels when available, else the pure-Python ones.

Set ``LASSOBOUNDS_PURE_PYTHON=1`` to force the fallback (useful for
benchmarking and for checking parity).
"""

import os

from . import _pykernels

BACKEND = "python"
cd_sweeps = _pykernels.cd_sweeps
refine_ratio = _pykernels.refine_ratio
ratio_batch = _pykernels.ratio_batch

if os.environ.get("LASSOBOUNDS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        cd_sweeps = _ckernels.cd_sweeps
        refine_ratio = _ckernels.refine_ratio
        BACKEND = "cython"
