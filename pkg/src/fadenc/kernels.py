"""Backend selection for the hot kernels.

The compiled extension is used when importable; set ``FADENC_PURE_PYTHON=1``
to force the pure-Python fallback.
"""

import os

from . import _pykernels

if os.environ.get("FADENC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND
ar1_log = _impl.ar1_log
run_block = _impl.run_block

python_backend = _pykernels


def compiled_backend():
    """Return the compiled kernel module, or None when it is not built."""
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels
