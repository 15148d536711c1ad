"""Select the compiled kernels when available, else the pure-Python ones.

Set ``IRF_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

python_kernels = _pykernels

if os.environ.get("IRF_PURE_PYTHON", "") not in ("", "0"):
    compiled_kernels = None
else:
    try:
        from . import _kernels as compiled_kernels
    except ImportError:  # extension not built
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "compiled" if compiled_kernels is not None else "python"
