"""Spectral-radius kernel selection: compiled extension with numpy fallback.

The compiled backend is used when the extension built; set the environment
variable ``IMEXPEER_PURE_PYTHON=1`` before import to force the fallback.
``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from . import _ref

if os.environ.get("IMEXPEER_PURE_PYTHON"):
    _impl = _ref
    BACKEND = "python"
else:
    try:
        from . import _speccore as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _ref
        BACKEND = "python"

rho_pairs = _impl.rho_pairs
stable_mask = _impl.stable_mask


def available_backends():
    """Mapping of backend name to kernel module, for tests and benchmarks."""
    found = {"python": _ref}
    try:
        from . import _speccore
        found["cython"] = _speccore
    except ImportError:
        pass
    return found
