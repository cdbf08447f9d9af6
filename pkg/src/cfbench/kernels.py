"""Kernel dispatch: compiled extension when importable, Python otherwise.

Set ``CFBENCH_PURE_PYTHON=1`` to force the fallback.
"""

import os
import warnings

from . import _fallback

BACKEND = "python"
_compiled = None

if os.environ.get("CFBENCH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
        BACKEND = "cython"
    except ImportError as exc:  # extension not built
        warnings.warn(f"cfbench: compiled kernels unavailable ({exc}); using pure-Python fallback",
                      RuntimeWarning, stacklevel=2)

_impl = _compiled if _compiled is not None else _fallback

elastic_net_cd = _impl.elastic_net_cd
bpr_epoch = _impl.bpr_epoch
adam_update = _impl.adam_update


def get_backend(name=None):
    """Return the kernel namespace for ``name`` ('cython' or 'python')."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
