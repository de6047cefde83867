"""Pick the compiled kernels when available, numpy otherwise.

Set ``DPPFLOW_BACKEND=python`` to force the numpy kernels.
"""
import os
from types import SimpleNamespace

from . import _fallback as python_kernels

KERNEL_NAMES = (
    "dense",
    "pairwise_sq_dists",
    "cholesky",
    "jacobi_eigenvalues",
    "hungarian",
    "sinkhorn_log",
    "dpp_grad_batch",
    "pg_grad_batch",
)


def _load_compiled():
    from . import _core, _ot

    ns = {name: getattr(_core, name) for name in KERNEL_NAMES if name != "sinkhorn_log"}
    ns["sinkhorn_log"] = _ot.sinkhorn_log
    return SimpleNamespace(**ns)


def _load_python():
    return SimpleNamespace(**{name: getattr(python_kernels, name) for name in KERNEL_NAMES})


compiled_kernels = None
try:
    compiled_kernels = _load_compiled()
except ImportError:  # extension not built
    pass

if os.environ.get("DPPFLOW_BACKEND", "").lower() == "python" or compiled_kernels is None:
    NAME = "python"
    kernels = _load_python()
else:
    NAME = "compiled"
    kernels = compiled_kernels

__all__ = ["NAME", "kernels", "compiled_kernels", "python_kernels"]
