"""Relaxation kernel backends.

The compiled Cython kernel is preferred; the numpy wavefront fallback
implements the identical sweep semantics and is selected automatically when
the extension is not built.
"""
from ._psor_py import run_psor as run_psor_python
from ._psor_py import run_psor_reference

try:
    from ._psor import run_psor as run_psor_compiled

    run_psor = run_psor_compiled
    BACKEND = "compiled"
except ImportError:  # extension not built
    run_psor_compiled = None
    run_psor = run_psor_python
    BACKEND = "python"

__all__ = [
    "BACKEND",
    "run_psor",
    "run_psor_compiled",
    "run_psor_python",
    "run_psor_reference",
]
