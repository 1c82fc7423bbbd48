"""Numerical kernel backend selection.

The compiled extension (``_core``, Cython) is preferred when it built;
otherwise the pure-numpy fallback is used.  Set ``GENESTIM_PURE_PYTHON=1``
to force the fallback, e.g. for the backend-agreement tests and the
benchmark.
"""

import os

if os.environ.get("GENESTIM_PURE_PYTHON") == "1":
    from . import fallback as _impl

    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import fallback as _impl

        BACKEND = "python"

invert_p1_batch = _impl.invert_p1_batch
sbar_profiled_batch = _impl.sbar_profiled_batch
zinterval_p1_batch = _impl.zinterval_p1_batch
t3_mle_batch = _impl.t3_mle_batch

__all__ = [
    "BACKEND",
    "invert_p1_batch",
    "sbar_profiled_batch",
    "zinterval_p1_batch",
    "t3_mle_batch",
]
