"""Kernel backend selection.

Imports the compiled extension when present, otherwise the numpy
fallback.  Set LPC_PURE_PYTHON=1 to force the fallback (used by the
kernel benchmark and by tests that compare backends).
"""
import os

if os.environ.get("LPC_PURE_PYTHON"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels_c as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

pnorm = _impl.pnorm
row_pnorms = _impl.row_pnorms
powsum_ratios = _impl.powsum_ratios
counter_uniforms = _impl.counter_uniforms
smoothed_power_weights = _impl.smoothed_power_weights
