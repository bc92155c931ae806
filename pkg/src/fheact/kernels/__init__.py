"""Slot-kernel backend selection.

The compiled Cython extension is preferred when it built successfully;
set FHEACT_PURE=1 to force the numpy fallback (used by the benchmark
and the parity tests).
"""

import os

from . import _pykern

if os.environ.get("FHEACT_PURE"):
    _impl = _pykern
    BACKEND = "python"
else:
    try:
        from . import _fastkern as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykern
        BACKEND = "python"

rot_mac = _impl.rot_mac
sparse_rot_mac = _impl.sparse_rot_mac
quantize_saturate = _impl.quantize_saturate
dequantize = _impl.dequantize
compare_less = _impl.compare_less

__all__ = [
    "rot_mac",
    "sparse_rot_mac",
    "quantize_saturate",
    "dequantize",
    "compare_less",
    "BACKEND",
]
