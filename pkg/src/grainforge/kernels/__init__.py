"""Kernel backend selection.

Prefers the compiled Cython core when it imported successfully, otherwise
falls back to the pure-NumPy implementations. Override with the environment
variable GRAINFORGE_BACKEND=auto|cython|numpy (read once at import).
"""

import os

from . import _npkernels

_choice = os.environ.get("GRAINFORGE_BACKEND", "auto").lower()
if _choice not in ("auto", "cython", "numpy"):
    raise ValueError(f"GRAINFORGE_BACKEND must be auto, cython or numpy, got {_choice!r}")

_impl = None
if _choice in ("auto", "cython"):
    try:
        from . import _cykernels as _impl
    except ImportError:
        if _choice == "cython":
            raise
if _impl is None:
    _impl = _npkernels

KERNEL_BACKEND = _impl.BACKEND_NAME

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
tconv2d_forward = _impl.tconv2d_forward
tconv2d_backward = _impl.tconv2d_backward
maxpool2_forward = _impl.maxpool2_forward
maxpool2_backward = _impl.maxpool2_backward
median_filter_u8 = _impl.median_filter_u8
power_argmin = _impl.power_argmin

__all__ = [
    "KERNEL_BACKEND",
    "conv2d_forward",
    "conv2d_backward",
    "tconv2d_forward",
    "tconv2d_backward",
    "maxpool2_forward",
    "maxpool2_backward",
    "median_filter_u8",
    "power_argmin",
]
