"""Backend dispatch for the packing kernels.

At import time the compiled Cython extension is used when present; otherwise
the pure-NumPy implementation. Override with CHRONOCHROMA_KERNELS=numpy (or
=cython to fail loudly when the extension is missing), or programmatically via
set_backend(). Both backends are exact: they produce bit-identical tensors.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_np

try:
    from . import _kernels_cy
except ImportError:
    _kernels_cy = None

_env = os.environ.get("CHRONOCHROMA_KERNELS", "auto").lower()
if _env == "numpy":
    _backend = "numpy"
elif _env == "cython":
    if _kernels_cy is None:
        raise ImportError(
            "CHRONOCHROMA_KERNELS=cython but the compiled extension is not built"
        )
    _backend = "cython"
else:
    _backend = "cython" if _kernels_cy is not None else "numpy"


def backend_name() -> str:
    return _backend


def has_cython() -> bool:
    return _kernels_cy is not None


def set_backend(name: str) -> None:
    """Switch kernel backend ('cython' or 'numpy'); used by tests/benchmarks."""
    global _backend
    if name not in ("cython", "numpy"):
        raise ValueError(f"unknown kernel backend {name!r}")
    if name == "cython" and _kernels_cy is None:
        raise RuntimeError("compiled kernel extension is not available")
    _backend = name


def conv_output_shape(in_shape, kernel, stride, pad) -> tuple[int, int, int]:
    """(To, Ho, Wo) of a strided convolution over (T, H, W)."""
    return tuple(
        (i + 2 * p - k) // s + 1 for i, k, s, p in zip(in_shape, kernel, stride, pad)
    )


def vol2col(x: np.ndarray, kernel, stride, pad) -> np.ndarray:
    """Pack sliding 3-D windows of x (B, C, T, H, W) into (B, C*K, L) columns."""
    if _backend == "numpy" or x.dtype not in (np.float32, np.float64):
        return _kernels_np.vol2col(x, kernel, stride, pad)
    b, c = x.shape[:2]
    to, ho, wo = conv_output_shape(x.shape[2:], kernel, stride, pad)
    k = kernel[0] * kernel[1] * kernel[2]
    cols = np.empty((b, c * k, to * ho * wo), dtype=x.dtype)
    _kernels_cy.vol2col(np.ascontiguousarray(x), *kernel, *stride, *pad, cols)
    return cols


def col2vol(cols: np.ndarray, vol_shape, kernel, stride, pad) -> np.ndarray:
    """Adjoint of vol2col: scatter-add (B, C*K, L) columns back to (B, C, T, H, W)."""
    if _backend == "numpy" or cols.dtype not in (np.float32, np.float64):
        return _kernels_np.col2vol(cols, vol_shape, kernel, stride, pad)
    x = np.zeros(vol_shape, dtype=cols.dtype)
    _kernels_cy.col2vol(np.ascontiguousarray(cols), *kernel, *stride, *pad, x)
    return x
