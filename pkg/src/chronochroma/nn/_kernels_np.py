"""Pure-NumPy packing kernels: the fallback backend.

vol2col flattens sliding (time, height, width) windows of a 5-D activation
tensor into a GEMM-ready matrix; col2vol is its exact adjoint (a scatter-add),
which is both the convolution input-gradient and the transposed-convolution
forward primitive. Accumulation order matches the compiled backend so the two
produce bit-identical results.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def vol2col(x: np.ndarray, kernel, stride, pad) -> np.ndarray:
    b, c, t, h, w = x.shape
    kt, kh, kw = kernel
    st, sh, sw = stride
    pt, ph, pw = pad
    to = (t + 2 * pt - kt) // st + 1
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (w + 2 * pw - kw) // sw + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pt), (ph, ph), (pw, pw)))
    win = sliding_window_view(xp, (kt, kh, kw), axis=(2, 3, 4))
    win = win[:, :, ::st, ::sh, ::sw][:, :, :to, :ho, :wo]
    cols = win.transpose(0, 1, 5, 6, 7, 2, 3, 4)
    return cols.reshape(b, c * kt * kh * kw, to * ho * wo).copy()


def col2vol(cols: np.ndarray, vol_shape, kernel, stride, pad) -> np.ndarray:
    b, c, t, h, w = vol_shape
    kt, kh, kw = kernel
    st, sh, sw = stride
    pt, ph, pw = pad
    to = (t + 2 * pt - kt) // st + 1
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (w + 2 * pw - kw) // sw + 1
    cols6 = cols.reshape(b, c, kt, kh, kw, to, ho, wo)
    xp = np.zeros((b, c, t + 2 * pt, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    for it in range(kt):
        for ih in range(kh):
            for iw in range(kw):
                xp[
                    :,
                    :,
                    it : it + to * st : st,
                    ih : ih + ho * sh : sh,
                    iw : iw + wo * sw : sw,
                ] += cols6[:, :, it, ih, iw]
    return xp[:, :, pt : pt + t, ph : ph + h, pw : pw + w].copy()
