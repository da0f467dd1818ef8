# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled packing kernels for the 3-D convolution hot path.

Same contracts and accumulation order as _kernels_np, so both backends
produce bit-identical tensors.
"""
import numpy as np

ctypedef fused floating:
    float
    double


def vol2col(floating[:, :, :, :, ::1] x,
            int kt, int kh, int kw,
            int st, int sh, int sw,
            int pt, int ph, int pw,
            floating[:, :, ::1] cols):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t t = x.shape[2], h = x.shape[3], w = x.shape[4]
    cdef Py_ssize_t to = (t + 2 * pt - kt) // st + 1
    cdef Py_ssize_t ho = (h + 2 * ph - kh) // sh + 1
    cdef Py_ssize_t wo = (w + 2 * pw - kw) // sw + 1
    cdef Py_ssize_t ib, ic, it, ih, iw, ot, oh, ow, row, col
    cdef Py_ssize_t tt, hh, ww
    cdef floating v

    with nogil:
        for ib in range(b):
            for ic in range(c):
                for it in range(kt):
                    for ih in range(kh):
                        for iw in range(kw):
                            row = ((ic * kt + it) * kh + ih) * kw + iw
                            for ot in range(to):
                                tt = ot * st - pt + it
                                for oh in range(ho):
                                    hh = oh * sh - ph + ih
                                    for ow in range(wo):
                                        ww = ow * sw - pw + iw
                                        col = (ot * ho + oh) * wo + ow
                                        if 0 <= tt < t and 0 <= hh < h and 0 <= ww < w:
                                            v = x[ib, ic, tt, hh, ww]
                                        else:
                                            v = 0
                                        cols[ib, row, col] = v


def col2vol(floating[:, :, ::1] cols,
            int kt, int kh, int kw,
            int st, int sh, int sw,
            int pt, int ph, int pw,
            floating[:, :, :, :, ::1] x):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t t = x.shape[2], h = x.shape[3], w = x.shape[4]
    cdef Py_ssize_t to = (t + 2 * pt - kt) // st + 1
    cdef Py_ssize_t ho = (h + 2 * ph - kh) // sh + 1
    cdef Py_ssize_t wo = (w + 2 * pw - kw) // sw + 1
    cdef Py_ssize_t ib, ic, it, ih, iw, ot, oh, ow, row, col
    cdef Py_ssize_t tt, hh, ww

    with nogil:
        for ib in range(b):
            for ic in range(c):
                for it in range(kt):
                    for ih in range(kh):
                        for iw in range(kw):
                            row = ((ic * kt + it) * kh + ih) * kw + iw
                            for ot in range(to):
                                tt = ot * st - pt + it
                                if tt < 0 or tt >= t:
                                    continue
                                for oh in range(ho):
                                    hh = oh * sh - ph + ih
                                    if hh < 0 or hh >= h:
                                        continue
                                    for ow in range(wo):
                                        ww = ow * sw - pw + iw
                                        if 0 <= ww < w:
                                            col = (ot * ho + oh) * wo + ow
                                            x[ib, ic, tt, hh, ww] += cols[ib, row, col]
