"""Minimal 3-D conv network layers with explicit forward/backward passes.

All activations are 5-D tensors (B, C, T, H, W). Each layer caches what its
backward pass needs, so a backward call must follow the forward call whose
gradient it propagates. Parameter gradients accumulate into Param.grad until
zero_grad() is invoked.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import kernels


class Param:
    """One trainable tensor plus its gradient accumulator."""

    __slots__ = ("name", "data", "grad", "kind")

    def __init__(self, name: str, data: np.ndarray, kind: str):
        self.name = name
        self.data = data
        self.grad = np.zeros_like(data)
        self.kind = kind  # "weight" | "bias" | "scale" | "shift"


class Layer:
    def params(self) -> list[Param]:
        return []

    def buffers(self) -> dict[str, np.ndarray]:
        return {}


class Conv3d(Layer):
    def __init__(self, name, cin, cout, kernel, stride, pad, bias=False, dtype=np.float32):
        self.name = name
        self.cin, self.cout = cin, cout
        self.kernel, self.stride, self.pad = tuple(kernel), tuple(stride), tuple(pad)
        k = kernel[0] * kernel[1] * kernel[2]
        self.w = Param(f"{name}.w", np.zeros((cout, cin) + self.kernel, dtype=dtype), "weight")
        self.b = Param(f"{name}.b", np.zeros(cout, dtype=dtype), "bias") if bias else None
        self._cache = None

    def params(self):
        return [self.w] + ([self.b] if self.b is not None else [])

    def output_shape(self, in_thw):
        return kernels.conv_output_shape(in_thw, self.kernel, self.stride, self.pad)

    def forward(self, x, train=True):
        if x.shape[1] != self.cin:
            raise ShapeError(f"{self.name}: expected {self.cin} input channels, got {x.shape[1]}")
        b = x.shape[0]
        out_thw = self.output_shape(x.shape[2:])
        cols = kernels.vol2col(x, self.kernel, self.stride, self.pad)
        w2 = self.w.data.reshape(self.cout, -1)
        out = np.matmul(w2, cols)
        if self.b is not None:
            out += self.b.data[:, None]
        self._cache = (cols, x.shape)
        return out.reshape((b, self.cout) + out_thw)

    def backward(self, dy, need_dx=True):
        cols, x_shape = self._cache
        b = dy.shape[0]
        g2 = dy.reshape(b, self.cout, -1)
        self.w.grad += np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(self.w.data.shape)
        if self.b is not None:
            self.b.grad += g2.sum(axis=(0, 2))
        if not need_dx:
            return None
        w2 = self.w.data.reshape(self.cout, -1)
        dcols = np.matmul(w2.T, g2)
        return kernels.col2vol(dcols, x_shape, self.kernel, self.stride, self.pad)


class ConvTranspose3d(Layer):
    def __init__(self, name, cin, cout, kernel, stride, pad, bias=False, dtype=np.float32):
        self.name = name
        self.cin, self.cout = cin, cout
        self.kernel, self.stride, self.pad = tuple(kernel), tuple(stride), tuple(pad)
        self.w = Param(f"{name}.w", np.zeros((cin, cout) + self.kernel, dtype=dtype), "weight")
        self.b = Param(f"{name}.b", np.zeros(cout, dtype=dtype), "bias") if bias else None
        self._cache = None

    def params(self):
        return [self.w] + ([self.b] if self.b is not None else [])

    def output_shape(self, in_thw):
        return tuple(
            (i - 1) * s - 2 * p + k
            for i, k, s, p in zip(in_thw, self.kernel, self.stride, self.pad)
        )

    def forward(self, x, train=True):
        if x.shape[1] != self.cin:
            raise ShapeError(f"{self.name}: expected {self.cin} input channels, got {x.shape[1]}")
        b = x.shape[0]
        out_thw = self.output_shape(x.shape[2:])
        # transposed convolution == scatter-add of weighted columns
        x2 = x.reshape(b, self.cin, -1)
        w2 = self.w.data.reshape(self.cin, -1)
        cols = np.matmul(w2.T, x2)
        out = kernels.col2vol(cols, (b, self.cout) + out_thw, self.kernel, self.stride, self.pad)
        if self.b is not None:
            out += self.b.data[None, :, None, None, None]
        self._cache = (x2, x.shape)
        return out

    def backward(self, dy, need_dx=True):
        x2, x_shape = self._cache
        b = dy.shape[0]
        dcols = kernels.vol2col(dy, self.kernel, self.stride, self.pad)
        self.w.grad += np.matmul(x2, dcols.transpose(0, 2, 1)).sum(axis=0).reshape(self.w.data.shape)
        if self.b is not None:
            self.b.grad += dy.sum(axis=(0, 2, 3, 4))
        if not need_dx:
            return None
        w2 = self.w.data.reshape(self.cin, -1)
        dx = np.matmul(w2, dcols)
        return dx.reshape(x_shape)


class BatchNorm3d(Layer):
    """Per-channel batch normalization over the (B, T, H, W) axes.

    Train mode normalizes with batch statistics and updates running statistics
    (momentum 0.1, unbiased running variance); eval mode uses the running
    statistics as constants.
    """

    def __init__(self, name, channels, momentum=0.1, eps=1e-5, dtype=np.float32):
        self.name = name
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = Param(f"{name}.gamma", np.ones(channels, dtype=dtype), "scale")
        self.beta = Param(f"{name}.beta", np.zeros(channels, dtype=dtype), "shift")
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return {f"{self.name}.running_mean": self.running_mean,
                f"{self.name}.running_var": self.running_var}

    def forward(self, x, train=True):
        if x.shape[1] != self.channels:
            raise ShapeError(f"{self.name}: expected {self.channels} channels, got {x.shape[1]}")
        axes = (0, 2, 3, 4)
        shape = (1, self.channels, 1, 1, 1)
        if train:
            n = x.shape[0] * x.shape[2] * x.shape[3] * x.shape[4]
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            ivar = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean.reshape(shape)) * ivar.reshape(shape)
            m = self.momentum
            self.running_mean += m * (mean - self.running_mean)
            unbiased = var * (n / max(n - 1, 1))
            self.running_var += m * (unbiased - self.running_var)
            self._cache = ("train", xhat, ivar, n)
        else:
            ivar = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = (x - self.running_mean.reshape(shape)) * ivar.reshape(shape)
            self._cache = ("eval", xhat, ivar, None)
        return self.gamma.data.reshape(shape) * xhat + self.beta.data.reshape(shape)

    def backward(self, dy, need_dx=True):
        mode, xhat, ivar, n = self._cache
        axes = (0, 2, 3, 4)
        shape = (1, self.channels, 1, 1, 1)
        self.beta.grad += dy.sum(axis=axes)
        self.gamma.grad += (dy * xhat).sum(axis=axes)
        if mode == "eval":
            # running statistics are constants, so the chain rule is diagonal
            if need_dx:
                return dy * (self.gamma.data * ivar).reshape(shape)
            return None
        if not need_dx:
            return None
        dxhat = dy * self.gamma.data.reshape(shape)
        mean_dxhat = dxhat.mean(axis=axes).reshape(shape)
        mean_dxhat_xhat = (dxhat * xhat).mean(axis=axes).reshape(shape)
        return ivar.reshape(shape) * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)


class ReLU(Layer):
    def forward(self, x, train=True):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy, need_dx=True):
        return dy * self._mask


class Tanh(Layer):
    """tanh squashed just inside (-1, 1) so downstream logs/denorms stay finite."""

    def __init__(self, clip_eps=1e-7):
        self.clip_eps = clip_eps

    def forward(self, x, train=True):
        t = np.tanh(x)
        bound = np.asarray(1.0 - self.clip_eps, dtype=x.dtype)
        self._t = t
        self._clipped = np.abs(t) > bound
        return np.clip(t, -bound, bound)

    def backward(self, dy, need_dx=True):
        return dy * (1.0 - self._t**2) * ~self._clipped


class Sigmoid(Layer):
    """Logistic output clamped into [eps, 1-eps]."""

    def __init__(self, clip_eps=1e-7):
        self.clip_eps = clip_eps

    def forward(self, x, train=True):
        s = 1.0 / (1.0 + np.exp(-x))
        bound = self.clip_eps
        self._s = np.clip(s, bound, 1.0 - bound)
        return self._s

    def backward(self, dy, need_dx=True):
        return dy * self._s * (1.0 - self._s)


class GlobalAvgPool(Layer):
    """Mean over (T, H, W): (B, C, T, H, W) -> (B, C)."""

    def forward(self, x, train=True):
        self._shape = x.shape
        return x.mean(axis=(2, 3, 4))

    def backward(self, dy, need_dx=True):
        b, c, t, h, w = self._shape
        return np.broadcast_to(dy[:, :, None, None, None], self._shape) / (t * h * w)


class Dense(Layer):
    def __init__(self, name, fin, fout, dtype=np.float32):
        self.name = name
        self.w = Param(f"{name}.w", np.zeros((fout, fin), dtype=dtype), "weight")
        self.b = Param(f"{name}.b", np.zeros(fout, dtype=dtype), "bias")
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train=True):
        self._cache = x
        return x @ self.w.data.T + self.b.data

    def backward(self, dy, need_dx=True):
        x = self._cache
        self.w.grad += dy.T @ x
        self.b.grad += dy.sum(axis=0)
        if not need_dx:
            return None
        return dy @ self.w.data
