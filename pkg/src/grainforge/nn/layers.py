"""Layer objects with exact analytic forward/backward passes.

All math is float64; the convolution-family inner loops are delegated to
``grainforge.kernels``. Each layer caches what its backward pass needs during
forward, so call order is forward -> backward within a step.
"""

import numpy as np

from .. import kernels

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class ConvLayer:
    """2-D convolution (cross-correlation), odd square kernel, same or valid."""

    roles = ("weight", "bias")

    def __init__(self, in_channels, out_channels, kernel, stride, padding, rng):
        fan_in = in_channels * kernel * kernel
        self.w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(out_channels, in_channels, kernel, kernel))
        self.b = np.zeros(out_channels)
        self.stride = stride
        self.padding = padding
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def forward(self, x, mode):
        if x.shape[1] != self.w.shape[1]:
            raise ValueError(f"conv expects {self.w.shape[1]} input channels, got {x.shape[1]}")
        self._x = x if mode == "train" else None
        return kernels.conv2d_forward(x, self.w, self.b, self.stride, self.padding)

    def backward(self, dy, need_dx=True):
        dx, self.dw, self.db = kernels.conv2d_backward(
            self._x, self.w, dy, self.stride, self.padding, need_dx
        )
        return dx

    def params(self):
        return [("weight", self.w, self.dw), ("bias", self.b, self.db)]

    def state(self):
        return {"weight": self.w, "bias": self.b}


class TConvLayer:
    """Transposed convolution, kernel 2x2 stride 2: exact 2x upsampling."""

    roles = ("weight", "bias")

    def __init__(self, in_channels, out_channels, rng):
        fan_in = in_channels * 4
        self.w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(in_channels, out_channels, 2, 2))
        self.b = np.zeros(out_channels)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def forward(self, x, mode):
        if x.shape[1] != self.w.shape[0]:
            raise ValueError(f"tconv expects {self.w.shape[0]} input channels, got {x.shape[1]}")
        self._x = x if mode == "train" else None
        return kernels.tconv2d_forward(x, self.w, self.b)

    def backward(self, dy):
        dx, self.dw, self.db = kernels.tconv2d_backward(self._x, self.w, dy)
        return dx

    def params(self):
        return [("weight", self.w, self.dw), ("bias", self.b, self.db)]

    def state(self):
        return {"weight": self.w, "bias": self.b}


class MaxPoolLayer:
    """2x2 max pooling, stride 2; ties go to the first window position."""

    roles = ()

    def forward(self, x, mode):
        if x.shape[2] % 2 or x.shape[3] % 2:
            raise ValueError(f"maxpool needs even spatial dims, got {x.shape[2]}x{x.shape[3]}")
        y, self._idx = kernels.maxpool2_forward(x)
        return y

    def backward(self, dy):
        return kernels.maxpool2_backward(dy, self._idx)

    def params(self):
        return []

    def state(self):
        return {}


class BatchNormLayer:
    """Per-channel batch normalization with running statistics.

    Normalization uses the biased batch variance; running stats store the same
    quantity, so setting running stats equal to batch stats makes infer mode
    reproduce train mode exactly.
    """

    roles = ("gamma", "beta", "running_mean", "running_var")

    def __init__(self, channels):
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.dgamma = np.zeros(channels)
        self.dbeta = np.zeros(channels)

    def forward(self, x, mode):
        if mode == "train":
            n, c, h, w = x.shape
            if n * h * w < 2:
                raise ValueError("batch statistics need at least 2 samples per channel")
            mu = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.running_mean = (1 - BN_MOMENTUM) * self.running_mean + BN_MOMENTUM * mu
            self.running_var = (1 - BN_MOMENTUM) * self.running_var + BN_MOMENTUM * var
        else:
            mu = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x - mu[None, :, None, None]) * inv_std[None, :, None, None]
        self._xhat = xhat
        self._inv_std = inv_std
        self._mode = mode
        return self.gamma[None, :, None, None] * xhat + self.beta[None, :, None, None]

    def backward(self, dy):
        xhat = self._xhat
        self.dbeta = dy.sum(axis=(0, 2, 3))
        self.dgamma = (dy * xhat).sum(axis=(0, 2, 3))
        g = self.gamma[None, :, None, None] * self._inv_std[None, :, None, None]
        if self._mode != "train":
            return dy * g
        n, c, h, w = dy.shape
        m = n * h * w
        sum_dy = dy.sum(axis=(0, 2, 3))[None, :, None, None]
        sum_dy_xhat = (dy * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
        return g * (dy - sum_dy / m - xhat * sum_dy_xhat / m)

    def params(self):
        return [("gamma", self.gamma, self.dgamma), ("beta", self.beta, self.dbeta)]

    def state(self):
        return {
            "gamma": self.gamma,
            "beta": self.beta,
            "running_mean": self.running_mean,
            "running_var": self.running_var,
        }


class ReLULayer:
    roles = ()

    def forward(self, x, mode):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask

    def params(self):
        return []

    def state(self):
        return {}


class SigmoidLayer:
    roles = ()

    def forward(self, x, mode):
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self._out = out
        return out

    def backward(self, dy):
        return dy * self._out * (1.0 - self._out)

    def params(self):
        return []

    def state(self):
        return {}
