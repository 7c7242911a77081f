"""Neural-network layers with explicit forward/backward passes.

Layers operate on batches: feature maps are (N, H, W, C), vectors are (N, D).
Each backward consumes the cache left by the matching forward and returns the
input gradient while accumulating parameter gradients in place. Convolution
is stride-1 valid (no padding); pooling is 2x2 stride 2 with trailing odd
rows/columns dropped.
"""

from __future__ import annotations

import numpy as np

from .rng import SeededRng


class ShapeMismatch(Exception):
    pass


class InvalidRate(Exception):
    pass


class Parameter:
    """Trainable tensor with its gradient and lazily-created Adam state."""

    def __init__(self, value: np.ndarray):
        self.value = value
        self.grad = np.zeros_like(value)
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None

    def zero_grad(self) -> None:
        self.grad[...] = 0


def he_normal(shape: tuple, fan_in: int, rng: SeededRng, dtype=np.float32) -> np.ndarray:
    """Gaussian init with std sqrt(2/fan_in), suited to layers feeding ReLU."""
    std = np.sqrt(2.0 / fan_in)
    return (rng.normal(int(np.prod(shape))) * std).reshape(shape).astype(dtype)


def glorot_uniform(shape: tuple, fan_in: int, fan_out: int, rng: SeededRng,
                   dtype=np.float32) -> np.ndarray:
    """Uniform init on [-limit, limit], limit sqrt(6/(fan_in+fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    draws = rng.uniform(int(np.prod(shape))) * 2.0 - 1.0
    return (draws * limit).reshape(shape).astype(dtype)


class Layer:
    def forward(self, x: np.ndarray, train: bool = False,
                rng: SeededRng | None = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[Parameter]:
        return []

    def describe(self) -> str:
        raise NotImplementedError


def _as_batch(x: np.ndarray, rank: int) -> tuple[np.ndarray, bool]:
    """Promote a single example to a batch of one."""
    if x.ndim == rank:
        return x[None, ...], True
    if x.ndim == rank + 1:
        return x, False
    raise ShapeMismatch(f"expected rank {rank} or {rank + 1} input, got shape {x.shape}")


class Conv2D(Layer):
    """Stride-1 valid 2-D convolution, weights (Kh, Kw, C, F)."""

    def __init__(self, kh: int, kw: int, in_channels: int, filters: int,
                 rng: SeededRng, dtype=np.float32):
        fan_in = kh * kw * in_channels
        self.weight = Parameter(he_normal((kh, kw, in_channels, filters), fan_in, rng, dtype))
        self.bias = Parameter(np.zeros(filters, dtype=dtype))
        self.kh, self.kw = kh, kw
        self.in_channels, self.filters = in_channels, filters
        self._cols = None
        self._x_shape = None
        self._squeeze = False

    def params(self):
        return [self.weight, self.bias]

    def describe(self):
        return f"conv {self.filters}@{self.kh}x{self.kw}"

    def _im2col(self, x: np.ndarray) -> np.ndarray:
        # (N, H, W, C) -> (N, OH, OW, C, Kh, Kw) windows -> rows of Kh*Kw*C
        windows = np.lib.stride_tricks.sliding_window_view(x, (self.kh, self.kw), axis=(1, 2))
        return np.ascontiguousarray(windows.transpose(0, 1, 2, 4, 5, 3))

    def forward(self, x, train=False, rng=None):
        x, self._squeeze = _as_batch(x, 3)
        n, h, w, c = x.shape
        if c != self.in_channels:
            raise ShapeMismatch(f"expected {self.in_channels} channels, got {c}")
        if h < self.kh or w < self.kw:
            raise ShapeMismatch(f"input {h}x{w} smaller than kernel {self.kh}x{self.kw}")
        cols = self._im2col(x)
        oh, ow = cols.shape[1], cols.shape[2]
        flat = cols.reshape(n * oh * ow, -1)
        out = flat @ self.weight.value.reshape(-1, self.filters) + self.bias.value
        out = out.reshape(n, oh, ow, self.filters)
        self._cols = flat
        self._x_shape = x.shape
        self._out_hw = (oh, ow)
        return out[0] if self._squeeze else out

    def backward(self, grad):
        grad, _ = _as_batch(grad, 3)
        n, h, w, c = self._x_shape
        oh, ow = self._out_hw
        gflat = grad.reshape(n * oh * ow, self.filters)
        self.weight.grad += (self._cols.T @ gflat).reshape(self.weight.value.shape)
        self.bias.grad += gflat.sum(axis=0)
        dcols = (gflat @ self.weight.value.reshape(-1, self.filters).T)
        dcols = dcols.reshape(n, oh, ow, self.kh, self.kw, c)
        dx = np.zeros(self._x_shape, dtype=grad.dtype)
        for a in range(self.kh):
            for b in range(self.kw):
                dx[:, a : a + oh, b : b + ow, :] += dcols[:, :, :, a, b, :]
        return dx[0] if self._squeeze else dx


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def describe(self):
        return "relu"

    def forward(self, x, train=False, rng=None):
        self._mask = x > 0  # subgradient 0 at exactly 0
        return np.where(self._mask, x, 0)

    def backward(self, grad):
        return np.where(self._mask, grad, 0)

    def kink_signature(self) -> bytes:
        return self._mask.tobytes()


class MaxPool2D(Layer):
    """2x2 max pooling, stride 2; ties go to the first window element in row-major order."""

    def __init__(self):
        self._argmax = None

    def describe(self):
        return "maxpool 2x2"

    def forward(self, x, train=False, rng=None):
        x, self._squeeze = _as_batch(x, 3)
        n, h, w, c = x.shape
        if h < 2 or w < 2:
            raise ShapeMismatch(f"input {h}x{w} too small for 2x2 pooling")
        oh, ow = h // 2, w // 2
        trimmed = x[:, : oh * 2, : ow * 2, :]
        windows = (trimmed.reshape(n, oh, 2, ow, 2, c)
                   .transpose(0, 1, 3, 2, 4, 5)
                   .reshape(n, oh, ow, 4, c))
        self._argmax = windows.argmax(axis=3)
        self._x_shape = x.shape
        out = np.take_along_axis(windows, self._argmax[:, :, :, None, :], axis=3)[:, :, :, 0, :]
        return out[0] if self._squeeze else out

    def backward(self, grad):
        grad, _ = _as_batch(grad, 3)
        n, h, w, c = self._x_shape
        oh, ow = grad.shape[1], grad.shape[2]
        scatter = np.zeros((n, oh, ow, 4, c), dtype=grad.dtype)
        np.put_along_axis(scatter, self._argmax[:, :, :, None, :], grad[:, :, :, None, :], axis=3)
        dx = np.zeros(self._x_shape, dtype=grad.dtype)
        dx[:, : oh * 2, : ow * 2, :] = (scatter.reshape(n, oh, ow, 2, 2, c)
                                        .transpose(0, 1, 3, 2, 4, 5)
                                        .reshape(n, oh * 2, ow * 2, c))
        return dx[0] if self._squeeze else dx

    def kink_signature(self) -> bytes:
        return self._argmax.tobytes()


class Dropout(Layer):
    """Inverted dropout: survivors scale by 1/(1-rate) so Eval is the identity."""

    def __init__(self, rate: float):
        if not 0 <= rate < 1:
            raise InvalidRate(f"rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def describe(self):
        return f"dropout {self.rate}"

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("train-mode dropout needs an rng")
        keep = rng.uniform(x.size).reshape(x.shape) >= self.rate
        self._mask = keep.astype(x.dtype) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, grad):
        if self._mask is None:
            return grad
        return grad * self._mask


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def describe(self):
        return "flatten"

    def forward(self, x, train=False, rng=None):
        self._shape = x.shape
        return np.ascontiguousarray(x).reshape(x.shape[0], -1) if x.ndim == 4 \
            else np.ascontiguousarray(x).reshape(-1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Dense(Layer):
    """Affine map y = xW + b, weights (n, m)."""

    def __init__(self, n: int, m: int, rng: SeededRng, init: str = "he", dtype=np.float32):
        if init == "he":
            w = he_normal((n, m), n, rng, dtype)
        elif init == "glorot":
            w = glorot_uniform((n, m), n, m, rng, dtype)
        else:
            raise ValueError(f"unknown init {init!r}")
        self.weight = Parameter(w)
        self.bias = Parameter(np.zeros(m, dtype=dtype))
        self.n, self.m = n, m
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def describe(self):
        return f"dense {self.m}"

    def forward(self, x, train=False, rng=None):
        x, self._squeeze = _as_batch(x, 1)
        if x.shape[1] != self.n:
            raise ShapeMismatch(f"expected width {self.n}, got {x.shape[1]}")
        self._x = x
        out = x @ self.weight.value + self.bias.value
        return out[0] if self._squeeze else out

    def backward(self, grad):
        grad, _ = _as_batch(grad, 1)
        self.weight.grad += self._x.T @ grad
        self.bias.grad += grad.sum(axis=0)
        dx = grad @ self.weight.value.T
        return dx[0] if self._squeeze else dx


class Softmax(Layer):
    """Terminal probability layer. Training fuses this with the loss; see loss.py."""

    def describe(self):
        return "softmax"

    def forward(self, x, train=False, rng=None):
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
