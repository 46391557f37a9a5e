"""Dense-tensor layers with hand-written backward passes.

Activations flow as plain float64 numpy arrays with the batch on axis 0.
Images use ``(N, C, H, W)``. Trainable arrays are wrapped in
:class:`Parameter`, which carries the accumulated gradient.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Parameter:
    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


class Layer:
    name = "layer"

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> list:
        return []

    def __call__(self, x, training: bool = False):
        return self.forward(x, training)

    def _need(self, cache):
        if cache is None:
            raise RuntimeError(f"{type(self).__name__}.backward called before forward")
        return cache


def _uniform_init(rng, fan_in, shape):
    # same bound for weights and biases, as in the common torch defaults
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int, rng=None, name: str = "dense"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_features = in_features
        self.out_features = out_features
        self.name = name
        self.weight = Parameter(f"{name}.weight", _uniform_init(rng, in_features, (out_features, in_features)))
        self.bias = Parameter(f"{name}.bias", _uniform_init(rng, in_features, out_features))
        self._x = None

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ValueError(f"{self.name}: expected (N, {self.in_features}), got {x.shape}")
        self._x = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, grad):
        x = self._need(self._x)
        self.weight.grad += grad.T @ x
        self.bias.grad += grad.sum(axis=0)
        return grad @ self.weight.value

    def parameters(self):
        return [self.weight, self.bias]


class ReLU(Layer):
    name = "relu"

    def __init__(self):
        self._mask = None

    def forward(self, x, training=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad):
        return grad * self._need(self._mask)


class Sigmoid(Layer):
    name = "sigmoid"

    def __init__(self):
        self._y = None

    def forward(self, x, training=False):
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        self._y = y
        return y

    def backward(self, grad):
        y = self._need(self._y)
        return grad * y * (1.0 - y)


class Dropout(Layer):
    """Inverted dropout: kept units are scaled by 1/(1-p) while training."""

    def __init__(self, p: float = 0.25, rng=None):
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.p = p
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self._mask = None

    def forward(self, x, training=False):
        if not training or self.p == 0.0:
            self._mask = np.ones_like(x)
            return x
        self._mask = (self.rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * self._mask

    def backward(self, grad):
        return grad * self._need(self._mask)


class Flatten(Layer):
    name = "flatten"

    def __init__(self):
        self._shape = None

    def forward(self, x, training=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._need(self._shape))


class Reshape(Layer):
    def __init__(self, *shape):
        self.shape = tuple(shape)
        self._in = None

    def forward(self, x, training=False):
        self._in = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, grad):
        return grad.reshape(self._need(self._in))


class BatchNorm(Layer):
    """Normalizes over every axis except the feature/channel axis 1."""

    def __init__(self, features: int, momentum: float = 0.1, eps: float = 1e-5, name: str = "bn"):
        self.features = features
        self.momentum = momentum
        self.eps = eps
        self.name = name
        self.gamma = Parameter(f"{name}.gamma", np.ones(features))
        self.beta = Parameter(f"{name}.beta", np.zeros(features))
        self.running_mean = np.zeros(features)
        self.running_var = np.ones(features)
        self._cache = None

    def _bshape(self, x):
        return (1, self.features) + (1,) * (x.ndim - 2)

    def forward(self, x, training=False):
        if x.shape[1] != self.features:
            raise ValueError(f"{self.name}: expected {self.features} features, got {x.shape[1]}")
        axes = (0,) + tuple(range(2, x.ndim))
        bs = self._bshape(x)
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            count = x.size // self.features
            unbiased = var * count / max(count - 1, 1)
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * unbiased
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(bs)) * inv_std.reshape(bs)
        self._cache = (xhat, inv_std, training, axes, bs)
        return self.gamma.value.reshape(bs) * xhat + self.beta.value.reshape(bs)

    def backward(self, grad):
        xhat, inv_std, training, axes, bs = self._need(self._cache)
        self.gamma.grad += (grad * xhat).sum(axis=axes)
        self.beta.grad += grad.sum(axis=axes)
        g = grad * self.gamma.value.reshape(bs)
        if not training:
            return g * inv_std.reshape(bs)
        m = grad.size // self.features
        return (
            inv_std.reshape(bs)
            / m
            * (m * g - g.sum(axis=axes).reshape(bs) - xhat * (g * xhat).sum(axis=axes).reshape(bs))
        )

    def parameters(self):
        return [self.gamma, self.beta]


class Conv2D(Layer):
    """Stride-1 convolution (cross-correlation) with zero padding."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, padding: int = 0, rng=None, name: str = "conv"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_ch, self.out_ch, self.kernel, self.padding = in_ch, out_ch, kernel, padding
        self.name = name
        fan_in = in_ch * kernel * kernel
        self.weight = Parameter(f"{name}.weight", _uniform_init(rng, fan_in, (out_ch, in_ch, kernel, kernel)))
        self.bias = Parameter(f"{name}.bias", _uniform_init(rng, fan_in, out_ch))
        self._cache = None

    def forward(self, x, training=False):
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise ValueError(f"{self.name}: expected (N, {self.in_ch}, H, W), got {x.shape}")
        p, k = self.padding, self.kernel
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        win = sliding_window_view(xp, (k, k), axis=(2, 3))  # N, C, Ho, Wo, k, k
        out = np.einsum("nchwij,ocij->nohw", win, self.weight.value, optimize=True)
        out += self.bias.value[None, :, None, None]
        self._cache = (x.shape, xp, win)
        return out

    def backward(self, grad):
        shape, xp, win = self._need(self._cache)
        k, p = self.kernel, self.padding
        self.weight.grad += np.einsum("nchwij,nohw->ocij", win, grad, optimize=True)
        self.bias.grad += grad.sum(axis=(0, 2, 3))
        dxp = np.zeros_like(xp)
        ho, wo = grad.shape[2], grad.shape[3]
        for i in range(k):
            for j in range(k):
                dxp[:, :, i : i + ho, j : j + wo] += np.einsum(
                    "nohw,oc->nchw", grad, self.weight.value[:, :, i, j], optimize=True
                )
        if p:
            return dxp[:, :, p:-p, p:-p]
        return dxp

    def parameters(self):
        return [self.weight, self.bias]


class TransposeConv2D(Layer):
    """Transposed convolution; output side is ``(H-1)*stride - 2*padding + kernel``."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int = 1, padding: int = 0, rng=None, name: str = "tconv"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_ch, self.out_ch, self.kernel = in_ch, out_ch, kernel
        self.stride, self.padding = stride, padding
        self.name = name
        fan_in = out_ch * kernel * kernel
        self.weight = Parameter(f"{name}.weight", _uniform_init(rng, fan_in, (in_ch, out_ch, kernel, kernel)))
        self.bias = Parameter(f"{name}.bias", _uniform_init(rng, fan_in, out_ch))
        self._x = None

    def forward(self, x, training=False):
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise ValueError(f"{self.name}: expected (N, {self.in_ch}, H, W), got {x.shape}")
        n, _, h, w = x.shape
        s, k, p = self.stride, self.kernel, self.padding
        hf, wf = (h - 1) * s + k, (w - 1) * s + k
        full = np.zeros((n, self.out_ch, hf, wf))
        for i in range(k):
            for j in range(k):
                full[:, :, i : i + s * (h - 1) + 1 : s, j : j + s * (w - 1) + 1 : s] += np.einsum(
                    "nchw,cd->ndhw", x, self.weight.value[:, :, i, j], optimize=True
                )
        self._x = x
        out = full[:, :, p : hf - p, p : wf - p] if p else full
        return out + self.bias.value[None, :, None, None]

    def backward(self, grad):
        x = self._need(self._x)
        n, _, h, w = x.shape
        s, k, p = self.stride, self.kernel, self.padding
        hf, wf = (h - 1) * s + k, (w - 1) * s + k
        self.bias.grad += grad.sum(axis=(0, 2, 3))
        full = np.zeros((n, self.out_ch, hf, wf))
        if p:
            full[:, :, p : hf - p, p : wf - p] = grad
        else:
            full = grad
        dx = np.zeros_like(x)
        for i in range(k):
            for j in range(k):
                g = full[:, :, i : i + s * (h - 1) + 1 : s, j : j + s * (w - 1) + 1 : s]
                dx += np.einsum("ndhw,cd->nchw", g, self.weight.value[:, :, i, j], optimize=True)
                self.weight.grad[:, :, i, j] += np.einsum("nchw,ndhw->cd", x, g, optimize=True)
        return dx

    def parameters(self):
        return [self.weight, self.bias]


class MaxPool2D(Layer):
    """2x2 max pooling with stride 2 (odd trailing rows/cols are dropped)."""

    name = "maxpool"

    def __init__(self, kernel: int = 2):
        if kernel != 2:
            raise ValueError("only 2x2 pooling with stride 2 is supported")
        self._cache = None

    def forward(self, x, training=False):
        n, c, h, w = x.shape
        h2, w2 = h // 2, w // 2
        blocks = x[:, :, : 2 * h2, : 2 * w2].reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5)
        flat = blocks.reshape(n, c, h2, w2, 4)
        arg = flat.argmax(axis=-1)
        self._cache = (x.shape, arg)
        return np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        shape, arg = self._need(self._cache)
        n, c, h, w = shape
        h2, w2 = h // 2, w // 2
        flat = np.zeros((n, c, h2, w2, 4))
        np.put_along_axis(flat, arg[..., None], grad[..., None], axis=-1)
        blocks = flat.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * h2, 2 * w2)
        dx = np.zeros(shape)
        dx[:, :, : 2 * h2, : 2 * w2] = blocks
        return dx


class Upsample2D(Layer):
    """Nearest-neighbour upsampling by an integer factor."""

    def __init__(self, factor: int = 2):
        self.factor = factor
        self._shape = None

    def forward(self, x, training=False):
        self._shape = x.shape
        f = self.factor
        return x.repeat(f, axis=2).repeat(f, axis=3)

    def backward(self, grad):
        n, c, h, w = self._need(self._shape)
        f = self.factor
        return grad.reshape(n, c, h, f, w, f).sum(axis=(3, 5))


class Sequential(Layer):
    def __init__(self, layers=(), name: str = "seq"):
        self.layers = list(layers)
        self.name = name

    def forward(self, x, training=False):
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)


class Residual(Layer):
    """``main(x) + skip(x)``."""

    def __init__(self, main: Layer, skip: Layer):
        self.main = main
        self.skip = skip

    def forward(self, x, training=False):
        return self.main.forward(x, training) + self.skip.forward(x, training)

    def backward(self, grad):
        return self.main.backward(grad) + self.skip.backward(grad)

    def parameters(self):
        return self.main.parameters() + self.skip.parameters()


def layer_forward(layer: Layer, x, training: bool = False):
    return layer.forward(np.asarray(x, dtype=np.float64), training)


def layer_backward(layer: Layer, upstream_grad):
    return layer.backward(np.asarray(upstream_grad, dtype=np.float64))


def count_parameters(layer: Layer) -> int:
    return int(sum(p.value.size for p in layer.parameters()))
