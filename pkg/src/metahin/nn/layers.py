"""Neural-net layers with analytic forward/backward passes, NHWC layout.

Every layer caches what its backward pass needs during forward; training is
single-threaded over batches so the caches are safe. Layers with kinks
(ReLU, pooling) expose their switch state (masks / argmax indices) so the
gradient checker can exclude parameters whose perturbation flips a kink.
"""

from __future__ import annotations

import numpy as np


class Layer:
    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[np.ndarray]:
        """Trainable arrays, updated in place by the optimizer."""
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def state(self) -> list[np.ndarray]:
        """All persistent arrays (trainable plus buffers), for serialization."""
        return self.params()

    def switch_state(self) -> np.ndarray | None:
        return None

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        raise NotImplementedError


def _window_cols(
    x: np.ndarray, kh: int, kw: int, stride: int, ph: int, pw: int, pad_value: float
) -> tuple[np.ndarray, int, int]:
    """(N, OH, OW, kh, kw, C) view-copy of all sliding windows."""
    n, h, w, c = x.shape
    xp = np.pad(
        x, ((0, 0), (ph, ph), (pw, pw), (0, 0)), constant_values=pad_value
    )
    oh = (h + 2 * ph - kh) // stride + 1
    ow = (w + 2 * pw - kw) // stride + 1
    cols = np.empty((n, oh, ow, kh, kw, c), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, :, i, j, :] = xp[
                :, i : i + stride * oh : stride, j : j + stride * ow : stride, :
            ]
    return cols, oh, ow


class Conv2D(Layer):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        stride: int = 1,
        rng: np.random.Generator | None = None,
        dtype=np.float64,
    ) -> None:
        self.kernel = kernel
        self.stride = stride
        self.pad = (kernel - 1) // 2  # same-padding for odd kernels, stride 1
        fan_in = kernel * kernel * in_channels
        rng = rng or np.random.default_rng(0)
        self.weight = (rng.standard_normal((kernel, kernel, in_channels, out_channels))
                       * np.sqrt(2.0 / fan_in)).astype(dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)
        self.d_weight = np.zeros_like(self.weight)
        self.d_bias = np.zeros_like(self.bias)
        self._cols: np.ndarray | None = None
        self._x_shape: tuple[int, ...] | None = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        cols, oh, ow = _window_cols(
            x, self.kernel, self.kernel, self.stride, self.pad, self.pad, 0.0
        )
        n = x.shape[0]
        flat = cols.reshape(n * oh * ow, -1)
        out = flat @ self.weight.reshape(-1, self.weight.shape[-1]) + self.bias
        self._cols = cols
        self._x_shape = x.shape
        return out.reshape(n, oh, ow, -1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        assert self._cols is not None and self._x_shape is not None
        n, oh, ow, f = dout.shape
        dflat = dout.reshape(n * oh * ow, f)
        cols_flat = self._cols.reshape(n * oh * ow, -1)
        self.d_weight[...] = (cols_flat.T @ dflat).reshape(self.weight.shape)
        self.d_bias[...] = dflat.sum(axis=0)
        dcols = (dflat @ self.weight.reshape(-1, f).T).reshape(self._cols.shape)
        _, h, w, c = self._x_shape
        s, p, k = self.stride, self.pad, self.kernel
        dxp = np.zeros((n, h + 2 * p, w + 2 * p, c), dtype=dout.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, i : i + s * oh : s, j : j + s * ow : s, :] += dcols[
                    :, :, :, i, j, :
                ]
        return dxp[:, p : p + h, p : p + w, :]

    def params(self) -> list[np.ndarray]:
        return [self.weight, self.bias]

    def grads(self) -> list[np.ndarray]:
        return [self.d_weight, self.d_bias]

    def out_shape(self, in_shape):
        h, w, _ = in_shape
        oh = (h + 2 * self.pad - self.kernel) // self.stride + 1
        ow = (w + 2 * self.pad - self.kernel) // self.stride + 1
        return (oh, ow, self.weight.shape[-1])


class BatchNorm(Layer):
    """Per-channel normalization over (batch, height, width); training mode
    uses batch statistics, inference the running averages."""

    def __init__(self, channels: int, momentum: float = 0.1,
                 eps: float = 1e-9, dtype=np.float64) -> None:
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.d_gamma = np.zeros_like(self.gamma)
        self.d_beta = np.zeros_like(self.beta)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps
        self._cache: tuple | None = None
        self.last_normalized: np.ndarray | None = None

    def _axes(self, x: np.ndarray) -> tuple[int, ...]:
        return tuple(range(x.ndim - 1))

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        axes = self._axes(x)
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.running_mean[...] = (1 - m) * self.running_mean + m * mean
            self.running_var[...] = (1 - m) * self.running_var + m * var
        else:
            mean = self.running_mean
            var = self.running_var
        ivar = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * ivar
        if training:
            self._cache = (xhat, ivar)
            self.last_normalized = xhat
        return self.gamma * xhat + self.beta

    def backward(self, dout: np.ndarray) -> np.ndarray:
        assert self._cache is not None
        xhat, ivar = self._cache
        axes = self._axes(dout)
        m = float(np.prod([dout.shape[a] for a in axes]))
        self.d_gamma[...] = (dout * xhat).sum(axis=axes)
        self.d_beta[...] = dout.sum(axis=axes)
        dxhat = dout * self.gamma
        dx = (
            dxhat
            - dxhat.mean(axis=axes)
            - xhat * (dxhat * xhat).sum(axis=axes) / m
        ) * ivar
        return dx

    def params(self) -> list[np.ndarray]:
        return [self.gamma, self.beta]

    def grads(self) -> list[np.ndarray]:
        return [self.d_gamma, self.d_beta]

    def state(self) -> list[np.ndarray]:
        return [self.gamma, self.beta, self.running_mean, self.running_var]

    def out_shape(self, in_shape):
        return in_shape


class ReLU(Layer):
    def __init__(self) -> None:
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        assert self._mask is not None
        return np.where(self._mask, dout, 0.0)

    def switch_state(self) -> np.ndarray | None:
        return self._mask

    def out_shape(self, in_shape):
        return in_shape


class MaxPool2D(Layer):
    def __init__(self, kernel: int, stride: int | None = None, pad: int = 0) -> None:
        self.kernel = kernel
        self.stride = stride if stride is not None else kernel
        self.pad = pad
        self._idx: np.ndarray | None = None
        self._x_shape: tuple[int, ...] | None = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        cols, oh, ow = _window_cols(
            x, self.kernel, self.kernel, self.stride, self.pad, self.pad, -np.inf
        )
        n, _, _, kh, kw, c = cols.shape
        windows = cols.reshape(n, oh, ow, kh * kw, c)
        self._idx = windows.argmax(axis=3)
        self._x_shape = x.shape
        return np.take_along_axis(windows, self._idx[:, :, :, None, :], axis=3)[
            :, :, :, 0, :
        ]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        assert self._idx is not None and self._x_shape is not None
        n, h, w, c = self._x_shape
        k, s, p = self.kernel, self.stride, self.pad
        oh, ow = dout.shape[1], dout.shape[2]
        hp, wp = h + 2 * p, w + 2 * p
        # padded-plane coordinates of each window's argmax
        ki, kj = np.divmod(self._idx, k)
        rows = ki + s * np.arange(oh)[None, :, None, None]
        cols = kj + s * np.arange(ow)[None, None, :, None]
        nn = np.broadcast_to(
            np.arange(n)[:, None, None, None], self._idx.shape
        )
        cc = np.broadcast_to(
            np.arange(c)[None, None, None, :], self._idx.shape
        )
        flat = ((nn * hp + rows) * wp + cols) * c + cc
        dxp = np.zeros(n * hp * wp * c, dtype=dout.dtype)
        np.add.at(dxp, flat.ravel(), dout.ravel())
        dxp = dxp.reshape(n, hp, wp, c)
        return dxp[:, p : p + h, p : p + w, :]

    def switch_state(self) -> np.ndarray | None:
        return self._idx

    def out_shape(self, in_shape):
        h, w, c = in_shape
        oh = (h + 2 * self.pad - self.kernel) // self.stride + 1
        ow = (w + 2 * self.pad - self.kernel) // self.stride + 1
        return (oh, ow, c)


class GlobalMaxPool(Layer):
    def __init__(self) -> None:
        self._idx: np.ndarray | None = None
        self._x_shape: tuple[int, ...] | None = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        n, h, w, c = x.shape
        flat = x.reshape(n, h * w, c)
        self._idx = flat.argmax(axis=1)
        self._x_shape = x.shape
        return np.take_along_axis(flat, self._idx[:, None, :], axis=1)[:, 0, :]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        assert self._idx is not None and self._x_shape is not None
        n, h, w, c = self._x_shape
        dx = np.zeros((n, h * w, c), dtype=dout.dtype)
        np.put_along_axis(dx, self._idx[:, None, :], dout[:, None, :], axis=1)
        return dx.reshape(n, h, w, c)

    def switch_state(self) -> np.ndarray | None:
        return self._idx

    def out_shape(self, in_shape):
        return (in_shape[-1],)


class Flatten(Layer):
    def __init__(self) -> None:
        self._x_shape: tuple[int, ...] | None = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        self._x_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        assert self._x_shape is not None
        return dout.reshape(self._x_shape)

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator | None = None, dtype=np.float64) -> None:
        rng = rng or np.random.default_rng(0)
        self.weight = (rng.standard_normal((in_features, out_features))
                       * np.sqrt(2.0 / in_features)).astype(dtype)
        self.bias = np.zeros(out_features, dtype=dtype)
        self.d_weight = np.zeros_like(self.weight)
        self.d_bias = np.zeros_like(self.bias)
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        self._x = x
        return x @ self.weight + self.bias

    def backward(self, dout: np.ndarray) -> np.ndarray:
        assert self._x is not None
        self.d_weight[...] = self._x.T @ dout
        self.d_bias[...] = dout.sum(axis=0)
        return dout @ self.weight.T

    def params(self) -> list[np.ndarray]:
        return [self.weight, self.bias]

    def grads(self) -> list[np.ndarray]:
        return [self.d_weight, self.d_bias]

    def out_shape(self, in_shape):
        return (self.weight.shape[1],)


class InceptionBlock(Layer):
    """Parallel branches concatenated along channels: 1x1; 1x1 then 3x3;
    1x1 then 5x5; 3x3 maxpool then 1x1. Each conv is followed by the
    normalization/activation layers the builder attaches."""

    def __init__(self, branches: list[list[Layer]]) -> None:
        self.branches = branches
        self._splits: list[int] | None = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        outs = []
        for branch in self.branches:
            h = x
            for layer in branch:
                h = layer.forward(h, training)
            outs.append(h)
        self._splits = [o.shape[-1] for o in outs]
        return np.concatenate(outs, axis=-1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        assert self._splits is not None
        dx = None
        start = 0
        for branch, width in zip(self.branches, self._splits):
            d = dout[..., start : start + width]
            start += width
            for layer in reversed(branch):
                d = layer.backward(d)
            dx = d if dx is None else dx + d
        return dx

    def _layers(self):
        for branch in self.branches:
            yield from branch

    def params(self) -> list[np.ndarray]:
        return [p for layer in self._layers() for p in layer.params()]

    def grads(self) -> list[np.ndarray]:
        return [g for layer in self._layers() for g in layer.grads()]

    def state(self) -> list[np.ndarray]:
        return [s for layer in self._layers() for s in layer.state()]

    def switch_state(self) -> np.ndarray | None:
        parts = [
            layer.switch_state()
            for layer in self._layers()
            if layer.switch_state() is not None
        ]
        if not parts:
            return None
        return np.concatenate([p.ravel() for p in parts])

    def out_shape(self, in_shape):
        h, w, _ = in_shape
        channels = 0
        for branch in self.branches:
            shape = in_shape
            for layer in branch:
                shape = layer.out_shape(shape)
            assert shape[0] == h and shape[1] == w, "branch changed spatial size"
            channels += shape[-1]
        return (h, w, channels)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    probs = softmax(logits)
    eps = np.finfo(logits.dtype).tiny
    loss = float(-np.log(probs[np.arange(n), labels] + eps).mean())
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n
