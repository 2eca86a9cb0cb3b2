"""Neural-network layers with explicit forward and backward passes.

Activations follow the HWC convention (height, width, channels); layers
internally process batches of shape (N, H, W, C) and accept a single
image (H, W, C) as a batch of one. A forward call optionally fills a
caller-owned context dict with whatever the matching backward pass needs,
so shared parameters stay read-only and concurrent inference is safe.

Backward passes return the input gradient and store parameter gradients
in ``ctx["grads"]`` keyed like ``params``.
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import Rng, Tensor, as_array

BN_EPS = 1e-3
BN_MOMENTUM = 0.99


class LayerError(ValueError):
    """Shape or configuration error in a layer."""


def same_padding(size: int, kernel: int, stride: int):
    """Zero padding so the output size is ceil(size / stride).

    When the total padding is odd the extra pixel goes to the top/left.
    """
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    before = (total + 1) // 2
    return out, before, total - before


def _im2col(xp: np.ndarray, k: int, stride: int, oh: int, ow: int) -> np.ndarray:
    n, _, _, c = xp.shape
    cols = np.empty((n, oh, ow, k, k, c), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, :, i, j, :] = xp[
                :, i : i + stride * oh : stride, j : j + stride * ow : stride, :
            ]
    return cols.reshape(n * oh * ow, k * k * c)


def _col2im(dcols: np.ndarray, xp_shape, k: int, stride: int, oh: int, ow: int) -> np.ndarray:
    n, _, _, c = xp_shape
    dxp = np.zeros(xp_shape, dtype=dcols.dtype)
    dc = dcols.reshape(n, oh, ow, k, k, c)
    for i in range(k):
        for j in range(k):
            dxp[:, i : i + stride * oh : stride, j : j + stride * ow : stride, :] += dc[
                :, :, :, i, j, :
            ]
    return dxp


class Layer:
    """Base class: named parameters, shape algebra, batched forward/backward."""

    kind = "layer"
    input_rank = 3  # rank of a single (unbatched) input

    def __init__(self, name: str):
        self.name = name
        self.params: dict[str, Tensor] = {}
        self.state: dict[str, Tensor] = {}

    def init_params(self, rng: Rng, dtype: str = "f32") -> None:
        pass

    def output_shape(self, shape: tuple) -> tuple:
        return tuple(shape)

    def param_count(self) -> int:
        return sum(t.size for t in self.params.values()) + sum(
            t.size for t in self.state.values()
        )

    def named_params(self):
        return list(self.params.items())

    def named_state(self):
        return list(self.state.items())

    def set_param(self, key: str, value: Tensor) -> None:
        target = self.params if key in self.params else self.state
        if key not in target:
            raise LayerError(f"{self.name}: unknown parameter {key!r}")
        if target[key].shape != value.shape:
            raise LayerError(
                f"{self.name}.{key}: shape {value.shape} does not match {target[key].shape}"
            )
        target[key] = value

    def forward(self, x, ctx=None, training: bool = False, rng: Rng | None = None) -> Tensor:
        arr = np.asarray(as_array(x))
        if arr.ndim == self.input_rank:
            arr = arr[None, ...]
            squeeze = True
        elif arr.ndim == self.input_rank + 1:
            squeeze = False
        else:
            raise LayerError(
                f"{self.name}: expected rank {self.input_rank} or "
                f"{self.input_rank + 1} input, got shape {arr.shape}"
            )
        if ctx is not None:
            ctx["squeeze"] = squeeze
        out = self._forward(arr, ctx, training, rng)
        if squeeze:
            out = out[0]
        return Tensor.wrap(out)

    def backward(self, dy, ctx) -> Tensor:
        if not ctx or "squeeze" not in ctx:
            raise LayerError(f"{self.name}: backward requires the context of a prior forward")
        dyv = np.asarray(as_array(dy))
        if ctx.get("squeeze"):
            dyv = dyv[None, ...]
        ctx.setdefault("grads", {})
        dx = self._backward(dyv, ctx)
        if ctx.get("squeeze"):
            dx = dx[0]
        return Tensor.wrap(dx)

    def _forward(self, x, ctx, training, rng):
        raise NotImplementedError

    def _backward(self, dy, ctx):
        raise NotImplementedError


def _he_uniform(rng, shape, fan_in):
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, shape)


def _glorot_uniform(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


class Conv2D(Layer):
    """Same-padded cross-correlation, square kernel, no bias (BN follows)."""

    kind = "conv"

    def __init__(self, in_channels, out_channels, kernel, stride=1, name="conv", init="he"):
        super().__init__(name)
        if stride < 1:
            raise LayerError("stride must be positive")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.init = init

    def init_params(self, rng, dtype="f32"):
        k, ci, co = self.kernel, self.in_channels, self.out_channels
        fan_in = k * k * ci
        if self.init == "glorot":
            w = _glorot_uniform(rng, (k, k, ci, co), fan_in, k * k * co)
        else:
            w = _he_uniform(rng, (k, k, ci, co), fan_in)
        self.params = {"kernel": Tensor(w, dtype=dtype)}

    def output_shape(self, shape):
        h, w, c = shape
        if c != self.in_channels:
            raise LayerError(
                f"{self.name}: expected {self.in_channels} input channels, got {c}"
            )
        oh, _, _ = same_padding(h, self.kernel, self.stride)
        ow, _, _ = same_padding(w, self.kernel, self.stride)
        return (oh, ow, self.out_channels)

    def _forward(self, x, ctx, training, rng):
        n, h, w, c = x.shape
        if c != self.in_channels:
            raise LayerError(
                f"{self.name}: expected {self.in_channels} input channels, got {c}"
            )
        k, s = self.kernel, self.stride
        oh, pt, pb = same_padding(h, k, s)
        ow, pl, pr = same_padding(w, k, s)
        xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
        cols = _im2col(xp, k, s, oh, ow)
        w2 = self.params["kernel"].array.reshape(k * k * c, self.out_channels)
        y = (cols @ w2).reshape(n, oh, ow, self.out_channels)
        if ctx is not None:
            ctx.update(cols=cols, xp_shape=xp.shape, pads=(pt, pb, pl, pr), out_hw=(oh, ow))
        return y

    def _backward(self, dy, ctx):
        k, s = self.kernel, self.stride
        oh, ow = ctx["out_hw"]
        pt, pb, pl, pr = ctx["pads"]
        cols = ctx["cols"]
        n = dy.shape[0]
        dy2 = dy.reshape(n * oh * ow, self.out_channels)
        w2 = self.params["kernel"].array.reshape(k * k * self.in_channels, self.out_channels)
        ctx["grads"]["kernel"] = (cols.T @ dy2).reshape(self.params["kernel"].shape)
        dxp = _col2im(dy2 @ w2.T, ctx["xp_shape"], k, s, oh, ow)
        _, hp, wp, _ = ctx["xp_shape"]
        return dxp[:, pt : hp - pb, pl : wp - pr, :]


class DepthwiseConv2D(Layer):
    """Per-channel spatial filter: one k x k kernel per input channel."""

    kind = "dwconv"

    def __init__(self, channels, kernel=3, stride=1, name="dwconv"):
        super().__init__(name)
        if stride < 1:
            raise LayerError("stride must be positive")
        self.channels = channels
        self.kernel = kernel
        self.stride = stride

    def init_params(self, rng, dtype="f32"):
        k = self.kernel
        w = _he_uniform(rng, (k, k, self.channels), k * k)
        self.params = {"kernel": Tensor(w, dtype=dtype)}

    def output_shape(self, shape):
        h, w, c = shape
        if c != self.channels:
            raise LayerError(f"{self.name}: expected {self.channels} channels, got {c}")
        oh, _, _ = same_padding(h, self.kernel, self.stride)
        ow, _, _ = same_padding(w, self.kernel, self.stride)
        return (oh, ow, c)

    def _forward(self, x, ctx, training, rng):
        n, h, w, c = x.shape
        if c != self.channels:
            raise LayerError(f"{self.name}: expected {self.channels} channels, got {c}")
        k, s = self.kernel, self.stride
        oh, pt, pb = same_padding(h, k, s)
        ow, pl, pr = same_padding(w, k, s)
        xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
        wk = self.params["kernel"].array
        y = np.zeros((n, oh, ow, c), dtype=x.dtype)
        for i in range(k):
            for j in range(k):
                y += xp[:, i : i + s * oh : s, j : j + s * ow : s, :] * wk[i, j]
        if ctx is not None:
            ctx.update(xp=xp, pads=(pt, pb, pl, pr), out_hw=(oh, ow))
        return y

    def _backward(self, dy, ctx):
        k, s = self.kernel, self.stride
        oh, ow = ctx["out_hw"]
        pt, pb, pl, pr = ctx["pads"]
        xp = ctx["xp"]
        wk = self.params["kernel"].array
        dw = np.zeros_like(wk)
        dxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                window = xp[:, i : i + s * oh : s, j : j + s * ow : s, :]
                dw[i, j] = np.einsum("nhwc,nhwc->c", window, dy)
                dxp[:, i : i + s * oh : s, j : j + s * ow : s, :] += dy * wk[i, j]
        ctx["grads"]["kernel"] = dw
        _, hp, wp, _ = xp.shape
        return dxp[:, pt : hp - pb, pl : wp - pr, :]


class BatchNorm(Layer):
    """Per-channel batch normalisation.

    Training normalises with batch statistics and folds them into the
    running estimates; inference uses the stored running statistics only.
    """

    kind = "bn"

    def __init__(self, channels, name="bn", eps=BN_EPS, momentum=BN_MOMENTUM):
        super().__init__(name)
        self.channels = channels
        self.eps = eps
        self.momentum = momentum

    def init_params(self, rng, dtype="f32"):
        c = self.channels
        self.params = {
            "gamma": Tensor(np.ones(c), dtype=dtype),
            "beta": Tensor(np.zeros(c), dtype=dtype),
        }
        self.state = {
            "running_mean": Tensor(np.zeros(c), dtype=dtype),
            "running_var": Tensor(np.ones(c), dtype=dtype),
        }

    def forward(self, x, ctx=None, training=False, rng=None):
        # Accepts (H, W, C), (N, H, W, C) or (N, C); channel axis is last.
        arr = np.asarray(as_array(x))
        if arr.ndim == 3:
            arr = arr[None, ...]
            squeeze = True
        elif arr.ndim in (2, 4):
            squeeze = False
        else:
            raise LayerError(f"{self.name}: unsupported input rank {arr.ndim}")
        if arr.shape[-1] != self.channels:
            raise LayerError(
                f"{self.name}: expected {self.channels} channels, got {arr.shape[-1]}"
            )
        if ctx is not None:
            ctx["squeeze"] = squeeze
        out = self._forward(arr, ctx, training, rng)
        if squeeze:
            out = out[0]
        return Tensor.wrap(out)

    def _forward(self, x, ctx, training, rng):
        gamma = self.params["gamma"].array
        beta = self.params["beta"].array
        axes = tuple(range(x.ndim - 1))
        if training:
            m = int(np.prod([x.shape[a] for a in axes]))
            if m == 0:
                raise LayerError(f"{self.name}: zero batch in training mode")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            mom = self.momentum
            rm = self.state["running_mean"].array * mom + mean * (1.0 - mom)
            rv = self.state["running_var"].array * mom + var * (1.0 - mom)
            self.state["running_mean"] = Tensor.wrap(rm.astype(x.dtype))
            self.state["running_var"] = Tensor.wrap(rv.astype(x.dtype))
        else:
            mean = self.state["running_mean"].array
            var = self.state["running_var"].array
            m = 0
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        if ctx is not None:
            ctx.update(xhat=xhat, inv=inv, m=m, training=training, axes=axes)
        return gamma * xhat + beta

    def _backward(self, dy, ctx):
        gamma = self.params["gamma"].array
        xhat, inv, axes = ctx["xhat"], ctx["inv"], ctx["axes"]
        dgamma = (dy * xhat).sum(axis=axes)
        dbeta = dy.sum(axis=axes)
        ctx["grads"]["gamma"] = dgamma
        ctx["grads"]["beta"] = dbeta
        if ctx["training"]:
            m = ctx["m"]
            return (gamma * inv / m) * (m * dy - dbeta - xhat * dgamma)
        return dy * gamma * inv


class ReLU(Layer):
    kind = "relu"
    input_rank = 3

    def forward(self, x, ctx=None, training=False, rng=None):
        arr = np.asarray(as_array(x))
        out = np.maximum(arr, 0)
        if ctx is not None:
            ctx["mask"] = arr > 0
        return Tensor.wrap(out)

    def backward(self, dy, ctx):
        if not ctx or "mask" not in ctx:
            raise LayerError(f"{self.name}: backward requires the context of a prior forward")
        return Tensor.wrap(np.asarray(as_array(dy)) * ctx["mask"])


class Softmax(Layer):
    """Numerically stable softmax over the last axis."""

    kind = "softmax"
    input_rank = 1

    def _forward(self, x, ctx, training, rng):
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=-1, keepdims=True)
        if ctx is not None:
            ctx["y"] = y
        return y

    def _backward(self, dy, ctx):
        y = ctx["y"]
        return y * (dy - (dy * y).sum(axis=-1, keepdims=True))


class Identity(Layer):
    """Linear activation: passes values straight through."""

    kind = "linear"

    def forward(self, x, ctx=None, training=False, rng=None):
        return Tensor.wrap(np.asarray(as_array(x)))

    def backward(self, dy, ctx):
        return Tensor.wrap(np.asarray(as_array(dy)))


class MaxPool2x2(Layer):
    """2x2 max pooling, stride 2; ties route to the first value row-major."""

    kind = "maxpool"

    def output_shape(self, shape):
        h, w, c = shape
        if h % 2 or w % 2:
            raise LayerError(f"{self.name}: spatial dims must be even, got {h}x{w}")
        return (h // 2, w // 2, c)

    def _forward(self, x, ctx, training, rng):
        n, h, w, c = x.shape
        if h % 2 or w % 2:
            raise LayerError(f"{self.name}: spatial dims must be even, got {h}x{w}")
        hh, ww = h // 2, w // 2
        # Window candidates ordered (0,0),(0,1),(1,0),(1,1): argmax picks the
        # first maximum, which is the row-major tie-break.
        win = (
            x.reshape(n, hh, 2, ww, 2, c)
            .transpose(0, 1, 3, 2, 4, 5)
            .reshape(n, hh, ww, 4, c)
        )
        idx = win.argmax(axis=3)
        out = np.take_along_axis(win, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
        if ctx is not None:
            ctx.update(idx=idx, in_shape=x.shape)
        return out

    def _backward(self, dy, ctx):
        n, h, w, c = ctx["in_shape"]
        hh, ww = h // 2, w // 2
        dwin = np.zeros((n, hh, ww, 4, c), dtype=dy.dtype)
        np.put_along_axis(dwin, ctx["idx"][:, :, :, None, :], dy[:, :, :, None, :], axis=3)
        return (
            dwin.reshape(n, hh, ww, 2, 2, c)
            .transpose(0, 1, 3, 2, 4, 5)
            .reshape(n, h, w, c)
        )


class GlobalAvgPool(Layer):
    """Spatial mean per channel: (H, W, C) -> (C,)."""

    kind = "gap"

    def output_shape(self, shape):
        return (shape[2],)

    def _forward(self, x, ctx, training, rng):
        if ctx is not None:
            ctx["hw"] = x.shape[1:3]
        return x.mean(axis=(1, 2))

    def _backward(self, dy, ctx):
        h, w = ctx["hw"]
        n, c = dy.shape
        return np.broadcast_to(dy[:, None, None, :] / (h * w), (n, h, w, c)).copy()


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def _forward(self, x, ctx, training, rng):
        if ctx is not None:
            ctx["in_shape"] = x.shape
        return x.reshape(x.shape[0], -1)

    def _backward(self, dy, ctx):
        return dy.reshape(ctx["in_shape"])


class Dense(Layer):
    """Affine map with bias."""

    kind = "dense"
    input_rank = 1

    def __init__(self, in_dim, out_dim, name="dense", init="he"):
        super().__init__(name)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.init = init

    def init_params(self, rng, dtype="f32"):
        if self.init == "glorot":
            w = _glorot_uniform(rng, (self.in_dim, self.out_dim), self.in_dim, self.out_dim)
        else:
            w = _he_uniform(rng, (self.in_dim, self.out_dim), self.in_dim)
        self.params = {
            "kernel": Tensor(w, dtype=dtype),
            "bias": Tensor(np.zeros(self.out_dim), dtype=dtype),
        }

    def output_shape(self, shape):
        if shape != (self.in_dim,):
            raise LayerError(f"{self.name}: expected input ({self.in_dim},), got {shape}")
        return (self.out_dim,)

    def _forward(self, x, ctx, training, rng):
        if x.shape[1] != self.in_dim:
            raise LayerError(
                f"{self.name}: expected {self.in_dim} inputs, got {x.shape[1]}"
            )
        if ctx is not None:
            ctx["x"] = x
        return x @ self.params["kernel"].array + self.params["bias"].array

    def _backward(self, dy, ctx):
        x = ctx["x"]
        ctx["grads"]["kernel"] = x.T @ dy
        ctx["grads"]["bias"] = dy.sum(axis=0)
        return dy @ self.params["kernel"].array.T


class Dropout(Layer):
    """Zeroes activations with probability ``rate``; survivors scale by 1/(1-rate)."""

    kind = "dropout"
    input_rank = 1

    def __init__(self, rate, name="dropout"):
        super().__init__(name)
        if not 0.0 <= rate < 1.0:
            raise LayerError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, ctx=None, training=False, rng=None):
        arr = np.asarray(as_array(x))
        if not training or self.rate == 0.0:
            if ctx is not None:
                ctx["mult"] = None
            return Tensor.wrap(arr)
        if rng is None:
            raise LayerError(f"{self.name}: training dropout needs an rng")
        keep = rng.random(arr.shape) >= self.rate
        mult = keep.astype(arr.dtype) / (1.0 - self.rate)
        if ctx is not None:
            ctx["mult"] = mult
        return Tensor.wrap(arr * mult)

    def backward(self, dy, ctx):
        if not ctx or "mult" not in ctx:
            raise LayerError(f"{self.name}: backward requires the context of a prior forward")
        dyv = np.asarray(as_array(dy))
        mult = ctx["mult"]
        return Tensor.wrap(dyv if mult is None else dyv * mult)


class GaussianDropout(Layer):
    """Multiplicative unit-mean Gaussian noise with variance rate/(1-rate)."""

    kind = "gaussian_dropout"
    input_rank = 1

    def __init__(self, rate, name="gdropout"):
        super().__init__(name)
        if not 0.0 <= rate < 1.0:
            raise LayerError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, ctx=None, training=False, rng=None):
        arr = np.asarray(as_array(x))
        if not training or self.rate == 0.0:
            if ctx is not None:
                ctx["mult"] = None
            return Tensor.wrap(arr)
        if rng is None:
            raise LayerError(f"{self.name}: training dropout needs an rng")
        sigma = math.sqrt(self.rate / (1.0 - self.rate))
        mult = rng.normal(1.0, sigma, arr.shape).astype(arr.dtype)
        if ctx is not None:
            ctx["mult"] = mult
        return Tensor.wrap(arr * mult)

    def backward(self, dy, ctx):
        if not ctx or "mult" not in ctx:
            raise LayerError(f"{self.name}: backward requires the context of a prior forward")
        dyv = np.asarray(as_array(dy))
        mult = ctx["mult"]
        return Tensor.wrap(dyv if mult is None else dyv * mult)


class Stack(Layer):
    """Sequential composite; sub-layer parameters are exposed with
    ``<child>/<param>`` keys so a whole model flattens to one namespace."""

    kind = "stack"

    def __init__(self, name, layers, kind=None):
        super().__init__(name)
        self.layers = list(layers)
        if kind is not None:
            self.kind = kind

    def init_params(self, rng, dtype="f32"):
        for layer in self.layers:
            layer.init_params(rng, dtype)

    def output_shape(self, shape):
        for layer in self.layers:
            shape = layer.output_shape(shape)
        return shape

    def param_count(self):
        return sum(layer.param_count() for layer in self.layers)

    def named_params(self):
        out = []
        for layer in self.layers:
            out.extend((f"{layer.name}/{k}", v) for k, v in layer.named_params())
        return out

    def named_state(self):
        out = []
        for layer in self.layers:
            out.extend((f"{layer.name}/{k}", v) for k, v in layer.named_state())
        return out

    def set_param(self, key, value):
        child, _, rest = key.partition("/")
        for layer in self.layers:
            if layer.name == child:
                layer.set_param(rest, value)
                return
        raise LayerError(f"{self.name}: no sub-layer named {child!r}")

    def forward(self, x, ctx=None, training=False, rng=None):
        sub_ctxs = [] if ctx is not None else None
        for layer in self.layers:
            sub = {} if ctx is not None else None
            x = layer.forward(x, sub, training, rng)
            if sub_ctxs is not None:
                sub_ctxs.append(sub)
        if ctx is not None:
            ctx["sub_ctxs"] = sub_ctxs
        return x

    def backward(self, dy, ctx, start: int | None = None):
        """Backpropagate from layer index ``start`` (default: the last)."""
        grads = ctx.setdefault("grads", {})
        if start is None:
            start = len(self.layers) - 1
        for i in range(start, -1, -1):
            layer = self.layers[i]
            sub = ctx["sub_ctxs"][i]
            dy = layer.backward(dy, sub)
            for k, g in sub.get("grads", {}).items():
                grads[f"{layer.name}/{k}"] = g
        return dy


def conv_block(name, in_channels, out_channels, kernel, stride=1):
    """Convolution -> batch normalisation -> ReLU."""
    return Stack(
        name,
        [
            Conv2D(in_channels, out_channels, kernel, stride, name="conv"),
            BatchNorm(out_channels, name="bn"),
            ReLU("relu"),
        ],
        kind="conv",
    )


def depthwise_separable_block(name, in_channels, out_channels, stride=1):
    """3x3 depthwise filter then 1x1 pointwise projection, each with BN + ReLU."""
    return Stack(
        name,
        [
            DepthwiseConv2D(in_channels, 3, stride, name="dw"),
            BatchNorm(in_channels, name="dw_bn"),
            ReLU("dw_relu"),
            Conv2D(in_channels, out_channels, 1, 1, name="pw"),
            BatchNorm(out_channels, name="pw_bn"),
            ReLU("pw_relu"),
        ],
        kind="dconv",
    )


def relu(x):
    return Tensor.wrap(np.maximum(as_array(x), 0))


def softmax(x):
    return Softmax("softmax").forward(x)


def linear(x):
    return Tensor.wrap(np.asarray(as_array(x)))
