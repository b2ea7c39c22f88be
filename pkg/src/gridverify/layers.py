"""Layer definitions, shape algebra, and exact forward evaluation.

All arithmetic runs in float64; weights stored as 32-bit floats are widened
losslessly on load. Conv and transposed-conv layers are single channel, which
covers every architecture this tool evaluates. Tensors are plain numpy
float64 arrays and are treated as immutable once handed to a layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ShapeError",
    "Dense",
    "Conv2D",
    "TransposedConv2D",
    "AvgPool2D",
    "Activation",
    "Reshape",
    "Layer",
    "output_shape",
    "forward_layer",
    "sigmoid",
]

ACTIVATION_FNS = ("relu", "tanh", "sigmoid")


class ShapeError(ValueError):
    """A tensor shape is incompatible with a layer or network."""


def _as_f64(a, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(eq=False)
class Dense:
    """Fully connected layer: y = weight @ x + bias. Operates on 1-D tensors."""

    weight: np.ndarray  # (out_features, in_features)
    bias: np.ndarray  # (out_features,)
    kind = "dense"

    def __post_init__(self):
        self.weight = _as_f64(self.weight, "weight")
        self.bias = _as_f64(self.bias, "bias")
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("dense layer needs a 2-D weight and 1-D bias")
        if self.weight.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"dense weight rows {self.weight.shape[0]} != bias size {self.bias.shape[0]}"
            )

    def out_shape(self, in_shape: tuple) -> tuple:
        if len(in_shape) != 1 or in_shape[0] != self.weight.shape[1]:
            raise ShapeError(
                f"dense expects ({self.weight.shape[1]},), got {in_shape}"
            )
        return (self.weight.shape[0],)

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out_shape(x.shape)
        return self.weight @ x + self.bias


@dataclass(eq=False)
class Conv2D:
    """Single-channel 2-D convolution with zero padding and a scalar bias."""

    kernel: np.ndarray  # (k, k)
    stride: int = 1
    padding: int = 0
    bias: float = 0.0
    kind = "conv2d"

    def __post_init__(self):
        self.kernel = _as_f64(self.kernel, "kernel")
        self.bias = float(self.bias)
        if self.kernel.ndim != 2 or self.kernel.shape[0] != self.kernel.shape[1]:
            raise ShapeError("conv kernel must be square")
        if self.stride < 1 or self.padding < 0:
            raise ValueError("conv stride must be >= 1 and padding >= 0")
        if not np.isfinite(self.bias):
            raise ValueError("conv bias must be finite")

    def out_shape(self, in_shape: tuple) -> tuple:
        if len(in_shape) != 2:
            raise ShapeError(f"conv2d expects a 2-D tensor, got {in_shape}")
        k, s, p = self.kernel.shape[0], self.stride, self.padding
        dims = []
        for n in in_shape:
            span = n + 2 * p - k
            if span < 0 or span % s != 0:
                raise ShapeError(
                    f"conv2d size {n} with kernel {k}, stride {s}, padding {p} "
                    "does not yield an integral output extent"
                )
            dims.append(span // s + 1)
        return tuple(dims)

    def forward(self, x: np.ndarray) -> np.ndarray:
        oh, ow = self.out_shape(x.shape)
        k, s = self.kernel.shape[0], self.stride
        xp = np.pad(x, self.padding) if self.padding else x
        out = np.empty((oh, ow))
        for i in range(oh):
            for j in range(ow):
                out[i, j] = np.sum(self.kernel * xp[i * s : i * s + k, j * s : j * s + k])
        return out + self.bias if self.bias else out


@dataclass(eq=False)
class TransposedConv2D:
    """Single-channel 2-D transposed convolution with a scalar bias, upsampling by stride."""

    kernel: np.ndarray  # (k, k)
    stride: int = 1
    bias: float = 0.0
    kind = "tconv2d"

    def __post_init__(self):
        self.kernel = _as_f64(self.kernel, "kernel")
        self.bias = float(self.bias)
        if self.kernel.ndim != 2 or self.kernel.shape[0] != self.kernel.shape[1]:
            raise ShapeError("transposed-conv kernel must be square")
        if self.stride < 1:
            raise ValueError("transposed-conv stride must be >= 1")
        if not np.isfinite(self.bias):
            raise ValueError("transposed-conv bias must be finite")

    def out_shape(self, in_shape: tuple) -> tuple:
        if len(in_shape) != 2:
            raise ShapeError(f"tconv2d expects a 2-D tensor, got {in_shape}")
        k, s = self.kernel.shape[0], self.stride
        return tuple((n - 1) * s + k for n in in_shape)

    def forward(self, x: np.ndarray) -> np.ndarray:
        oh, ow = self.out_shape(x.shape)
        k, s = self.kernel.shape[0], self.stride
        out = np.zeros((oh, ow))
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                out[i * s : i * s + k, j * s : j * s + k] += x[i, j] * self.kernel
        return out + self.bias if self.bias else out


@dataclass
class AvgPool2D:
    """Average pooling over non-overlapping or strided square windows."""

    window: int
    stride: int
    kind = "avgpool2d"

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise ValueError("pool window and stride must be >= 1")

    def out_shape(self, in_shape: tuple) -> tuple:
        if len(in_shape) != 2:
            raise ShapeError(f"avgpool2d expects a 2-D tensor, got {in_shape}")
        w, s = self.window, self.stride
        dims = []
        for n in in_shape:
            span = n - w
            if span < 0 or span % s != 0:
                raise ShapeError(
                    f"avgpool2d size {n} with window {w}, stride {s} "
                    "does not yield an integral output extent"
                )
            dims.append(span // s + 1)
        return tuple(dims)

    def forward(self, x: np.ndarray) -> np.ndarray:
        oh, ow = self.out_shape(x.shape)
        w, s = self.window, self.stride
        out = np.empty((oh, ow))
        inv = 1.0 / (w * w)
        for i in range(oh):
            for j in range(ow):
                out[i, j] = np.sum(x[i * s : i * s + w, j * s : j * s + w]) * inv
        return out


@dataclass
class Activation:
    """Elementwise nonlinearity: relu, tanh, or sigmoid."""

    fn: str
    kind = "activation"

    def __post_init__(self):
        if self.fn not in ACTIVATION_FNS:
            raise ValueError(f"unknown activation {self.fn!r}; choose from {ACTIVATION_FNS}")

    def out_shape(self, in_shape: tuple) -> tuple:
        return tuple(in_shape)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if self.fn == "relu":
            return np.maximum(x, 0.0)
        if self.fn == "tanh":
            return np.tanh(x)
        return sigmoid(x)


@dataclass
class Reshape:
    """Reinterpret a tensor in row-major order under a new shape."""

    shape: tuple

    kind = "reshape"

    def __post_init__(self):
        self.shape = tuple(int(n) for n in self.shape)
        if any(n < 1 for n in self.shape):
            raise ShapeError("reshape extents must be positive")

    def out_shape(self, in_shape: tuple) -> tuple:
        if int(np.prod(in_shape)) != int(np.prod(self.shape)):
            raise ShapeError(f"cannot reshape {in_shape} to {self.shape}")
        return self.shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out_shape(x.shape)
        return np.ascontiguousarray(x).reshape(self.shape)


Layer = Dense | Conv2D | TransposedConv2D | AvgPool2D | Activation | Reshape


def output_shape(layer: Layer, in_shape) -> tuple:
    """Shape produced by `layer` on an input of shape `in_shape`."""
    return layer.out_shape(tuple(int(n) for n in in_shape))


def forward_layer(layer: Layer, x: np.ndarray) -> np.ndarray:
    """Exact float64 evaluation of a single layer."""
    return layer.forward(np.asarray(x, dtype=np.float64))
