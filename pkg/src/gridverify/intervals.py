"""Sound interval enclosure of network outputs over boxes of input space.

Every affine layer is propagated with sign-split weights. Endpoints of each
fused affine accumulation are then rounded outward: first padded by an
a-priori bound on the accumulated floating-point rounding error (unit
roundoff times accumulation length times the sum of absolute terms), then
nudged one unit in the last place. A bare one-ulp nudge is not enough: two
dot products evaluated with different groupings can disagree by several ulps,
and proofs downstream rest on these enclosures. Monotone activations are
applied endpoint-wise; tanh and sigmoid endpoints use the platform
transcendental widened by ``TRANSCENDENTAL_ULPS`` ulps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from .layers import (
    Activation,
    AvgPool2D,
    Conv2D,
    Dense,
    Layer,
    Reshape,
    ShapeError,
    TransposedConv2D,
    sigmoid,
)
from .network import ComposedNetwork, NetworkSpec

if TYPE_CHECKING:
    from .solver import CorrectnessProperty

__all__ = [
    "Interval",
    "IntervalTensor",
    "propagate_layer",
    "propagate_network",
    "propagate_composed",
    "error_interval",
]

# Over-approximation allowance for libm tanh/exp endpoint evaluations.
TRANSCENDENTAL_ULPS = 4

_EPS = float(np.finfo(np.float64).eps)  # 2^-52


class Interval(NamedTuple):
    """A closed interval of 64-bit floats."""

    lo: float
    hi: float

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def encloses(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(eq=False)
class IntervalTensor:
    """Per-element lower/upper bounds with ordinary tensor shape rules."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if self.lo.shape != self.hi.shape:
            raise ShapeError(f"bound shapes differ: {self.lo.shape} vs {self.hi.shape}")
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise ValueError("interval bounds contain NaN")
        if not np.all(self.lo <= self.hi):
            raise ValueError("interval tensor has lo > hi")

    @classmethod
    def from_point(cls, x) -> "IntervalTensor":
        x = np.asarray(x, dtype=np.float64)
        return cls(x.copy(), x.copy())

    @property
    def shape(self) -> tuple:
        return tuple(self.lo.shape)

    def mag(self) -> np.ndarray:
        """Elementwise bound on |x| over the box."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(self.lo <= x) and np.all(x <= self.hi))

    def encloses(self, other: "IntervalTensor") -> bool:
        return bool(np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi))

    def widths(self) -> np.ndarray:
        return self.hi - self.lo


def _widen_ulp(lo: np.ndarray, hi: np.ndarray, ulps: int = 1) -> tuple[np.ndarray, np.ndarray]:
    for _ in range(ulps):
        lo = np.nextafter(lo, -np.inf)
        hi = np.nextafter(hi, np.inf)
    return lo, hi


def _round_outward(lo, hi, mag, ops: int) -> IntervalTensor:
    """Outward rounding after a fused accumulation of `ops` terms.

    `mag` bounds the sum of absolute terms, so `(ops + 4) * eps * mag` covers
    the worst-case rounding drift of both the endpoint evaluation and any
    concrete evaluation inside the box; the trailing one-ulp nudge absorbs
    the rounding of the pad arithmetic itself.
    """
    pad = (ops + 4) * _EPS * mag
    return IntervalTensor(*_widen_ulp(lo - pad, hi + pad))


def _sign_split(layer) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Memoized (positive part, negative part, |w|); layers are immutable.
    cached = getattr(layer, "_sign_split", None)
    if cached is None:
        w = layer.weight if isinstance(layer, Dense) else layer.kernel
        wp, wn = np.maximum(w, 0.0), np.minimum(w, 0.0)
        cached = (wp, wn, wp - wn)
        layer._sign_split = cached
    return cached


def propagate_layer(layer: Layer, x: IntervalTensor) -> IntervalTensor:
    """Sound enclosure of `layer`'s image of the box `x`."""
    if isinstance(layer, Dense):
        layer.out_shape(x.shape)
        wp, wn, wa = _sign_split(layer)
        lo = wp @ x.lo + wn @ x.hi + layer.bias
        hi = wp @ x.hi + wn @ x.lo + layer.bias
        mag = wa @ x.mag() + np.abs(layer.bias)
        return _round_outward(lo, hi, mag, layer.weight.shape[1] + 2)

    if isinstance(layer, Conv2D):
        oh, ow = layer.out_shape(x.shape)
        kp, kn, ka = _sign_split(layer)
        k, s, p = layer.kernel.shape[0], layer.stride, layer.padding
        xlo = np.pad(x.lo, p) if p else x.lo
        xhi = np.pad(x.hi, p) if p else x.hi
        xmag = np.maximum(np.abs(xlo), np.abs(xhi))
        lo = np.empty((oh, ow))
        hi = np.empty((oh, ow))
        mag = np.empty((oh, ow))
        for i in range(oh):
            for j in range(ow):
                wlo = xlo[i * s : i * s + k, j * s : j * s + k]
                whi = xhi[i * s : i * s + k, j * s : j * s + k]
                lo[i, j] = np.sum(kp * wlo) + np.sum(kn * whi)
                hi[i, j] = np.sum(kp * whi) + np.sum(kn * wlo)
                mag[i, j] = np.sum(ka * xmag[i * s : i * s + k, j * s : j * s + k])
        if layer.bias:
            lo += layer.bias
            hi += layer.bias
            mag += abs(layer.bias)
        return _round_outward(lo, hi, mag, k * k + 3)

    if isinstance(layer, TransposedConv2D):
        oh, ow = layer.out_shape(x.shape)
        kp, kn, ka = _sign_split(layer)
        k, s = layer.kernel.shape[0], layer.stride
        lo = np.zeros((oh, ow))
        hi = np.zeros((oh, ow))
        mag = np.zeros((oh, ow))
        xmag = x.mag()
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                lo[i * s : i * s + k, j * s : j * s + k] += kp * x.lo[i, j] + kn * x.hi[i, j]
                hi[i * s : i * s + k, j * s : j * s + k] += kp * x.hi[i, j] + kn * x.lo[i, j]
                mag[i * s : i * s + k, j * s : j * s + k] += ka * xmag[i, j]
        if layer.bias:
            lo += layer.bias
            hi += layer.bias
            mag += abs(layer.bias)
        overlaps = max(1, -(-k // s)) ** 2  # contributions per output element
        return _round_outward(lo, hi, mag, (k * k + 3) * overlaps)

    if isinstance(layer, AvgPool2D):
        oh, ow = layer.out_shape(x.shape)
        w, s = layer.window, layer.stride
        inv = 1.0 / (w * w)
        xmag = x.mag()
        lo = np.empty((oh, ow))
        hi = np.empty((oh, ow))
        mag = np.empty((oh, ow))
        for i in range(oh):
            for j in range(ow):
                lo[i, j] = np.sum(x.lo[i * s : i * s + w, j * s : j * s + w]) * inv
                hi[i, j] = np.sum(x.hi[i * s : i * s + w, j * s : j * s + w]) * inv
                mag[i, j] = np.sum(xmag[i * s : i * s + w, j * s : j * s + w]) * inv
        return _round_outward(lo, hi, mag, w * w + 3)

    if isinstance(layer, Activation):
        if layer.fn == "relu":
            # Exact: max with 0 is monotone and introduces no rounding.
            return IntervalTensor(np.maximum(x.lo, 0.0), np.maximum(x.hi, 0.0))
        f = np.tanh if layer.fn == "tanh" else sigmoid
        lo, hi = _widen_ulp(f(x.lo), f(x.hi), ulps=TRANSCENDENTAL_ULPS)
        # Widening never needs to leave the codomain.
        lo = np.maximum(lo, -1.0 if layer.fn == "tanh" else 0.0)
        hi = np.minimum(hi, 1.0)
        return IntervalTensor(lo, hi)

    if isinstance(layer, Reshape):
        layer.out_shape(x.shape)
        return IntervalTensor(x.lo.reshape(layer.shape), x.hi.reshape(layer.shape))

    raise TypeError(f"unsupported layer type {type(layer).__name__}")


def propagate_network(net: NetworkSpec, box: IntervalTensor) -> IntervalTensor:
    """Enclosure of `net`'s image of `box`, de-scaling included."""
    if box.shape != net.input_shape:
        raise ShapeError(f"box shape {box.shape} != expected {net.input_shape}")
    for i, layer in enumerate(net.layers):
        try:
            box = propagate_layer(layer, box)
        except ShapeError as e:
            raise ShapeError(f"layer {i} ({layer.kind}): {e}") from None
    if net.descale is not None:
        a, b = net.descale
        if a >= 0:
            lo, hi = a * box.lo + b, a * box.hi + b
        else:
            lo, hi = a * box.hi + b, a * box.lo + b
        box = _round_outward(lo, hi, abs(a) * box.mag() + abs(b), 2)
    return box


def propagate_composed(net: ComposedNetwork, box: IntervalTensor) -> Interval:
    """Enclosure of the composed decoder+regressor output over a configuration box."""
    out = propagate_network(net.regressor, propagate_network(net.decoder, box))
    if out.lo.size != 1:
        raise ShapeError(f"regressor output has {out.lo.size} elements, expected a scalar")
    return Interval(float(out.lo.reshape(())), float(out.hi.reshape(())))


def error_interval(net: ComposedNetwork, box: IntervalTensor, prop: "CorrectnessProperty") -> Interval:
    """Enclosure of estimate minus ground-truth coordinate over the box."""
    k = prop.ground_truth_coord
    if not 0 <= k < box.lo.size:
        raise IndexError(f"ground-truth coordinate {k} out of range for box of dim {box.lo.size}")
    out = propagate_composed(net, box)
    lo, hi = _widen_ulp(
        np.float64(out.lo - box.hi.reshape(-1)[k]),
        np.float64(out.hi - box.lo.reshape(-1)[k]),
    )
    return Interval(float(lo), float(hi))
