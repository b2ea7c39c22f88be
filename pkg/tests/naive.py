"""Straight-line re-implementation of the layer math in pure Python.

Used as an independent oracle against the numpy evaluation path: flat lists,
explicit index arithmetic, math-module scalars, no shared code beyond reading
layer parameters.
"""

import math


def _sigmoid(v):
    if v >= 0:
        return 1.0 / (1.0 + math.exp(-v))
    e = math.exp(v)
    return e / (1.0 + e)


def naive_layer(layer, x, shape):
    kind = layer.kind
    if kind == "dense":
        w = layer.weight.tolist()
        b = layer.bias.tolist()
        out = []
        for i in range(len(w)):
            acc = 0.0
            for j in range(len(x)):
                acc += w[i][j] * x[j]
            out.append(acc + b[i])
        return out, (len(w),)

    if kind == "conv2d":
        h, ww = shape
        k, s, p = layer.kernel.shape[0], layer.stride, layer.padding
        kern = layer.kernel.tolist()
        ph, pw = h + 2 * p, ww + 2 * p
        padded = [[0.0] * pw for _ in range(ph)]
        for i in range(h):
            for j in range(ww):
                padded[i + p][j + p] = x[i * ww + j]
        oh, ow = (ph - k) // s + 1, (pw - k) // s + 1
        out = []
        for i in range(oh):
            for j in range(ow):
                acc = layer.bias
                for a in range(k):
                    for b_ in range(k):
                        acc += kern[a][b_] * padded[i * s + a][j * s + b_]
                out.append(acc)
        return out, (oh, ow)

    if kind == "tconv2d":
        h, ww = shape
        k, s = layer.kernel.shape[0], layer.stride
        kern = layer.kernel.tolist()
        oh, ow = (h - 1) * s + k, (ww - 1) * s + k
        out = [layer.bias] * (oh * ow)
        for i in range(h):
            for j in range(ww):
                v = x[i * ww + j]
                for a in range(k):
                    for b_ in range(k):
                        out[(i * s + a) * ow + (j * s + b_)] += v * kern[a][b_]
        return out, (oh, ow)

    if kind == "avgpool2d":
        h, ww = shape
        w, s = layer.window, layer.stride
        oh, ow = (h - w) // s + 1, (ww - w) // s + 1
        out = []
        for i in range(oh):
            for j in range(ow):
                acc = 0.0
                for a in range(w):
                    for b_ in range(w):
                        acc += x[(i * s + a) * ww + (j * s + b_)]
                out.append(acc / (w * w))
        return out, (oh, ow)

    if kind == "activation":
        fn = {"relu": lambda v: v if v > 0 else 0.0, "tanh": math.tanh, "sigmoid": _sigmoid}[layer.fn]
        return [fn(v) for v in x], shape

    if kind == "reshape":
        return list(x), tuple(layer.shape)

    raise AssertionError(f"naive oracle has no rule for {kind}")


def naive_forward(net, point):
    """Evaluate a NetworkSpec on a flat input; returns (flat output, shape)."""
    x = [float(v) for v in point]
    shape = net.input_shape
    for layer in net.layers:
        x, shape = naive_layer(layer, x, shape)
    if net.descale is not None:
        a, b = net.descale
        x = [a * v + b for v in x]
    return x, shape


def naive_composed(net, point):
    img, shape = naive_forward(net.decoder, point)
    out, _ = naive_forward(net.regressor, img)
    assert len(out) == 1
    return out[0]
