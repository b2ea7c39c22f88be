/**
 * Single-sample layers with explicit forward/backward passes.
 *
 * Everything is a flat Float64Array; 2-D layers carry their own geometry.
 * forward() caches what backward() needs, so call them in matched pairs
 * (one sample at a time); parameter gradients accumulate until zeroGrads().
 */

import { Rng } from "./rng.js";

export interface Param {
  value: Float64Array;
  grad: Float64Array;
}

export interface Layer {
  readonly kind: string;
  readonly inSize: number;
  readonly outSize: number;
  forward(x: Float64Array): Float64Array;
  backward(grad: Float64Array): Float64Array;
  params(): Param[];
}

function glorot(rng: Rng, fanOut: number, fanIn: number, n: number): Float64Array {
  const a = Math.sqrt(6 / (fanIn + fanOut));
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) out[i] = rng.uniform(-a, a);
  return out;
}

export class DenseLayer implements Layer {
  readonly kind = "dense";
  readonly inSize: number;
  readonly outSize: number;
  weight: Param; // row-major (outSize, inSize)
  bias: Param;
  private x: Float64Array = new Float64Array(0);

  constructor(inSize: number, outSize: number, rng: Rng) {
    this.inSize = inSize;
    this.outSize = outSize;
    this.weight = {
      value: glorot(rng, outSize, inSize, outSize * inSize),
      grad: new Float64Array(outSize * inSize),
    };
    this.bias = { value: new Float64Array(outSize), grad: new Float64Array(outSize) };
  }

  forward(x: Float64Array): Float64Array {
    this.x = x;
    const { inSize, outSize } = this;
    const w = this.weight.value;
    const out = new Float64Array(outSize);
    for (let i = 0; i < outSize; i++) {
      let acc = this.bias.value[i];
      const row = i * inSize;
      for (let j = 0; j < inSize; j++) acc += w[row + j] * x[j];
      out[i] = acc;
    }
    return out;
  }

  backward(grad: Float64Array): Float64Array {
    const { inSize, outSize, x } = this;
    const w = this.weight.value;
    const wg = this.weight.grad;
    const bg = this.bias.grad;
    const dx = new Float64Array(inSize);
    for (let i = 0; i < outSize; i++) {
      const g = grad[i];
      const row = i * inSize;
      bg[i] += g;
      for (let j = 0; j < inSize; j++) {
        wg[row + j] += g * x[j];
        dx[j] += w[row + j] * g;
      }
    }
    return dx;
  }

  params(): Param[] {
    return [this.weight, this.bias];
  }
}

export class ReluLayer implements Layer {
  readonly kind = "relu";
  private x: Float64Array = new Float64Array(0);

  constructor(readonly inSize: number) {}

  get outSize(): number {
    return this.inSize;
  }

  forward(x: Float64Array): Float64Array {
    this.x = x;
    const out = new Float64Array(x.length);
    for (let i = 0; i < x.length; i++) out[i] = x[i] > 0 ? x[i] : 0;
    return out;
  }

  backward(grad: Float64Array): Float64Array {
    const dx = new Float64Array(grad.length);
    for (let i = 0; i < grad.length; i++) dx[i] = this.x[i] > 0 ? grad[i] : 0;
    return dx;
  }

  params(): Param[] {
    return [];
  }
}

export class TanhLayer implements Layer {
  readonly kind = "tanh";
  private y: Float64Array = new Float64Array(0);

  constructor(readonly inSize: number) {}

  get outSize(): number {
    return this.inSize;
  }

  forward(x: Float64Array): Float64Array {
    const out = new Float64Array(x.length);
    for (let i = 0; i < x.length; i++) out[i] = Math.tanh(x[i]);
    this.y = out;
    return out;
  }

  backward(grad: Float64Array): Float64Array {
    const dx = new Float64Array(grad.length);
    for (let i = 0; i < grad.length; i++) dx[i] = grad[i] * (1 - this.y[i] * this.y[i]);
    return dx;
  }

  params(): Param[] {
    return [];
  }
}

export function sigmoidScalar(v: number): number {
  if (v >= 0) return 1 / (1 + Math.exp(-v));
  const e = Math.exp(v);
  return e / (1 + e);
}

export class SigmoidLayer implements Layer {
  readonly kind = "sigmoid";
  private y: Float64Array = new Float64Array(0);

  constructor(readonly inSize: number) {}

  get outSize(): number {
    return this.inSize;
  }

  forward(x: Float64Array): Float64Array {
    const out = new Float64Array(x.length);
    for (let i = 0; i < x.length; i++) out[i] = sigmoidScalar(x[i]);
    this.y = out;
    return out;
  }

  backward(grad: Float64Array): Float64Array {
    const dx = new Float64Array(grad.length);
    for (let i = 0; i < grad.length; i++) dx[i] = grad[i] * this.y[i] * (1 - this.y[i]);
    return dx;
  }

  params(): Param[] {
    return [];
  }
}

/** Fixed affine output map (scale, offset); not trained. */
export class ScaleLayer implements Layer {
  readonly kind = "scale";

  constructor(readonly inSize: number, readonly scale: number, readonly offset: number) {}

  get outSize(): number {
    return this.inSize;
  }

  forward(x: Float64Array): Float64Array {
    const out = new Float64Array(x.length);
    for (let i = 0; i < x.length; i++) out[i] = this.scale * x[i] + this.offset;
    return out;
  }

  backward(grad: Float64Array): Float64Array {
    const dx = new Float64Array(grad.length);
    for (let i = 0; i < grad.length; i++) dx[i] = this.scale * grad[i];
    return dx;
  }

  params(): Param[] {
    return [];
  }
}

export class AvgPoolLayer implements Layer {
  readonly kind = "avgpool2d";
  readonly outH: number;
  readonly outW: number;

  constructor(
    readonly h: number,
    readonly w: number,
    readonly window = 2,
    readonly stride = 2,
  ) {
    this.outH = Math.floor((h - window) / stride) + 1;
    this.outW = Math.floor((w - window) / stride) + 1;
  }

  get inSize(): number {
    return this.h * this.w;
  }

  get outSize(): number {
    return this.outH * this.outW;
  }

  forward(x: Float64Array): Float64Array {
    const { outH, outW, window, stride, w } = this;
    const inv = 1 / (window * window);
    const out = new Float64Array(outH * outW);
    for (let i = 0; i < outH; i++) {
      for (let j = 0; j < outW; j++) {
        let acc = 0;
        for (let a = 0; a < window; a++) {
          for (let b = 0; b < window; b++) {
            acc += x[(i * stride + a) * w + (j * stride + b)];
          }
        }
        out[i * outW + j] = acc * inv;
      }
    }
    return out;
  }

  backward(grad: Float64Array): Float64Array {
    const { outH, outW, window, stride, w } = this;
    const inv = 1 / (window * window);
    const dx = new Float64Array(this.h * this.w);
    for (let i = 0; i < outH; i++) {
      for (let j = 0; j < outW; j++) {
        const g = grad[i * outW + j] * inv;
        for (let a = 0; a < window; a++) {
          for (let b = 0; b < window; b++) {
            dx[(i * stride + a) * w + (j * stride + b)] += g;
          }
        }
      }
    }
    return dx;
  }

  params(): Param[] {
    return [];
  }
}

export class Conv2DLayer implements Layer {
  readonly kind = "conv2d";
  readonly outH: number;
  readonly outW: number;
  kernel: Param; // (k, k) row-major
  bias: Param; // scalar, shared across the map
  private x: Float64Array = new Float64Array(0);

  constructor(
    readonly h: number,
    readonly w: number,
    readonly k: number,
    readonly stride: number,
    rng: Rng,
  ) {
    this.outH = Math.floor((h - k) / stride) + 1;
    this.outW = Math.floor((w - k) / stride) + 1;
    this.kernel = { value: glorot(rng, k, k, k * k), grad: new Float64Array(k * k) };
    this.bias = { value: new Float64Array(1), grad: new Float64Array(1) };
  }

  get inSize(): number {
    return this.h * this.w;
  }

  get outSize(): number {
    return this.outH * this.outW;
  }

  forward(x: Float64Array): Float64Array {
    this.x = x;
    const { outH, outW, k, stride, w } = this;
    const kv = this.kernel.value;
    const out = new Float64Array(outH * outW);
    for (let i = 0; i < outH; i++) {
      for (let j = 0; j < outW; j++) {
        let acc = this.bias.value[0];
        for (let a = 0; a < k; a++) {
          for (let b = 0; b < k; b++) {
            acc += kv[a * k + b] * x[(i * stride + a) * w + (j * stride + b)];
          }
        }
        out[i * outW + j] = acc;
      }
    }
    return out;
  }

  backward(grad: Float64Array): Float64Array {
    const { outH, outW, k, stride, w, x } = this;
    const kv = this.kernel.value;
    const kg = this.kernel.grad;
    const dx = new Float64Array(this.h * this.w);
    for (let i = 0; i < outH; i++) {
      for (let j = 0; j < outW; j++) {
        const g = grad[i * outW + j];
        this.bias.grad[0] += g;
        for (let a = 0; a < k; a++) {
          for (let b = 0; b < k; b++) {
            const idx = (i * stride + a) * w + (j * stride + b);
            kg[a * k + b] += g * x[idx];
            dx[idx] += kv[a * k + b] * g;
          }
        }
      }
    }
    return dx;
  }

  params(): Param[] {
    return [this.kernel, this.bias];
  }
}

export class TConv2DLayer implements Layer {
  readonly kind = "tconv2d";
  readonly outH: number;
  readonly outW: number;
  kernel: Param;
  bias: Param; // scalar, shared across the map
  private x: Float64Array = new Float64Array(0);

  constructor(
    readonly h: number,
    readonly w: number,
    readonly k: number,
    readonly stride: number,
    rng: Rng,
  ) {
    this.outH = (h - 1) * stride + k;
    this.outW = (w - 1) * stride + k;
    this.kernel = { value: glorot(rng, k, k, k * k), grad: new Float64Array(k * k) };
    this.bias = { value: new Float64Array(1), grad: new Float64Array(1) };
  }

  get inSize(): number {
    return this.h * this.w;
  }

  get outSize(): number {
    return this.outH * this.outW;
  }

  forward(x: Float64Array): Float64Array {
    this.x = x;
    const { h, w, k, stride, outW } = this;
    const kv = this.kernel.value;
    const out = new Float64Array(this.outH * outW).fill(this.bias.value[0]);
    for (let i = 0; i < h; i++) {
      for (let j = 0; j < w; j++) {
        const v = x[i * w + j];
        for (let a = 0; a < k; a++) {
          for (let b = 0; b < k; b++) {
            out[(i * stride + a) * outW + (j * stride + b)] += v * kv[a * k + b];
          }
        }
      }
    }
    return out;
  }

  backward(grad: Float64Array): Float64Array {
    const { h, w, k, stride, outW, x } = this;
    const kv = this.kernel.value;
    const kg = this.kernel.grad;
    for (let i = 0; i < grad.length; i++) this.bias.grad[0] += grad[i];
    const dx = new Float64Array(h * w);
    for (let i = 0; i < h; i++) {
      for (let j = 0; j < w; j++) {
        let acc = 0;
        for (let a = 0; a < k; a++) {
          for (let b = 0; b < k; b++) {
            const g = grad[(i * stride + a) * outW + (j * stride + b)];
            acc += kv[a * k + b] * g;
            kg[a * k + b] += x[i * w + j] * g;
          }
        }
        dx[i * w + j] += acc;
      }
    }
    return dx;
  }

  params(): Param[] {
    return [this.kernel, this.bias];
  }
}

export class Sequential {
  constructor(readonly layers: Layer[]) {
    for (let i = 1; i < layers.length; i++) {
      if (layers[i].inSize !== layers[i - 1].outSize) {
        throw new Error(
          `layer ${i} (${layers[i].kind}) expects ${layers[i].inSize} inputs, ` +
            `got ${layers[i - 1].outSize}`,
        );
      }
    }
  }

  get inSize(): number {
    return this.layers[0].inSize;
  }

  get outSize(): number {
    return this.layers[this.layers.length - 1].outSize;
  }

  forward(x: Float64Array): Float64Array {
    for (const layer of this.layers) x = layer.forward(x);
    return x;
  }

  backward(grad: Float64Array): Float64Array {
    for (let i = this.layers.length - 1; i >= 0; i--) grad = this.layers[i].backward(grad);
    return grad;
  }

  params(): Param[] {
    return this.layers.flatMap((l) => l.params());
  }

  zeroGrads(): void {
    for (const p of this.params()) p.grad.fill(0);
  }
}
