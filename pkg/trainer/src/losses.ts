/** Loss functions with analytic gradients, one sample at a time. */

import { sigmoidScalar } from "./layers.js";

export interface LossResult {
  loss: number;
  grad: Float64Array;
}

/**
 * Binary cross-entropy against targets in [0,1], taking pre-sigmoid logits
 * and summing over elements. Folding the sigmoid into the loss keeps the
 * gradient (sigmoid(z) - t) stable for saturated pixels.
 */
export function bceWithLogits(logits: Float64Array, targets: Float64Array): LossResult {
  if (logits.length !== targets.length) throw new Error("logits/targets size mismatch");
  let loss = 0;
  const grad = new Float64Array(logits.length);
  for (let i = 0; i < logits.length; i++) {
    const z = logits[i];
    const t = targets[i];
    loss += Math.max(z, 0) - z * t + Math.log1p(Math.exp(-Math.abs(z)));
    grad[i] = sigmoidScalar(z) - t;
  }
  return { loss, grad };
}

/** Squared error summed over elements (networks here emit one scalar). */
export function mse(pred: Float64Array, target: Float64Array): LossResult {
  if (pred.length !== target.length) throw new Error("pred/target size mismatch");
  let loss = 0;
  const grad = new Float64Array(pred.length);
  for (let i = 0; i < pred.length; i++) {
    const r = pred[i] - target[i];
    loss += r * r;
    grad[i] = 2 * r;
  }
  return { loss, grad };
}

/**
 * KL divergence of N(mu, sigma^2) from the unit Gaussian prior for a scalar
 * latent, parameterized by log sigma. Analytically non-negative.
 */
export function klUnitGaussian(mu: number, logSigma: number): {
  kl: number;
  dMu: number;
  dLogSigma: number;
} {
  const s2 = Math.exp(2 * logSigma);
  return {
    kl: 0.5 * (mu * mu + s2 - 1) - logSigma,
    dMu: mu,
    dLogSigma: s2 - 1,
  };
}
