"""Reference architectures and hand-constructed networks.

The four production architectures (image decoder, conditional image decoder,
pooling regressor, conv regressor, plus the latent encoder head used during
conditional training) are built here so shape checks, randomly initialized
fixtures, and exported weight files all share a single definition. The
identity / constant-bias composed networks give analytically known behavior
for solver and proof-map tests.
"""

from __future__ import annotations

import numpy as np

from .layers import Activation, AvgPool2D, Conv2D, Dense, Reshape, TransposedConv2D
from .network import ComposedNetwork, NetworkSpec

__all__ = [
    "image_decoder",
    "pool_regressor",
    "conv_regressor",
    "latent_encoder",
    "identity_composed",
    "constant_bias_composed",
    "tiny_random_composed",
]

IMAGE_SIDE = 16


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.PCG64(seed))


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int, shape=None) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape if shape is not None else (fan_out, fan_in))


def image_decoder(input_dim: int = 2, seed=0, name: str = "decoder") -> NetworkSpec:
    """Configuration-to-image decoder: input -> 64 -> 64 -> 8x8 -> tconv -> 16x16.

    `input_dim` is 2 for plain (d, theta) decoding and 3 when a latent noise
    coordinate is concatenated. Output pixels pass through a sigmoid.
    """
    rng = _rng(seed)
    return NetworkSpec(
        name=name,
        input_shape=(input_dim,),
        role="decoder",
        layers=[
            Dense(_glorot(rng, 64, input_dim), np.zeros(64)),
            Activation("relu"),
            Dense(_glorot(rng, 64, 64), np.zeros(64)),
            Activation("relu"),
            Reshape((8, 8)),
            TransposedConv2D(_glorot(rng, 2, 2, shape=(2, 2)), stride=2),
            Activation("sigmoid"),
        ],
    )


def pool_regressor(seed=0, name: str = "regressor") -> NetworkSpec:
    """Image-to-distance regressor: 16x16 -> avgpool -> 64 tanh -> linear."""
    rng = _rng(seed)
    return NetworkSpec(
        name=name,
        input_shape=(IMAGE_SIDE, IMAGE_SIDE),
        role="regressor",
        layers=[
            AvgPool2D(window=2, stride=2),
            Reshape((64,)),
            Dense(_glorot(rng, 64, 64), np.zeros(64)),
            Activation("tanh"),
            Dense(_glorot(rng, 1, 64), np.zeros(1)),
        ],
    )


def conv_regressor(descale: tuple[float, float] = (-3.0, 0.0), seed=0, name: str = "regressor-conv") -> NetworkSpec:
    """Noise-tolerant regressor: 16x16 -> avgpool -> conv3x3 tanh -> 32 tanh -> sigmoid.

    The sigmoid output is a scaled distance estimate; `descale` holds the
    affine (scale, offset) mapping it back to meters and is stored in the
    manifest rather than assumed.
    """
    rng = _rng(seed)
    return NetworkSpec(
        name=name,
        input_shape=(IMAGE_SIDE, IMAGE_SIDE),
        role="regressor",
        descale=descale,
        layers=[
            AvgPool2D(window=2, stride=2),
            Conv2D(_glorot(rng, 3, 3, shape=(3, 3)), stride=1, padding=0),
            Activation("tanh"),
            Reshape((36,)),
            Dense(_glorot(rng, 32, 36), np.zeros(32)),
            Activation("tanh"),
            Dense(_glorot(rng, 1, 32), np.zeros(1)),
            Activation("sigmoid"),
        ],
    )


def latent_encoder(config_dim: int = 2, seed=0, name: str = "encoder") -> NetworkSpec:
    """Capacity-limited posterior head: (16x16 image + config) -> 8 -> 2 -> (mu, log sigma)."""
    rng = _rng(seed)
    n_in = IMAGE_SIDE * IMAGE_SIDE + config_dim
    return NetworkSpec(
        name=name,
        input_shape=(n_in,),
        role="encoder",
        layers=[
            Dense(_glorot(rng, 8, n_in), np.zeros(8)),
            Activation("relu"),
            Dense(_glorot(rng, 2, 8), np.zeros(2)),
            Activation("relu"),
            Dense(_glorot(rng, 2, 2), np.zeros(2)),
        ],
    )


def identity_composed(input_dim: int = 2) -> ComposedNetwork:
    """Decoder writes coordinate 0 into pixel (0, 0); regressor reads it back.

    The composed output equals the input's first coordinate exactly, so the
    correctness error is identically zero.
    """
    n = IMAGE_SIDE * IMAGE_SIDE
    w_dec = np.zeros((n, input_dim))
    w_dec[0, 0] = 1.0
    decoder = NetworkSpec(
        name="identity-decoder",
        input_shape=(input_dim,),
        role="decoder",
        layers=[Dense(w_dec, np.zeros(n)), Reshape((IMAGE_SIDE, IMAGE_SIDE))],
    )
    w_reg = np.zeros((1, n))
    w_reg[0, 0] = 1.0
    regressor = NetworkSpec(
        name="identity-regressor",
        input_shape=(IMAGE_SIDE, IMAGE_SIDE),
        role="regressor",
        layers=[Reshape((n,)), Dense(w_reg, np.zeros(1))],
    )
    return ComposedNetwork(decoder, regressor, name="identity")


def constant_bias_composed(bias: float = 1.0, input_dim: int = 2) -> ComposedNetwork:
    """Like `identity_composed` but the estimate is coordinate 0 plus `bias`."""
    net = identity_composed(input_dim)
    reg = net.regressor
    biased = NetworkSpec(
        name=f"bias{bias:+g}-regressor",
        input_shape=reg.input_shape,
        role="regressor",
        layers=[reg.layers[0], Dense(reg.layers[1].weight, np.array([float(bias)]))],
    )
    return ComposedNetwork(net.decoder, biased, name=f"bias{bias:+g}")


def tiny_random_composed(seed=0, weight_scale: float = 1.0) -> ComposedNetwork:
    """Small seeded random network: decoder 2 -> 8 -> 16-pixel image, regressor
    16 -> 4 -> 1. Cheap enough for brute-force oracles and soundness sweeps."""
    rng = _rng(seed)
    decoder = NetworkSpec(
        name="tiny-decoder",
        input_shape=(2,),
        role="decoder",
        layers=[
            Dense(weight_scale * _glorot(rng, 8, 2), 0.1 * rng.standard_normal(8)),
            Activation("tanh"),
            Dense(weight_scale * _glorot(rng, 16, 8), 0.1 * rng.standard_normal(16)),
            Activation("sigmoid"),
            Reshape((4, 4)),
        ],
    )
    regressor = NetworkSpec(
        name="tiny-regressor",
        input_shape=(4, 4),
        role="regressor",
        layers=[
            Reshape((16,)),
            Dense(weight_scale * _glorot(rng, 4, 16), 0.1 * rng.standard_normal(4)),
            Activation("tanh"),
            Dense(weight_scale * _glorot(rng, 1, 4), 0.1 * rng.standard_normal(1)),
        ],
    )
    return ComposedNetwork(decoder, regressor, name=f"tiny-random-{seed}")
