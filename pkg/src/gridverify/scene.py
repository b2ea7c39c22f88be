"""Synthetic lane-marker scenes: a deterministic affine stand-in for captured
camera footage, plus the line-break augmentation, labeled dataset emission,
and a structural-similarity score for image comparison.

The scene model is deliberately simple: the marker column at the bottom row
is affine in the lateral distance `d`, drifts linearly with yaw `theta` going
up the frame, and the rendered image is thresholded to pure black/white.
That gives the trainer learnable structure and the solver realistic fixtures
without any simulator in the loop.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .netpbm import write_pgm

__all__ = [
    "Configuration",
    "SceneModel",
    "BreakMask",
    "render_scene",
    "apply_break",
    "line_column",
    "generate_dataset",
    "ssim",
    "IMAGE_NAME_FMT",
]

IMAGE_NAME_FMT = "img_%06d.pgm"
LABELS_NAME = "labels.csv"

# Default sampling ranges for dataset generation (meters, radians).
DEFAULT_D_RANGE = (-3.0, 0.0)
DEFAULT_THETA_RANGE = (-0.1, 0.2)


@dataclass(frozen=True)
class Configuration:
    """A scenario point: signed distance to the marker (m) and yaw (rad)."""

    d: float
    theta: float


@dataclass(frozen=True)
class SceneModel:
    """Affine camera stand-in.

    The marker column at the bottom row is
    ``center_column + lateral_gain * (d - center_distance)``; each row above
    the bottom adds ``slope_gain * theta`` pixels of drift. A triangular
    intensity profile of half-width `thickness` is cut at `threshold` to give
    a black/white image.
    """

    lateral_gain: float = 2.5  # pixels per meter
    slope_gain: float = 2.5  # pixels per radian per row
    thickness: float = 2.5  # pixels; wide enough for sub-pixel centroid recovery
    threshold: float = 0.5
    center_column: float = 8.0
    center_distance: float = -1.685  # meters; middle of the operating d range
    size: int = 16

    def __post_init__(self):
        if self.lateral_gain <= 0 or self.slope_gain <= 0:
            raise ValueError("gains must be positive")
        if self.thickness < 1:
            raise ValueError("line thickness must be >= 1 pixel")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")

    def column_at(self, cfg: Configuration, row: int) -> float:
        """Sub-pixel marker column at `row` (row 0 is the top of the frame)."""
        base = self.center_column + self.lateral_gain * (cfg.d - self.center_distance)
        return base + (self.size - 1 - row) * self.slope_gain * cfg.theta


@dataclass(frozen=True)
class BreakMask:
    """A diagonal erasure band: width 0 leaves the image unchanged."""

    width: float
    anchor: float = 15.0  # row + col value the band is centered on

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("break width must be >= 0")


def render_scene(cfg: Configuration, model: SceneModel = SceneModel()) -> np.ndarray:
    """Deterministic thresholded image of the marker; off-frame parts clip."""
    if not (np.isfinite(cfg.d) and np.isfinite(cfg.theta)):
        raise ValueError("configuration must be finite")
    n = model.size
    img = np.zeros((n, n), dtype=np.uint8)
    cols = np.arange(n) + 0.5
    for row in range(n):
        center = model.column_at(cfg, row)
        intensity = 1.0 - np.abs(cols - center) / model.thickness
        img[row, intensity > model.threshold] = 255
    return img


def apply_break(image: np.ndarray, mask: BreakMask) -> np.ndarray:
    """Zero a diagonal band of `mask.width` pixels; idempotent by construction."""
    if mask.width == 0:
        return image.copy()
    n_rows, n_cols = image.shape
    rows = np.arange(n_rows)[:, None]
    cols = np.arange(n_cols)[None, :]
    band = np.abs((rows + cols) - mask.anchor) < 0.5 * mask.width
    out = image.copy()
    out[band] = 0
    return out


def line_column(image: np.ndarray, row: int) -> float | None:
    """Centroid column of lit pixels in `row`, or None for an empty row."""
    vals = np.asarray(image[row], dtype=np.float64)
    total = vals.sum()
    if total == 0:
        return None
    centers = np.arange(vals.size) + 0.5
    return float((vals * centers).sum() / total)


def generate_dataset(
    n: int,
    out_dir,
    model: SceneModel = SceneModel(),
    d_range=DEFAULT_D_RANGE,
    theta_range=DEFAULT_THETA_RANGE,
    break_prob: float = 0.0,
    break_max: float = 6.0,
    seed: int = 0,
) -> Path:
    """Render `n` labeled scenes into `out_dir` (PGM images + labels.csv).

    Configurations are sampled uniformly over the given ranges; with
    probability `break_prob` a diagonal break of uniform width in
    (0, break_max] is applied. Output is byte-identical for a fixed seed.
    """
    if n < 1:
        raise ValueError("dataset size must be >= 1")
    if not 0 <= break_prob <= 1:
        raise ValueError("break_prob must lie in [0, 1]")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        rng = np.random.Generator(np.random.PCG64(seed))
        with (out_dir / LABELS_NAME).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index", "d", "theta", "break_w"])
            for i in range(n):
                d = rng.uniform(*d_range)
                theta = rng.uniform(*theta_range)
                w = 0.0
                if break_prob > 0 and rng.random() < break_prob:
                    w = rng.uniform(0.0, break_max)
                img = render_scene(Configuration(d, theta), model)
                if w > 0:
                    img = apply_break(img, BreakMask(w))
                write_pgm(out_dir / (IMAGE_NAME_FMT % i), img)
                writer.writerow([i, repr(d), repr(theta), repr(w)])
    except OSError as e:
        raise OSError(f"cannot write dataset to {out_dir}: {e}") from None
    return out_dir


def ssim(a: np.ndarray, b: np.ndarray, window: int = 8) -> float:
    """Mean structural similarity over sliding `window` x `window` patches.

    Uses the default stabilization constants K1=0.01, K2=0.03 with dynamic
    range L=1; inputs with integer dtype are rescaled from [0, 255].
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError("ssim expects 2-D grayscale images")
    if min(a.shape) < window:
        raise ValueError(f"images smaller than the {window}x{window} window")
    a = a.astype(np.float64) / 255.0 if np.issubdtype(a.dtype, np.integer) else a.astype(np.float64)
    b = b.astype(np.float64) / 255.0 if np.issubdtype(b.dtype, np.integer) else b.astype(np.float64)

    c1 = (0.01 * 1.0) ** 2
    c2 = (0.03 * 1.0) ** 2
    h, w = a.shape
    scores = []
    for i in range(h - window + 1):
        for j in range(w - window + 1):
            pa = a[i : i + window, j : j + window]
            pb = b[i : i + window, j : j + window]
            mu_a = pa.mean()
            mu_b = pb.mean()
            var_a = pa.var()
            var_b = pb.var()
            cov = ((pa - mu_a) * (pb - mu_b)).mean()
            scores.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
            )
    return float(np.mean(scores))
