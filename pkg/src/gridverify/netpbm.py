"""Minimal binary netpbm writers/readers: P5 (grayscale) and P6 (RGB).

Fixed maxval 255, no comment lines; enough for dataset images, decoded
images, and heatmaps, and byte-stable across runs.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["write_pgm", "read_pgm", "write_ppm", "read_ppm"]


def write_pgm(path, image: np.ndarray) -> None:
    """Write a 2-D uint8 array as binary PGM (P5, maxval 255)."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"PGM image must be 2-D, got shape {img.shape}")
    img = img.astype(np.uint8)
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


def write_ppm(path, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 array as binary PPM (P6, maxval 255)."""
    img = np.asarray(rgb)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"PPM image must be (H, W, 3), got shape {img.shape}")
    img = img.astype(np.uint8)
    h, w = img.shape[:2]
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + img.tobytes())


def _read_header(data: bytes, magic: bytes, path) -> tuple[int, int, int]:
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated header")
        tokens.append(data[start:pos])
    if tokens[0] != magic:
        raise ValueError(f"{path}: not a binary {magic.decode()} file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported")
    # Pixel data starts one whitespace byte after the maxval token.
    return w, h, pos + 1


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5) into a 2-D uint8 array."""
    data = Path(path).read_bytes()
    w, h, start = _read_header(data, b"P5", path)
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=start)
    return pixels.reshape(h, w).copy()


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM (P6) into an (H, W, 3) uint8 array."""
    data = Path(path).read_bytes()
    w, h, start = _read_header(data, b"P6", path)
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=start)
    return pixels.reshape(h, w, 3).copy()
