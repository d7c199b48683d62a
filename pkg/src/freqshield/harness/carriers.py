"""Synthetic carrier families for desk-scale datasets."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..image_core import RasterImage, load_png, quantize, resize_bilinear, resize_plane
from ..prng import DetRng

FAMILIES = ("noise", "gradient", "checker", "blobs")


def _colors(rng: DetRng, n: int) -> np.ndarray:
    return rng.uniform_array(3 * n).reshape(n, 3) * 255.0


def noise_carrier(rng: DetRng, h: int, w: int) -> np.ndarray:
    return np.floor(rng.uniform_array(h * w * 3) * 256.0).reshape(h, w, 3)


def gradient_carrier(rng: DetRng, h: int, w: int) -> np.ndarray:
    angle = rng.uniform_f64() * 2.0 * np.pi
    c0, c1 = _colors(rng, 2)
    yy, xx = np.mgrid[0:h, 0:w]
    t = np.cos(angle) * xx / max(w - 1, 1) + np.sin(angle) * yy / max(h - 1, 1)
    t = (t - t.min()) / (np.ptp(t) or 1.0)
    return c0 + (c1 - c0) * t[:, :, None]


def checker_carrier(rng: DetRng, h: int, w: int) -> np.ndarray:
    cell = (4, 6, 8, 12, 16)[rng.randbelow(5)]
    oy, ox = rng.randbelow(cell), rng.randbelow(cell)
    c0, c1 = _colors(rng, 2)
    yy, xx = np.mgrid[0:h, 0:w]
    parity = (((yy + oy) // cell + (xx + ox) // cell) % 2).astype(np.float64)
    return c0 + (c1 - c0) * parity[:, :, None]


def blob_carrier(rng: DetRng, h: int, w: int) -> np.ndarray:
    """Value noise: a few octaves of coarse random grids, bilinearly upsampled."""
    out = np.zeros((h, w, 3))
    for grid, amp in ((3, 1.0), (5, 0.5), (9, 0.25)):
        for ch in range(3):
            coarse = rng.uniform_array(grid * grid).reshape(grid, grid)
            out[:, :, ch] += amp * resize_plane(coarse, h, w)
    lo = out.min(axis=(0, 1))
    span = np.ptp(out, axis=(0, 1))
    span[span == 0] = 1.0
    base, scale = rng.uniform_f64() * 64.0, 128.0 + rng.uniform_f64() * 64.0
    return base + scale * (out - lo) / span


_MAKERS = {
    "noise": noise_carrier,
    "gradient": gradient_carrier,
    "checker": checker_carrier,
    "blobs": blob_carrier,
}


def make_carrier(family: str, rng: DetRng, h: int, w: int) -> RasterImage:
    if family not in _MAKERS:
        raise ValueError(f"unknown carrier family {family!r}; choose from {FAMILIES}")
    return RasterImage(quantize(_MAKERS[family](rng, h, w)), "RGB")


def directory_carriers(path, h: int, w: int) -> list[RasterImage]:
    """User PNGs, sorted by name and resized to ``h x w``."""
    files = sorted(Path(path).glob("*.png"))
    return [resize_bilinear(load_png(f), h, w) for f in files]
