"""Raster images: PNG I/O, BT.601 YUV conversion and bilinear resizing."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FormatError, ImageIOError, SpaceError

log = logging.getLogger(__name__)

SPACES = ("RGB", "BGR", "YUV")

# BT.601 full range, chroma offset +128
RGB_TO_YUV = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.169, -0.331, 0.5],
        [0.5, -0.419, -0.081],
    ]
)
YUV_OFFSET = np.array([0.0, 128.0, 128.0])
YUV_TO_RGB = np.linalg.inv(RGB_TO_YUV)


@dataclass
class RasterImage:
    """8-bit, 3-channel, row-major interleaved image with a color-space tag."""

    samples: np.ndarray
    space: str = "RGB"

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.dtype != np.uint8:
            raise FormatError(f"samples must be uint8, got {s.dtype}")
        if s.ndim != 3 or s.shape[2] != 3:
            raise FormatError(f"samples must be H x W x 3, got {s.shape}")
        if self.space not in SPACES:
            raise SpaceError(f"unknown color space {self.space!r}")
        self.samples = np.ascontiguousarray(s)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return 3

    def copy(self) -> "RasterImage":
        return RasterImage(self.samples.copy(), self.space)

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.samples, other.samples)


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(x: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] then round half away from zero, as uint8."""
    return round_half_away(np.clip(x, 0.0, 255.0)).astype(np.uint8)


def load_png(path) -> RasterImage:
    path = Path(path)
    if not path.is_file():
        raise ImageIOError(f"no such file: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I", "F"):
                raise FormatError(f"{path}: {mode} images are not 8-bit")
            if mode == "CMYK":
                raise FormatError(f"{path}: CMYK is not supported")
            if mode == "P":
                if "transparency" in im.info:
                    raise FormatError(f"{path}: palette with alpha is not supported")
                im = im.convert("RGB")
                mode = "RGB"
            if mode in ("RGBA", "LA"):
                warnings.warn(f"{path}: alpha channel stripped", stacklevel=2)
                im = im.convert("RGB" if mode == "RGBA" else "L")
                mode = im.mode
            if mode == "1":
                im = im.convert("L")
                mode = "L"
            arr = np.asarray(im)
    except FormatError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    if arr.dtype != np.uint8:
        raise FormatError(f"{path}: expected 8-bit samples, got {arr.dtype}")
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise FormatError(f"{path}: unsupported channel layout {arr.shape}")
    return RasterImage(arr, "RGB")


def save_png(img: RasterImage, path) -> None:
    if img.space != "RGB":
        raise SpaceError(f"save_png expects RGB, image is {img.space}")
    path = Path(path)
    try:
        Image.fromarray(img.samples, mode="RGB").save(path, format="PNG", optimize=False)
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def rgb_to_bgr(img: RasterImage) -> RasterImage:
    if img.space != "RGB":
        raise SpaceError(f"expected RGB, got {img.space}")
    return RasterImage(img.samples[:, :, ::-1].copy(), "BGR")


def bgr_to_rgb(img: RasterImage) -> RasterImage:
    if img.space != "BGR":
        raise SpaceError(f"expected BGR, got {img.space}")
    return RasterImage(img.samples[:, :, ::-1].copy(), "RGB")


def rgb_to_yuv_planes(img: RasterImage) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unrounded float64 Y, U, V planes (the embedding path works on these)."""
    if img.space != "RGB":
        raise SpaceError(f"expected RGB, got {img.space}")
    yuv = img.samples.astype(np.float64) @ RGB_TO_YUV.T + YUV_OFFSET
    return yuv[:, :, 0], yuv[:, :, 1], yuv[:, :, 2]


def yuv_planes_to_rgb(y: np.ndarray, u: np.ndarray, v: np.ndarray) -> RasterImage:
    """Float planes back to a quantized RGB image."""
    yuv = np.stack([y, u, v], axis=2) - YUV_OFFSET
    return RasterImage(quantize(yuv @ YUV_TO_RGB.T), "RGB")


def rgb_to_yuv(img: RasterImage) -> RasterImage:
    y, u, v = rgb_to_yuv_planes(img)
    return RasterImage(quantize(np.stack([y, u, v], axis=2)), "YUV")


def yuv_to_rgb(img: RasterImage) -> RasterImage:
    if img.space != "YUV":
        raise SpaceError(f"expected YUV, got {img.space}")
    s = img.samples.astype(np.float64)
    return yuv_planes_to_rgb(s[:, :, 0], s[:, :, 1], s[:, :, 2])


@lru_cache(maxsize=64)
def bilinear_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic ``n_out x n_in`` interpolation matrix (half-pixel centers).

    Resizing a plane ``P`` is ``A_h @ P @ A_w.T``; being linear, the same
    matrices also resize learnable grids inside the autodiff graph.
    """
    if n_in < 1 or n_out < 1:
        raise ValueError("sizes must be >= 1")
    m = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for i in range(n_out):
        src = min(max((i + 0.5) * scale - 0.5, 0.0), n_in - 1.0)
        lo = int(np.floor(src))
        hi = min(lo + 1, n_in - 1)
        frac = src - lo
        m[i, lo] += 1.0 - frac
        m[i, hi] += frac
    m.setflags(write=False)
    return m


def resize_plane(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    if (h, w) == (out_h, out_w):
        return plane.copy()
    return bilinear_matrix(h, out_h) @ plane @ bilinear_matrix(w, out_w).T


def resize_bilinear(img: RasterImage, out_h: int, out_w: int) -> RasterImage:
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be >= 1, got {out_h}x{out_w}")
    if (img.height, img.width) == (out_h, out_w):
        return img.copy()
    ah = bilinear_matrix(img.height, out_h)
    aw = bilinear_matrix(img.width, out_w)
    s = img.samples.astype(np.float64)
    out = np.einsum("ih,hwc,jw->ijc", ah, s, aw)
    return RasterImage(quantize(out), img.space)
