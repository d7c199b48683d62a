"""Residual forensics: residual maps, extremum binarization, sparsity stats, PGM export."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ImageIOError, ShapeError
from .image_core import RasterImage


@dataclass(frozen=True)
class SparsityReport:
    l0: int
    density: float
    max_amp: int
    mean_amp_nonzero: float

    def to_dict(self) -> dict:
        return asdict(self)


def absolute_residual(a: RasterImage, b: RasterImage) -> np.ndarray:
    """Per-pixel maximum over channels of ``|a - b|`` (int array, H x W)."""
    if a.samples.shape != b.samples.shape:
        raise ShapeError(f"size mismatch: {a.samples.shape} vs {b.samples.shape}")
    if a.space != b.space:
        raise ShapeError(f"color space mismatch: {a.space} vs {b.space}")
    diff = np.abs(a.samples.astype(np.int16) - b.samples.astype(np.int16))
    return diff.max(axis=2).astype(np.int32)


def binarize_extremum(residual: np.ndarray) -> np.ndarray:
    """Any nonzero residual becomes 1; no tolerance."""
    return (np.asarray(residual) > 0).astype(np.uint8)


def sparsity_stats(residual: np.ndarray) -> SparsityReport:
    r = np.asarray(residual)
    nz = r[r > 0]
    l0 = int(nz.size)
    return SparsityReport(
        l0=l0,
        density=l0 / r.size if r.size else 0.0,
        max_amp=int(r.max()) if r.size else 0,
        mean_amp_nonzero=float(nz.mean()) if l0 else 0.0,
    )


def psnr(a: RasterImage, b: RasterImage) -> float:
    if a.samples.shape != b.samples.shape:
        raise ShapeError(f"size mismatch: {a.samples.shape} vs {b.samples.shape}")
    mse = np.mean((a.samples.astype(np.float64) - b.samples.astype(np.float64)) ** 2)
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(255.0 ** 2 / mse))


def to_gray8(values: np.ndarray) -> np.ndarray:
    """Min-max normalize to 0..255; constant input maps to all zeros."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros(v.shape, dtype=np.uint8)
    return np.floor((v - lo) / (hi - lo) * 255.0 + 0.5).astype(np.uint8)


def save_heatmap_pgm(values: np.ndarray, path) -> None:
    v = np.asarray(values)
    if v.ndim != 2:
        raise ShapeError(f"heatmap must be 2D, got shape {v.shape}")
    gray = to_gray8(v)
    header = f"P5\n{v.shape[1]} {v.shape[0]}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(gray.tobytes())
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def load_pgm(path) -> np.ndarray:
    """Read a binary P5 PGM written by :func:`save_heatmap_pgm`."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    pos += 1
    if tokens[0] != "P5":
        raise ImageIOError(f"{path}: not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ImageIOError(f"{path}: 16-bit PGM not supported")
    return np.frombuffer(data[pos:pos + w * h], dtype=np.uint8).reshape(h, w)


def write_sparsity_csv(rows: list[tuple[str, SparsityReport]], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "l0", "density", "max_amp", "mean_amp_nonzero"])
        for name, rep in rows:
            writer.writerow([name, rep.l0, f"{rep.density:.6f}", rep.max_amp, f"{rep.mean_amp_nonzero:.6f}"])
