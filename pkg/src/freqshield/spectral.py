"""2D DCT-II, DCT basis functions, Haar DWT and zig-zag frequency ordering.

Transforms run in float64 on plain 2D numpy arrays. Both the DCT and the
Haar filter bank are orthonormal, so Parseval holds for each.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

SQRT1_2 = 1.0 / np.sqrt(2.0)
SUBBANDS = ("LL", "HL", "LH", "HH")


@lru_cache(maxsize=64)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix ``C`` with ``C @ C.T == I``."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * i + 1) * k / (2 * n))
    c[0, :] *= np.sqrt(1.0 / n)
    c[1:, :] *= np.sqrt(2.0 / n)
    c.setflags(write=False)
    return c


def dct2(plane: np.ndarray) -> np.ndarray:
    p = np.asarray(plane, dtype=np.float64)
    if p.ndim != 2 or min(p.shape) < 1:
        raise ValueError(f"dct2 expects a non-empty 2D plane, got shape {p.shape}")
    h, w = p.shape
    return dct_matrix(h) @ p @ dct_matrix(w).T


def idct2(spectrum: np.ndarray) -> np.ndarray:
    s = np.asarray(spectrum, dtype=np.float64)
    if s.ndim != 2 or min(s.shape) < 1:
        raise ValueError(f"idct2 expects a non-empty 2D spectrum, got shape {s.shape}")
    h, w = s.shape
    return dct_matrix(h).T @ s @ dct_matrix(w)


def dct_basis(u: int, v: int, h_b: int, w_b: int) -> np.ndarray:
    """Attention basis ``B[h, w] = cos(pi*h*(u+0.5)/H_b) * cos(pi*w*(v+0.5)/W_b)``.

    Note the half-sample offset sits on the frequency index, not the spatial
    one; this is deliberately not the textbook DCT-II basis (``dct2`` uses
    that one).
    """
    if not (0 <= u < h_b and 0 <= v < w_b):
        raise IndexError(f"frequency ({u}, {v}) outside {h_b}x{w_b}")
    hh = np.arange(h_b)[:, None]
    ww = np.arange(w_b)[None, :]
    return np.cos(np.pi * hh * (u + 0.5) / h_b) * np.cos(np.pi * ww * (v + 0.5) / w_b)


@dataclass
class DwtPyramid:
    """Multi-level Haar decomposition.

    ``bands[i]`` holds the ``LL/HL/LH/HH`` planes of level ``i + 1``; the LL
    of the last level is the coarse approximation used for reconstruction.
    """

    bands: list[dict[str, np.ndarray]]
    orig_shape: tuple[int, int]
    padded_shape: tuple[int, int] = field(default=(0, 0))

    @property
    def levels(self) -> int:
        return len(self.bands)

    def band(self, level: int, name: str) -> np.ndarray:
        return self.bands[level - 1][name]


def _analysis(p: np.ndarray) -> dict[str, np.ndarray]:
    a = p[0::2, 0::2]
    b = p[0::2, 1::2]
    c = p[1::2, 0::2]
    d = p[1::2, 1::2]
    return {
        "LL": (a + b + c + d) / 2.0,
        "HL": (a - b + c - d) / 2.0,
        "LH": (a + b - c - d) / 2.0,
        "HH": (a - b - c + d) / 2.0,
    }


def _synthesis(ll, hl, lh, hh) -> np.ndarray:
    h, w = ll.shape
    out = np.empty((2 * h, 2 * w))
    out[0::2, 0::2] = (ll + hl + lh + hh) / 2.0
    out[0::2, 1::2] = (ll - hl + lh - hh) / 2.0
    out[1::2, 0::2] = (ll + hl - lh - hh) / 2.0
    out[1::2, 1::2] = (ll - hl - lh + hh) / 2.0
    return out


def haar_dwt2(plane: np.ndarray, levels: int = 2) -> DwtPyramid:
    p = np.asarray(plane, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError(f"haar_dwt2 expects a 2D plane, got shape {p.shape}")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    h, w = p.shape
    block = 2 ** levels
    ph = -(-h // block) * block
    pw = -(-w // block) * block
    if (ph, pw) != (h, w):
        p = np.pad(p, ((0, ph - h), (0, pw - w)), mode="edge")
    bands = []
    current = p
    for _ in range(levels):
        level = _analysis(current)
        bands.append(level)
        current = level["LL"]
    return DwtPyramid(bands, (h, w), (ph, pw))


def haar_idwt2(pyr: DwtPyramid) -> np.ndarray:
    current = pyr.bands[-1]["LL"]
    for level in reversed(pyr.bands):
        current = _synthesis(current, level["HL"], level["LH"], level["HH"])
    h, w = pyr.orig_shape
    return current[:h, :w]


def zigzag_order(h: int, w: int) -> list[tuple[int, int]]:
    """JPEG zig-zag traversal of an ``h x w`` grid starting at (0, 0)."""
    if h < 1 or w < 1:
        raise ValueError("grid dims must be >= 1")
    order = []
    for s in range(h + w - 1):
        rows = range(max(0, s - w + 1), min(s, h - 1) + 1)
        if s % 2 == 0:
            rows = reversed(rows)
        order.extend((i, s - i) for i in rows)
    return order
