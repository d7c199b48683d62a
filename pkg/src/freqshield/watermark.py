"""Classical invisible-watermark embedders: LSB, Patchwork, DCT and DWT.

All embedders take an RGB carrier and a 32-bit payload and return a new
RGB image of the same size. They are pure functions of
``(config, carrier, payload)``; the only randomness comes from a
:class:`~freqshield.prng.DetRng` seeded with ``config.seed``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import CapacityError, SpaceError, UnknownAlgorithm
from .image_core import RasterImage, rgb_to_yuv_planes, yuv_planes_to_rgb
from .prng import DetRng, parse_seed, sample_distinct_pixel_pairs
from .spectral import dct2, haar_dwt2, haar_idwt2, idct2

PAYLOAD_BITS = 32
ALGORITHMS = ("lsb", "patchwork", "dct", "dwt")
BLUE = 2  # channel index in RGB order


@dataclass(frozen=True)
class Payload32:
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) != PAYLOAD_BITS:
            raise ValueError(f"payload must have {PAYLOAD_BITS} bits, got {len(bits)}")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("payload bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_bitstring(cls, s: str) -> "Payload32":
        s = s.strip()
        if len(s) != PAYLOAD_BITS or set(s) - {"0", "1"}:
            raise ValueError(f"payload must be a {PAYLOAD_BITS}-character bit string, got {s!r}")
        return cls(tuple(int(c) for c in s))

    @classmethod
    def random(cls, rng: DetRng) -> "Payload32":
        word = rng.next_u64() & 0xFFFFFFFF
        return cls(tuple((word >> (31 - i)) & 1 for i in range(PAYLOAD_BITS)))

    @classmethod
    def zeros(cls) -> "Payload32":
        return cls((0,) * PAYLOAD_BITS)

    @classmethod
    def ones(cls) -> "Payload32":
        return cls((1,) * PAYLOAD_BITS)

    def to_bitstring(self) -> str:
        return "".join(str(b) for b in self.bits)

    def bipolar(self) -> np.ndarray:
        return 2.0 * np.asarray(self.bits, dtype=np.float64) - 1.0

    def __str__(self):
        return self.to_bitstring()


@dataclass(frozen=True)
class EmbedConfig:
    algo: str = "dct"
    seed: int = 0
    alpha: float = 15.0
    d: int = 5
    pairs_per_bit: int = 100
    levels: int = 2
    subband: str = "HL"

    def __post_init__(self):
        algo = self.algo.lower()
        if algo not in ALGORITHMS:
            raise UnknownAlgorithm(f"unknown embedding algorithm {self.algo!r}")
        object.__setattr__(self, "algo", algo)
        object.__setattr__(self, "seed", parse_seed(self.seed))
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.d < 0:
            raise ValueError("d must be >= 0")
        if self.pairs_per_bit < 1:
            raise ValueError("pairs_per_bit must be >= 1")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.subband not in ("HL", "LH", "HH"):
            raise ValueError(f"subband must be HL, LH or HH, got {self.subband!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "EmbedConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown EmbedConfig keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, text: str) -> "EmbedConfig":
        return cls.from_dict(json.loads(text))

    def with_seed(self, seed: int) -> "EmbedConfig":
        return EmbedConfig(**{**self.to_dict(), "seed": seed})


def _require_rgb(img: RasterImage):
    if img.space != "RGB":
        raise SpaceError(f"embedders expect RGB carriers, got {img.space}")


# ---------------------------------------------------------------- LSB

def embed_lsb(carrier: RasterImage, m: Payload32) -> RasterImage:
    """Tile the payload over the blue-channel LSBs in row-major pixel order."""
    _require_rgb(carrier)
    out = carrier.samples.copy()
    n = carrier.height * carrier.width
    tiled = np.resize(np.asarray(m.bits, dtype=np.uint8), n).reshape(carrier.height, carrier.width)
    out[:, :, BLUE] = (out[:, :, BLUE] & 0xFE) | tiled
    return RasterImage(out, "RGB")


def decode_lsb(img: RasterImage) -> Payload32:
    flat = img.samples[:, :, BLUE].reshape(-1)
    if flat.size < PAYLOAD_BITS:
        raise CapacityError("image has fewer than 32 pixels")
    return Payload32(tuple(int(b) & 1 for b in flat[:PAYLOAD_BITS]))


# ---------------------------------------------------------------- Patchwork

def patchwork_pairs(cfg: EmbedConfig, height: int, width: int):
    """Per-bit pixel-pair lists; all coordinates are distinct across the payload."""
    rng = DetRng(cfg.seed)
    n = cfg.pairs_per_bit
    pairs = sample_distinct_pixel_pairs(rng, height, width, PAYLOAD_BITS * n)
    return [pairs[k * n:(k + 1) * n] for k in range(PAYLOAD_BITS)]


def _pair_index(bit_pairs):
    a = np.array([p[0] for p in bit_pairs])
    b = np.array([p[1] for p in bit_pairs])
    return (a[:, 0], a[:, 1]), (b[:, 0], b[:, 1])


def embed_patchwork(carrier: RasterImage, m: Payload32, cfg: EmbedConfig) -> RasterImage:
    """Bit 1 raises the blue channel at the A pixels by ``d`` and lowers it at B."""
    _require_rgb(carrier)
    per_bit = patchwork_pairs(cfg, carrier.height, carrier.width)
    if cfg.d == 0:
        return carrier.copy()
    blue = carrier.samples[:, :, BLUE].astype(np.int32)
    for bit, bit_pairs in zip(m.bits, per_bit):
        step = cfg.d if bit else -cfg.d
        ia, ib = _pair_index(bit_pairs)
        blue[ia] += step
        blue[ib] -= step
    out = carrier.samples.copy()
    out[:, :, BLUE] = np.clip(blue, 0, 255).astype(np.uint8)
    return RasterImage(out, "RGB")


def patchwork_statistic(img: RasterImage, cfg: EmbedConfig) -> np.ndarray:
    """Per-bit ``mean(B at A pixels) - mean(B at B pixels)``; sign encodes the bit."""
    per_bit = patchwork_pairs(cfg, img.height, img.width)
    blue = img.samples[:, :, BLUE].astype(np.float64)
    stats = np.empty(PAYLOAD_BITS)
    for k, bit_pairs in enumerate(per_bit):
        ia, ib = _pair_index(bit_pairs)
        stats[k] = blue[ia].mean() - blue[ib].mean()
    return stats


def decode_patchwork(img: RasterImage, cfg: EmbedConfig) -> Payload32:
    return Payload32(tuple(int(s > 0) for s in patchwork_statistic(img, cfg)))


# ---------------------------------------------------------------- spread spectrum

def bit_patterns(seed: int, shape: tuple[int, int]) -> np.ndarray:
    """32 standard-normal patterns of ``shape``, drawn in bit order from one stream."""
    rng = DetRng(seed)
    n = shape[0] * shape[1]
    return rng.normal_array(PAYLOAD_BITS * n).reshape(PAYLOAD_BITS, *shape)


def composite_pattern(seed: int, shape: tuple[int, int], m: Payload32, scale: str) -> np.ndarray:
    """Bipolar sum of the 32 bit patterns.

    ``scale="unit"`` divides by sqrt(32) (unit per-coefficient variance);
    ``scale="mean"`` divides by 32 (the average pattern, variance 1/32).
    """
    spread = np.tensordot(m.bipolar(), bit_patterns(seed, shape), axes=1)
    if scale == "unit":
        return spread / np.sqrt(PAYLOAD_BITS)
    if scale == "mean":
        return spread / PAYLOAD_BITS
    raise ValueError(f"unknown pattern scale {scale!r}")


def dct_watermark_pattern(cfg: EmbedConfig, shape: tuple[int, int], m: Payload32) -> np.ndarray:
    """The additive spectrum ``alpha * W`` used by :func:`embed_dct` (DC forced to 0)."""
    w = composite_pattern(cfg.seed, shape, m, "mean")
    w[0, 0] = 0.0
    return cfg.alpha * w


def dwt_watermark_pattern(cfg: EmbedConfig, shape: tuple[int, int], m: Payload32) -> np.ndarray:
    return cfg.alpha * composite_pattern(cfg.seed, shape, m, "unit")


def embed_dct_float(carrier: RasterImage, m: Payload32, cfg: EmbedConfig):
    """Unquantized DCT embedding; returns ``(Y, Y_marked, U, V)`` float planes."""
    _require_rgb(carrier)
    y, u, v = rgb_to_yuv_planes(carrier)
    spec = dct2(y)
    marked = idct2(spec + dct_watermark_pattern(cfg, spec.shape, m))
    return y, marked, u, v


def embed_dct(carrier: RasterImage, m: Payload32, cfg: EmbedConfig) -> RasterImage:
    _require_rgb(carrier)
    if cfg.alpha == 0:
        return carrier.copy()
    _, marked, u, v = embed_dct_float(carrier, m, cfg)
    return yuv_planes_to_rgb(marked, u, v)


def embed_dwt_float(carrier: RasterImage, m: Payload32, cfg: EmbedConfig):
    _require_rgb(carrier)
    if min(carrier.height, carrier.width) < 2 ** cfg.levels:
        raise CapacityError(f"DWT embedding needs at least {2 ** cfg.levels}x{2 ** cfg.levels}")
    y, u, v = rgb_to_yuv_planes(carrier)
    pyr = haar_dwt2(y, cfg.levels)
    band = pyr.bands[-1][cfg.subband]
    pyr.bands[-1][cfg.subband] = band + dwt_watermark_pattern(cfg, band.shape, m)
    return y, haar_idwt2(pyr), u, v


def embed_dwt(carrier: RasterImage, m: Payload32, cfg: EmbedConfig) -> RasterImage:
    _require_rgb(carrier)
    if cfg.alpha == 0:
        return carrier.copy()
    _, marked, u, v = embed_dwt_float(carrier, m, cfg)
    return yuv_planes_to_rgb(marked, u, v)


def correlate_dct(img: RasterImage, cfg: EmbedConfig) -> np.ndarray:
    """Per-bit correlation of the luminance spectrum with each seeded pattern."""
    y, _, _ = rgb_to_yuv_planes(img)
    spec = dct2(y)
    spec[0, 0] = 0.0
    return np.tensordot(bit_patterns(cfg.seed, spec.shape), spec, axes=2)


def embed(cfg: EmbedConfig, carrier: RasterImage, m: Payload32) -> RasterImage:
    _require_rgb(carrier)
    if cfg.algo == "lsb":
        return embed_lsb(carrier, m)
    if cfg.algo == "patchwork":
        return embed_patchwork(carrier, m, cfg)
    if cfg.algo == "dct":
        return embed_dct(carrier, m, cfg)
    return embed_dwt(carrier, m, cfg)
