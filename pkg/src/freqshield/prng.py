"""Deterministic pseudo-randomness (SplitMix64 + Box-Muller).

Every consumer in the workbench (embedders, weight init, dropout, shuffles)
draws from :class:`DetRng`, so a seed fully determines every artifact.
The scalar methods and their ``*_array`` counterparts consume the same
stream: ``rng.uniform_array(5)`` yields exactly the values five calls to
``rng.uniform_f64()`` would have produced.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import CapacityError

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
TWO_POW_M53 = 2.0 ** -53


def parse_seed(value) -> int:
    """Accept an int or a decimal / 0x-hex string; return a 64-bit seed."""
    if isinstance(value, str):
        value = int(value.strip(), 0)
    value = int(value)
    if value < 0:
        raise ValueError(f"seed must be non-negative, got {value}")
    return value & MASK64


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


class DetRng:
    """SplitMix64 generator. Single consumer; not thread-safe."""

    __slots__ = ("state", "_cached_normal")

    def __init__(self, seed=0):
        self.state = parse_seed(seed)
        self._cached_normal: float | None = None

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return _mix(self.state)

    def u64_array(self, n: int) -> np.ndarray:
        """Next ``n`` outputs as a uint64 array (advances state by ``n``)."""
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = steps * np.uint64(GOLDEN) + np.uint64(self.state)
            out = _mix_array(states)
        self.state = (self.state + n * GOLDEN) & MASK64
        return out

    def uniform_f64(self) -> float:
        return (self.next_u64() >> 11) * TWO_POW_M53

    def uniform_array(self, n: int) -> np.ndarray:
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * TWO_POW_M53

    def standard_normal(self) -> float:
        if self._cached_normal is not None:
            z, self._cached_normal = self._cached_normal, None
            return z
        u1 = self.uniform_f64()
        u2 = self.uniform_f64()
        if u1 == 0.0:
            u1 = TWO_POW_M53
        r = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._cached_normal = r * math.sin(theta)
        return r * math.cos(theta)

    def normal_array(self, n: int) -> np.ndarray:
        """``n`` standard normals, identical to ``n`` scalar calls."""
        out = np.empty(n, dtype=np.float64)
        pos = 0
        if n and self._cached_normal is not None:
            out[0] = self._cached_normal
            self._cached_normal = None
            pos = 1
        remaining = n - pos
        if remaining <= 0:
            return out
        n_pairs = (remaining + 1) // 2
        u = self.uniform_array(2 * n_pairs).reshape(n_pairs, 2)
        u1 = np.where(u[:, 0] == 0.0, TWO_POW_M53, u[:, 0])
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u[:, 1]
        pairs = np.empty((n_pairs, 2))
        pairs[:, 0] = r * np.cos(theta)
        pairs[:, 1] = r * np.sin(theta)
        flat = pairs.reshape(-1)
        out[pos:] = flat[:remaining]
        if remaining % 2:
            self._cached_normal = float(flat[-1])
        return out

    def randbelow(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        return int(self.uniform_f64() * n)

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates shuffle of ``range(n)``."""
        items = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def shuffle(self, seq: list) -> list:
        return [seq[i] for i in self.permutation(len(seq))]

    def spawn(self, index: int) -> "DetRng":
        """Independent child stream seeded ``seed ^ index`` style."""
        return DetRng(self.state ^ (index & MASK64))


def sample_distinct_pixel_pairs(rng: DetRng, height: int, width: int, n_pairs: int):
    """Draw ``n_pairs`` pixel pairs whose ``2 * n_pairs`` coordinates are all distinct.

    Coordinates are ``(y, x)`` tuples drawn by rejection; the result is a list
    of ``((y_a, x_a), (y_b, x_b))``.
    """
    if n_pairs < 0:
        raise ValueError("n_pairs must be non-negative")
    if 2 * n_pairs > height * width:
        raise CapacityError(
            f"{n_pairs} pairs need {2 * n_pairs} distinct pixels, "
            f"carrier has {height * width}"
        )
    used: set[tuple[int, int]] = set()
    coords: list[tuple[int, int]] = []
    while len(coords) < 2 * n_pairs:
        c = (rng.randbelow(height), rng.randbelow(width))
        if c in used:
            continue
        used.add(c)
        coords.append(c)
    return [(coords[2 * i], coords[2 * i + 1]) for i in range(n_pairs)]
