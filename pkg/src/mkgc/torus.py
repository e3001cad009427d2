"""Exact fixed-point arithmetic on the real torus R/Z, discretized to 32 bits.

A torus element is stored as a raw 32-bit unsigned integer ``raw`` and
represents the real number ``raw * 2**-32 mod 1``. Group operations wrap
modulo 2**32, i.e. modulo 1 on the torus, so they are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TORUS_BITS = 32
TORUS_MOD = 1 << TORUS_BITS
TORUS_MASK = TORUS_MOD - 1


class Torus32:
    """One point of the discretized torus; immutable value type."""

    __slots__ = ("raw",)

    def __init__(self, raw: int):
        object.__setattr__(self, "raw", raw & TORUS_MASK)

    def __setattr__(self, name, value):
        raise AttributeError("Torus32 is immutable")

    def __add__(self, other: "Torus32") -> "Torus32":
        return Torus32(self.raw + other.raw)

    def __sub__(self, other: "Torus32") -> "Torus32":
        return Torus32(self.raw - other.raw)

    def __neg__(self) -> "Torus32":
        return Torus32(-self.raw)

    def scale(self, k: int) -> "Torus32":
        """Multiply by a signed integer, wrapping modulo 1."""
        return Torus32(self.raw * k)

    def to_float(self) -> float:
        """Real representative in [0, 1)."""
        return self.raw / TORUS_MOD

    def to_signed_float(self) -> float:
        """Real representative in [-1/2, 1/2)."""
        r = self.raw
        if r >= TORUS_MOD // 2:
            r -= TORUS_MOD
        return r / TORUS_MOD

    def distance(self, other: "Torus32") -> float:
        """Circle distance |self - other| in [0, 1/2]."""
        d = (self.raw - other.raw) & TORUS_MASK
        return min(d, TORUS_MOD - d) / TORUS_MOD

    def __eq__(self, other) -> bool:
        return isinstance(other, Torus32) and self.raw == other.raw

    def __hash__(self) -> int:
        return hash(self.raw)

    def __repr__(self) -> str:
        return f"Torus32(0x{self.raw:08X})"


ZERO = Torus32(0)


def torus_from_rational(num: int, den: int) -> Torus32:
    """Exact torus point num/den for a power-of-two denominator.

    Only power-of-two denominators up to 2**32 are representable without
    rounding; anything else is rejected rather than silently approximated.
    """
    if den <= 0 or den > TORUS_MOD or (den & (den - 1)) != 0:
        raise ValueError(f"denominator must be a power of two in [1, 2**32], got {den}")
    return Torus32(num * (TORUS_MOD // den))


def mod_to_t(m: int) -> Torus32:
    """Map a message bit to the torus with the 1/4 scaling: m -> m/4."""
    if m not in (0, 1):
        raise ValueError(f"message bit must be 0 or 1, got {m}")
    return Torus32(m * (TORUS_MOD // 4))


@dataclass
class NoiseSampler:
    """Seeded Gaussian sampler producing rounded torus points.

    Deterministic for a fixed seed. Not to be shared across threads; each
    worker owns its own instance.
    """

    stddev: float
    seed: int = 0

    def __post_init__(self):
        if self.stddev < 0:
            raise ValueError("stddev must be non-negative")
        self._rng = np.random.Generator(np.random.PCG64(self.seed))

    def sample(self) -> Torus32:
        if self.stddev == 0.0:
            return ZERO
        x = self._rng.normal(0.0, self.stddev)
        return Torus32(round(x * TORUS_MOD))

    def sample_raw(self, n: int) -> np.ndarray:
        """n rounded Gaussian samples as raw uint32 values."""
        if self.stddev == 0.0:
            return np.zeros(n, dtype=np.uint32)
        x = self._rng.normal(0.0, self.stddev, size=n)
        return np.round(x * TORUS_MOD).astype(np.int64).astype(np.uint32)

    def uniform_raw(self, n: int) -> np.ndarray:
        """n uniform torus points as raw uint32 values."""
        return self._rng.integers(0, TORUS_MOD, size=n, dtype=np.uint32)

    def uniform_bits(self, n: int) -> np.ndarray:
        return self._rng.integers(0, 2, size=n, dtype=np.uint32)

    def spawn(self, key: int) -> "NoiseSampler":
        """Independent child sampler, deterministic in (seed, key)."""
        return NoiseSampler(self.stddev, seed=(self.seed * 0x9E3779B1 + key) & 0xFFFFFFFFFFFFFFFF)
