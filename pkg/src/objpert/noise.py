"""Seeded Gaussian, Laplace and exponential samplers.

Every sampler accepts either an :class:`RngStream` (a fresh generator is built
from ``(seed, index)`` on each call, so repeated calls are bit-identical) or a
live :class:`numpy.random.Generator` (consumed sequentially).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class RngStream:
    seed: int
    index: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.index < 0:
            raise ValueError("stream index must be nonnegative")

    def generator(self) -> np.random.Generator:
        # Philox is counter-based; spawn_key gives independent streams per index
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.index,))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, k: int) -> "RngStream":
        """Independent child stream, e.g. for the k-th of several parallel draws."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.index, k))
        return RngStream(int(ss.generate_state(1, np.uint64)[0]), 0)


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def _shape(dim, size):
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    return (dim,) if size is None else (size, dim)


def gaussian_vector(dim: int, sigma: float, rng: RngLike, size: int | None = None) -> np.ndarray:
    """``dim`` i.i.d. N(0, sigma^2) draws (``size`` rows of them if given)."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    shape = _shape(dim, size)
    if sigma == 0:
        return np.zeros(shape)
    return sigma * as_generator(rng).standard_normal(shape)


def laplace_vector(dim: int, scale: float, rng: RngLike, size: int | None = None) -> np.ndarray:
    """i.i.d. Laplace draws with density ``exp(-|z|/b) / (2b)``."""
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    shape = _shape(dim, size)
    if scale == 0:
        return np.zeros(shape)
    return as_generator(rng).laplace(0.0, scale, shape)


def exponential_vector(dim: int, rate: float, rng: RngLike, size: int | None = None) -> np.ndarray:
    """i.i.d. exponential draws with density ``rate * exp(-rate * z)`` on ``z >= 0``.

    The parameter is a *rate*: the mean of each coordinate is ``1 / rate``.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    shape = _shape(dim, size)
    return as_generator(rng).standard_exponential(shape) / rate
