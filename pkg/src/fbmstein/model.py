"""Ambient statistical model: uniform time grid, path container, RNG streams.

The model is a d-dimensional fractional Brownian motion with Hurst index
``hurst`` observed on the uniform grid t_i = i*T/n, i = 0..n. Paths are
stored as immutable (d, n+1) matrices whose first column is exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Philox keys are [master_seed, replicate*256 + component]; these bounds keep
# the packing injective.
_MAX_COMPONENTS = 256
_MAX_REPLICATE = 1 << 55


@dataclass(frozen=True)
class FbmModel:
    """Dimension, Hurst index, horizon and grid resolution of the process."""

    d: int
    hurst: float
    T: float
    n: int

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise ValueError(f"dimension d must be a positive integer, got {self.d!r}")
        if self.d >= _MAX_COMPONENTS:
            raise ValueError(f"dimension d must be < {_MAX_COMPONENTS}")
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"Hurst index must lie in (0, 1), got {self.hurst!r}")
        if not self.T > 0.0:
            raise ValueError(f"horizon T must be positive, got {self.T!r}")
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"grid step count n must be a positive integer, got {self.n!r}")

    @property
    def dt(self) -> float:
        return self.T / self.n

    @cached_property
    def grid(self) -> np.ndarray:
        """Grid times t_0 = 0, ..., t_n = T (read-only, endpoints exact)."""
        g = np.linspace(0.0, self.T, self.n + 1)
        g[0] = 0.0
        g[-1] = self.T
        g.flags.writeable = False
        return g

    def with_steps(self, n: int) -> "FbmModel":
        return FbmModel(self.d, self.hurst, self.T, n)

    def require_low_hurst(self, what: str) -> None:
        if self.hurst >= 0.5:
            raise ValueError(f"{what} requires Hurst index < 1/2, got {self.hurst}")


@dataclass(frozen=True)
class PathMatrix:
    """Immutable (d, n+1) matrix of path values on the model grid."""

    values: np.ndarray
    model: FbmModel

    def __post_init__(self):
        v = self.values
        if v.shape != (self.model.d, self.model.n + 1):
            raise ValueError(
                f"path shape {v.shape} does not match model (d, n+1) = "
                f"({self.model.d}, {self.model.n + 1})"
            )
        if v.shape[1] and np.any(v[:, 0] != 0.0):
            raise ValueError("path values at t_0 = 0 must all be zero")

    @classmethod
    def wrap(cls, values, model: FbmModel) -> "PathMatrix":
        v = np.ascontiguousarray(values, dtype=float)
        v.flags.writeable = False
        return cls(v, model)

    @property
    def grid(self) -> np.ndarray:
        return self.model.grid


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream identified by (master_seed, replicate).

    Each (seed, replicate, component) triple keys an independent Philox
    stream; variates are drawn from it in a fixed step order, so generation
    is reproducible under any parallel schedule.
    """

    master_seed: int
    replicate_index: int = 0

    def __post_init__(self):
        if not 0 <= self.replicate_index < _MAX_REPLICATE:
            raise ValueError(f"replicate index out of range: {self.replicate_index}")

    def generator(self, component: int = 0) -> np.random.Generator:
        """Fresh generator for one component of this replicate."""
        if not 0 <= component < _MAX_COMPONENTS:
            raise ValueError(f"component index out of range: {component}")
        key = np.array(
            [
                self.master_seed % (1 << 64),
                (self.replicate_index << 8) | component,
            ],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, replicate_index: int) -> "RngStream":
        return RngStream(self.master_seed, replicate_index)
