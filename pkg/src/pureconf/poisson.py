"""Shot-noise observation model ``y ~ Poisson(gamma * A x)``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .linops import ImageGrid, LinearOperatorSpec, apply


@dataclass(frozen=True)
class PoissonForwardModel:
    op: LinearOperatorSpec
    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError("gamma must be positive and finite")

    @property
    def m(self) -> int:
        return self.op.m


@dataclass(frozen=True)
class Measurement:
    counts: np.ndarray
    gamma_used: float
    seed: int
    source_id: str = ""

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.dtype.kind not in "iu":
            if not np.all(counts == np.round(counts)):
                raise ValueError("photon counts must be integers")
        counts = counts.astype(np.int64).ravel()
        if np.any(counts < 0):
            raise ValueError("photon counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def m(self) -> int:
        return self.counts.size

    def __eq__(self, other):
        if not isinstance(other, Measurement):
            return NotImplemented
        return (
            np.array_equal(self.counts, other.counts)
            and self.gamma_used == other.gamma_used
            and self.seed == other.seed
            and self.source_id == other.source_id
        )

    __hash__ = None


def intensity(model: PoissonForwardModel, x: ImageGrid) -> np.ndarray:
    """Poisson rate ``gamma * A x``; roundoff negatives above -1e-12 clamp to 0."""
    lam = model.gamma * apply(model.op, x)
    if np.any(lam < -1e-12):
        raise ValueError(f"negative Poisson intensity (min {lam.min():.3g})")
    return np.maximum(lam, 0.0)


def sample_measurement(
    model: PoissonForwardModel, x: ImageGrid, seed: int, source_id: str = ""
) -> Measurement:
    counts = rng.poisson(intensity(model, x), seed)
    return Measurement(counts, model.gamma, int(seed), source_id)
