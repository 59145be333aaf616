"""Forward-mode differentiation with array-valued dual numbers.

A :class:`Dual` carries a primal array of shape ``S`` and a tangent stack of
shape ``(B, *S)``, so one pass propagates ``B`` directional derivatives.
Only the handful of operations the estimators need are provided.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class Dual:
    value: np.ndarray
    tangent: np.ndarray

    @classmethod
    def seed(cls, value, directions) -> "Dual":
        value = np.asarray(value, dtype=float)
        directions = np.asarray(directions, dtype=float)
        if directions.shape[1:] != value.shape:
            raise ValueError("directions must have shape (batch, *value.shape)")
        return cls(value, directions)

    @staticmethod
    def _lift(other, like: "Dual") -> "Dual":
        if isinstance(other, Dual):
            return other
        return Dual(np.asarray(other, dtype=float), np.zeros((1,) + like.value.shape))

    def __add__(self, other):
        o = self._lift(other, self)
        return Dual(self.value + o.value, self.tangent + o.tangent)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.value, -self.tangent)

    def __sub__(self, other):
        return self + (-self._lift(other, self))

    def __rsub__(self, other):
        return self._lift(other, self) - self

    def __mul__(self, other):
        if not isinstance(other, Dual):
            c = np.asarray(other, dtype=float)
            return Dual(self.value * c, self.tangent * c)
        return Dual(
            self.value * other.value,
            self.tangent * other.value + self.value * other.tangent,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Dual):
            c = np.asarray(other, dtype=float)
            return Dual(self.value / c, self.tangent / c)
        q = self.value / other.value
        return Dual(q, (self.tangent - q * other.tangent) / other.value)

    def __rtruediv__(self, other):
        return self._lift(other, self) / self

    def __pow__(self, p: float):
        return Dual(self.value**p, p * self.value ** (p - 1) * self.tangent)


def sqrt(x: Dual) -> Dual:
    r = np.sqrt(x.value)
    return Dual(r, x.tangent / (2.0 * r))


def clamp_below(x: Dual, floor: float) -> Dual:
    """``max(x, floor)`` with derivative 0 on the clamped branch."""
    keep = x.value >= floor
    return Dual(np.where(keep, x.value, floor), np.where(keep, x.tangent, 0.0))


def linear(f: Callable[[np.ndarray], np.ndarray], x: Dual) -> Dual:
    """Push a linear map acting on trailing axes through both parts."""
    if x.tangent.shape[0] == 0:
        return Dual(f(x.value), np.zeros((0,) + x.value.shape))
    # One stacked call instead of two keeps FFT setup costs down.
    out = f(np.concatenate([x.value[None], x.tangent]))
    return Dual(out[0], out[1:])


def jvp(f: Callable, primal, directions) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate ``f`` at ``primal`` and its derivative along each direction.

    ``f`` must be written against the operations above so it accepts
    either an ndarray or a :class:`Dual`.
    """
    out = f(Dual.seed(primal, directions))
    return out.value, np.broadcast_to(out.tangent, (len(directions),) + out.value.shape)
