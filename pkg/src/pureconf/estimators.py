"""Classical reconstruction maps ``y -> xhat(y)`` with forward-mode JVPs.

Each estimator is written once against :mod:`pureconf.autodiff` so the same
code path yields the reconstruction and the Jacobian-vector products of the
measurement-space map ``h(y) = A xhat(y)`` that PURE needs.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import autodiff as ad
from .autodiff import Dual
from .linops import (
    ImageGrid,
    LinearOperatorSpec,
    adjoint_array,
    apply_array,
    default_kernel_size,
    filter_array,
    gaussian_kernel,
)
from .poisson import Measurement, PoissonForwardModel

MAX_ITERATIONS = 100


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class AffineSpectral:
    """Tikhonov-regularized inverse ``(A^T A + lambda I)^-1 A^T y / gamma``."""

    lambda_reg: float

    def __post_init__(self):
        _positive("lambda_reg", self.lambda_reg)


@dataclass(frozen=True)
class RichardsonLucyUnrolled:
    iterations: int
    epsilon: float = 1e-6

    def __post_init__(self):
        if not (isinstance(self.iterations, int) and 1 <= self.iterations <= MAX_ITERATIONS):
            raise ValueError(f"iterations must be an integer in [1, {MAX_ITERATIONS}]")
        _positive("epsilon", self.epsilon)


@dataclass(frozen=True)
class AnscombeSmooth:
    """Gaussian smoothing in the Anscombe domain; identity operators only."""

    smooth_sigma: float

    def __post_init__(self):
        _positive("smooth_sigma", self.smooth_sigma)


EstimatorSpec = Union[AffineSpectral, RichardsonLucyUnrolled, AnscombeSmooth]

_ESTIMATORS = {
    "AffineSpectral": AffineSpectral,
    "RichardsonLucyUnrolled": RichardsonLucyUnrolled,
    "AnscombeSmooth": AnscombeSmooth,
}


def spec_to_dict(spec: EstimatorSpec) -> dict:
    d = {"variant": type(spec).__name__}
    d.update(vars(spec))
    return d


def spec_from_dict(d: dict) -> EstimatorSpec:
    d = dict(d)
    try:
        cls = _ESTIMATORS[d.pop("variant")]
    except KeyError as exc:
        raise ValueError(f"unknown estimator variant in {d!r}") from exc
    try:
        return cls(**d)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {cls.__name__}: {exc}") from exc


def as_counts(y, model: PoissonForwardModel) -> np.ndarray:
    """Counts as a real (H, W, C) array; accepts a Measurement or any array."""
    arr = y.counts if isinstance(y, Measurement) else y
    arr = np.asarray(arr, dtype=float)
    if arr.size != model.m:
        raise ValueError(f"measurement length {arr.size} does not match m={model.m}")
    return arr.reshape(model.op.output_dims)


@functools.lru_cache(maxsize=32)
def _smoothing_response(sigma: float, height: int, width: int) -> np.ndarray:
    k = gaussian_kernel(sigma, default_kernel_size(sigma))
    return LinearOperatorSpec((height, width, 1), k)._response


def _affine_response(op: LinearOperatorSpec, lam: float) -> np.ndarray:
    a = op._response
    return np.conj(a) / (np.abs(a) ** 2 + lam)


def _reconstruct(spec: EstimatorSpec, model: PoissonForwardModel, y: Dual) -> Dual:
    op, gamma = model.op, model.gamma
    yg = y / gamma
    if isinstance(spec, AffineSpectral):
        resp = _affine_response(op, spec.lambda_reg)
        return ad.linear(lambda a: filter_array(op, a, resp), yg)
    if isinstance(spec, RichardsonLucyUnrolled):
        eps = spec.epsilon
        fwd = functools.partial(apply_array, op)
        adj = functools.partial(adjoint_array, op)
        x = ad.clamp_below(ad.linear(adj, yg), eps)
        for _ in range(spec.iterations):
            x = x * ad.linear(adj, yg / (ad.linear(fwd, x) + eps))
        return x
    if isinstance(spec, AnscombeSmooth):
        if not op.is_identity:
            raise ValueError("AnscombeSmooth is only defined for the identity operator")
        h, w, _ = op.dims
        resp = _smoothing_response(float(spec.smooth_sigma), h, w)
        u = 2.0 * ad.sqrt(y + 0.375)
        us = ad.linear(lambda a: filter_array(op, a, resp), u)
        return ad.clamp_below(((us / 2.0) ** 2 - 0.375) / gamma, 0.0)
    if hasattr(spec, "reconstruct"):
        # User-supplied estimator written against pureconf.autodiff.
        return spec.reconstruct(model, y)
    raise TypeError(f"unsupported estimator spec {spec!r}")


def _measurement_map(spec, model, y: Dual) -> Dual:
    return ad.linear(functools.partial(apply_array, model.op), _reconstruct(spec, model, y))


def _primal(y: np.ndarray) -> Dual:
    return Dual(y, np.zeros((0,) + y.shape))


def estimate_array(spec: EstimatorSpec, model: PoissonForwardModel, y) -> np.ndarray:
    return _reconstruct(spec, model, _primal(as_counts(y, model))).value


def estimate(spec: EstimatorSpec, model: PoissonForwardModel, y) -> ImageGrid:
    """Reconstruction ``xhat(y)`` as an image on the operator's input grid."""
    return ImageGrid.from_array(estimate_array(spec, model, y))


def measurement_map(spec: EstimatorSpec, model: PoissonForwardModel, y) -> np.ndarray:
    """``h(y) = A xhat(y)`` as a flat vector."""
    return _measurement_map(spec, model, _primal(as_counts(y, model))).value.ravel()


def jvp_batch(spec: EstimatorSpec, model: PoissonForwardModel, y, directions) -> np.ndarray:
    """Rows of ``directions`` (shape (B, m)) mapped through the Jacobian of h."""
    yy = as_counts(y, model)
    directions = np.asarray(directions, dtype=float)
    if directions.ndim != 2 or directions.shape[1] != model.m:
        raise ValueError(f"directions must have shape (B, {model.m})")
    if not np.all(np.isfinite(directions)):
        raise ValueError("directions must be finite")
    b = directions.shape[0]
    if isinstance(spec, AffineSpectral):
        # Affine map: the Jacobian is the filter itself, independent of y.
        resp = _affine_response(model.op, spec.lambda_reg) * model.op._response
        out = filter_array(model.op, directions.reshape((b,) + yy.shape), resp) / model.gamma
        return out.reshape(b, -1)
    out = _measurement_map(spec, model, Dual.seed(yy, directions.reshape((b,) + yy.shape)))
    return np.broadcast_to(out.tangent, (b,) + yy.shape).reshape(b, -1)


def jvp_measurement_map(spec: EstimatorSpec, model: PoissonForwardModel, y, v) -> np.ndarray:
    """``J_h(y) v`` for a single direction ``v`` of length m."""
    v = np.asarray(v, dtype=float).ravel()
    return jvp_batch(spec, model, y, v[None, :])[0]
