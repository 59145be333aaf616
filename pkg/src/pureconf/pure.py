"""Projected-error scores and their Poisson unbiased risk estimate (PURE).

For ``y ~ Poisson(gamma A x)`` and ``h(y) = A xhat(y)``::

    PURE(y) = |y/gamma - h(y)|^2 / m  -  1'y / (gamma^2 m)
              + 2 / (gamma m) * y' diag(J_h(y))

estimates ``|A x - h(y)|^2 / m`` without access to ``x``. The weighted
Jacobian diagonal is either computed exactly (closed form for the affine
estimator, basis JVPs for small problems) or by Hutchinson probes
``n = sqrt(y) * g`` with ``g`` standard normal, for which
``E[n' J n] = y' diag(J)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .estimators import (
    AffineSpectral,
    EstimatorSpec,
    as_counts,
    jvp_batch,
    measurement_map,
)
from .linops import ImageGrid, LinearOperatorSpec, apply_array
from .poisson import Measurement, PoissonForwardModel

DEFAULT_PROBES = 32
EXACT_DIAGONAL_BUDGET = 4096
_PROBE_CHUNK = 256


class ScoreMode(str, enum.Enum):
    SUPERVISED = "supervised"
    SELF_SUPERVISED = "self"


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    residual_term: float
    count_term: float
    divergence_term: float
    probes: int
    seed: int


@dataclass(frozen=True)
class ScoreSample:
    value: float
    source_id: str
    mode: ScoreMode


def supervised_score(x: ImageGrid, y, xhat: ImageGrid, op: LinearOperatorSpec) -> float:
    """``|A x - A xhat|^2 / m``; ``y`` only participates in the shape check."""
    if x.dims != op.input_dims or xhat.dims != op.input_dims:
        raise ValueError("image dims do not match the operator")
    if y is not None:
        size = y.m if isinstance(y, Measurement) else np.size(y)
        if size != op.m:
            raise ValueError(f"measurement length {size} does not match m={op.m}")
    r = apply_array(op, x.array - xhat.array)
    return float(np.dot(r.ravel(), r.ravel()) / op.m)


def probe_directions(y: np.ndarray, seed: int, start: int, stop: int) -> np.ndarray:
    """Hutchinson probes ``sqrt(y) * g_k`` for ``k in [start, stop)``.

    Each probe draws from its own stream keyed by ``(seed, k)``, so results
    do not depend on chunking or evaluation order.
    """
    root = np.sqrt(np.asarray(y, dtype=float).ravel())
    g = np.stack(
        [np.random.default_rng([int(seed), k]).standard_normal(root.size) for k in range(start, stop)]
    )
    return g * root


def hutchinson_samples(
    spec: EstimatorSpec, model: PoissonForwardModel, y, K: int, seed: int
) -> np.ndarray:
    """Per-probe quadratic forms ``n_k' J_h n_k``, k = 0..K-1."""
    if K < 1:
        raise ValueError("probe count K must be at least 1")
    yy = as_counts(y, model)
    out = np.empty(K)
    for start in range(0, K, _PROBE_CHUNK):
        stop = min(K, start + _PROBE_CHUNK)
        n = probe_directions(yy, seed, start, stop)
        out[start:stop] = np.einsum("km,km->k", n, jvp_batch(spec, model, yy, n))
    return out


def hutchinson_weighted_trace(
    spec: EstimatorSpec, model: PoissonForwardModel, y, K: int = DEFAULT_PROBES, seed: int = 0
) -> float:
    """Monte Carlo estimate of ``y' diag(J_h(y))``."""
    return float(hutchinson_samples(spec, model, y, K, seed).mean())


def jacobian_diagonal(
    spec: EstimatorSpec, model: PoissonForwardModel, y, budget: int = EXACT_DIAGONAL_BUDGET
) -> np.ndarray:
    """diag(J_h(y)) from m unit-vector JVPs."""
    m = model.m
    if m > budget:
        raise ValueError(f"exact diagonal needs {m} JVPs, over the budget of {budget}")
    yy = as_counts(y, model)
    diag = np.empty(m)
    for start in range(0, m, _PROBE_CHUNK):
        stop = min(m, start + _PROBE_CHUNK)
        basis = np.zeros((stop - start, m))
        basis[np.arange(stop - start), np.arange(start, stop)] = 1.0
        diag[start:stop] = jvp_batch(spec, model, yy, basis)[np.arange(stop - start), np.arange(start, stop)]
    return diag


def exact_weighted_diagonal(
    spec: EstimatorSpec, model: PoissonForwardModel, y, budget: int = EXACT_DIAGONAL_BUDGET
) -> float:
    """Exact ``y' diag(J_h(y))``.

    The affine estimator's Jacobian is circulant, so every diagonal entry is
    the mean of its eigenvalues ``|A_f|^2 / (gamma (|A_f|^2 + lambda))``.
    """
    yy = as_counts(y, model)
    if isinstance(spec, AffineSpectral):
        a2 = np.abs(model.op._response) ** 2
        d = float(np.mean(a2 / (model.gamma * (a2 + spec.lambda_reg))))
        return d * float(yy.sum())
    return float(np.dot(yy.ravel(), jacobian_diagonal(spec, model, yy, budget)))


def pure(
    spec: EstimatorSpec,
    model: PoissonForwardModel,
    y,
    K: int = DEFAULT_PROBES,
    seed: int = 0,
) -> RiskEstimate:
    """PURE estimate of ``|A x - A xhat(y)|^2 / m`` from ``y`` alone.

    The affine estimator uses the exact divergence and ignores ``K``/``seed``.
    """
    if K < 1:
        raise ValueError("probe count K must be at least 1")
    yy = as_counts(y, model).ravel()
    m, gamma = model.m, model.gamma
    r = yy / gamma - measurement_map(spec, model, yy)
    residual = float(np.dot(r, r) / m)
    count = float(yy.sum() / (gamma**2 * m))
    if isinstance(spec, AffineSpectral):
        weighted = exact_weighted_diagonal(spec, model, yy)
    else:
        weighted = hutchinson_weighted_trace(spec, model, yy, K, seed)
    divergence = 2.0 * weighted / (gamma * m)
    return RiskEstimate(residual - count + divergence, residual, count, divergence, K, int(seed))
