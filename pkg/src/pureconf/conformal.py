"""Split and leave-one-out conformal calibration on projected-error scores."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .estimators import EstimatorSpec, estimate
from .linops import ImageGrid, LinearOperatorSpec, apply_array
from .poisson import Measurement, PoissonForwardModel
from .pure import DEFAULT_PROBES, ScoreMode, pure, supervised_score
from .rng import derive_seed


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")


def quantile_index(n: int, alpha: float) -> int:
    """1-based order statistic ``ceil((n + 1)(1 - alpha))`` for n samples."""
    _check_alpha(alpha)
    # Round away float noise such as (9 + 1) * 0.9 = 9.000000000000002.
    return math.ceil(round((n + 1) * (1.0 - alpha), 9))


def conformal_quantile(scores, alpha: float) -> float:
    """k-th smallest score with ``k = ceil((M+1)(1-alpha))``; +inf when k > M."""
    s = np.asarray(scores, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("need at least one calibration score")
    if not np.all(np.isfinite(s)):
        raise ValueError("calibration scores must be finite")
    k = quantile_index(s.size, alpha)
    if k > s.size:
        return math.inf
    return float(np.sort(s, kind="stable")[k - 1])


@dataclass(frozen=True)
class CalibrationResult:
    """Calibration scores, kept both sorted and in sample order.

    ``sample_scores[i]`` belongs to the i-th calibration input; the sorted
    copy ``scores`` is what quantiles are read from.
    """

    sample_scores: tuple
    mode: ScoreMode
    metadata: dict = field(default_factory=dict, compare=False)
    source_ids: tuple = ()

    def __post_init__(self):
        s = tuple(float(v) for v in self.sample_scores)
        if not s:
            raise ValueError("a calibration needs at least one score")
        if not all(math.isfinite(v) for v in s):
            raise ValueError("calibration scores must be finite")
        object.__setattr__(self, "sample_scores", s)
        object.__setattr__(self, "mode", ScoreMode(self.mode))

    @property
    def scores(self) -> np.ndarray:
        return np.sort(np.array(self.sample_scores), kind="stable")

    @property
    def M(self) -> int:
        return len(self.sample_scores)

    def quantile(self, alpha: float) -> float:
        return conformal_quantile(self.sample_scores, alpha)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "M": self.M,
            "scores": sorted(self.sample_scores),
            "sample_scores": list(self.sample_scores),
            "source_ids": list(self.source_ids),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationResult":
        return cls(
            tuple(d["sample_scores"]),
            ScoreMode(d["mode"]),
            dict(d.get("metadata", {})),
            tuple(d.get("source_ids", ())),
        )


def loo_quantile(result: CalibrationResult, i: int, alpha: float) -> float:
    """Quantile for calibration sample ``i`` (0-based) with its own score removed.

    The remaining M-1 scores plus the held-out one give ``k = ceil(M(1-alpha))``.
    """
    M = result.M
    if M < 2:
        raise ValueError("leave-one-out needs at least two calibration scores")
    if not 0 <= i < M:
        raise IndexError(f"sample index {i} out of range for M={M}")
    _check_alpha(alpha)
    rest = np.delete(np.array(result.sample_scores), i)
    k = quantile_index(M - 1, alpha)
    if k > rest.size:
        return math.inf
    return float(np.sort(rest, kind="stable")[k - 1])


def calibrate_self_supervised(
    measurements: Sequence[Measurement],
    spec: EstimatorSpec,
    model: PoissonForwardModel,
    K: int = DEFAULT_PROBES,
    seed: int = 0,
    alpha_grid: Optional[Sequence[float]] = None,
) -> CalibrationResult:
    """PURE scores of each measurement; probe seeds derive from ``(seed, i)``."""
    if not measurements:
        raise ValueError("need at least one measurement")
    scores = [
        pure(spec, model, y, K, derive_seed(seed, i)).value
        for i, y in enumerate(measurements)
    ]
    meta = {"K": K, "seed": int(seed)}
    if alpha_grid is not None:
        meta["alpha_grid"] = [float(a) for a in alpha_grid]
    return CalibrationResult(
        tuple(scores), ScoreMode.SELF_SUPERVISED, meta,
        tuple(y.source_id for y in measurements),
    )


def calibrate_supervised(
    pairs: Sequence[tuple[ImageGrid, Measurement]],
    spec: EstimatorSpec,
    model: PoissonForwardModel,
    alpha_grid: Optional[Sequence[float]] = None,
) -> CalibrationResult:
    if not pairs:
        raise ValueError("need at least one (image, measurement) pair")
    scores = [
        supervised_score(x, y, estimate(spec, model, y), model.op) for x, y in pairs
    ]
    meta = {}
    if alpha_grid is not None:
        meta["alpha_grid"] = [float(a) for a in alpha_grid]
    return CalibrationResult(
        tuple(scores), ScoreMode.SUPERVISED, meta, tuple(y.source_id for _, y in pairs)
    )


@dataclass(frozen=True)
class PredictionSet:
    """``{x : |A x - A center|^2 / m <= radius_sq}``.

    ``radius_sq`` may be +inf (whole space) or negative (empty set).
    """

    center: ImageGrid
    op: LinearOperatorSpec
    radius_sq: float
    alpha: float

    @property
    def m(self) -> int:
        return self.op.m

    @property
    def is_empty(self) -> bool:
        return self.radius_sq < 0

    @property
    def is_unbounded(self) -> bool:
        return math.isinf(self.radius_sq) and self.radius_sq > 0


def prediction_set(
    y: Measurement,
    spec: EstimatorSpec,
    model: PoissonForwardModel,
    result: CalibrationResult,
    alpha: float,
) -> PredictionSet:
    return PredictionSet(estimate(spec, model, y), model.op, result.quantile(alpha), alpha)


def contains(pset: PredictionSet, x: ImageGrid) -> bool:
    if x.dims != pset.op.input_dims:
        raise ValueError("image dims do not match the prediction set")
    if pset.is_unbounded:
        return True
    if pset.is_empty:
        return False
    r = apply_array(pset.op, x.array - pset.center.array).ravel()
    return bool(np.dot(r, r) / pset.m <= pset.radius_sq)


@dataclass(frozen=True)
class CoverageRow:
    alpha: float
    nominal: float
    covered: int
    total: int
    empirical: float


@dataclass(frozen=True)
class CoverageReport:
    rows: tuple
    mode: ScoreMode
    metadata: dict = field(default_factory=dict, compare=False)

    CSV_HEADER = "alpha,nominal,covered,total,empirical"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        lines += [
            f"{r.alpha!r},{r.nominal!r},{r.covered},{r.total},{r.empirical!r}" for r in self.rows
        ]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "rows": [vars(r) for r in self.rows],
            "metadata": self.metadata,
        }


def coverage_from_scores(
    result: CalibrationResult, test_scores, alpha_grid: Sequence[float]
) -> CoverageReport:
    """Empirical coverage of supervised test scores against each calibrated quantile."""
    t = np.asarray(test_scores, dtype=float)
    if t.size == 0:
        raise ValueError("need at least one test score")
    rows = []
    for alpha in sorted(float(a) for a in alpha_grid):
        q = result.quantile(alpha)
        covered = int(np.count_nonzero(t <= q))
        rows.append(CoverageRow(alpha, 1.0 - alpha, covered, int(t.size), covered / t.size))
    return CoverageReport(tuple(rows), result.mode)


def coverage(
    result: CalibrationResult,
    test_pairs: Sequence[tuple[ImageGrid, Measurement]],
    spec: EstimatorSpec,
    model: PoissonForwardModel,
    alpha_grid: Sequence[float],
) -> CoverageReport:
    if not test_pairs:
        raise ValueError("need at least one test pair")
    scores = [
        supervised_score(x, y, estimate(spec, model, y), model.op) for x, y in test_pairs
    ]
    return coverage_from_scores(result, scores, alpha_grid)
