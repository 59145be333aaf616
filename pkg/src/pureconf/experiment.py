"""Experiment configuration and the end-to-end calibrate/evaluate pipeline."""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .conformal import (
    CalibrationResult,
    CoverageReport,
    calibrate_self_supervised,
    calibrate_supervised,
    coverage_from_scores,
)
from .data import generate_phantoms, load_directory
from .estimators import EstimatorSpec, estimate, spec_from_dict, spec_to_dict
from .linops import ImageGrid, LinearOperatorSpec, default_kernel_size, gaussian_kernel
from .poisson import Measurement, PoissonForwardModel, sample_measurement
from .pure import DEFAULT_PROBES, ScoreMode, supervised_score
from .rng import derive_seed

PROBLEMS = ("denoising", "deblurring")

# Stream labels under the master seed.
_IMAGE_STREAM, _NOISE_STREAM, _PROBE_STREAM = 0, 1, 2


def default_alpha_grid() -> list[float]:
    return [round(0.05 * k, 2) for k in range(1, 20)]


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "denoising"
    dims: tuple = (64, 64, 1)
    gamma: float = 4.0
    blur_sigma: Optional[float] = None
    kernel_size: Optional[int] = None
    estimator: dict = field(default_factory=lambda: {"variant": "AnscombeSmooth", "smooth_sigma": 4.0})
    M_calibration: int = 200
    N_test: int = 100
    alpha_grid: tuple = tuple(default_alpha_grid())
    K_probes: int = DEFAULT_PROBES
    master_seed: int = 0
    modes: tuple = ("supervised", "self")
    dataset: dict = field(default_factory=lambda: {"kind": "synthetic"})
    save_scores: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        object.__setattr__(self, "modes", tuple(ScoreMode(m).value for m in self.modes))
        if self.problem not in PROBLEMS:
            raise ValueError(f"problem must be one of {PROBLEMS}")
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError(f"invalid dims {self.dims}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError("gamma must be positive")
        if self.problem == "deblurring" and not (self.blur_sigma and self.blur_sigma > 0):
            raise ValueError("deblurring needs a positive blur_sigma")
        if min(self.M_calibration, self.N_test, self.K_probes) < 1:
            raise ValueError("M_calibration, N_test and K_probes must be >= 1")
        a = self.alpha_grid
        if not a or any(not 0 < x < 1 for x in a) or list(a) != sorted(set(a)):
            raise ValueError("alpha_grid must be strictly increasing values in (0, 1)")
        if not self.modes:
            raise ValueError("at least one calibration mode is required")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        kind = self.dataset.get("kind")
        if kind not in ("synthetic", "directory"):
            raise ValueError("dataset.kind must be 'synthetic' or 'directory'")
        if set(self.dataset) - {"kind", "path"}:
            raise ValueError(f"unknown dataset keys: {sorted(set(self.dataset) - {'kind', 'path'})}")
        if kind == "directory" and "path" not in self.dataset:
            raise ValueError("directory datasets need a 'path'")
        self.estimator_spec  # validates the estimator block

    @property
    def estimator_spec(self) -> EstimatorSpec:
        return spec_from_dict(self.estimator)

    def operator(self) -> LinearOperatorSpec:
        if self.problem == "denoising":
            return LinearOperatorSpec.identity(self.dims)
        size = self.kernel_size or default_kernel_size(self.blur_sigma)
        return LinearOperatorSpec.convolution(self.dims, gaussian_kernel(self.blur_sigma, size))

    def model(self) -> PoissonForwardModel:
        return PoissonForwardModel(self.operator(), self.gamma)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["dims"] = list(self.dims)
        d["alpha_grid"] = list(self.alpha_grid)
        d["modes"] = list(self.modes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def denoising_config(**overrides) -> ExperimentConfig:
    return ExperimentConfig(**overrides)


def deblurring_config(**overrides) -> ExperimentConfig:
    base = dict(
        problem="deblurring",
        gamma=60.0,
        blur_sigma=2.0,
        kernel_size=13,
        estimator={"variant": "AffineSpectral", "lambda_reg": 0.2},
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def load_images(config: ExperimentConfig) -> list[ImageGrid]:
    total = config.M_calibration + config.N_test
    if config.dataset["kind"] == "synthetic":
        return generate_phantoms(total, config.dims, derive_seed(config.master_seed, _IMAGE_STREAM))
    images = load_directory(config.dataset["path"])
    if len(images) < total:
        raise ValueError(f"dataset has {len(images)} images, need {total}")
    images = images[:total]
    for img in images:
        if img.dims != config.dims:
            raise ValueError(f"image dims {img.dims} differ from config dims {config.dims}")
    return images


def measure(config: ExperimentConfig, images: Sequence[ImageGrid], start: int = 0) -> list[Measurement]:
    """One measurement per image; image ``start + j`` always gets the same seed."""
    model = config.model()
    return [
        sample_measurement(
            model, x, derive_seed(config.master_seed, _NOISE_STREAM, start + j), f"img{start + j}"
        )
        for j, x in enumerate(images)
    ]


@dataclass
class Dataset:
    calibration: list  # (image, measurement) pairs, indices [0, M)
    test: list  # indices [M, M + N)


def build_dataset(config: ExperimentConfig) -> Dataset:
    images = load_images(config)
    ys = measure(config, images)
    pairs = list(zip(images, ys))
    M = config.M_calibration
    return Dataset(pairs[:M], pairs[M:])


def calibrate(config: ExperimentConfig, pairs, mode: str) -> CalibrationResult:
    spec, model = config.estimator_spec, config.model()
    if ScoreMode(mode) is ScoreMode.SUPERVISED:
        result = calibrate_supervised(pairs, spec, model, config.alpha_grid)
    else:
        result = calibrate_self_supervised(
            [y for _, y in pairs], spec, model, config.K_probes,
            derive_seed(config.master_seed, _PROBE_STREAM), config.alpha_grid,
        )
    result.metadata.update(
        estimator=spec_to_dict(spec), problem=config.problem, gamma=config.gamma,
        master_seed=int(config.master_seed),
    )
    return result


def score_test_pairs(config: ExperimentConfig, pairs) -> list[float]:
    spec, model = config.estimator_spec, config.model()
    return [supervised_score(x, y, estimate(spec, model, y), model.op) for x, y in pairs]


def quantiles_csv(result: CalibrationResult, alpha_grid) -> str:
    lines = ["alpha,q_hat"] + [f"{a!r},{result.quantile(a)!r}" for a in alpha_grid]
    return "\n".join(lines) + "\n"


@dataclass
class RunReport:
    config: ExperimentConfig
    coverage: dict  # mode -> CoverageReport
    quantiles: dict  # mode -> {alpha: q_hat}
    calibrations: dict  # mode -> CalibrationResult
    test_scores: list
    timings: dict
    version: str = __version__

    def to_dict(self, include_scores: Optional[bool] = None) -> dict:
        include = self.config.save_scores if include_scores is None else include_scores
        d = {
            "version": self.version,
            "config": self.config.to_dict(),
            "coverage": {m: r.to_dict() for m, r in self.coverage.items()},
            "quantiles": {
                m: [{"alpha": a, "q_hat": _json_float(q)} for a, q in qs.items()]
                for m, qs in self.quantiles.items()
            },
            "timings": self.timings,
        }
        if include:
            d["scores"] = {
                "calibration": {m: list(c.sample_scores) for m, c in self.calibrations.items()},
                "test": list(self.test_scores),
            }
        return d

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        for mode, rep in self.coverage.items():
            (out / f"coverage_{mode}.csv").write_text(rep.to_csv())
            (out / f"quantiles_{mode}.csv").write_text(
                quantiles_csv(self.calibrations[mode], self.config.alpha_grid)
            )


def _json_float(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def run_experiment(config: ExperimentConfig, out_dir=None) -> RunReport:
    """Calibrate on the first M images, measure coverage on the last N."""
    timings = {}
    t0 = time.perf_counter()
    data = build_dataset(config)
    timings["data"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    scores = score_test_pairs(config, data.test)
    timings["test_scores"] = time.perf_counter() - t0

    coverage, quantiles, calibrations = {}, {}, {}
    for mode in config.modes:
        t0 = time.perf_counter()
        result = calibrate(config, data.calibration, mode)
        timings[f"calibrate_{mode}"] = time.perf_counter() - t0
        calibrations[mode] = result
        coverage[mode] = coverage_from_scores(result, scores, config.alpha_grid)
        quantiles[mode] = {a: result.quantile(a) for a in config.alpha_grid}

    report = RunReport(config, coverage, quantiles, calibrations, scores, timings)
    if out_dir is not None:
        report.write(out_dir)
    return report


def evaluate(config: ExperimentConfig, result: CalibrationResult) -> CoverageReport:
    """Coverage of a stored calibration on the config's test split."""
    data = build_dataset(config)
    return coverage_from_scores(result, score_test_pairs(config, data.test), config.alpha_grid)
