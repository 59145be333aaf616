"""Command-line entry point: ``pureconf <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .conformal import CalibrationResult
from .data import generate_phantoms, write_directory
from .estimators import estimate, jvp_batch, measurement_map
from .experiment import (
    ExperimentConfig,
    build_dataset,
    calibrate,
    evaluate,
    quantiles_csv,
    run_experiment,
)
from .pure import pure, supervised_score
from .rng import derive_seed

log = logging.getLogger("pureconf")

MODES = {"supervised": ("supervised",), "self": ("self",), "both": ("supervised", "self")}


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "mode", None):
        changes["modes"] = MODES[args.mode]
    if getattr(args, "probes", None) is not None:
        changes["K_probes"] = args.probes
    return cfg.replace(**changes) if changes else cfg


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_data(args) -> None:
    cfg = _config(args)
    count = args.count or cfg.M_calibration + cfg.N_test
    images = generate_phantoms(count, cfg.dims, derive_seed(cfg.master_seed, 0))
    write_directory(images, _out(args))
    log.info("wrote %d phantoms to %s", count, args.out)


def cmd_calibrate(args) -> None:
    cfg = _config(args)
    data = build_dataset(cfg)
    out = _out(args)
    for mode in cfg.modes:
        result = calibrate(cfg, data.calibration, mode)
        (out / f"calibration_{mode}.json").write_text(json.dumps(result.to_dict(), indent=2) + "\n")
        (out / f"quantiles_{mode}.csv").write_text(quantiles_csv(result, cfg.alpha_grid))
        log.info("%s calibration: M=%d", mode, result.M)


def cmd_evaluate(args) -> None:
    cfg = _config(args)
    result = CalibrationResult.from_dict(json.loads(Path(args.calibration).read_text()))
    report = evaluate(cfg, result)
    (_out(args) / f"coverage_{result.mode.value}.csv").write_text(report.to_csv())


def cmd_coverage(args) -> None:
    report = run_experiment(_config(args), _out(args))
    for mode, rep in report.coverage.items():
        worst = max(abs(r.empirical - r.nominal) for r in rep.rows)
        log.info("%s: max |empirical - nominal| = %.3f", mode, worst)


def cmd_pure_audit(args) -> None:
    cfg = _config(args)
    spec, model = cfg.estimator_spec, cfg.model()
    data = build_dataset(cfg)
    probe_root = derive_seed(cfg.master_seed, 2)
    lines = ["index,supervised,pure,residual_term,count_term,divergence_term"]
    for i, (x, y) in enumerate(data.calibration):
        s = supervised_score(x, y, estimate(spec, model, y), model.op)
        r = pure(spec, model, y, cfg.K_probes, derive_seed(probe_root, i))
        lines.append(f"{i},{s!r},{r.value!r},{r.residual_term!r},{r.count_term!r},{r.divergence_term!r}")
    (_out(args) / "pure_audit.csv").write_text("\n".join(lines) + "\n")


def cmd_jvp_check(args) -> None:
    cfg = _config(args)
    spec, model = cfg.estimator_spec, cfg.model()
    rng = np.random.default_rng([cfg.master_seed, 99])
    worst = 0.0
    for _ in range(args.instances):
        # Strictly positive, off-lattice inputs keep every clamp inactive.
        y = rng.uniform(0.5, 2.0, size=model.m) * cfg.gamma
        v = rng.standard_normal(model.m)
        jv = jvp_batch(spec, model, y, v[None])[0]
        delta = 1e-4 * np.linalg.norm(y) / np.linalg.norm(v)
        fd = (measurement_map(spec, model, y + delta * v) - measurement_map(spec, model, y - delta * v)) / (2 * delta)
        worst = max(worst, np.linalg.norm(jv - fd) / max(np.linalg.norm(fd), 1e-300))
    print(f"max relative JVP error over {args.instances} instances: {worst:.3e}")
    if worst > args.tol:
        raise SystemExit(f"JVP check failed: {worst:.3e} > {args.tol:.1e}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pureconf", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, out=True, help=None):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--seed", type=int, help="override master_seed")
        sp.add_argument("--mode", choices=sorted(MODES))
        sp.add_argument("--probes", type=int, help="Hutchinson probe count K")
        if out:
            sp.add_argument("--out", required=True, help="output directory")
        sp.set_defaults(func=func)
        return sp

    add("gen-data", cmd_gen_data, help="write phantoms as a PGM directory").add_argument(
        "--count", type=int, help="number of images (default M + N)"
    )
    add("calibrate", cmd_calibrate, help="calibrate and store CalibrationResult JSON")
    add("evaluate", cmd_evaluate, help="coverage of a stored calibration").add_argument(
        "--calibration", required=True, help="calibration_<mode>.json"
    )
    add("coverage", cmd_coverage, help="end-to-end calibration and coverage run")
    add("pure-audit", cmd_pure_audit, help="PURE terms vs supervised scores")
    jc = add("jvp-check", cmd_jvp_check, out=False, help="JVPs vs central differences")
    jc.add_argument("--instances", type=int, default=10)
    jc.add_argument("--tol", type=float, default=1e-5)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except SystemExit:
        raise
    except Exception as exc:  # diagnostics go to stderr with a nonzero exit
        print(f"pureconf {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
