"""Run one calibration/coverage experiment and print a coverage table.

    python scripts/run_experiment.py configs/deblurring.json --out runs/deblur
"""

import argparse

from pureconf.experiment import ExperimentConfig, run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("config", help="JSON experiment config")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--out", help="directory for report.json and CSVs")
    args = p.parse_args()

    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.replace(master_seed=args.seed)
    report = run_experiment(cfg, args.out)

    modes = list(report.coverage)
    print("alpha  nominal  " + "  ".join(f"{m:>10}" for m in modes))
    for i, a in enumerate(cfg.alpha_grid):
        cells = "  ".join(f"{report.coverage[m].rows[i].empirical:>10.2f}" for m in modes)
        print(f"{a:5.2f}  {1 - a:7.2f}  {cells}")
    for m in modes:
        worst = max(abs(r.empirical - r.nominal) for r in report.coverage[m].rows)
        print(f"{m}: max |empirical - nominal| = {worst:.3f}")
    print("timings (s):", {k: round(v, 2) for k, v in report.timings.items()})


if __name__ == "__main__":
    main()
