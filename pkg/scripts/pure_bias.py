"""Monte Carlo check of PURE against the true projected error on one image.

    python scripts/pure_bias.py --replicates 500
"""

import argparse

import numpy as np

from pureconf.data import phantom
from pureconf.estimators import AffineSpectral, AnscombeSmooth, RichardsonLucyUnrolled, estimate
from pureconf.linops import LinearOperatorSpec, gaussian_kernel
from pureconf.poisson import PoissonForwardModel, sample_measurement
from pureconf.pure import pure, supervised_score


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--probes", type=int, default=32)
    args = p.parse_args()

    x = phantom((args.size, args.size, 1), 4, 0)
    identity = LinearOperatorSpec.identity(x.dims)
    blur = LinearOperatorSpec.convolution(x.dims, gaussian_kernel(2.0, 13))
    cases = [
        ("AffineSpectral(0.05), identity, gamma=4", AffineSpectral(0.05), PoissonForwardModel(identity, 4.0)),
        ("AffineSpectral(0.2), blur, gamma=60", AffineSpectral(0.2), PoissonForwardModel(blur, 60.0)),
        ("RichardsonLucy(10), blur, gamma=60", RichardsonLucyUnrolled(10), PoissonForwardModel(blur, 60.0)),
        ("AnscombeSmooth(4), identity, gamma=4", AnscombeSmooth(4.0), PoissonForwardModel(identity, 4.0)),
        ("AnscombeSmooth(1), identity, gamma=4", AnscombeSmooth(1.0), PoissonForwardModel(identity, 4.0)),
    ]
    for name, spec, model in cases:
        d, s = [], []
        for r in range(args.replicates):
            y = sample_measurement(model, x, r)
            q = supervised_score(x, y, estimate(spec, model, y), model.op)
            d.append(pure(spec, model, y, args.probes, 10_000 + r).value - q)
            s.append(q)
        bias, se = np.mean(d), np.std(d, ddof=1) / np.sqrt(len(d))
        print(f"{name:42s} score {np.mean(s):.5f}  bias {bias:+.5f} ({bias / np.mean(s):+.2%}, {bias / se:+.1f} SE)")


if __name__ == "__main__":
    main()
