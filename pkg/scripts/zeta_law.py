"""Compare samples of T_n - log n with Exp(1) and with the standard Gumbel law."""
import argparse

import numpy as np

from yulebst.cli import count
from yulebst.rng import RandomStream
from yulebst.yule import EULER_GAMMA, ks_statistic, zeta_samples


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=count, default=10**6)
    ap.add_argument("--m", type=count, default=10**4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    z = zeta_samples(RandomStream(args.seed), args.n, args.m)
    print(f"mean {z.mean():.4f} (Euler gamma {EULER_GAMMA:.4f}), sd {z.std(ddof=1):.4f} "
          f"(Gumbel {np.pi / np.sqrt(6):.4f}), P(<0) {np.mean(z < 0):.4f} (e^-1 {np.exp(-1):.4f})")
    for ref in ("exp1", "gumbel"):
        d, p = ks_statistic(z, ref)
        print(f"KS vs {ref:6s}: D = {d:.4f}, p = {p:.3g}")


if __name__ == "__main__":
    main()
