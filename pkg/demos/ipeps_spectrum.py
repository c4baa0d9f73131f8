"""Boundary fixed point of a clean random iPEPS: spectrum, entropy and xi.

Usage: python demos/ipeps_spectrum.py [--D 2] [--chi 8 16 24] [--seed 0]
"""
import argparse

from pepslab import bmps, peps


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--D", type=int, default=2)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--chi", type=int, nargs="+", default=[8, 16, 24])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    dt = peps.double_tensor(peps.sample_clean(args.D, args.d, args.seed))
    for chi in args.chi:
        fp = bmps.fixed_point(dt, chi)
        s2 = fp.schmidt ** 2
        print(f"chi={chi:3d} iterations={fp.iterations:3d} "
              f"S={bmps.renyi_entropy(fp.schmidt, 1):.6f} "
              f"xi={bmps.correlation_length(fp.bmps):.4f} "
              f"sigma2[-1]/sigma2[0]={s2[-1] / s2[0]:.2e}")


if __name__ == "__main__":
    main()
