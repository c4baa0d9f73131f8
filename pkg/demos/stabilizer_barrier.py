"""Ensemble-mean entropy profile of a disordered stabilizer PEPS.

Usage: python demos/stabilizer_barrier.py [--p 5] [--kD 3] [--kd 1] [--seeds 5]
"""
import argparse

import numpy as np

from pepslab import stabilizer_peps as sp


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=5)
    ap.add_argument("--kD", type=int, default=3)
    ap.add_argument("--kd", type=int, default=1)
    ap.add_argument("--Lx", type=int, default=12)
    ap.add_argument("--Ly", type=int, default=8)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    profiles = []
    for seed in range(args.seeds):
        spec = sp.StabilizerPepsSpec(args.p, args.kD, args.kd, args.Lx, args.Ly, seed=seed)
        prof = sp.layer_profile(spec)
        profiles.append(np.asarray(prof.entropies) / prof.n_cuts)
    mean = np.mean(profiles, axis=0)
    print("y  S/cut [log p]")
    for y, s in enumerate(mean, start=1):
        print(f"{y:2d} {s:6.2f} " + "#" * int(round(2 * s)))


if __name__ == "__main__":
    main()
