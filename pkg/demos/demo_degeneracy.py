"""Degenerate observables: coboundaries have vanishing diffusion.

For f = u - u o T_eps the Birkhoff sums telescope, so Var(S_n f)/n decays
like 1/n and the Green-Kubo series sums to zero.  A generic observable
shows the opposite behavior: Var(S_n f)/n plateaus at sigma^2 > 0.

Run:  python3 demos/demo_degeneracy.py
"""

import numpy as np

from cmllab import (
    LatticeConfig,
    coboundary,
    coordinate,
    degeneracy_scan,
    green_kubo,
)


def main():
    cfg = LatticeConfig(d=1, L=16, eps=0.02)
    ns = [64, 128, 256, 512, 1024]

    for label, f in (
        ("coboundary u - u o T", coboundary(cfg)),
        ("generic f = x_0 - 1/2", coordinate(0).with_offset(0.5)),
    ):
        rep = degeneracy_scan(cfg, f, ns, n_traj=2000, master_seed=1)
        est = green_kubo(cfg, f, K=40, n_avg=1_000_000, seed=2)
        print(f"{label}:")
        for n, v in zip(rep.n_list, rep.var_over_n):
            print(f"  n={n:5d}   Var(S_n f)/n = {v:.6f}")
        print(f"  log-log slope = {rep.slope:+.3f}   degenerate = {rep.degenerate}")
        print(f"  Green-Kubo sigma^2 = {est.sigma2:.6f} +/- {est.sigma2_stderr:.6f}\n")


if __name__ == "__main__":
    main()
