"""Empirical CLT and LLT for Birkhoff sums on a coupled zigzag3 lattice.

Simulates an ensemble of trajectories of the eps-coupled lattice, normalizes
the Birkhoff sums of f(x) = x_0 - 1/2 by the Green-Kubo variance, and
compares the sample distribution with the standard normal.  Also evaluates
the local-limit ratio sigma*sqrt(2*pi*n)*P(S_n f in I) against |I|.

Run:  python3 demos/demo_clt.py
"""

import numpy as np
from scipy import stats

from cmllab import (
    LatticeConfig,
    clt_test,
    coordinate,
    green_kubo,
    llt_test,
    run_ensemble,
)


def main():
    cfg = LatticeConfig(d=1, L=16, eps=0.02)
    f = coordinate(0).with_offset(0.5)
    n, n_traj = 2048, 20_000

    print(f"lattice: d={cfg.d}, L={cfg.L}, eps={cfg.eps}, map=zigzag3")
    est = green_kubo(cfg, f, K=40, n_avg=2_000_000, seed=1)
    print(f"Green-Kubo sigma^2 = {est.sigma2:.5f} +/- {est.sigma2_stderr:.5f}")

    run = run_ensemble(cfg, f, n_traj, n, n_burn=500, master_seed=2)
    rep = clt_test(run, est.sigma2)
    print(f"\nCLT at n={n}, n_traj={n_traj}:")
    print(f"  KS distance to N(0,1): {rep.ks_distance:.4f}")
    print(f"  sample skewness {rep.skewness:+.4f}, excess kurtosis {rep.kurtosis_excess:+.4f}")

    z = run.samples / np.sqrt(n * est.sigma2)
    edges = np.array([-np.inf, -2, -1, 0, 1, 2, np.inf])
    counts, _ = np.histogram(z, bins=edges)
    expected = np.diff(stats.norm.cdf(edges)) * n_traj
    print("  bin counts vs normal expectation:")
    for lo, hi, c, e in zip(edges[:-1], edges[1:], counts, expected):
        print(f"    ({lo:5.1f}, {hi:5.1f}]  observed {c:6d}   expected {e:8.1f}")

    sigma = float(np.sqrt(est.sigma2))
    intervals = [(-0.5, 0.5), (0.3, 0.8)]
    lrep = llt_test(run, sigma, intervals)
    print(f"\nLLT ratios (should approach |I|):")
    for (a, b), rho, (lo, hi), cnt in zip(intervals, lrep.rho, lrep.rho_ci, lrep.counts):
        print(
            f"  I=[{a:4.1f},{b:4.1f}]  |I|={b - a:.2f}  "
            f"rho={rho:.4f}  ci=({lo:.4f},{hi:.4f})  count={cnt}"
        )


if __name__ == "__main__":
    main()
