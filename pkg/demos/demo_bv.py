"""Bounded-variation diagnostics and the single-site Lasota-Yorke bound.

Samples random piecewise-constant densities and verifies, numerically, the
inequalities the BV framework rests on: the two-norms bound, contraction of
variation under the absolute value, the Lipschitz-multiplier bound, and the
Lasota-Yorke inequality for the zigzag3 transfer operator.

Run:  python3 demos/demo_bv.py
"""

import numpy as np

from cmllab.bvdiag import (
    absolute_value,
    lipschitz_multiply,
    random_density,
    total_mass_norm,
    variation,
)
from cmllab.sitemap import transfer_apply, zigzag3


def main():
    rng = np.random.default_rng(0)
    m = zigzag3()
    n_inst = 2000
    worst = {"two_norms": 0.0, "abs_val": 0.0, "lip_mult": 0.0, "lasota_yorke": 0.0}

    for i in range(n_inst):
        d = random_density(rng, 81, complex_valued=(i % 4 == 0))
        var_d = variation(d)
        if var_d == 0:
            continue
        worst["two_norms"] = max(worst["two_norms"], total_mass_norm(d) / (0.5 * var_d))
        worst["abs_val"] = max(worst["abs_val"], variation(absolute_value(d)) / var_d)

        centers = (np.arange(81) + 0.5) / 81
        lip = rng.uniform(0.5, 5.0)
        u = rng.uniform(-1, 1) + lip * np.sin(centers)
        out = lipschitz_multiply(d, u, lip)
        bound = np.max(np.abs(u)) * var_d + lip * total_mass_norm(d) + 2.0 * lip / 81
        worst["lip_mult"] = max(worst["lip_mult"], variation(out) / bound)

        pushed = transfer_apply(m, d)
        ly_bound = (2.0 / 3.0) * var_d + 1.0 * total_mass_norm(d)
        worst["lasota_yorke"] = max(worst["lasota_yorke"], variation(pushed) / ly_bound)

    print(f"worst-case ratios over {n_inst} random densities (all must be <= 1):")
    print(f"  |mu| / (Var mu / 2)                 : {worst['two_norms']:.4f}")
    print(f"  Var A(mu) / Var mu                  : {worst['abs_val']:.4f}")
    print(f"  Var(u mu) / Lipschitz bound          : {worst['lip_mult']:.4f}")
    print(f"  Var(P mu) / ((2/3) Var mu + |mu|)    : {worst['lasota_yorke']:.4f}")


if __name__ == "__main__":
    main()
