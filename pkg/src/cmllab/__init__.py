"""cmllab: numerical laboratory for weakly coupled lattices of piecewise
expanding interval maps.

Simulates coupled map lattice dynamics, verifies central and local limit
theorems for Birkhoff sums empirically, and discretizes the plain and
twisted transfer operators to compute leading eigenvalue curves, spectral
gaps and twisted spectral radii.
"""
__version__ = "0.1.0"

from .sitemap import (
    SiteMap,
    PCDensity,
    LinearBranch,
    zigzag3,
    tent,
    eval_map,
    validate,
    transfer_apply,
)
from .bvdiag import variation, total_mass_norm, absolute_value, lipschitz_multiply
from .lattice import (
    LatticeConfig,
    DiffusiveCoupling,
    CustomCoupling,
    apply_T0,
    apply_coupling,
    step,
    verify_coupling_bounds,
    config_from_json,
)
from .observable import (
    Observable,
    coordinate,
    cos_coordinate,
    product_observable,
    coboundary,
    center,
    birkhoff_sum,
)
from .ensemble import (
    EnsembleRun,
    run_ensemble,
    green_kubo,
    clt_test,
    llt_test,
    degeneracy_scan,
)
from .spectral import (
    UlamOperator,
    TwistedOperator,
    EigenCurve,
    build_ulam,
    stationary_density,
    spectral_gap,
    twist,
    lambda_curve,
    variance_from_operator,
    spectral_radius_map,
    char_fn_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]
