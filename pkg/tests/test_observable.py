import numpy as np
import pytest

from cmllab.lattice import LatticeConfig, random_state, step
from cmllab.observable import (
    Observable,
    birkhoff_sum,
    center,
    coboundary,
    coordinate,
    cos_coordinate,
    observable_from_spec,
    product_observable,
)


def cfg0():
    return LatticeConfig(d=1, L=16, eps=0.0)


def test_center_lebesgue_invariant():
    # Lebesgue is invariant for zigzag3, so the mean of x_0 is 1/2
    f = center(coordinate(0), cfg0(), n_burn=500, n_est=200_000, seed=1)
    assert f.offset == pytest.approx(0.5, abs=0.005)


def test_center_idempotent_up_to_noise():
    cfg = cfg0()
    f = center(coordinate(0), cfg, n_est=100_000, seed=1)
    f2 = center(f, cfg, n_est=100_000, seed=2)
    assert abs(f2.offset - f.offset) < 0.01


def test_center_constant_zero():
    f = Observable("zero", ((0,),), lambda s: 0.0, (0.0,))
    out = center(f, cfg0(), n_burn=10, n_est=100, seed=0)
    assert out.offset == 0.0


def test_birkhoff_examples():
    cfg = cfg0()
    s0 = random_state(cfg, np.random.default_rng(4))
    f = coordinate(0).with_offset(0.5)
    assert birkhoff_sum(f, cfg, s0, 0) == 0.0
    assert birkhoff_sum(f, cfg, s0, 1) == pytest.approx(f(s0))


def test_birkhoff_additivity():
    cfg = LatticeConfig(d=1, L=8, eps=0.02)
    s0 = random_state(cfg, np.random.default_rng(5))
    f = cos_coordinate(0)
    n, m = 37, 23
    lhs = birkhoff_sum(f, cfg, s0, n + m)
    sn = s0.copy()
    for _ in range(n):
        sn = step(cfg, sn)
    rhs = birkhoff_sum(f, cfg, s0, n) + birkhoff_sum(f, cfg, sn, m)
    assert lhs == pytest.approx(rhs, abs=1e-9 * (n + m))


def test_coboundary_sums_bounded():
    cfg = LatticeConfig(d=1, L=8, eps=0.02)
    f = coboundary(cfg)
    s0 = random_state(cfg, np.random.default_rng(6))
    for n in (1, 10, 100, 500):
        assert abs(birkhoff_sum(f, cfg, s0, n)) <= 2.0 + 1e-9


def test_support_locality_probing():
    rng = np.random.default_rng(7)
    f = product_observable(0, 1)
    s = rng.random(16)
    base = f(s)
    for _ in range(20):
        s2 = s.copy()
        outside = rng.integers(2, 16)
        s2[outside] = rng.random()
        assert f(s2) == base


def test_lipschitz_estimate_on_pairs():
    rng = np.random.default_rng(8)
    for f in (coordinate(0), cos_coordinate(0), product_observable(0, 1)):
        for _ in range(50):
            x, y = rng.random(16), rng.random(16)
            bound = sum(
                lip * abs(x[p] - y[p]) for p, lip in zip(f.support, f.lip)
            )
            assert abs(f(x) - f(y)) <= bound + 1e-12


def test_observable_from_spec():
    f = observable_from_spec({"kind": "coordinate", "site": [0]})
    assert f.support == ((0,),)
    f = observable_from_spec({"kind": "product", "sites": [[0], [1]], "offset": 0.25})
    assert f.offset == 0.25
    with pytest.raises(ValueError):
        observable_from_spec({"kind": "nope"})
