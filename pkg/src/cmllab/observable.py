"""Lipschitz observables reading finitely many lattice sites.

An observable carries its support (the site indices it reads), per-site
Lipschitz constants, and a mean offset c so that f - c is centered with
respect to the invariant measure.  Centering is empirical: a long
trajectory time average, justified by almost-everywhere convergence of
Birkhoff averages from Lebesgue-random starts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .lattice import LatticeConfig, iterate, random_state, step

__all__ = [
    "Observable",
    "coordinate",
    "cos_coordinate",
    "product_observable",
    "coboundary",
    "canonical_f1",
    "canonical_f2",
    "canonical_f3",
    "center",
    "birkhoff_sum",
    "observable_from_spec",
]


@dataclass(frozen=True)
class Observable:
    """f(state) - c, reading only the sites in `support`."""

    name: str
    support: tuple[tuple[int, ...], ...]
    fn: Callable[[np.ndarray], float]
    lip: tuple[float, ...]
    offset: float = 0.0
    # structure tag consumed by the fast simulation kernels; one of
    # "coordinate", "cos_coordinate", "product", "coboundary", "generic"
    kind: str = "generic"

    def __call__(self, state: np.ndarray) -> float:
        return float(self.fn(state)) - self.offset

    def raw(self, state: np.ndarray) -> float:
        return float(self.fn(state))

    def with_offset(self, c: float) -> "Observable":
        return replace(self, offset=c)


def _site_tuple(site) -> tuple[int, ...]:
    if isinstance(site, (int, np.integer)):
        return (int(site),)
    return tuple(int(s) for s in site)


def coordinate(site=0) -> Observable:
    p = _site_tuple(site)
    return Observable(
        name=f"x{p}", support=(p,), fn=lambda s: float(s[p]), lip=(1.0,),
        kind="coordinate",
    )


def cos_coordinate(site=0) -> Observable:
    p = _site_tuple(site)
    return Observable(
        name=f"cos2pi_x{p}",
        support=(p,),
        fn=lambda s: math.cos(2.0 * math.pi * float(s[p])),
        lip=(2.0 * math.pi,),
        kind="cos_coordinate",
    )


def product_observable(site_a=0, site_b=1) -> Observable:
    p, q = _site_tuple(site_a), _site_tuple(site_b)
    return Observable(
        name=f"x{p}*x{q}",
        support=(p, q),
        fn=lambda s: float(s[p]) * float(s[q]),
        lip=(1.0, 1.0),
        kind="product",
    )


def coboundary(cfg: LatticeConfig, u: Observable | None = None) -> Observable:
    """f = u - u o T for a fixed dynamics; Birkhoff sums telescope, so the
    variance of S_n f is bounded (the degenerate case of the CLT)."""
    if u is None:
        u = coordinate(0)
    # reads u's sites plus their coupling stencil (range r, d=1 indices)
    r = cfg.coupling.range_r
    extra = []
    for p in u.support:
        for axis in range(len(p)):
            for off in range(-r, r + 1):
                q = list(p)
                q[axis] = (q[axis] + off) % cfg.L
                extra.append(tuple(q))
    support = tuple(dict.fromkeys(list(u.support) + extra))

    def fn(s: np.ndarray) -> float:
        return u.raw(s) - u.raw(step(cfg, s))

    return Observable(
        name=f"cob[{u.name}]", support=support, fn=fn,
        lip=tuple(2.0 * l for l in u.lip), kind="coboundary",
    )


def canonical_f1() -> Observable:
    return coordinate(0)


def canonical_f2() -> Observable:
    return cos_coordinate(0)


def canonical_f3() -> Observable:
    return product_observable(0, 1)


def center(
    f: Observable,
    cfg: LatticeConfig,
    n_burn: int = 1000,
    n_est: int = 100_000,
    seed: int = 0,
) -> Observable:
    """Set the offset c to the time average of f along one long trajectory.

    Returns a new Observable with offset c (replacing any previous offset);
    the centered observable then time-averages to ~0 on fresh runs.
    """
    if n_est < 1:
        raise ValueError("n_est must be >= 1")
    from . import _fastpath

    series = _fastpath.observable_series(cfg, f, n_burn, n_est, seed)
    c = float(np.mean(series)) + f.offset
    return f.with_offset(c)


def birkhoff_sum(f: Observable, cfg: LatticeConfig, s0: np.ndarray, n: int) -> float:
    """S_n f(s0) = sum_{k=0}^{n-1} f(T^k s0)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    total = 0.0
    s = np.array(s0, dtype=float)
    for _ in range(n):
        total += f(s)
        s = step(cfg, s)
    return total


def observable_from_spec(obj: dict) -> Observable:
    """Build an observable from its config JSON form, e.g.
    {"kind":"coordinate","site":[0]}."""
    kind = obj.get("kind")
    if kind == "coordinate":
        f = coordinate(obj.get("site", [0]))
    elif kind == "cos_coordinate":
        f = cos_coordinate(obj.get("site", [0]))
    elif kind == "product":
        sites = obj.get("sites", [[0], [1]])
        f = product_observable(sites[0], sites[1])
    elif kind == "coboundary":
        f = None  # resolved against the lattice config by the caller
        raise ValueError("coboundary observables need a lattice config; use coboundary()")
    else:
        raise ValueError(f"unknown observable kind {kind!r}")
    if "offset" in obj:
        f = f.with_offset(float(obj["offset"]))
    return f
