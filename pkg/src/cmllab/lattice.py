"""Coupled map lattice dynamics on a finite d-dimensional torus.

One step is T = Phi o T0: the site map acts independently at every site,
then a finite-range coupling Phi(x) = x + A(x) mixes neighboring sites.
The torus side L must exceed twice the coupling range so the stencil never
wraps onto itself.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .sitemap import SiteMap, eval_map, map_from_json, map_to_json, zigzag3

__all__ = [
    "Coupling",
    "DiffusiveCoupling",
    "CustomCoupling",
    "LatticeConfig",
    "random_state",
    "apply_T0",
    "apply_coupling",
    "step",
    "iterate",
    "verify_coupling_bounds",
    "BoundsReport",
    "config_from_json",
    "config_to_json",
]

EPS_MAX_DEFAULT = 0.05


class Coupling:
    """Per-step update x -> x + A(x) with a declared finite range."""

    kind: str = "custom"
    range_r: int = 1

    def displacement(self, state: np.ndarray, eps: float) -> np.ndarray:
        raise NotImplementedError


class DiffusiveCoupling(Coupling):
    """Diffusive nearest neighbor coupling:
    A(x)_p = eps/(2d) * sum over |q-p|=1 of (x_q - x_p)."""

    kind = "diffusive"
    range_r = 1

    def displacement(self, state: np.ndarray, eps: float) -> np.ndarray:
        d = state.ndim
        acc = np.zeros_like(state)
        for axis in range(d):
            acc += np.roll(state, 1, axis=axis) + np.roll(state, -1, axis=axis) - 2.0 * state
        return (eps / (2.0 * d)) * acc


@dataclass
class CustomCoupling(Coupling):
    """User-supplied displacement with a declared range.

    Outputs leaving [0,1] are clamped by the stepper, which counts the
    clamps in LatticeConfig.clamp_count so violations are observable.
    """

    fn: Callable[[np.ndarray, float], np.ndarray]
    range_r: int = 1
    kind: str = "custom"

    def displacement(self, state: np.ndarray, eps: float) -> np.ndarray:
        return self.fn(state, eps)


@dataclass
class LatticeConfig:
    """Lattice geometry, site map and coupling for one experiment."""

    d: int = 1
    L: int = 16
    map: SiteMap = field(default_factory=zigzag3)
    coupling: Coupling = field(default_factory=DiffusiveCoupling)
    eps: float = 0.0
    eps_max: float = EPS_MAX_DEFAULT
    clamp_count: int = 0

    def __post_init__(self):
        if self.d < 1 or self.L < 1:
            raise ValueError("d and L must be positive")
        if self.L <= 2 * self.coupling.range_r:
            raise ValueError("need L > 2r so the stencil does not self-overlap")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.eps > self.eps_max:
            raise ValueError(
                f"eps={self.eps} exceeds eps_max={self.eps_max}; raise eps_max "
                "explicitly if you accept leaving the validated regime"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.d

    @property
    def n_sites(self) -> int:
        return self.L**self.d


def random_state(cfg: LatticeConfig, rng: np.random.Generator) -> np.ndarray:
    """Product-Lebesgue random initial state."""
    return rng.random(cfg.shape)


def apply_T0(cfg: LatticeConfig, state: np.ndarray) -> np.ndarray:
    """Sitewise application of the single-site map."""
    return eval_map(cfg.map, state)


def apply_coupling(cfg: LatticeConfig, state: np.ndarray) -> np.ndarray:
    """Apply Phi_eps; custom couplings leaving [0,1] are clamped and counted."""
    out = state + cfg.coupling.displacement(state, cfg.eps)
    if cfg.coupling.kind != "diffusive":
        n_out = int(np.sum((out < 0.0) | (out > 1.0)))
        if n_out:
            cfg.clamp_count += n_out
            out = np.clip(out, 0.0, 1.0)
    return out


def step(cfg: LatticeConfig, state: np.ndarray) -> np.ndarray:
    """One step of the coupled dynamics Phi_eps o T0."""
    return apply_coupling(cfg, apply_T0(cfg, state))


def iterate(cfg: LatticeConfig, state: np.ndarray, n: int) -> np.ndarray:
    for _ in range(n):
        state = step(cfg, state)
    return state


@dataclass
class BoundsReport:
    sup_A: float
    sup_DA: float
    sup_D2A: float
    bound: float
    locality_ok: bool
    bounds_ok: bool


def _torus_distance(p, q, L: int) -> int:
    return max(min(abs(a - b), L - abs(a - b)) for a, b in zip(p, q))


def verify_coupling_bounds(
    cfg: LatticeConfig, n_samples: int = 20, seed: int = 0
) -> BoundsReport:
    """Sample random states and estimate sup|A|, sup|DA| and sup|d(DA)|
    by central finite differences; check them against 2*eps and check the
    declared range-r locality of the Jacobian."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    h = 1e-6
    r = cfg.coupling.range_r
    sup_A = 0.0
    sup_DA = 0.0
    sup_D2A = 0.0
    locality_ok = True
    sites = list(np.ndindex(cfg.shape))
    for _ in range(n_samples):
        x = np.clip(rng.random(cfg.shape), 2 * h, 1 - 2 * h)
        A = cfg.coupling.displacement(x, cfg.eps)
        sup_A = max(sup_A, float(np.max(np.abs(A))))
        # probe a few source sites p for Jacobian columns dA_q/dx_p
        for p in sites[: min(len(sites), 6)]:
            e = np.zeros(cfg.shape)
            e[p] = 1.0
            Ap = cfg.coupling.displacement(x + h * e, cfg.eps)
            Am = cfg.coupling.displacement(x - h * e, cfg.eps)
            col = (Ap - Am) / (2 * h)
            sup_DA = max(sup_DA, float(np.max(np.abs(col))))
            col2 = (Ap - 2 * A + Am) / (h * h)
            sup_D2A = max(sup_D2A, float(np.max(np.abs(col2))))
            # locality: dPhi_q/dx_p = delta_qp + col_q must vanish beyond r
            for q in sites:
                dist = _torus_distance(p, q, cfg.L)
                if dist > r and abs(col[q]) > 1e-8:
                    locality_ok = False
    bound = 2.0 * cfg.eps + 1e-4
    bounds_ok = sup_A <= bound and sup_DA <= bound and sup_D2A <= bound
    return BoundsReport(sup_A, sup_DA, sup_D2A, bound, locality_ok, bounds_ok)


_COUPLINGS = {"diffusive": DiffusiveCoupling}


def config_from_json(text_or_obj) -> LatticeConfig:
    """Build a LatticeConfig from {"d":..,"L":..,"eps":..,"r":..,
    "coupling":"diffusive","map":{...}}."""
    obj = json.loads(text_or_obj) if isinstance(text_or_obj, str) else text_or_obj
    kind = obj.get("coupling", "diffusive")
    if kind not in _COUPLINGS:
        raise ValueError(f"unknown coupling kind {kind!r}")
    coupling = _COUPLINGS[kind]()
    r = int(obj.get("r", coupling.range_r))
    if r != coupling.range_r:
        raise ValueError(f"coupling {kind!r} has range {coupling.range_r}, got r={r}")
    site_map = map_from_json(obj["map"]) if "map" in obj else zigzag3()
    return LatticeConfig(
        d=int(obj.get("d", 1)),
        L=int(obj.get("L", 16)),
        map=site_map,
        coupling=coupling,
        eps=float(obj.get("eps", 0.0)),
        eps_max=float(obj.get("eps_max", EPS_MAX_DEFAULT)),
    )


def config_to_json(cfg: LatticeConfig) -> dict:
    return {
        "d": cfg.d,
        "L": cfg.L,
        "eps": cfg.eps,
        "eps_max": cfg.eps_max,
        "r": cfg.coupling.range_r,
        "coupling": cfg.coupling.kind,
        "map": json.loads(map_to_json(cfg.map)),
    }
