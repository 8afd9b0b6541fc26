"""Single-site piecewise expanding interval maps and exact transfer application.

A site map is a continuous, piecewise monotone C^2 map of [0,1] into itself,
given branch by branch between its singularities.  For piecewise linear maps
with grid-aligned branch images, the transfer (Perron-Frobenius) operator
acts exactly on piecewise constant densities, which is what makes
machine-precision oracles possible downstream.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Branch",
    "LinearBranch",
    "ExprBranch",
    "SiteMap",
    "PCDensity",
    "ValidationReport",
    "zigzag3",
    "tent",
    "full_branch_linear",
    "eval_map",
    "validate",
    "transfer_apply",
    "map_to_json",
    "map_from_json",
]

_DOMAIN_TOL = 1e-12


class Branch:
    """One monotone C^2 piece of a site map on an open subinterval."""

    def __call__(self, x):  # pragma: no cover - interface
        raise NotImplementedError

    def deriv(self, x):  # pragma: no cover - interface
        raise NotImplementedError

    def deriv2(self, x):  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class LinearBranch(Branch):
    """tau(x) = a*x + b on its interval."""

    a: float
    b: float

    def __call__(self, x):
        return self.a * x + self.b

    def deriv(self, x):
        return self.a + 0.0 * np.asarray(x)

    def deriv2(self, x):
        return 0.0 * np.asarray(x)


@dataclass(frozen=True)
class ExprBranch(Branch):
    """Branch given by callables for tau, tau' and tau''.

    Only usable for trajectory simulation; exact transfer application is
    restricted to linear branches.
    """

    fn: Callable[[float], float]
    dfn: Callable[[float], float]
    d2fn: Callable[[float], float]

    def __call__(self, x):
        return self.fn(x)

    def deriv(self, x):
        return self.dfn(x)

    def deriv2(self, x):
        return self.d2fn(x)


@dataclass(frozen=True)
class SiteMap:
    """Piecewise monotone interval map with singularities 0=z_0<...<z_N=1.

    Branch j acts on (singularities[j], singularities[j+1]).  Values at a
    singularity follow the right-continuous convention (left branch at x=1).
    """

    singularities: tuple[float, ...]
    branches: tuple[Branch, ...]
    min_slope: float = field(default=0.0)

    def __post_init__(self):
        z = self.singularities
        if len(z) < 2 or abs(z[0]) > _DOMAIN_TOL or abs(z[-1] - 1.0) > _DOMAIN_TOL:
            raise ValueError("singularities must start at 0 and end at 1")
        if any(z[i] >= z[i + 1] for i in range(len(z) - 1)):
            raise ValueError("singularities must be strictly increasing")
        if len(self.branches) != len(z) - 1:
            raise ValueError("need one branch per subinterval")
        if self.min_slope == 0.0:
            object.__setattr__(self, "min_slope", _probe_min_slope(self))

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    def is_piecewise_linear(self) -> bool:
        return all(isinstance(b, LinearBranch) for b in self.branches)

    def branch_index(self, x: float) -> int:
        """Index of the branch owning x, right-continuous (left at x=1)."""
        z = self.singularities
        if x >= z[-2]:
            return len(self.branches) - 1
        # np.searchsorted with side='right' gives the right-continuous cell
        return int(np.searchsorted(np.asarray(z), x, side="right")) - 1

    def __call__(self, x):
        return eval_map(self, x)


def _probe_min_slope(m: SiteMap, n_probe: int = 64) -> float:
    vals = []
    for j, br in enumerate(m.branches):
        a, b = m.singularities[j], m.singularities[j + 1]
        xs = np.linspace(a + 1e-9, b - 1e-9, n_probe)
        vals.append(np.min(np.abs(br.deriv(xs))))
    return float(min(vals))


def zigzag3() -> SiteMap:
    """The canonical test map: slope +-3 zigzag with 3 full branches.

    tau(x) = 3x on [0,1/3], 2-3x on [1/3,2/3], 3x-2 on [2/3,1].
    Continuous, each branch onto [0,1], inf|tau'| = 3 > 2, and Lebesgue
    measure is invariant.
    """
    return SiteMap(
        singularities=(0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0),
        branches=(
            LinearBranch(3.0, 0.0),
            LinearBranch(-3.0, 2.0),
            LinearBranch(3.0, -2.0),
        ),
    )


def tent() -> SiteMap:
    """Tent map, slope 2: fails the expansion requirement (not > 2)."""
    return SiteMap(
        singularities=(0.0, 0.5, 1.0),
        branches=(LinearBranch(2.0, 0.0), LinearBranch(-2.0, 2.0)),
    )


def full_branch_linear(s: int) -> SiteMap:
    """s full linear branches of slope s (Renyi-style x -> s*x mod 1, made
    continuous by alternating slopes when s is even would break continuity,
    so this returns the sawtooth; use for synthetic spectral sanity checks
    only)."""
    z = tuple(j / s for j in range(s + 1))
    br = tuple(LinearBranch(float(s), float(-j)) for j in range(s))
    return SiteMap(singularities=z, branches=br)


def eval_map(m: SiteMap, x):
    """Evaluate tau(x) for scalar or array x in [0,1]."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < -_DOMAIN_TOL) or np.any(xa > 1.0 + _DOMAIN_TOL):
        raise ValueError("eval_map: argument outside [0,1]")
    xa = np.clip(xa, 0.0, 1.0)
    if xa.ndim == 0:
        br = m.branches[m.branch_index(float(xa))]
        return float(np.clip(br(float(xa)), 0.0, 1.0))
    out = np.empty_like(xa)
    z = np.asarray(m.singularities)
    idx = np.clip(np.searchsorted(z, xa, side="right") - 1, 0, m.n_branches - 1)
    for j, br in enumerate(m.branches):
        sel = idx == j
        if np.any(sel):
            out[sel] = br(xa[sel])
    return np.clip(out, 0.0, 1.0)


@dataclass
class ValidationReport:
    continuous: bool
    expanding: bool
    range_ok: bool
    min_slope: float
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.continuous and self.expanding and self.range_ok


def validate(m: SiteMap, n_probe: int = 64) -> ValidationReport:
    """Probe-based check of continuity, expansion > 2 and range in [0,1].

    Failures are reported with the offending location, never raised.
    """
    if n_probe < 2:
        raise ValueError("n_probe must be >= 2")
    failures: list[str] = []
    continuous = True
    for j in range(1, m.n_branches):
        z = m.singularities[j]
        left = m.branches[j - 1](z)
        right = m.branches[j](z)
        if abs(left - right) > 1e-10:
            continuous = False
            failures.append(f"discontinuity at z={z!r}: {left!r} vs {right!r}")

    expanding = True
    range_ok = True
    min_slope = math.inf
    for j, br in enumerate(m.branches):
        a, b = m.singularities[j], m.singularities[j + 1]
        xs = np.linspace(a, b, n_probe)
        ders = np.abs(np.asarray(br.deriv(xs), dtype=float))
        min_slope = min(min_slope, float(ders.min()))
        if ders.min() <= 2.0:
            expanding = False
            failures.append(
                f"branch {j}: min sampled |tau'| = {ders.min():.6g} <= 2"
            )
        vals = np.asarray(br(xs), dtype=float)
        if vals.min() < -1e-10 or vals.max() > 1.0 + 1e-10:
            range_ok = False
            failures.append(f"branch {j}: range [{vals.min()}, {vals.max()}] leaves [0,1]")
    return ValidationReport(continuous, expanding, range_ok, min_slope, failures)


@dataclass
class PCDensity:
    """Piecewise constant complex density on a 1D grid of [0,1].

    values[j] is the density on (grid[j], grid[j+1]) with respect to
    Lebesgue measure.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values)
        if self.grid.ndim != 1 or len(self.grid) < 2:
            raise ValueError("grid needs at least two breakpoints")
        if abs(self.grid[0]) > _DOMAIN_TOL or abs(self.grid[-1] - 1.0) > _DOMAIN_TOL:
            raise ValueError("grid must span [0,1]")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if len(self.values) != len(self.grid) - 1:
            raise ValueError("one value per cell required")

    @classmethod
    def uniform(cls, n_cells: int, value: complex = 1.0) -> "PCDensity":
        return cls(np.linspace(0.0, 1.0, n_cells + 1), np.full(n_cells, value))

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.grid)

    def mass(self) -> complex:
        return complex(np.sum(self.values * self.widths))


class AlignmentError(ValueError):
    """Grid is incompatible with the map's branch images."""


def _aligned_cell(grid: np.ndarray, x: float, tol: float = 1e-9) -> int:
    """Index of the grid breakpoint equal to x, or raise AlignmentError."""
    j = int(np.argmin(np.abs(grid - x)))
    if abs(grid[j] - x) > tol:
        raise AlignmentError(f"point {x} does not lie on the grid")
    return j


def transfer_apply(m: SiteMap, d: PCDensity) -> PCDensity:
    """Exact pushforward of a piecewise constant density by a piecewise
    linear map whose cell images align with the grid.

    (P d)(y) = sum over inverse branches v of d(v(y)) |v'(y)|; mass is
    preserved exactly up to rounding.
    """
    if not m.is_piecewise_linear():
        raise AlignmentError("exact transfer requires piecewise linear branches")
    grid = d.grid
    out = np.zeros(len(d.values), dtype=np.result_type(d.values, float))
    # Every singularity must sit on the grid so each cell lies in one branch.
    for z in m.singularities[1:-1]:
        _aligned_cell(grid, z)
    for j in range(len(d.values)):
        x0, x1 = grid[j], grid[j + 1]
        br = m.branches[m.branch_index(0.5 * (x0 + x1))]
        assert isinstance(br, LinearBranch)
        y0, y1 = br(x0), br(x1)
        lo, hi = (y0, y1) if y0 <= y1 else (y1, y0)
        i0 = _aligned_cell(grid, lo)
        i1 = _aligned_cell(grid, hi)
        if i1 <= i0:
            raise AlignmentError("degenerate branch image")
        # Constant Jacobian: density transported with factor 1/|a|.
        out[i0:i1] += d.values[j] / abs(br.a)
        # Image cells must coincide with grid cells exactly: check widths.
        src_w = x1 - x0
        img_w = grid[i1] - grid[i0]
        if abs(img_w - abs(br.a) * src_w) > 1e-9:
            raise AlignmentError("branch image width mismatch with grid")
    return PCDensity(grid.copy(), out)


def aligned_grid_size(m: SiteMap, n_min: int) -> int:
    """Smallest uniform grid size >= n_min aligned with the map's
    singularities and linear branch images (piecewise linear maps with
    rational data only)."""
    denoms = []
    for z in m.singularities:
        denoms.append(Fraction(z).limit_denominator(10**6).denominator)
    for br in m.branches:
        if isinstance(br, LinearBranch):
            denoms.append(Fraction(br.b).limit_denominator(10**6).denominator)
    lcm = 1
    for q in denoms:
        lcm = lcm * q // math.gcd(lcm, q)
    n = ((n_min + lcm - 1) // lcm) * lcm
    return max(n, lcm)


def map_to_json(m: SiteMap) -> str:
    """Serialize a SiteMap; bit-exact round trip for linear branches."""
    branches = []
    for br in m.branches:
        if isinstance(br, LinearBranch):
            branches.append({"kind": "linear", "a": br.a, "b": br.b})
        else:
            raise ValueError("only linear branches are serializable")
    return json.dumps({"singularities": list(m.singularities), "branches": branches})


def map_from_json(text_or_obj) -> SiteMap:
    obj = json.loads(text_or_obj) if isinstance(text_or_obj, str) else text_or_obj
    if isinstance(obj, dict) and obj.get("name") == "zigzag3":
        return zigzag3()
    branches = []
    for b in obj["branches"]:
        if b["kind"] != "linear":
            raise ValueError(f"unsupported branch kind {b['kind']!r}")
        branches.append(LinearBranch(float(b["a"]), float(b["b"])))
    return SiteMap(tuple(float(z) for z in obj["singularities"]), tuple(branches))
