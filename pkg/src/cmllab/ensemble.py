"""Ensemble simulation and the empirical side of the limit theorems.

Birkhoff-sum ensembles over independent Lebesgue-random starts, the
Green-Kubo variance from summed autocovariances, Kolmogorov-Smirnov
testing of the CLT, the local-limit-theorem interval ratios, and the
degeneracy scan that detects coboundary observables.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _fastpath
from .lattice import LatticeConfig
from .observable import Observable

__all__ = [
    "EnsembleRun",
    "VarianceEstimate",
    "CltReport",
    "LltReport",
    "DegeneracyReport",
    "run_ensemble",
    "green_kubo",
    "clt_test",
    "llt_test",
    "degeneracy_scan",
]


@dataclass
class EnsembleRun:
    cfg: LatticeConfig
    f: Observable
    n_traj: int
    n: int
    n_burn: int
    master_seed: int
    samples: np.ndarray
    checkpoints: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    partials: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))


@dataclass
class VarianceEstimate:
    sigma2: float
    autocov: np.ndarray  # C_0 .. C_K
    stderr: np.ndarray  # per-lag jackknife standard errors
    sigma2_stderr: float
    K: int
    decay_ratio: float
    truncation_warning: bool


@dataclass
class CltReport:
    ks_distance: float
    skewness: float
    kurtosis_excess: float
    n_traj: int


@dataclass
class LltReport:
    intervals: list[tuple[float, float]]
    rho: list[float]
    rho_ci: list[tuple[float, float]]
    counts: list[int]
    expected_counts: list[float]
    low_count_warning: list[bool]


@dataclass
class DegeneracyReport:
    n_list: np.ndarray
    var_over_n: np.ndarray
    slope: float
    degenerate: bool


def run_ensemble(
    cfg: LatticeConfig,
    f: Observable,
    n_traj: int,
    n: int,
    n_burn: int = 1000,
    master_seed: int = 0,
    checkpoints=None,
) -> EnsembleRun:
    """n_traj Birkhoff sums S_n f from independent product-Lebesgue starts.

    Trajectory i draws its start from a counter-based stream keyed by
    (master_seed, i), so the samples are reproducible bit-exactly and
    independent of any parallel scheduling.
    """
    if n_traj < 1 or n < 1:
        raise ValueError("n_traj and n must be >= 1")
    sums, partials = _fastpath.ensemble_sums(
        cfg, f, n_traj, n, n_burn, master_seed, checkpoints
    )
    cps = np.asarray(checkpoints if checkpoints is not None else [], dtype=np.int64)
    return EnsembleRun(cfg, f, n_traj, n, n_burn, master_seed, sums, cps, partials)


def green_kubo(
    cfg: LatticeConfig,
    f: Observable,
    K: int = 50,
    n_avg: int = 1_000_000,
    n_burn: int = 1000,
    seed: int = 0,
    n_blocks: int = 50,
) -> VarianceEstimate:
    """sigma^2 = C_0 + 2 sum_{k=1..K} C_k with C_k the lag-k autocovariance
    of f along one long trajectory.

    Standard errors come from a delete-one jackknife over contiguous
    blocks.  The trajectory mean is subtracted before forming products, so
    a small residual off-centering does not bias the estimate.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    series = _fastpath.observable_series(cfg, f, n_burn, n_avg, seed)
    series = series - series.mean()
    n_blocks = min(n_blocks, max(1, n_avg // max(4 * (K + 1), 8)))
    block_len = n_avg // n_blocks
    # lag products within each block; end effects are O(K/block_len)
    block_cov = np.empty((n_blocks, K + 1))
    for b in range(n_blocks):
        seg = series[b * block_len : (b + 1) * block_len]
        m = len(seg)
        for k in range(K + 1):
            block_cov[b, k] = np.dot(seg[: m - k], seg[k:]) / (m - k)
    cov = block_cov.mean(axis=0)
    # delete-one jackknife
    jack = (cov[None, :] * n_blocks - block_cov) / max(n_blocks - 1, 1)
    stderr = np.sqrt(max(n_blocks - 1, 1) / n_blocks * np.sum((jack - jack.mean(0)) ** 2, axis=0))
    weights = np.ones(K + 1)
    weights[1:] = 2.0
    sigma2 = float(weights @ cov)
    sigma2_jack = jack @ weights
    sigma2_stderr = float(
        np.sqrt(max(n_blocks - 1, 1) / n_blocks * np.sum((sigma2_jack - sigma2_jack.mean()) ** 2))
    )
    decay = float(abs(cov[K]) / cov[0]) if cov[0] > 0 else 0.0
    return VarianceEstimate(
        sigma2=sigma2,
        autocov=cov,
        stderr=stderr,
        sigma2_stderr=sigma2_stderr,
        K=K,
        decay_ratio=decay,
        truncation_warning=decay > 0.01,
    )


def clt_test(run: EnsembleRun, sigma2: float) -> CltReport:
    """KS distance of S_n f / sqrt(n sigma^2) against the standard normal."""
    if sigma2 <= 0:
        raise ValueError("degenerate variance: sigma2 <= 0")
    z = run.samples / np.sqrt(run.n * sigma2)
    ks = stats.kstest(z, "norm").statistic
    return CltReport(
        ks_distance=float(ks),
        skewness=float(stats.skew(z)),
        kurtosis_excess=float(stats.kurtosis(z)),
        n_traj=run.n_traj,
    )


def llt_test(run: EnsembleRun, sigma: float, intervals) -> LltReport:
    """rho_I = sigma sqrt(2 pi n) P(S_n f in I); the LLT predicts rho -> |I|."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    scale = sigma * np.sqrt(2.0 * np.pi * run.n)
    sd = sigma * np.sqrt(run.n)
    rho, cis, counts, expected, warnings = [], [], [], [], []
    for a, b in intervals:
        if b < a:
            raise ValueError("interval endpoints out of order")
        count = int(np.sum((run.samples >= a) & (run.samples <= b)))
        p_hat = count / run.n_traj
        rho.append(float(scale * p_hat))
        # normal-approximation binomial CI on p, propagated through scale
        se = np.sqrt(max(p_hat * (1 - p_hat), 1e-300) / run.n_traj)
        cis.append((float(scale * (p_hat - 1.96 * se)), float(scale * (p_hat + 1.96 * se))))
        counts.append(count)
        p_pred = stats.norm.cdf(b / sd) - stats.norm.cdf(a / sd)
        expected.append(float(run.n_traj * p_pred))
        warnings.append(expected[-1] < 100)
    return LltReport(
        intervals=[(float(a), float(b)) for a, b in intervals],
        rho=rho, rho_ci=cis, counts=counts,
        expected_counts=expected, low_count_warning=warnings,
    )


def degeneracy_scan(
    cfg: LatticeConfig,
    f: Observable,
    n_list,
    n_traj: int = 2000,
    n_burn: int = 1000,
    master_seed: int = 0,
) -> DegeneracyReport:
    """Var(S_n f)/n across increasing n; a log-log slope <= -0.8 flags
    coboundary (degenerate) behavior, a plateau estimates sigma^2."""
    n_list = np.asarray(sorted(n_list), dtype=np.int64)
    if np.any(np.diff(n_list) <= 0):
        raise ValueError("n_list must be strictly increasing")
    run = run_ensemble(
        cfg, f, n_traj, int(n_list[-1]), n_burn, master_seed, checkpoints=n_list
    )
    var_over_n = run.partials.var(axis=0, ddof=1) / n_list
    if np.all(var_over_n <= 0):
        return DegeneracyReport(n_list, var_over_n, -np.inf, True)
    slope = float(
        np.polyfit(np.log(n_list), np.log(np.maximum(var_over_n, 1e-300)), 1)[0]
    )
    return DegeneracyReport(n_list, var_over_n, slope, slope <= -0.8)
