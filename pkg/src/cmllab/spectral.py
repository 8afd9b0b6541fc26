"""Ulam discretization of the transfer operator and its twisted family.

The k modeled sites (k <= 3) carry a product grid of N cells per site; the
operator is the column-stochastic matrix of cell-to-cell transition
masses.  Exact construction is available for uncoupled piecewise linear
maps on aligned grids; everything else goes through the Monte Carlo
builder, which embeds the modeled window in a small torus and resamples
the unmodeled sites uniformly at every step (heat-bath closure).

Twisting multiplies the density by the unit phase e^{itf} evaluated at
cell centers before transfer; the leading eigenvalue curve lambda(t) then
encodes the law of the Birkhoff sums: lambda(0)=1, lambda'(0)=0 for
centered f, and sigma^2 = -(log lambda)''(0).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ensemble import EnsembleRun
from .lattice import DiffusiveCoupling, LatticeConfig
from .observable import Observable
from .sitemap import AlignmentError, LinearBranch

__all__ = [
    "UlamOperator",
    "TwistedOperator",
    "EigenCurve",
    "ConvergenceError",
    "BranchTrackingError",
    "build_ulam",
    "stationary_density",
    "spectral_gap",
    "twist",
    "lambda_curve",
    "variance_from_operator",
    "spectral_radius_map",
    "char_fn_check",
]

DENSE_LIMIT = 4096


class ConvergenceError(RuntimeError):
    """An eigeniteration failed to reach its tolerance."""


class BranchTrackingError(RuntimeError):
    """Consecutive eigenvectors lost overlap; the t grid is too coarse."""


@dataclass
class UlamOperator:
    k: int
    N: int
    matrix: sp.csc_matrix
    method: str  # "exact" | "monte_carlo"
    samples_per_cell: int = 0

    @property
    def size(self) -> int:
        return self.N**self.k

    def cell_centers(self) -> np.ndarray:
        """(size, k) array of cell center coordinates, C-ordered."""
        centers_1d = (np.arange(self.N) + 0.5) / self.N
        grids = np.meshgrid(*([centers_1d] * self.k), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def column_sum_defect(self) -> float:
        return float(np.max(np.abs(np.asarray(self.matrix.sum(axis=0)).ravel() - 1.0)))


@dataclass
class TwistedOperator:
    base: UlamOperator
    t: float
    phase: np.ndarray

    @property
    def matrix(self) -> sp.csc_matrix:
        # P_t mu = P(e^{itf} mu): scale column j by phase[j]
        return sp.csc_matrix(self.base.matrix.multiply(self.phase[None, :]))


@dataclass
class EigenCurve:
    t: np.ndarray
    lam: np.ndarray  # complex leading eigenvalue per t
    overlap: np.ndarray  # eigenvector overlap with the previous t
    lambda_prime0: complex = 0.0
    lambda_second0: complex = 0.0
    sigma2: float = 0.0


def _exact_single_site(cfg: LatticeConfig, N: int) -> np.ndarray:
    """Exact Ulam matrix of the uncoupled single-site map on a uniform
    aligned grid, built from the branch geometry."""
    m = cfg.map
    if not m.is_piecewise_linear():
        raise AlignmentError("exact mode needs a piecewise linear map")
    if N == 1:
        return np.ones((1, 1))  # one cell: total mass
    grid = np.linspace(0.0, 1.0, N + 1)
    P = np.zeros((N, N))
    for z in m.singularities[1:-1]:
        if abs(z * N - round(z * N)) > 1e-9:
            raise AlignmentError(f"grid size {N} not aligned with singularity {z}")
    for j in range(N):
        x0, x1 = grid[j], grid[j + 1]
        br = m.branches[m.branch_index(0.5 * (x0 + x1))]
        assert isinstance(br, LinearBranch)
        lo, hi = sorted((br(x0), br(x1)))
        i0f, i1f = lo * N, hi * N
        i0, i1 = round(i0f), round(i1f)
        if abs(i0f - i0) > 1e-9 or abs(i1f - i1) > 1e-9 or i1 <= i0:
            raise AlignmentError(f"cell {j}: branch image not grid aligned")
        P[i0:i1, j] = 1.0 / (i1 - i0)
    return P


def build_ulam(
    cfg: LatticeConfig,
    k: int,
    N: int,
    samples_per_cell: int = 400,
    seed: int = 0,
    method: str = "auto",
) -> UlamOperator:
    """Column-stochastic Ulam matrix on the k-site product grid.

    Exact mode requires eps=0, a piecewise linear map and an aligned grid;
    the k-site operator is then the Kronecker power of the single-site
    matrix.  Monte Carlo mode supports coupled dynamics (d=1): for each
    source cell, sample points land in the cell, the window is embedded in
    a torus of size 2r+k with the other sites drawn uniformly, and one step
    of the dynamics is binned into destination cells.  Columns use
    counter-based per-cell RNG streams, so the build is deterministic and
    parallelizable.
    """
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    if method == "auto":
        method = "exact" if (cfg.eps == 0.0 and cfg.map.is_piecewise_linear()) else "monte_carlo"
    if method == "exact":
        if cfg.eps != 0.0:
            raise AlignmentError("exact mode requires eps=0")
        P1 = _exact_single_site(cfg, N)
        P = P1
        for _ in range(k - 1):
            P = np.kron(P, P1)
        return UlamOperator(k, N, sp.csc_matrix(P), "exact")
    if method != "monte_carlo":
        raise ValueError(f"unknown build method {method!r}")
    if samples_per_cell < 10:
        raise ValueError("samples_per_cell must be >= 10")
    if cfg.d != 1:
        raise ValueError("monte_carlo builder supports d=1 windows only")
    r = cfg.coupling.range_r
    L_emb = max(2 * r + k, 2 * r + 1)
    emb = LatticeConfig(
        d=1, L=L_emb, map=cfg.map, coupling=cfg.coupling,
        eps=cfg.eps, eps_max=cfg.eps_max,
    )
    n_cells = N**k
    spc = samples_per_cell
    data_chunks = []
    row_chunks = []
    col_chunks = []
    chunk = max(1, (1 << 22) // (spc * L_emb))  # ~32MB of state per chunk
    from .lattice import apply_coupling, apply_T0

    for c0 in range(0, n_cells, chunk):
        cells = np.arange(c0, min(c0 + chunk, n_cells))
        states = np.empty((len(cells), spc, L_emb))
        for ci, cidx in enumerate(cells):
            key = np.array([np.uint64(seed), np.uint64(cidx)], dtype=np.uint64)
            rng = np.random.Generator(np.random.Philox(key=key))
            u = rng.random((spc, L_emb))
            multi = np.unravel_index(cidx, (N,) * k)
            for m_site in range(k):
                u[:, m_site] = (multi[m_site] + u[:, m_site]) / N
            states[ci] = u
        flat = states.reshape(-1, L_emb)
        stepped = _vector_step(emb, flat)
        dest = np.minimum((stepped[:, :k] * N).astype(np.int64), N - 1)
        dest_flat = np.ravel_multi_index(
            tuple(dest[:, m] for m in range(k)), (N,) * k
        ).reshape(len(cells), spc)
        for ci, cidx in enumerate(cells):
            counts = np.bincount(dest_flat[ci], minlength=n_cells)
            nz = np.nonzero(counts)[0]
            row_chunks.append(nz)
            col_chunks.append(np.full(len(nz), cidx, dtype=np.int64))
            data_chunks.append(counts[nz] / spc)
    mat = sp.csc_matrix(
        (np.concatenate(data_chunks), (np.concatenate(row_chunks), np.concatenate(col_chunks))),
        shape=(n_cells, n_cells),
    )
    return UlamOperator(k, N, mat, "monte_carlo", spc)


def _vector_step(cfg: LatticeConfig, states: np.ndarray) -> np.ndarray:
    """One lattice step applied to a batch of d=1 states, shape (B, L)."""
    from .sitemap import eval_map

    y = eval_map(cfg.map, states)
    acc = np.roll(y, 1, axis=1) + np.roll(y, -1, axis=1) - 2.0 * y
    if not isinstance(cfg.coupling, DiffusiveCoupling):
        raise ValueError("batched stepping supports diffusive coupling only")
    return y + (cfg.eps / 2.0) * acc


def stationary_density(
    op: UlamOperator, tol: float = 1e-12, max_iter: int = 20_000
) -> np.ndarray:
    """Nonnegative mass-1 fixed vector of the untwisted operator, by power
    iteration: the Ulam approximation of the k-site marginal of the
    invariant measure."""
    A = op.matrix
    v = np.full(op.size, 1.0 / op.size)
    for _ in range(max_iter):
        w = A @ v
        w = np.maximum(w, 0.0)
        w /= w.sum()
        if np.max(np.abs(w - v)) < tol:
            return w
        v = w
    raise ConvergenceError(f"stationary density: no convergence in {max_iter} iterations")


def spectral_gap(op: UlamOperator, n_eigs: int = 6, tol: float = 0) -> tuple[float, float]:
    """Modulus of the second eigenvalue and the gap 1 - |lambda_2|."""
    A = op.matrix
    if op.size <= DENSE_LIMIT:
        ev = scipy.linalg.eigvals(A.toarray())
    else:
        ev = spla.eigs(
            A, k=min(n_eigs, op.size - 2), which="LM", return_eigenvectors=False, tol=tol
        )
    ev = ev[np.argsort(-np.abs(ev))]
    lam2 = float(np.abs(ev[1]))
    return lam2, 1.0 - lam2


def _observable_on_cells(op: UlamOperator, f: Observable) -> np.ndarray:
    """f - offset at the cell centers of the modeled window."""
    for p in f.support:
        if not (0 <= p[0] < op.k):
            raise ValueError(
                f"observable {f.name} reads site {p}, outside the {op.k} modeled sites"
            )
    centers = op.cell_centers()
    if f.kind == "coordinate":
        vals = centers[:, f.support[0][0]]
    elif f.kind == "cos_coordinate":
        vals = np.cos(2.0 * np.pi * centers[:, f.support[0][0]])
    elif f.kind == "product":
        vals = centers[:, f.support[0][0]] * centers[:, f.support[1][0]]
    elif f.kind == "constant":
        vals = np.zeros(op.size)
    else:
        # generic: evaluate on an embedded state per cell
        vals = np.empty(op.size)
        state = np.full(max(op.k, 3), 0.5)
        for i, c in enumerate(centers):
            state[: op.k] = c
            vals[i] = f.raw(state)
    return vals - f.offset


def twist(op: UlamOperator, f: Observable, t: float) -> TwistedOperator:
    """Right multiplication by the diagonal of e^{itf} at cell centers;
    t=0 returns the base matrix unchanged."""
    if t == 0.0:
        return TwistedOperator(op, 0.0, np.ones(op.size))
    vals = _observable_on_cells(op, f)
    return TwistedOperator(op, t, np.exp(1j * t * vals))


def _power_leading(A, v0=None, tol: float = 1e-13, max_iter: int = 50_000):
    """Leading eigenpair of a (possibly complex) matrix by power iteration
    with a Rayleigh-quotient eigenvalue estimate."""
    n = A.shape[0]
    rng = np.random.default_rng(12345)
    v = v0.astype(complex) if v0 is not None else rng.random(n) + 0.0j
    v /= np.linalg.norm(v)
    lam = 0.0 + 0.0j
    for _ in range(max_iter):
        w = A @ v
        lam = np.vdot(v, w)
        res = np.linalg.norm(w - lam * v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise ConvergenceError("operator annihilated the start vector")
        if res <= tol * max(nw, 1.0):
            return lam, w / nw
        v = w / nw
    raise ConvergenceError("power iteration did not converge")


def lambda_curve(
    op: UlamOperator,
    f: Observable,
    t_grid,
    tol: float = 1e-12,
    min_overlap: float = 0.9,
) -> EigenCurve:
    """Leading eigenvalue of the twisted operator along a t grid containing
    0, tracked by eigenvector overlap with warm starts.

    Also reports lambda'(0), lambda''(0) by Richardson-extrapolated central
    differences on the grid spacing, and sigma^2 = -(log lambda)''(0),
    which is insensitive to a residual centering offset in f.
    """
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    i0_candidates = np.nonzero(np.isclose(t_grid, 0.0, atol=1e-15))[0]
    if len(i0_candidates) == 0:
        raise ValueError("t_grid must contain 0")
    i0 = int(i0_candidates[0])
    lam = np.empty(len(t_grid), dtype=complex)
    overlap = np.ones(len(t_grid))
    lam0, v0 = _power_leading(op.matrix.astype(float), tol=tol)
    lam[i0] = lam0
    for direction in (1, -1):
        v_prev = v0
        idx = i0 + direction
        while 0 <= idx < len(t_grid):
            A = twist(op, f, float(t_grid[idx])).matrix
            lam_i, v_i = _power_leading(A, v0=v_prev, tol=tol)
            ov = abs(np.vdot(v_prev, v_i))
            if ov < min_overlap:
                raise BranchTrackingError(
                    f"eigenvector overlap {ov:.3f} < {min_overlap} at t={t_grid[idx]}; "
                    "use a finer t grid"
                )
            lam[idx] = lam_i
            overlap[idx] = ov
            v_prev = v_i
            idx += direction
    curve = EigenCurve(t_grid, lam, overlap)
    _fill_derivatives(curve, i0)
    return curve


def _fill_derivatives(curve: EigenCurve, i0: int) -> None:
    t, lam = curve.t, curve.lam
    if i0 < 2 or i0 > len(t) - 3:
        return
    h = t[i0 + 1] - t[i0]
    if not (
        np.isclose(t[i0 + 2] - t[i0], 2 * h)
        and np.isclose(t[i0] - t[i0 - 1], h)
        and np.isclose(t[i0] - t[i0 - 2], 2 * h)
    ):
        return
    d1_h = (lam[i0 + 1] - lam[i0 - 1]) / (2 * h)
    d1_2h = (lam[i0 + 2] - lam[i0 - 2]) / (4 * h)
    curve.lambda_prime0 = (4.0 * d1_h - d1_2h) / 3.0
    d2_h = (lam[i0 + 1] - 2 * lam[i0] + lam[i0 - 1]) / h**2
    d2_2h = (lam[i0 + 2] - 2 * lam[i0] + lam[i0 - 2]) / (2 * h) ** 2
    curve.lambda_second0 = (4.0 * d2_h - d2_2h) / 3.0
    loglam = np.log(lam)
    g2_h = (loglam[i0 + 1] - 2 * loglam[i0] + loglam[i0 - 1]) / h**2
    g2_2h = (loglam[i0 + 2] - 2 * loglam[i0] + loglam[i0 - 2]) / (2 * h) ** 2
    curve.sigma2 = float(-np.real((4.0 * g2_h - g2_2h) / 3.0))


def variance_from_operator(
    op: UlamOperator, f: Observable, h: float = 1.0 / 64.0, tol: float = 1e-12
) -> EigenCurve:
    """Five-point eigenvalue curve around t=0 giving sigma^2 = -lambda''(0)."""
    grid = np.array([-2 * h, -h, 0.0, h, 2 * h])
    return lambda_curve(op, f, grid, tol=tol)


def spectral_radius_map(
    op: UlamOperator,
    f: Observable,
    t_grid,
    n_power: int = 3000,
    n_starts: int = 3,
    seed: int = 0,
) -> np.ndarray:
    """rho(P_t) estimated from ||P_t^m v||^(1/m) growth, max over random
    starts, for each t in the grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    out = np.empty(len(t_grid))
    rng = np.random.default_rng(seed)
    starts = [rng.standard_normal(op.size) + 1j * rng.standard_normal(op.size) for _ in range(n_starts)]
    for i, t in enumerate(t_grid):
        A = twist(op, f, float(t)).matrix
        best = 0.0
        for v0 in starts:
            v = v0 / np.linalg.norm(v0)
            log_growth = 0.0
            for _ in range(n_power):
                v = A @ v
                nv = np.linalg.norm(v)
                if nv == 0.0:
                    log_growth = -np.inf
                    break
                log_growth += np.log(nv)
                v = v / nv
            best = max(best, float(np.exp(log_growth / n_power)))
        out[i] = best
    return out


@dataclass
class CharFnReport:
    t: float
    n_list: np.ndarray
    empirical: np.ndarray
    predicted: np.ndarray
    mismatch: np.ndarray
    lam: complex
    weight: complex
    noise_floor: float
    # geometric-decay fit of log|empirical| on the range where the
    # prediction is still above the noise floor
    fit_slope: float
    fit_r2: float
    n_fit: int
    mismatch_below_floor_after: int


def _leading_pair_both_sides(A: sp.csc_matrix):
    """Leading eigenvalue with right and left eigenvectors."""
    n = A.shape[0]
    if n <= DENSE_LIMIT:
        ev, vl, vr = scipy.linalg.eig(A.toarray(), left=True, right=True)
        i = int(np.argmax(np.abs(ev)))
        return ev[i], vr[:, i], vl[:, i]
    lam, v = _power_leading(A)
    lam_l, w = _power_leading(A.conj().T)
    return lam, v, w


def char_fn_check(
    op: UlamOperator, f: Observable, t: float, n_list, run: EnsembleRun
) -> CharFnReport:
    """Empirical characteristic function of S_n f against the spectral
    prediction lambda(t)^n w(t); the mismatch must decay geometrically
    until it reaches the ensemble's Monte Carlo noise floor."""
    n_list = np.asarray(n_list, dtype=np.int64)
    idx = []
    for n in n_list:
        j = np.nonzero(run.checkpoints == n)[0]
        if len(j) == 0:
            raise ValueError(f"ensemble run has no partial sums at n={n}")
        idx.append(int(j[0]))
    emp = np.array([np.mean(np.exp(1j * t * run.partials[:, j])) for j in idx])

    A = twist(op, f, t).matrix
    lam, v, w = _leading_pair_both_sides(A)
    mu = stationary_density(op)
    # spectral projection of mu_eps, integrated against 1
    weight = np.sum(v) * (np.vdot(w, mu)) / (np.vdot(w, v))
    pred = lam ** n_list.astype(float) * weight
    mismatch = np.abs(emp - pred)
    floor = 3.0 / np.sqrt(run.n_traj)
    # index after which the mismatch stays at the Monte Carlo noise floor
    above = np.nonzero(mismatch > floor)[0]
    below_after = int(above[-1]) + 1 if len(above) else 0
    # the geometrically decaying observable is |E e^{itS_n}| ~ |lambda|^n |w|;
    # fit its log on the range where the prediction exceeds the floor
    pre_floor = np.abs(pred) > floor
    n_fit = int(np.sum(pre_floor))
    slope, r2 = np.nan, np.nan
    if n_fit >= 3:
        xs = n_list[pre_floor].astype(float)
        ys = np.log(np.abs(emp[pre_floor]))
        coef = np.polyfit(xs, ys, 1)
        slope = float(coef[0])
        resid = ys - np.polyval(coef, xs)
        ss_tot = float(np.sum((ys - ys.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return CharFnReport(
        t=t, n_list=n_list, empirical=emp, predicted=pred, mismatch=mismatch,
        lam=complex(lam), weight=complex(weight), noise_floor=float(floor),
        fit_slope=slope, fit_r2=r2, n_fit=n_fit,
        mismatch_below_floor_after=below_after,
    )
