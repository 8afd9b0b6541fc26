"""Batch front end: JSON experiment configs in, reports and CSV data out.

Exit codes: 0 success, 2 config validation failure, 3 numerical
non-convergence.  Every run writes a manifest with the config hash, the
seeds, package version, wall time and a content hash of each output, so
re-runs can be compared byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .bvdiag import (
    absolute_value,
    lipschitz_multiply,
    random_density,
    total_mass_norm,
    variation,
)
from .ensemble import clt_test, degeneracy_scan, green_kubo, llt_test, run_ensemble
from .lattice import LatticeConfig, config_from_json, verify_coupling_bounds
from .observable import center, coboundary, coordinate, observable_from_spec
from .spectral import (
    BranchTrackingError,
    ConvergenceError,
    build_ulam,
    lambda_curve,
    spectral_gap,
    spectral_radius_map,
    stationary_density,
    variance_from_operator,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

KINDS = {
    "simulate": {"n", "n_burn"},
    "variance": {"K", "n_avg", "n_burn"},
    "clt": {"n", "n_traj", "n_burn", "K", "n_avg"},
    "llt": {"n", "n_traj", "n_burn", "K", "n_avg", "intervals"},
    "degeneracy": {"n_list", "n_traj", "n_burn", "K", "n_avg"},
    "spectrum": {"k", "N", "samples_per_cell", "method"},
    "lambda-curve": {"k", "N", "samples_per_cell", "method", "t_max", "t_step"},
    "radius-map": {"k", "N", "samples_per_cell", "method", "t_values", "n_power"},
    "check-coupling": {"n_samples"},
    "bv-suite": {"n_instances", "n_cells"},
}
TOP_KEYS = {"kind", "lattice", "observable", "params", "master_seed"}


class ConfigError(ValueError):
    pass


def _validate_config(obj: dict) -> None:
    unknown = set(obj) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kind = obj.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; choose from {sorted(KINDS)}")
    params = obj.get("params", {})
    bad = set(params) - KINDS[kind]
    if bad:
        raise ConfigError(f"unknown params for kind {kind!r}: {sorted(bad)}")


def _resolve_observable(obj: dict, cfg: LatticeConfig, seed: int):
    spec = obj.get("observable", {"kind": "coordinate", "site": [0]})
    spec = dict(spec)
    do_center = spec.pop("center", False)
    if spec.get("kind") == "coboundary":
        f = coboundary(cfg, coordinate(spec.get("site", [0])))
    else:
        f = observable_from_spec(spec)
    if do_center:
        f = center(f, cfg, seed=seed)
    return f


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _run_experiment(obj: dict, out: Path) -> dict:
    """Execute one validated config; returns the report dict and writes
    output files into `out`."""
    kind = obj["kind"]
    seed = int(obj.get("master_seed", 0))
    params = obj.get("params", {})
    report: dict = {"kind": kind, "master_seed": seed}

    if kind == "bv-suite":
        rng = np.random.default_rng(seed)
        n_inst = int(params.get("n_instances", 10_000))
        n_cells = int(params.get("n_cells", 64))
        violations = 0
        for i in range(n_inst):
            d = random_density(rng, n_cells, complex_valued=(i % 4 == 0))
            if variation(absolute_value(d)) > variation(d) + 1e-10:
                violations += 1
            if total_mass_norm(d) > 0.5 * variation(d) + 1e-10:
                violations += 1
        report.update(n_instances=n_inst, violations=violations, ok=violations == 0)
        (out / "bv_report.json").write_text(json.dumps(report, indent=2))
        return report

    cfg = config_from_json(obj.get("lattice", {}))

    if kind == "check-coupling":
        rep = verify_coupling_bounds(cfg, int(params.get("n_samples", 20)), seed)
        report.update(
            sup_A=rep.sup_A, sup_DA=rep.sup_DA, sup_D2A=rep.sup_D2A,
            bound=rep.bound, locality_ok=rep.locality_ok, bounds_ok=rep.bounds_ok,
            ok=rep.locality_ok and rep.bounds_ok,
        )
        (out / "coupling_report.json").write_text(json.dumps(report, indent=2))
        return report

    f = _resolve_observable(obj, cfg, seed)
    report["observable"] = f.name
    report["offset"] = f.offset

    if kind == "simulate":
        from ._fastpath import observable_series

        n = int(params.get("n", 10_000))
        series = observable_series(cfg, f, int(params.get("n_burn", 1000)), n, seed)
        _write_csv(out / "series.csv", "step,f", enumerate(series))
        report.update(n=n, mean=float(series.mean()), var=float(series.var()))
    elif kind == "variance":
        est = green_kubo(
            cfg, f, int(params.get("K", 50)), int(params.get("n_avg", 1_000_000)),
            int(params.get("n_burn", 1000)), seed,
        )
        _write_csv(
            out / "autocov.csv", "lag,C,stderr",
            zip(range(est.K + 1), est.autocov, est.stderr),
        )
        report.update(
            sigma2=est.sigma2, sigma2_stderr=est.sigma2_stderr,
            decay_ratio=est.decay_ratio, truncation_warning=est.truncation_warning,
        )
    elif kind in ("clt", "llt"):
        n = int(params.get("n", 4096))
        n_traj = int(params.get("n_traj", 10_000))
        run = run_ensemble(cfg, f, n_traj, n, int(params.get("n_burn", 1000)), seed)
        _write_csv(out / "samples.csv", "trajectory,S_n_f", enumerate(run.samples))
        est = green_kubo(
            cfg, f, int(params.get("K", 50)), int(params.get("n_avg", 1_000_000)),
            int(params.get("n_burn", 1000)), seed + 1,
        )
        report["sigma2"] = est.sigma2
        if kind == "clt":
            rep = clt_test(run, est.sigma2)
            report.update(
                ks_distance=rep.ks_distance, skewness=rep.skewness,
                kurtosis_excess=rep.kurtosis_excess, n=n, n_traj=n_traj,
            )
        else:
            intervals = params.get("intervals", [[-0.5, 0.5], [0.3, 0.8]])
            rep = llt_test(run, float(np.sqrt(est.sigma2)), intervals)
            report.update(
                intervals=rep.intervals, rho=rep.rho, rho_ci=rep.rho_ci,
                interval_lengths=[b - a for a, b in rep.intervals],
                counts=rep.counts, expected_counts=rep.expected_counts,
                low_count_warning=rep.low_count_warning, n=n, n_traj=n_traj,
            )
    elif kind == "degeneracy":
        n_list = params.get("n_list", [64, 128, 256, 512, 1024])
        rep = degeneracy_scan(
            cfg, f, n_list, int(params.get("n_traj", 2000)),
            int(params.get("n_burn", 1000)), seed,
        )
        _write_csv(out / "degeneracy.csv", "n,var_over_n", zip(rep.n_list, rep.var_over_n))
        report.update(slope=rep.slope, degenerate=rep.degenerate)
    elif kind in ("spectrum", "lambda-curve", "radius-map"):
        import scipy.io

        op = build_ulam(
            cfg, int(params.get("k", 1)), int(params.get("N", 81)),
            int(params.get("samples_per_cell", 400)), seed,
            params.get("method", "auto"),
        )
        if kind == "spectrum":
            scipy.io.mmwrite(str(out / "operator.mtx"), op.matrix)
            dens = stationary_density(op)
            lam2, gap = spectral_gap(op)
            _write_csv(out / "stationary.csv", "cell,mass", enumerate(dens))
            report.update(
                k=op.k, N=op.N, method=op.method, lambda2=lam2, gap=gap,
                column_sum_defect=op.column_sum_defect(),
            )
        elif kind == "lambda-curve":
            t_max = float(params.get("t_max", 1.0))
            t_step = float(params.get("t_step", 1.0 / 64.0))
            m = int(round(t_max / t_step))
            grid = np.arange(-m, m + 1) * t_step
            curve = lambda_curve(op, f, grid)
            radius = spectral_radius_map(op, f, curve.t, seed=seed)
            _write_csv(
                out / "lambda_curve.csv", "t,re_lambda,im_lambda,abs_lambda,radius_estimate",
                zip(curve.t, curve.lam.real, curve.lam.imag, np.abs(curve.lam), radius),
            )
            report.update(
                sigma2=curve.sigma2,
                lambda_prime0=[curve.lambda_prime0.real, curve.lambda_prime0.imag],
                lambda_second0=[curve.lambda_second0.real, curve.lambda_second0.imag],
            )
        else:
            t_values = np.asarray(params.get("t_values", [0.5, 1.0, 2.0]), dtype=float)
            radius = spectral_radius_map(
                op, f, t_values, int(params.get("n_power", 300)), seed=seed
            )
            _write_csv(out / "radius_map.csv", "t,radius_estimate", zip(t_values, radius))
            report.update(t_values=t_values.tolist(), radius=radius.tolist(),
                          radius_min=float(radius.min()))
    else:  # pragma: no cover - guarded by _validate_config
        raise ConfigError(f"unhandled kind {kind!r}")
    return report


@click.group()
def main() -> None:
    """Coupled map lattice laboratory."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--workers", type=int, default=None, help="cap worker threads")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
def run(config_path: str, workers: int | None, out_dir: str | None) -> None:
    """Run the experiment described by CONFIG_PATH."""
    t0 = time.time()
    raw = Path(config_path).read_bytes()
    out = Path(out_dir or Path(config_path).with_suffix("")).resolve()
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "version": __version__,
        "status": "running",
        "outputs": {},
    }
    if workers is None:
        workers = int(os.environ.get("CML_LAB_WORKERS", "0")) or None
    if workers is not None:
        import numba

        numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))

    code = EXIT_OK
    try:
        obj = json.loads(raw)
        _validate_config(obj)
        report = _run_experiment(obj, out)
        (out / "report.json").write_text(json.dumps(report, indent=2))
        manifest["status"] = "ok"
        manifest["master_seed"] = int(obj.get("master_seed", 0))
    except (ConfigError, ValueError, KeyError, json.JSONDecodeError) as exc:
        manifest["status"] = "config-error"
        manifest["error"] = str(exc)
        click.echo(f"config error: {exc}", err=True)
        code = EXIT_CONFIG
    except (ConvergenceError, BranchTrackingError) as exc:
        manifest["status"] = "numerical-error"
        manifest["error"] = str(exc)
        click.echo(f"numerical error: {exc}", err=True)
        code = EXIT_NUMERICAL
    manifest["wall_time_s"] = time.time() - t0
    for p in sorted(out.iterdir()):
        if p.name != "run_manifest.json" and p.is_file():
            manifest["outputs"][p.name] = _sha256(p)
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2))
    sys.exit(code)


@main.command()
@click.argument("output_dir", type=click.Path(exists=True, file_okay=False))
def summary(output_dir: str) -> None:
    """Print the key numbers of a finished run."""
    out = Path(output_dir)
    mpath = out / "run_manifest.json"
    if not mpath.exists():
        click.echo("no run manifest in directory", err=True)
        sys.exit(EXIT_CONFIG)
    manifest = json.loads(mpath.read_text())
    click.echo(f"status: {manifest['status']}  (version {manifest.get('version')})")
    rpath = out / "report.json"
    if not rpath.exists():
        if "error" in manifest:
            click.echo(f"error: {manifest['error']}")
        sys.exit(EXIT_OK)
    rep = json.loads(rpath.read_text())
    kind = rep.get("kind")
    click.echo(f"experiment: {kind}")
    if "sigma2" in rep:
        click.echo(f"  sigma^2 = {rep['sigma2']:.6g}")
    if "ks_distance" in rep:
        click.echo(f"  KS distance = {rep['ks_distance']:.4g}  (n_traj={rep['n_traj']})")
    if "rho" in rep:
        for (a, b), rho, length in zip(rep["intervals"], rep["rho"], rep["interval_lengths"]):
            click.echo(f"  LLT rho[{a},{b}] = {rho:.4g}  vs |I| = {length:.4g}")
    if "gap" in rep:
        click.echo(f"  |lambda_2| = {rep['lambda2']:.6g}, spectral gap = {rep['gap']:.6g}")
    if "radius_min" in rep:
        click.echo(f"  twisted radius minimum = {rep['radius_min']:.6g}")
    if "slope" in rep:
        click.echo(f"  Var(S_n f)/n log-log slope = {rep['slope']:.3g}"
                   f" ({'degenerate' if rep.get('degenerate') else 'non-degenerate'})")
    if "violations" in rep:
        click.echo(f"  BV suite: {rep['violations']} violations over {rep['n_instances']}")
    if "ok" in rep:
        click.echo(f"  pass: {rep['ok']}")


if __name__ == "__main__":
    main()
