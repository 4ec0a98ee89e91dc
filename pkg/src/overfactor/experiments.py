"""Experiment harness: overfit demo, rank x noise grids, scaling studies, RIP probe.

Every runnable writes a self-contained run directory: a config snapshot in the
same key/value format the CLI reads, delimited per-trial output, a JSON report
validated against the packaged schema, and rendered PNG figures.  All
randomness is derived from a base seed through documented SHA-256 hashing, so
any CSV row can be regenerated bit-exactly from the seeds it carries.
"""

from __future__ import annotations

import dataclasses
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import plots
from .core import RngSpec, derive_seed, gaussian_noise, generate_ground_truth
from .diagnostics import make_phase_hook, make_recovery_hook
from .operators import (
    SensingOperator,
    apply,
    build_completion_operator,
    build_gaussian_operator,
    estimate_rip,
    measurement_scale,
)
from .recovery import DivergenceError, GdConfig, run_gd, trajectory_to_csv
from .validation import (
    make_val_hook,
    select_iterate,
    selection_bound_rhs,
    split_measurements,
    trajectory_concentration,
)
from .report import write_report

__all__ = [
    "ExperimentGrid",
    "TrialResult",
    "GridCellResult",
    "OverfitDemoConfig",
    "ScalingConfig",
    "run_cell",
    "run_grid",
    "run_overfit_demo",
    "run_scaling_study",
    "run_rip_probe",
    "worker_count",
]

SENSING = "sensing"
COMPLETION = "completion"

# Defaults matching the reference experimental setup.
SENSING_GD = GdConfig(r=50, eta=0.5, alpha=1e-6, T=500, record_every=1)
COMPLETION_GD = GdConfig(r=50, eta=0.5, alpha=1e-3, T=500, record_every=1)


def worker_count(explicit: Optional[int] = None) -> int:
    if explicit is not None:
        return max(1, explicit)
    env = os.environ.get("OVERFACTOR_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentGrid:
    problem: str = SENSING
    n: int = 50
    m: int = 1000
    m_val: int = 100
    rank_values: tuple = tuple(range(1, 21))
    sigma2_values: tuple = tuple(np.round(np.linspace(0.1, 1.0, 10), 10))
    trials: int = 10
    gd: GdConfig = SENSING_GD
    base_seed: int = 0

    def __post_init__(self):
        if self.problem not in (SENSING, COMPLETION):
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class TrialResult:
    problem: str
    r_star: int
    sigma2: float
    trial: int
    seed: int
    err_tilde: float = math.nan
    err_hat: float = math.nan
    gap: float = math.nan
    t_tilde: int = -1
    t_hat: int = -1
    delta_val: float = math.nan
    # Theory-side values, reported (never gated on): the deviation parameter
    # kappa^2 n r* / m_train and the selection-rule sample-size condition quantity
    # (n r*)^2 kappa^2 m_val / m_train^2, both computable only with ground truth.
    delta_val_theory: float = math.nan
    condition_lhs: float = math.nan
    sigma_eff_sq: float = math.nan
    bound_rhs: float = math.nan
    bound_ok: Optional[bool] = None
    diverged: bool = False


@dataclass(frozen=True)
class GridCellResult:
    r_star: int
    sigma2: float
    mean_err_tilde: float
    std_err_tilde: float
    mean_err_hat: float
    std_err_hat: float
    mean_gap: float
    mc_tolerance: float
    trial_seeds: tuple
    flagged_trials: tuple


def _build_operator(problem: str, n: int, m: int, rng: RngSpec) -> SensingOperator:
    if problem == SENSING:
        return build_gaussian_operator(n, m, rng)
    return build_completion_operator(n, m, rng)


def trial_seed(base_seed: int, problem: str, r_star: int, sigma2: float, trial: int) -> int:
    """Documented replay hash: SHA-256 over (base seed, problem, r*, sigma^2, trial).

    Arguments are coerced to builtin int/float so numpy scalars hash the same.
    """
    return derive_seed(int(base_seed), str(problem), int(r_star), float(sigma2), int(trial))


def run_trial(
    problem: str,
    n: int,
    m: int,
    m_val: int,
    r_star: int,
    sigma2: float,
    gd: GdConfig,
    seed: int,
    trial: int = 0,
) -> TrialResult:
    """One full pipeline: plant truth, measure, split, descend, select, check."""
    base = dict(problem=problem, r_star=r_star, sigma2=float(sigma2), trial=trial, seed=seed)
    try:
        gt = generate_ground_truth(n, r_star, RngSpec(seed, "ground-truth"))
        op = _build_operator(problem, n, m, RngSpec(seed, "operator"))
        sigma = math.sqrt(sigma2)
        y = apply(op, gt.x_nat) + gaussian_noise(m, sigma, RngSpec(seed, "noise"))
        op_tr, y_tr, op_va, y_va, _ = split_measurements(op, y, m_val, RngSpec(seed, "split"))
        config = replace(gd, init_rng=RngSpec(seed, "init"))
        traj = run_gd(
            op_tr,
            y_tr,
            config,
            hooks=[make_val_hook(op_va, y_va), make_recovery_hook(gt)],
        )
        sel = select_iterate(traj)
        err_hat = traj.record_at(sel.t_hat).recovery_error
        err_tilde = traj.record_at(sel.t_tilde).recovery_error
        deviations = trajectory_concentration(traj, op_va, sigma)
        delta = float(np.max(deviations))
        sigma_eff_sq = measurement_scale(op_va) * op_va.m * sigma2
        if delta < 1.0:
            rhs = selection_bound_rhs(delta, err_tilde, sigma_eff_sq)
            bound_ok = bool(err_hat <= rhs * (1 + 1e-12))
        else:
            rhs, bound_ok = math.nan, None
        m_train = m - m_val
        return TrialResult(
            err_tilde=err_tilde,
            err_hat=err_hat,
            gap=sel.gap,
            t_tilde=sel.t_tilde,
            t_hat=sel.t_hat,
            delta_val=delta,
            delta_val_theory=gt.kappa**2 * n * r_star / m_train,
            condition_lhs=(n * r_star) ** 2 * gt.kappa**2 * m_val / m_train**2,
            sigma_eff_sq=sigma_eff_sq,
            bound_rhs=rhs,
            bound_ok=bound_ok,
            **base,
        )
    except DivergenceError:
        return TrialResult(diverged=True, **base)


def run_cell(grid: ExperimentGrid, r_star: int, sigma2: float, trial: int) -> TrialResult:
    """One Monte-Carlo trial of one grid cell, with derived per-trial seeds."""
    if r_star not in grid.rank_values or sigma2 not in grid.sigma2_values:
        raise ValueError(f"({r_star}, {sigma2}) is not a cell of this grid")
    seed = trial_seed(grid.base_seed, grid.problem, r_star, sigma2, trial)
    return run_trial(
        grid.problem, grid.n, grid.m, grid.m_val, r_star, sigma2, grid.gd, seed, trial
    )


def _run_trial_kwargs(kwargs: dict) -> TrialResult:
    return run_trial(**kwargs)


def _map_trials(jobs: Sequence[dict], workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [run_trial(**kw) for kw in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_trial_kwargs, jobs, chunksize=1))


def _aggregate_cell(r_star, sigma2, trials: Sequence[TrialResult]) -> GridCellResult:
    ok = [t for t in trials if not t.diverged]
    flagged = tuple(t.trial for t in trials if t.diverged)
    if not ok:
        nan = math.nan
        return GridCellResult(r_star, sigma2, nan, nan, nan, nan, nan, nan,
                              tuple(t.seed for t in trials), flagged)
    tilde = np.array([t.err_tilde for t in ok])
    hat = np.array([t.err_hat for t in ok])
    gaps = np.array([t.gap for t in ok])
    # err_hat >= err_tilde holds per trial, so the mean inequality is exact;
    # the recorded tolerance is the standard error of the mean gap.
    mc_tol = float(gaps.std(ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else 0.0
    return GridCellResult(
        r_star=r_star,
        sigma2=sigma2,
        mean_err_tilde=float(tilde.mean()),
        std_err_tilde=float(tilde.std(ddof=1)) if len(ok) > 1 else 0.0,
        mean_err_hat=float(hat.mean()),
        std_err_hat=float(hat.std(ddof=1)) if len(ok) > 1 else 0.0,
        mean_gap=float(gaps.mean()),
        mc_tolerance=mc_tol,
        trial_seeds=tuple(t.seed for t in trials),
        flagged_trials=flagged,
    )


_TRIAL_CSV_FIELDS = [
    "problem", "r_star", "sigma2", "trial", "seed", "err_tilde", "err_hat",
    "gap", "t_tilde", "t_hat", "delta_val", "delta_val_theory", "condition_lhs",
    "sigma_eff_sq", "bound_rhs", "bound_ok", "diverged",
]


def _write_trial_csv(path, results: Sequence[TrialResult]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRIAL_CSV_FIELDS)
        for t in results:
            writer.writerow([getattr(t, f) for f in _TRIAL_CSV_FIELDS])


def _write_matrix_csv(path, matrix, rank_values, sigma2_values) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r_star\\sigma2"] + [format(s, ".10g") for s in sigma2_values])
        for i, r in enumerate(rank_values):
            writer.writerow([r] + [format(v, ".17g") for v in matrix[i]])


def _spearman(x, y) -> float:
    from scipy.stats import spearmanr

    rho = spearmanr(x, y).statistic
    return float(rho)


def _config_snapshot(path, entries: dict) -> None:
    with open(path, "w") as fh:
        for key, value in entries.items():
            if isinstance(value, (list, tuple)):
                value = ",".join(str(v) for v in value)
            fh.write(f"{key} = {value}\n")


def _loglog_slope(xs, ys):
    """Least-squares slope of log y on log x with a 95% half-width from the
    usual t-based standard error (documented: df = npoints - 2)."""
    from scipy.stats import t as student_t

    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    npts = len(lx)
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    dof = npts - 2
    if dof > 0:
        resid_var = float(np.sum((ly - fitted) ** 2) / dof)
        se = math.sqrt(resid_var / float(np.sum((lx - lx.mean()) ** 2)))
        half_width = float(student_t.ppf(0.975, dof) * se)
    else:
        half_width = math.inf
    return float(slope), half_width


def run_grid(
    grid: ExperimentGrid,
    out_dir,
    workers: Optional[int] = None,
    spearman_threshold: float = 0.8,
):
    """Full rank x noise grid with Monte-Carlo averaging.

    Writes per-trial CSV, aggregated heatmap matrices (CSV + grayscale PNG,
    whiter = lower error), and a JSON report carrying per-axis Spearman rank
    correlations of the mean selected error plus log-log slope summaries.
    """
    out_dir = _ensure_dir(out_dir)
    started = time.time()
    jobs = []
    for r_star in grid.rank_values:
        for sigma2 in grid.sigma2_values:
            for trial in range(grid.trials):
                seed = trial_seed(grid.base_seed, grid.problem, r_star, sigma2, trial)
                jobs.append(dict(
                    problem=grid.problem, n=grid.n, m=grid.m, m_val=grid.m_val,
                    r_star=r_star, sigma2=float(sigma2), gd=grid.gd, seed=seed,
                    trial=trial,
                ))
    results = _map_trials(jobs, worker_count(workers))
    results.sort(key=lambda t: (t.r_star, t.sigma2, t.trial))
    _write_trial_csv(os.path.join(out_dir, "trials.csv"), results)

    by_cell = {}
    for t in results:
        by_cell.setdefault((t.r_star, t.sigma2), []).append(t)
    cells = [
        _aggregate_cell(r, s, by_cell[(r, s)])
        for r in grid.rank_values
        for s in grid.sigma2_values
    ]
    nr, ns = len(grid.rank_values), len(grid.sigma2_values)
    tilde_map = np.array([c.mean_err_tilde for c in cells]).reshape(nr, ns)
    hat_map = np.array([c.mean_err_hat for c in cells]).reshape(nr, ns)
    _write_matrix_csv(os.path.join(out_dir, "heatmap_oracle.csv"),
                      tilde_map, grid.rank_values, grid.sigma2_values)
    _write_matrix_csv(os.path.join(out_dir, "heatmap_selected.csv"),
                      hat_map, grid.rank_values, grid.sigma2_values)
    plots.render_heatmap(
        tilde_map, grid.rank_values, grid.sigma2_values,
        os.path.join(out_dir, "heatmap_oracle.png"),
        title=f"{grid.problem}: oracle recovery error",
    )
    plots.render_heatmap(
        hat_map, grid.rank_values, grid.sigma2_values,
        os.path.join(out_dir, "heatmap_selected.png"),
        title=f"{grid.problem}: selected recovery error",
    )

    # Monotonicity of the mean selected error along each axis, rank sense.
    rho_vs_rank = [_spearman(grid.rank_values, hat_map[:, j]) for j in range(ns)] if nr > 1 else []
    rho_vs_sigma2 = [_spearman(grid.sigma2_values, hat_map[i, :]) for i in range(nr)] if ns > 1 else []
    assertions = []
    if rho_vs_rank:
        assertions.append(_assertion(
            "spearman-vs-rank",
            all(r >= spearman_threshold for r in rho_vs_rank),
            {"rhos": rho_vs_rank, "threshold": spearman_threshold},
        ))
    if rho_vs_sigma2:
        assertions.append(_assertion(
            "spearman-vs-sigma2",
            all(r >= spearman_threshold for r in rho_vs_sigma2),
            {"rhos": rho_vs_sigma2, "threshold": spearman_threshold},
        ))
    sane = all(c.mean_err_hat >= c.mean_err_tilde - c.mc_tolerance - 1e-15
               for c in cells if not math.isnan(c.mean_err_hat))
    assertions.append(_assertion("selected-at-least-oracle", sane, {}))

    scaling = {}
    if nr > 1:
        slopes = [_loglog_slope(grid.rank_values, hat_map[:, j])[0] for j in range(ns)]
        scaling["rank_slope_mean"] = float(np.mean(slopes))
    if ns > 1:
        slopes = [_loglog_slope(grid.sigma2_values, hat_map[i, :])[0] for i in range(nr)]
        scaling["sigma2_slope_mean"] = float(np.mean(slopes))

    config_entries = {
        "problem": grid.problem, "n": grid.n, "m": grid.m, "m_val": grid.m_val,
        "rank_values": list(grid.rank_values),
        "sigma2_values": [float(s) for s in grid.sigma2_values],
        "trials": grid.trials, "base_seed": grid.base_seed,
        "r": grid.gd.r, "eta": grid.gd.eta, "alpha": grid.gd.alpha,
        "T": grid.gd.T, "record_every": grid.gd.record_every,
    }
    _config_snapshot(os.path.join(out_dir, "config.txt"), config_entries)
    report = {
        "schema_version": 1,
        "kind": "grid",
        "created": _timestamp(),
        "elapsed_seconds": time.time() - started,
        "config": config_entries,
        "assertions": assertions,
        "results": {
            "cells": [dataclasses.asdict(c) for c in cells],
            "spearman_vs_rank": rho_vs_rank,
            "spearman_vs_sigma2": rho_vs_sigma2,
            "scaling": scaling,
            "flagged_cells": [
                {"r_star": c.r_star, "sigma2": c.sigma2, "trials": list(c.flagged_trials)}
                for c in cells if c.flagged_trials
            ],
            "files": {
                "trials_csv": "trials.csv",
                "heatmap_oracle_csv": "heatmap_oracle.csv",
                "heatmap_selected_csv": "heatmap_selected.csv",
            },
        },
    }
    write_report(report, os.path.join(out_dir, "report.json"))
    return report


@dataclass(frozen=True)
class OverfitDemoConfig:
    n: int = 50
    r_star: int = 5
    m: int = 1000
    m_val: int = 100
    sigma: float = 0.3
    problem: str = SENSING
    gd: GdConfig = SENSING_GD
    base_seed: int = 7
    with_phase: bool = True
    # Overfitting-signature thresholds (checked only when sigma > 0).
    rise_factor: float = 1.5
    selected_ratio: float = 1.5
    valley_factor: float = 1.5
    valley_distance: int = 10


def _valley_distance(errors: np.ndarray, i_tilde: int, i_hat: int, factor: float) -> int:
    """Distance (in recorded steps) from i_hat to the contiguous sublevel run
    around i_tilde where the error stays within factor * its minimum."""
    threshold = factor * errors[i_tilde]
    lo = i_tilde
    while lo > 0 and errors[lo - 1] <= threshold:
        lo -= 1
    hi = i_tilde
    while hi < len(errors) - 1 and errors[hi + 1] <= threshold:
        hi += 1
    if lo <= i_hat <= hi:
        return 0
    return lo - i_hat if i_hat < lo else i_hat - hi


def run_overfit_demo(config: OverfitDemoConfig, out_dir):
    """Single fully instrumented run with r = n: per-iterate train / validation /
    recovery curves, phase quantities, CSV + curve figure + JSON report.

    With sigma > 0, asserts the overfitting signature: interior recovery-error
    argmin, a final error at least rise_factor above the valley, a selected
    iterate close to the valley, and a selected error within selected_ratio of
    the oracle.  With sigma = 0 no overfitting is expected and the signature
    assertions are skipped.
    """
    out_dir = _ensure_dir(out_dir)
    started = time.time()
    seed = trial_seed(config.base_seed, config.problem, config.r_star,
                      config.sigma**2, 0)
    gt = generate_ground_truth(config.n, config.r_star, RngSpec(seed, "ground-truth"))
    op = _build_operator(config.problem, config.n, config.m, RngSpec(seed, "operator"))
    y = apply(op, gt.x_nat) + gaussian_noise(config.m, config.sigma, RngSpec(seed, "noise"))
    op_tr, y_tr, op_va, y_va, _ = split_measurements(
        op, y, config.m_val, RngSpec(seed, "split"))
    gd = replace(config.gd, init_rng=RngSpec(seed, "init"))
    hooks = [make_val_hook(op_va, y_va), make_recovery_hook(gt)]
    if config.with_phase:
        hooks.append(make_phase_hook(gt))
    traj = run_gd(op_tr, y_tr, gd, hooks=hooks)
    sel = select_iterate(traj)

    csv_path = os.path.join(out_dir, "trajectory.csv")
    trajectory_to_csv(traj, csv_path)
    plots.render_overfit_curves(traj, os.path.join(out_dir, "curves.png"),
                                t_hat=sel.t_hat, t_tilde=sel.t_tilde)

    ts = np.array([rec.t for rec in traj.records])
    errors = np.array([rec.recovery_error for rec in traj.records])
    i_tilde = int(np.argmin(errors))
    i_hat = int(np.where(ts == sel.t_hat)[0][0])
    assertions = []
    if config.sigma > 0:
        interior = 0 < i_tilde < len(ts) - 1
        rise = float(errors[-1] / errors[i_tilde])
        dist = _valley_distance(errors, i_tilde, i_hat, config.valley_factor)
        ratio = float(errors[i_hat] / errors[i_tilde])
        assertions += [
            _assertion("recovery-argmin-interior", interior,
                       {"t_tilde": sel.t_tilde, "T": gd.T}),
            _assertion("final-error-rises", rise >= config.rise_factor,
                       {"rise": rise, "required": config.rise_factor}),
            _assertion("selected-near-valley", dist <= config.valley_distance,
                       {"distance": dist, "allowed": config.valley_distance,
                        "valley_factor": config.valley_factor}),
            _assertion("selected-ratio", ratio <= config.selected_ratio,
                       {"ratio": ratio, "allowed": config.selected_ratio}),
        ]

    config_entries = {
        "problem": config.problem, "n": config.n, "r_star": config.r_star,
        "m": config.m, "m_val": config.m_val, "sigma": config.sigma,
        "base_seed": config.base_seed, "seed": seed,
        "r": gd.r, "eta": gd.eta, "alpha": gd.alpha, "T": gd.T,
        "record_every": gd.record_every, "with_phase": config.with_phase,
    }
    _config_snapshot(os.path.join(out_dir, "config.txt"), config_entries)
    report = {
        "schema_version": 1,
        "kind": "overfit-demo",
        "created": _timestamp(),
        "elapsed_seconds": time.time() - started,
        "config": config_entries,
        "assertions": assertions,
        "selection": {
            "t_hat": sel.t_hat,
            "t_tilde": sel.t_tilde,
            "gap": sel.gap,
            "val_curve": "trajectory.csv",
        },
        "results": {
            "err_tilde": float(errors[i_tilde]),
            "err_hat": float(errors[i_hat]),
            "err_final": float(errors[-1]),
            "kappa": gt.kappa,
            "files": {"trajectory_csv": "trajectory.csv", "curves_png": "curves.png"},
        },
    }
    write_report(report, os.path.join(out_dir, "report.json"))
    return report


SCALING_AXES = ("sigma2", "r_star", "m")

SCALING_DEFAULTS = {
    # axis: (values, fixed r*, fixed sigma2, expected slope, tolerance)
    "sigma2": ((0.1, 0.2, 0.4, 0.8), 5, None, 1.0, 0.3),
    "r_star": ((2, 4, 8, 16), None, 0.25, 1.0, 0.4),
    # r* = 2 keeps the smallest m well inside the recoverable regime, where
    # the inverse-m law is the dominant effect.
    "m": ((500, 1000, 2000, 4000), 2, 0.25, -1.0, 0.4),
}


@dataclass(frozen=True)
class ScalingConfig:
    axis: str = "sigma2"
    values: tuple = ()
    trials: int = 10
    n: int = 50
    m: int = 1000
    val_fraction: float = 0.1
    r_star: int = 5
    sigma2: float = 0.25
    gd: GdConfig = SENSING_GD
    base_seed: int = 0
    expected_slope: Optional[float] = None
    slope_tolerance: Optional[float] = None

    def __post_init__(self):
        if self.axis not in SCALING_AXES:
            raise ValueError(f"axis must be one of {SCALING_AXES}, got {self.axis!r}")

    @staticmethod
    def with_defaults(axis: str, **overrides) -> "ScalingConfig":
        values, r_star, sigma2, slope, tol = SCALING_DEFAULTS[axis]
        kwargs = dict(axis=axis, values=values, expected_slope=slope, slope_tolerance=tol)
        if r_star is not None:
            kwargs["r_star"] = r_star
        if sigma2 is not None:
            kwargs["sigma2"] = sigma2
        kwargs.update(overrides)
        return ScalingConfig(**kwargs)


def run_scaling_study(config: ScalingConfig, out_dir, workers: Optional[int] = None):
    """Sweep one axis, regress log mean selected error on the log swept value,
    and check the selection-gap bound with the per-run measured deviation.

    Requires at least 4 points and 10 trials per point.
    """
    if len(config.values) < 4:
        raise ValueError(f"insufficient points: need >= 4 along {config.axis}, "
                         f"got {len(config.values)}")
    if config.trials < 10:
        raise ValueError(f"insufficient trials: need >= 10 per point, got {config.trials}")
    out_dir = _ensure_dir(out_dir)
    started = time.time()

    jobs = []
    for value in config.values:
        r_star, sigma2, m = config.r_star, config.sigma2, config.m
        if config.axis == "sigma2":
            sigma2 = float(value)
        elif config.axis == "r_star":
            r_star = int(value)
        else:
            m = int(value)
        m_val = max(1, round(config.val_fraction * m))
        for trial in range(config.trials):
            seed = trial_seed(config.base_seed, f"scaling-{config.axis}", r_star,
                              sigma2, trial * 100003 + int(m))
            jobs.append(dict(problem=SENSING, n=config.n, m=m, m_val=m_val,
                             r_star=r_star, sigma2=sigma2, gd=config.gd,
                             seed=seed, trial=trial))
    results = _map_trials(jobs, worker_count(workers))
    _write_trial_csv(os.path.join(out_dir, "trials.csv"), results)

    per_point = len(config.values) * [None]
    npt = config.trials
    means = []
    for i, value in enumerate(config.values):
        chunk = [t for t in results[i * npt:(i + 1) * npt] if not t.diverged]
        per_point[i] = chunk
        means.append(float(np.mean([t.err_hat for t in chunk])))
    slope, half_width = _loglog_slope(config.values, means)

    bound_checked = [t for t in results if t.bound_ok is not None]
    bound_holds = all(t.bound_ok for t in bound_checked)
    assertions = [
        _assertion("selection-bound",
                   bound_holds and len(bound_checked) == len(results),
                   {"checked": len(bound_checked), "total": len(results),
                    "max_delta": float(np.nanmax([t.delta_val for t in results]))}),
    ]
    if config.expected_slope is not None:
        ok = abs(slope - config.expected_slope) <= config.slope_tolerance
        assertions.append(_assertion(
            f"slope-{config.axis}", ok,
            {"slope": slope, "expected": config.expected_slope,
             "tolerance": config.slope_tolerance, "half_width": half_width},
        ))

    plots.render_scaling(config.values, means, slope, config.axis,
                         os.path.join(out_dir, "scaling.png"))
    config_entries = {
        "axis": config.axis, "values": list(config.values), "trials": config.trials,
        "n": config.n, "m": config.m, "val_fraction": config.val_fraction,
        "r_star": config.r_star, "sigma2": config.sigma2,
        "base_seed": config.base_seed,
        "r": config.gd.r, "eta": config.gd.eta, "alpha": config.gd.alpha,
        "T": config.gd.T,
    }
    _config_snapshot(os.path.join(out_dir, "config.txt"), config_entries)
    report = {
        "schema_version": 1,
        "kind": "scaling",
        "created": _timestamp(),
        "elapsed_seconds": time.time() - started,
        "config": config_entries,
        "assertions": assertions,
        "results": {
            "values": [float(v) for v in config.values],
            "mean_selected_error": means,
            "slope": slope,
            "slope_half_width": half_width,
            "expected_slope": config.expected_slope,
            "files": {"trials_csv": "trials.csv", "scaling_png": "scaling.png"},
        },
    }
    write_report(report, os.path.join(out_dir, "report.json"))
    return report


def run_rip_probe(
    out_dir,
    problem: str = SENSING,
    n: int = 50,
    m: int = 1000,
    k: int = 2,
    trials: int = 500,
    base_seed: int = 0,
):
    """Monte-Carlo isometry probe of a freshly built operator."""
    out_dir = _ensure_dir(out_dir)
    started = time.time()
    seed = derive_seed(base_seed, "rip-probe", problem, n, m, k)
    op = _build_operator(problem, n, m, RngSpec(seed, "operator"))
    estimate = estimate_rip(op, k, trials, RngSpec(seed, "rip"))

    import csv

    with open(os.path.join(out_dir, "ratios.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "ratio"])
        for i, ratio in enumerate(estimate.ratios):
            writer.writerow([i, format(ratio, ".17g")])
    plots.render_ratio_histogram(estimate.ratios, os.path.join(out_dir, "ratios.png"))

    assertions = [
        _assertion("delta-informative", estimate.delta_hat < 1.0,
                   {"delta_hat": estimate.delta_hat}),
    ]
    config_entries = {"problem": problem, "n": n, "m": m, "k": k,
                      "trials": trials, "base_seed": base_seed, "seed": seed}
    _config_snapshot(os.path.join(out_dir, "config.txt"), config_entries)
    report = {
        "schema_version": 1,
        "kind": "rip-probe",
        "created": _timestamp(),
        "elapsed_seconds": time.time() - started,
        "config": config_entries,
        "assertions": assertions,
        "results": {
            "delta_hat": estimate.delta_hat,
            "ratio_mean": float(np.mean(estimate.ratios)),
            "ratio_median": float(np.median(estimate.ratios)),
            "files": {"ratios_csv": "ratios.csv", "ratios_png": "ratios.png"},
        },
    }
    write_report(report, os.path.join(out_dir, "report.json"))
    return report


def _assertion(name: str, passed: bool, detail: dict) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def _timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _ensure_dir(path) -> str:
    path = str(path)
    os.makedirs(path, exist_ok=True)
    return path
