"""Hold-out machinery: measurement splitting, validation loss, iterate selection.

The validation loss is the plain half squared residual on the held-out
measurements, 0.5 * ||A_val(U U^T) - y_val||^2, with no 1/m_val factor; only
its argmin matters and this convention is fixed throughout.  Selection picks
the earliest recorded iterate attaining the minimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import RngSpec, as_factor_array, as_sym_array
from .operators import SensingOperator, apply, measurement_scale, take
from .recovery import Trajectory

__all__ = [
    "SplitSpec",
    "SelectionResult",
    "split_measurements",
    "validation_loss",
    "make_val_hook",
    "select_iterate",
    "check_val_concentration",
    "trajectory_concentration",
    "selection_bound_rhs",
]


@dataclass(frozen=True)
class SplitSpec:
    m_train: int
    m_val: int
    rng: RngSpec
    train_indices: np.ndarray = field(repr=False, default=None)
    val_indices: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class SelectionResult:
    """Selected iteration t_hat (val-loss argmin) and, when ground truth was
    recorded, the oracle iteration t_tilde (recovery-error argmin) plus the
    nonnegative selection gap between their recovery errors."""

    t_hat: int
    val_curve: list
    t_tilde: Optional[int] = None
    gap: Optional[float] = None


def split_measurements(op: SensingOperator, y: np.ndarray, m_val: int, rng: RngSpec):
    """Uniformly random disjoint train/validation partition of the measurements.

    Returns (op_train, y_train, op_val, y_val, SplitSpec).
    """
    y = np.asarray(y, dtype=np.float64)
    m = op.m
    if y.shape != (m,):
        raise ValueError(f"dimension mismatch: operator m={m}, measurements {y.shape}")
    if not 1 <= m_val < m:
        raise ValueError(f"invalid split size: m_val={m_val} must satisfy 1 <= m_val < m={m}")
    perm = rng.generator().permutation(m)
    val_idx = np.sort(perm[:m_val])
    train_idx = np.sort(perm[m_val:])
    spec = SplitSpec(
        m_train=m - m_val,
        m_val=m_val,
        rng=rng,
        train_indices=train_idx,
        val_indices=val_idx,
    )
    return take(op, train_idx), y[train_idx], take(op, val_idx), y[val_idx], spec


def validation_loss(op_val: SensingOperator, y_val: np.ndarray, u) -> float:
    """0.5 * ||A_val(U U^T) - y_val||^2 (unnormalized by construction)."""
    ua = as_factor_array(u)
    if ua.shape[0] != op_val.n:
        raise ValueError(f"dimension mismatch: operator n={op_val.n}, factor n={ua.shape[0]}")
    y_val = np.asarray(y_val, dtype=np.float64)
    if y_val.shape != (op_val.m,):
        raise ValueError(f"dimension mismatch: expected {op_val.m} measurements, got {y_val.shape}")
    resid = apply(op_val, ua @ ua.T) - y_val
    return 0.5 * float(resid @ resid)


def make_val_hook(op_val: SensingOperator, y_val: np.ndarray):
    """Per-iterate hook recording the validation loss."""
    y_val = np.asarray(y_val, dtype=np.float64)

    def hook(t: int, u: np.ndarray) -> dict:
        resid = apply(op_val, u @ u.T) - y_val
        return {"val_loss": 0.5 * float(resid @ resid)}

    return hook


def select_iterate(traj: Trajectory, val_losses: Optional[Sequence[float]] = None) -> SelectionResult:
    """Earliest val-loss argmin over recorded iterates; oracle argmin alongside
    when recovery errors were recorded.  Ties break toward the earliest iterate."""
    if not traj.records:
        raise ValueError("empty trajectory")
    if val_losses is None:
        val_losses = [rec.val_loss for rec in traj.records]
    val_losses = list(val_losses)
    if len(val_losses) != len(traj.records) or any(v is None for v in val_losses):
        raise ValueError("validation loss must be recorded for every trajectory record")

    ts = [rec.t for rec in traj.records]
    i_hat = int(np.argmin(val_losses))  # argmin returns the first minimizer
    result_kwargs = {"t_hat": ts[i_hat], "val_curve": [float(v) for v in val_losses]}

    errors = [rec.recovery_error for rec in traj.records]
    if all(e is not None for e in errors):
        i_tilde = int(np.argmin(errors))
        result_kwargs["t_tilde"] = ts[i_tilde]
        result_kwargs["gap"] = float(errors[i_hat] - errors[i_tilde])
    return SelectionResult(**result_kwargs)


def _deviations(scaled_sq_norms, d_fro_sqs, sigma_eff_sq):
    targets = np.asarray(d_fro_sqs) + sigma_eff_sq
    return np.abs(np.asarray(scaled_sq_norms) - targets) / targets


def check_val_concentration(
    op_val: SensingOperator,
    y_val: np.ndarray,
    d_matrices: Sequence,
    sigma: float,
    x_nat,
) -> np.ndarray:
    """Relative deviation of each noisy validation measurement energy from its
    concentration target ||D_t||_F^2 + sigma_eff^2.

    The validation noise is recovered as y_val - A_val(X), so the measured
    vector for D_t is A_val(D_t) minus that noise (same statistics as the
    "+e" form).  For dense operators this is exactly
    | ||A(D)+e||^2 - m(||D||^2 + s^2) | / (m(||D||^2 + s^2)); for masks the
    energies are rescaled by n^2/m_val, giving sigma_eff^2 = n^2 s^2.
    """
    y_val = np.asarray(y_val, dtype=np.float64)
    scale = measurement_scale(op_val)
    sigma_eff_sq = scale * op_val.m * sigma**2
    xa = as_sym_array(x_nat)
    scaled, targets = [], []
    for d in d_matrices:
        da = as_sym_array(d)
        resid = apply(op_val, da + xa) - y_val
        scaled.append(scale * float(resid @ resid))
        targets.append(float(np.sum(da * da)))
    return _deviations(scaled, targets, sigma_eff_sq)


def trajectory_concentration(traj: Trajectory, op_val: SensingOperator, sigma: float) -> np.ndarray:
    """Same deviations as check_val_concentration, read off a finished run.

    Uses the identities ||A_val(D_t) - e||^2 = 2 * val_loss(t) and
    ||D_t||_F^2 = recovery_error(t), both already recorded per iterate.
    """
    if not traj.records:
        raise ValueError("empty trajectory")
    if any(rec.val_loss is None or rec.recovery_error is None for rec in traj.records):
        raise ValueError("needs val_loss and recovery_error recorded at every iterate")
    scale = measurement_scale(op_val)
    sigma_eff_sq = scale * op_val.m * sigma**2
    scaled = [2.0 * scale * rec.val_loss for rec in traj.records]
    targets = [rec.recovery_error for rec in traj.records]
    return _deviations(scaled, targets, sigma_eff_sq)


def selection_bound_rhs(delta: float, d_tilde_sq: float, sigma_eff_sq: float) -> float:
    """Right-hand side (1+d)/(1-d) * ||D_tilde||^2 + 2d/(1-d) * sigma_eff^2 of
    the selection-gap guarantee; requires delta < 1."""
    if not 0 <= delta < 1:
        raise ValueError(f"bound requires 0 <= delta < 1, got {delta}")
    return (1 + delta) / (1 - delta) * d_tilde_sq + 2 * delta / (1 - delta) * sigma_eff_sq
