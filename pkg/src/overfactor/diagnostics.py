"""Signal/error decomposition of iterates and the trajectory phase quantities.

An iterate U is split against the ground-truth column space: with B = V_X^T U
and its SVD B = V S W^T (W holding the top r* right singular vectors),

    U = U W W^T  +  U W_perp W_perp^T

is the split into a signal part living over the planted column space and an
error part orthogonal to it in factor space.  The three scalars tracked along
a run are the smallest signal singular value sigma_{r*}(U W), the spectral
norm of the error part U W_perp, and the misalignment ||V_{X,perp}^T V_{UW}||_2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import GroundTruth, as_factor_array, column_space_bases

__all__ = [
    "PhaseQuantities",
    "SignalErrorSplit",
    "signal_error_decompose",
    "phase_quantities",
    "recovery_error",
    "make_recovery_hook",
    "make_phase_hook",
]


@dataclass(frozen=True)
class PhaseQuantities:
    sigma_min_signal: float
    err_norm: float
    alignment: float
    fro_error: float
    rank_deficient: bool = False


class SignalErrorSplit(NamedTuple):
    signal: np.ndarray
    error: np.ndarray
    w: np.ndarray
    w_perp: np.ndarray
    rank_deficient: bool


def _split_against_basis(u: np.ndarray, v_x: np.ndarray, r_star: int) -> SignalErrorSplit:
    b = v_x.T @ u
    svals, vt = np.linalg.svd(b, full_matrices=True)[1:]
    w = vt[:r_star].T
    w_perp = vt[r_star:].T
    # Numerical zero is judged against the scale of U itself: ||B||_2 <= ||U||_2.
    tol = float(np.linalg.norm(u, 2)) * max(b.shape) * np.finfo(np.float64).eps
    deficient = bool(svals[r_star - 1] <= tol)
    signal = u @ w @ w.T
    error = u @ w_perp @ w_perp.T if w_perp.shape[1] else np.zeros_like(u)
    return SignalErrorSplit(signal, error, w, w_perp, deficient)


def signal_error_decompose(u, gt: GroundTruth) -> SignalErrorSplit:
    """Split U into signal and error parts against the planted column space.

    Requires r >= r*; at r == r* the error block is empty.  When V_X^T U has
    fewer than r* numerically nonzero singular values, W is still the top-r*
    right-singular-vector block and the rank_deficient flag is set.
    """
    ua = as_factor_array(u)
    if ua.shape[0] != gt.n:
        raise ValueError(f"dimension mismatch: factor n={ua.shape[0]}, ground truth n={gt.n}")
    if ua.shape[1] < gt.r_star:
        raise ValueError(
            f"decomposition undefined for r={ua.shape[1]} < r*={gt.r_star}"
        )
    v_x, _ = column_space_bases(gt.x_nat, gt.r_star)
    return _split_against_basis(ua, v_x, gt.r_star)


def _phase_from_bases(
    u: np.ndarray, x_nat: np.ndarray, v_x: np.ndarray, v_x_perp: np.ndarray, r_star: int
) -> PhaseQuantities:
    split = _split_against_basis(u, v_x, r_star)
    uw = u @ split.w
    sigma_min_signal = float(np.linalg.svd(uw, compute_uv=False)[-1])
    if split.w_perp.shape[1]:
        err_norm = float(np.linalg.norm(u @ split.w_perp, 2))
    else:
        err_norm = 0.0
    v_uw = np.linalg.svd(uw, full_matrices=False)[0][:, :r_star]
    alignment = float(np.linalg.norm(v_x_perp.T @ v_uw, 2)) if v_x_perp.shape[1] else 0.0
    fro_error = float(np.linalg.norm(u @ u.T - x_nat))
    return PhaseQuantities(
        sigma_min_signal=sigma_min_signal,
        err_norm=err_norm,
        alignment=alignment,
        fro_error=fro_error,
        rank_deficient=split.rank_deficient,
    )


def phase_quantities(u, gt: GroundTruth) -> PhaseQuantities:
    """The three trajectory scalars plus the Frobenius recovery distance."""
    ua = as_factor_array(u)
    if ua.shape[0] != gt.n:
        raise ValueError(f"dimension mismatch: factor n={ua.shape[0]}, ground truth n={gt.n}")
    if ua.shape[1] < gt.r_star:
        raise ValueError(f"phase quantities undefined for r={ua.shape[1]} < r*={gt.r_star}")
    v_x, v_x_perp = column_space_bases(gt.x_nat, gt.r_star)
    return _phase_from_bases(ua, gt.x_nat.entries, v_x, v_x_perp, gt.r_star)


def recovery_error(u, gt: GroundTruth) -> float:
    """Squared Frobenius distance ||U U^T - X||_F^2."""
    ua = as_factor_array(u)
    if ua.shape[0] != gt.n:
        raise ValueError(f"dimension mismatch: factor n={ua.shape[0]}, ground truth n={gt.n}")
    diff = ua @ ua.T - gt.x_nat.entries
    return float(np.sum(diff * diff))


def make_recovery_hook(gt: GroundTruth):
    """Per-iterate hook recording the squared Frobenius recovery error."""

    def hook(t: int, u: np.ndarray) -> dict:
        return {"recovery_error": recovery_error(u, gt)}

    return hook


def make_phase_hook(gt: GroundTruth):
    """Per-iterate hook recording PhaseQuantities (one SVD per evaluation)."""
    v_x, v_x_perp = column_space_bases(gt.x_nat, gt.r_star)
    x = gt.x_nat.entries

    def hook(t: int, u: np.ndarray) -> dict:
        return {"phase": _phase_from_bases(u, x, v_x, v_x_perp, gt.r_star)}

    return hook
