"""Factored gradient descent with small random initialization.

The iteration is U_{t+1} = U_t - eta * c * sym(A^*(A(U_t U_t^T) - y)) U_t with
c = measurement_scale(op).  This is the update written without the calculus
factor 2: the exact derivative of the half-quadratic loss is twice this
quantity, so a run here with step eta equals a textbook gradient run with
step eta' = 2*eta.  The literal form is kept so that the reference step size
0.5 reproduces the reference experiments unchanged.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterable, Optional

import numpy as np

from .core import Factor, RngSpec, as_factor_array
from .operators import SensingOperator, adjoint, apply, measurement_scale

if TYPE_CHECKING:
    from .diagnostics import PhaseQuantities

__all__ = [
    "GdConfig",
    "IterateRecord",
    "Trajectory",
    "DivergenceError",
    "init_factor",
    "gradient",
    "train_loss",
    "run_gd",
    "trajectory_to_csv",
    "CSV_HEADER",
]

# Per-iterate hook: receives (t, read-only U_t) and returns extra record
# fields out of {val_loss, recovery_error, phase}.
Hook = Callable[[int, np.ndarray], dict]

DIVERGENCE_FACTOR = 1e6

CSV_HEADER = [
    "t",
    "train_loss",
    "val_loss",
    "recovery_error",
    "sigma_min_signal",
    "err_norm",
    "alignment",
]


class DivergenceError(RuntimeError):
    """Training loss exploded or went non-finite; the run is aborted."""

    def __init__(self, t: int, loss: float):
        super().__init__(f"gradient descent diverged at iteration {t} (train loss {loss:.6g})")
        self.t = t
        self.loss = loss


@dataclass(frozen=True)
class GdConfig:
    """Hyperparameters of one gradient-descent run."""

    r: int
    eta: float = 0.5
    alpha: float = 1e-6
    T: int = 500
    init_rng: RngSpec = RngSpec(0, "init")
    record_every: int = 1

    def __post_init__(self):
        if self.eta <= 0 or self.alpha <= 0:
            raise ValueError(f"eta and alpha must be positive, got {self.eta}, {self.alpha}")
        if self.T < 1 or self.r < 1 or self.record_every < 1:
            raise ValueError("T, r, record_every must all be >= 1")


@dataclass
class IterateRecord:
    t: int
    train_loss: float
    val_loss: Optional[float] = None
    recovery_error: Optional[float] = None
    phase: Optional["PhaseQuantities"] = None


@dataclass
class Trajectory:
    config: GdConfig
    records: list = field(default_factory=list)
    checkpoints: dict = field(default_factory=dict)

    def record_at(self, t: int) -> IterateRecord:
        for rec in self.records:
            if rec.t == t:
                return rec
        raise KeyError(f"no record at iteration {t}")

    @property
    def recorded_iterations(self) -> list:
        return [rec.t for rec in self.records]


def init_factor(n: int, config: GdConfig) -> Factor:
    """U_0 = alpha * U with U entries i.i.d. normal of standard deviation 1/sqrt(r)."""
    if config.r > n:
        raise ValueError(f"factor rank r={config.r} exceeds dimension n={n}")
    g = config.init_rng.generator()
    u = g.standard_normal((n, config.r)) * (config.alpha / np.sqrt(config.r))
    return Factor(u)


def _gradient_array(op: SensingOperator, y: np.ndarray, u: np.ndarray, scale: float) -> np.ndarray:
    z = u @ u.T
    resid = apply(op, z) - y
    return scale * (adjoint(op, resid) @ u)


def gradient(op: SensingOperator, y: np.ndarray, u) -> np.ndarray:
    """Update direction c * sym(A^*(A(UU^T) - y)) U (see module docstring for
    the factor-2 convention; the exact derivative of the loss is twice this)."""
    ua = as_factor_array(u)
    if ua.shape[0] != op.n:
        raise ValueError(f"dimension mismatch: operator n={op.n}, factor n={ua.shape[0]}")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (op.m,):
        raise ValueError(f"dimension mismatch: expected {op.m} measurements, got {y.shape}")
    return _gradient_array(op, y, ua, measurement_scale(op))


def train_loss(op: SensingOperator, y: np.ndarray, u) -> float:
    """Loss 0.5 * c * ||A(UU^T) - y||^2 with c = measurement_scale(op)."""
    ua = as_factor_array(u)
    resid = apply(op, ua @ ua.T) - y
    return 0.5 * measurement_scale(op) * float(resid @ resid)


def run_gd(
    op_train: SensingOperator,
    y_train: np.ndarray,
    config: GdConfig,
    hooks: Iterable[Hook] = (),
    checkpoint_at: Iterable[int] = (),
) -> Trajectory:
    """Run T iterations, recording diagnostics every record_every steps.

    Hooks get a read-only view of U_t at every recorded iteration and return
    extra record fields (val_loss / recovery_error / phase).  Checkpointed
    factors: the val-loss argmin over recorded iterates (when any hook
    supplies val_loss), the final iterate, and any explicitly requested
    iterations.

    Raises DivergenceError when the train loss exceeds 1e6 times its initial
    value or any iterate entry goes non-finite.
    """
    y_train = np.asarray(y_train, dtype=np.float64)
    if y_train.shape != (op_train.m,):
        raise ValueError(
            f"dimension mismatch: operator has m={op_train.m}, measurements {y_train.shape}"
        )
    hooks = tuple(hooks)
    checkpoint_at = set(int(t) for t in checkpoint_at)
    scale = measurement_scale(op_train)

    u = init_factor(op_train.n, config).entries.copy()
    traj = Trajectory(config=config)
    loss0 = None
    best_val = np.inf
    best_val_t = None
    best_val_factor = None

    for t in range(config.T + 1):
        if not np.all(np.isfinite(u)):
            raise DivergenceError(t, float("nan"))
        z = u @ u.T
        resid = apply(op_train, z) - y_train
        loss = 0.5 * scale * float(resid @ resid)
        if not np.isfinite(loss):
            raise DivergenceError(t, loss)
        if loss0 is None:
            loss0 = loss
        elif loss0 > 0 and loss > DIVERGENCE_FACTOR * loss0:
            raise DivergenceError(t, loss)

        if t in checkpoint_at:
            traj.checkpoints[t] = Factor(u.copy())
        if t % config.record_every == 0 or t == config.T:
            view = u.view()
            view.flags.writeable = False
            extra = {}
            for hook in hooks:
                extra.update(hook(t, view))
            rec = IterateRecord(
                t=t,
                train_loss=loss,
                val_loss=extra.get("val_loss"),
                recovery_error=extra.get("recovery_error"),
                phase=extra.get("phase"),
            )
            traj.records.append(rec)
            if rec.val_loss is not None and rec.val_loss < best_val:
                best_val = rec.val_loss
                best_val_t = t
                best_val_factor = Factor(u.copy())

        if t == config.T:
            traj.checkpoints[t] = Factor(u.copy())
            break
        u = u - config.eta * scale * (adjoint(op_train, resid) @ u)

    if best_val_t is not None:
        traj.checkpoints.setdefault(best_val_t, best_val_factor)
    return traj


def _fmt(value) -> str:
    return "" if value is None else format(value, ".17g")


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """One row per record; fixed header; missing values left empty."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in traj.records:
            p = rec.phase
            writer.writerow(
                [
                    rec.t,
                    _fmt(rec.train_loss),
                    _fmt(rec.val_loss),
                    _fmt(rec.recovery_error),
                    _fmt(p.sigma_min_signal if p else None),
                    _fmt(p.err_norm if p else None),
                    _fmt(p.alignment if p else None),
                ]
            )
