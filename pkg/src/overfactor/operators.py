"""Linear measurement operators, adjoints, and empirical isometry checks.

Two operator kinds are supported: dense Gaussian sensing (m stored n x n
matrices with i.i.d. standard normal entries, measurement i is the trace
inner product <A_i, Z>) and completion masks (m distinct index pairs,
measurement i is the entry Z[row_i, col_i]).

Operators are stored raw: apply/adjoint carry no normalization.  The
normalization that makes scale * A^T A an approximate identity lives at use
sites (loss, gradient, isometry ratios) and is exposed as
``measurement_scale``: 1/m for dense Gaussian, n^2/m for masks.  The mask
scale is what makes a full-observation mask an exact isometry and makes the
same step size work for both problem kinds.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core import RngSpec, as_sym_array

__all__ = [
    "SensingOperator",
    "RipEstimate",
    "PerturbationCheck",
    "build_gaussian_operator",
    "build_completion_operator",
    "apply",
    "adjoint",
    "measurement_scale",
    "take",
    "estimate_rip",
    "check_perturbation_bounds",
    "save_operator",
    "load_operator",
]

DENSE_GAUSSIAN = "dense-gaussian"
COMPLETION_MASK = "completion-mask"

_MAGIC = b"OVFACTOP"
_FORMAT_VERSION = 1
_KIND_CODES = {DENSE_GAUSSIAN: 0, COMPLETION_MASK: 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


@dataclass(frozen=True)
class SensingOperator:
    """A linear map from n x n matrices to R^m.

    Dense kind stores the m sensing matrices flattened as an (m, n*n) array
    (row-major per matrix) for fast mat-vec application.  Mask kind stores
    the sampled (row, col) index pairs.
    """

    kind: str
    n: int
    matrices: Optional[np.ndarray] = None
    rows: Optional[np.ndarray] = None
    cols: Optional[np.ndarray] = None
    rng: Optional[RngSpec] = None

    def __post_init__(self):
        if self.kind == DENSE_GAUSSIAN:
            if self.matrices is None or self.matrices.ndim != 2 \
                    or self.matrices.shape[1] != self.n * self.n:
                raise ValueError("dense operator needs an (m, n*n) matrix block")
        elif self.kind == COMPLETION_MASK:
            if self.rows is None or self.cols is None or len(self.rows) != len(self.cols):
                raise ValueError("mask operator needs equal-length row/col index arrays")
        else:
            raise ValueError(f"unknown operator kind {self.kind!r}")

    @property
    def m(self) -> int:
        if self.kind == DENSE_GAUSSIAN:
            return self.matrices.shape[0]
        return len(self.rows)


def measurement_scale(op: SensingOperator) -> float:
    """Normalization c such that c * A^* A approximates the identity map."""
    if op.kind == DENSE_GAUSSIAN:
        return 1.0 / op.m
    return (op.n * op.n) / op.m


def build_gaussian_operator(n: int, m: int, rng: RngSpec) -> SensingOperator:
    """m sensing matrices with i.i.d. standard normal entries."""
    if n < 1 or m < 1:
        raise ValueError(f"invalid operator size n={n}, m={m}")
    try:
        block = rng.generator().standard_normal((m, n * n))
    except MemoryError as exc:
        raise MemoryError(
            f"cannot allocate dense operator: m*n^2 = {m * n * n} float64 "
            f"({m * n * n * 8 / 1e9:.2f} GB)"
        ) from exc
    block.flags.writeable = False
    return SensingOperator(kind=DENSE_GAUSSIAN, n=n, matrices=block, rng=rng)


def build_completion_operator(n: int, m: int, rng: RngSpec) -> SensingOperator:
    """m distinct entry positions sampled uniformly without replacement."""
    if n < 1 or m < 1:
        raise ValueError(f"invalid operator size n={n}, m={m}")
    if m > n * n:
        raise ValueError(f"too many samples: m={m} exceeds n^2={n * n}")
    flat = rng.generator().choice(n * n, size=m, replace=False)
    rows = (flat // n).astype(np.uint32)
    cols = (flat % n).astype(np.uint32)
    rows.flags.writeable = False
    cols.flags.writeable = False
    return SensingOperator(kind=COMPLETION_MASK, n=n, rows=rows, cols=cols, rng=rng)


def apply(op: SensingOperator, z) -> np.ndarray:
    """Forward map: vector of <A_i, Z> (dense) or sampled entries (mask)."""
    a = as_sym_array(z)
    if a.shape[0] != op.n:
        raise ValueError(f"dimension mismatch: operator n={op.n}, matrix n={a.shape[0]}")
    if op.kind == DENSE_GAUSSIAN:
        return op.matrices @ a.ravel()
    return a[op.rows, op.cols]


def adjoint(op: SensingOperator, v: np.ndarray) -> np.ndarray:
    """Adjoint map sum_i v_i A_i, symmetrized once as (M + M^T)/2."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (op.m,):
        raise ValueError(f"dimension mismatch: expected vector of length {op.m}, got {v.shape}")
    if op.kind == DENSE_GAUSSIAN:
        raw = (op.matrices.T @ v).reshape(op.n, op.n)
    else:
        raw = np.zeros((op.n, op.n))
        np.add.at(raw, (op.rows, op.cols), v)
    return 0.5 * (raw + raw.T)


def take(op: SensingOperator, indices: np.ndarray) -> SensingOperator:
    """Sub-operator keeping only the selected measurement indices."""
    idx = np.asarray(indices, dtype=np.intp)
    if op.kind == DENSE_GAUSSIAN:
        block = op.matrices[idx].copy()
        block.flags.writeable = False
        return SensingOperator(kind=DENSE_GAUSSIAN, n=op.n, matrices=block, rng=op.rng)
    rows = op.rows[idx].copy()
    cols = op.cols[idx].copy()
    rows.flags.writeable = False
    cols.flags.writeable = False
    return SensingOperator(kind=COMPLETION_MASK, n=op.n, rows=rows, cols=cols, rng=op.rng)


@dataclass(frozen=True)
class RipEstimate:
    """Monte-Carlo lower bound on the rank-k restricted isometry constant.

    ratios[i] is scale * ||A(X_i)||^2 for a random rank-k unit-Frobenius test
    matrix X_i; delta_hat is the worst observed deviation of a ratio from 1.
    A certified constant would need a sup over all rank-k matrices, so this
    is a lower bound only.
    """

    k: int
    trials: int
    delta_hat: float
    ratios: np.ndarray


def estimate_rip(op: SensingOperator, k: int, trials: int, rng: RngSpec) -> RipEstimate:
    """Probe the isometry ratio on random rank-k PSD test matrices.

    Trial i draws from the child stream "trial<i>", so growing ``trials``
    extends the same draw sequence and delta_hat is non-decreasing in it.
    """
    if not 1 <= k <= op.n:
        raise ValueError(f"invalid rank parameter k={k} for n={op.n}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    scale = measurement_scale(op)
    ratios = np.empty(trials)
    for i in range(trials):
        g = rng.child(f"trial{i}").generator()
        f = g.standard_normal((op.n, k))
        x = f @ f.T
        x /= np.linalg.norm(x)
        ratios[i] = scale * float(np.sum(apply(op, x) ** 2))
    ratios.flags.writeable = False
    delta_hat = float(np.max(np.abs(ratios - 1.0)))
    return RipEstimate(k=k, trials=trials, delta_hat=delta_hat, ratios=ratios)


class PerturbationCheck(NamedTuple):
    """Observed spectral deviations of (I - scale A^*A) against the two norms
    that bound them: Frobenius for a rank-<=k input, nuclear for a general one."""

    spectral_x: float
    fro_x: float
    spectral_z: float
    nuclear_z: float


def check_perturbation_bounds(op: SensingOperator, x, z, k: int) -> PerturbationCheck:
    """Evaluate ||(I - scale A^*A)(X)||_2 vs ||X||_F and the same for Z vs ||Z||_*."""
    xa = as_sym_array(x)
    za = as_sym_array(z)
    svals = np.linalg.svd(xa, compute_uv=False)
    if svals.size > k and svals[k] > 1e-8 * max(1.0, svals[0]):
        raise ValueError(f"x has numerical rank above k={k} (sigma_{k + 1}={svals[k]:.3g})")
    scale = measurement_scale(op)

    def deviation(a):
        residual = a - scale * adjoint(op, apply(op, a))
        return float(np.linalg.norm(residual, 2))

    return PerturbationCheck(
        spectral_x=deviation(xa),
        fro_x=float(np.linalg.norm(xa)),
        spectral_z=deviation(za),
        nuclear_z=float(np.sum(np.linalg.svd(za, compute_uv=False))),
    )


def save_operator(op: SensingOperator, path) -> None:
    """Serialize to the documented binary format (see docs/operator-format.md)."""
    seed = op.rng.seed if op.rng is not None else 0
    label = (op.rng.label if op.rng is not None else "").encode("utf-8")
    header = _MAGIC + struct.pack(
        "<BBIIQH", _FORMAT_VERSION, _KIND_CODES[op.kind], op.n, op.m, seed, len(label)
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(label)
        if op.kind == DENSE_GAUSSIAN:
            fh.write(np.ascontiguousarray(op.matrices, dtype="<f8").tobytes())
        else:
            fh.write(np.ascontiguousarray(op.rows, dtype="<u4").tobytes())
            fh.write(np.ascontiguousarray(op.cols, dtype="<u4").tobytes())


def load_operator(path) -> SensingOperator:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"not an operator file (bad magic {magic!r})")
        version, kind_code, n, m, seed, label_len = struct.unpack("<BBIIQH", fh.read(20))
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported operator format version {version}")
        label = fh.read(label_len).decode("utf-8")
        rng = RngSpec(seed, label)
        if _KIND_NAMES[kind_code] == DENSE_GAUSSIAN:
            block = np.frombuffer(fh.read(m * n * n * 8), dtype="<f8").reshape(m, n * n)
            return SensingOperator(kind=DENSE_GAUSSIAN, n=n, matrices=block, rng=rng)
        rows = np.frombuffer(fh.read(m * 4), dtype="<u4")
        cols = np.frombuffer(fh.read(m * 4), dtype="<u4")
        return SensingOperator(kind=COMPLETION_MASK, n=n, rows=rows, cols=cols, rng=rng)
