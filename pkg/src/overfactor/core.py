"""Dense symmetric-matrix value types, seeded randomness, ground-truth generation.

Everything downstream (operators, the gradient loop, diagnostics) works on the
types defined here.  All arithmetic is float64; matrices are plain contiguous
numpy arrays wrapped in thin frozen dataclasses.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RngSpec",
    "SymMatrix",
    "Factor",
    "GroundTruth",
    "SvdConvergenceError",
    "derive_seed",
    "generate_ground_truth",
    "gaussian_noise",
    "sym_svd",
    "column_space_bases",
]

# Singular values of unit-Frobenius-norm matrices below this count as zero.
RANK_CUTOFF = 1e-10


class SvdConvergenceError(RuntimeError):
    """Eigen/SVD routine failed to converge; never return silent garbage."""


def derive_seed(*parts) -> int:
    """Map an arbitrary tuple of parts to a 64-bit seed via SHA-256.

    The scheme is a plain hash of the repr of each part joined by ':'; it is
    documented here because experiment replay depends on it staying fixed.
    """
    text = ":".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class RngSpec:
    """A seed plus a stream label naming an independent randomness stream.

    Identical (seed, label) pairs always produce bit-identical draw sequences.
    Separate labels (ground-truth / operator / noise / init) let experiments
    vary one random factor while holding the others fixed.
    """

    seed: int
    label: str = ""

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(derive_seed(self.seed, self.label))

    def child(self, sublabel: str) -> "RngSpec":
        label = f"{self.label}/{sublabel}" if self.label else sublabel
        return RngSpec(self.seed, label)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SymMatrix:
    """Dense real symmetric n x n matrix."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected square matrix with n >= 1, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValueError("matrix is not exactly symmetric; use SymMatrix.symmetrized")
        object.__setattr__(self, "entries", _freeze(a))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @staticmethod
    def symmetrized(a: np.ndarray) -> "SymMatrix":
        """Build from an arbitrary square array by averaging with its transpose."""
        a = np.asarray(a, dtype=np.float64)
        return SymMatrix(0.5 * (a + a.T))


@dataclass(frozen=True)
class Factor:
    """Dense n x r factor; r may exceed the true rank up to r = n."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"expected 2-d factor with positive dims, got shape {a.shape}")
        object.__setattr__(self, "entries", _freeze(a))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def r(self) -> int:
        return self.entries.shape[1]

    def gram(self) -> np.ndarray:
        """The product F F^T as a plain symmetric array."""
        g = self.entries @ self.entries.T
        return 0.5 * (g + g.T)


def as_sym_array(z) -> np.ndarray:
    """Accept a SymMatrix or a plain symmetric ndarray; return the raw array."""
    if isinstance(z, SymMatrix):
        return z.entries
    a = np.asarray(z, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    return a


def as_factor_array(u) -> np.ndarray:
    if isinstance(u, Factor):
        return u.entries
    a = np.asarray(u, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected 2-d factor, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class GroundTruth:
    """Planted rank-r* PSD matrix with its factor and spectral metadata.

    Invariants: x_nat == u_nat u_nat^T, ||x_nat||_F == 1, rank(x_nat) == r_star,
    kappa = sigma_1 / sigma_{r*} >= 1.
    """

    x_nat: SymMatrix
    u_nat: Factor
    r_star: int
    sigma_min: float = field(repr=False, default=0.0)
    sigma_max: float = field(repr=False, default=0.0)
    kappa: float = 1.0

    @property
    def n(self) -> int:
        return self.x_nat.n


def generate_ground_truth(n: int, r_star: int, rng: RngSpec) -> GroundTruth:
    """Plant X = U U^T with standard-normal factor entries, rescaled to ||X||_F = 1.

    The rescale is a single scalar applied post hoc, so singular-vector
    structure of the raw Gram matrix is preserved.
    """
    if n < 1:
        raise ValueError(f"invalid dimension n={n}")
    if not 1 <= r_star <= n:
        raise ValueError(f"invalid rank r_star={r_star} for n={n}")
    g = rng.generator()
    u = g.standard_normal((n, r_star))
    x = u @ u.T
    x = 0.5 * (x + x.T)
    norm = np.linalg.norm(x)
    x /= norm
    u /= np.sqrt(norm)
    vals, _ = sym_svd(SymMatrix(x))
    sigma_max = float(vals[0])
    sigma_min = float(vals[r_star - 1])
    return GroundTruth(
        x_nat=SymMatrix(x),
        u_nat=Factor(u),
        r_star=r_star,
        sigma_min=sigma_min,
        sigma_max=sigma_max,
        kappa=sigma_max / sigma_min,
    )


def gaussian_noise(m: int, sigma: float, rng: RngSpec) -> np.ndarray:
    """Length-m vector of i.i.d. N(0, sigma^2) samples; sigma=0 gives zeros."""
    if m < 0:
        raise ValueError(f"invalid length m={m}")
    if sigma < 0:
        raise ValueError(f"invalid sigma={sigma}")
    return sigma * rng.generator().standard_normal(m)


def sym_svd(x, cutoff: float = RANK_CUTOFF):
    """Singular values (descending) and orthonormal column-space basis of a
    symmetric matrix, with columns kept only where the value exceeds cutoff.

    For PSD input, basis @ diag(values[:rank]) @ basis.T reconstructs x.
    """
    a = as_sym_array(x)
    try:
        eigvals, eigvecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(np.abs(eigvals))[::-1]
    values = np.abs(eigvals[order])
    vectors = eigvecs[:, order]
    rank = int(np.count_nonzero(values > cutoff))
    return values, vectors[:, :rank]


def column_space_bases(x, r: int):
    """Orthonormal bases (V, V_perp) of the top-r column space of a symmetric
    matrix and of its orthogonal complement."""
    a = as_sym_array(x)
    try:
        eigvals, eigvecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(np.abs(eigvals))[::-1]
    vectors = eigvecs[:, order]
    return vectors[:, :r], vectors[:, r:]
