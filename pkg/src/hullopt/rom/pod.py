"""Proper orthogonal decomposition of snapshot matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError

DEFAULT_ENERGY_TOL = 0.01


class DegenerateBasisError(DataError):
    """The snapshot matrix has no energy to decompose."""


@dataclass(frozen=True)
class PodBasis:
    basis: np.ndarray  # (n, r), orthonormal columns
    singular_values: np.ndarray  # all min(n, m) values, descending

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def n_features(self) -> int:
        return self.basis.shape[0]

    @property
    def is_degenerate(self) -> bool:
        return not np.any(self.singular_values > 0)

    def normalized_singular_values(self) -> np.ndarray:
        s = self.singular_values
        return s / s[0] if s.size and s[0] > 0 else np.zeros_like(s)

    def reduce(self, snapshots: np.ndarray) -> np.ndarray:
        """Reduced coefficients U^T s; accepts an n-vector or an (n, m) matrix."""
        s = np.asarray(snapshots, dtype=float)
        if s.shape[0] != self.n_features:
            raise DataError(f"snapshot length {s.shape[0]} does not match basis size {self.n_features}")
        return self.basis.T @ s

    def reconstruct(self, coefficients: np.ndarray) -> np.ndarray:
        c = np.asarray(coefficients, dtype=float)
        if c.shape[0] != self.rank:
            raise DataError(f"expected {self.rank} coefficients, got {c.shape[0]}")
        return self.basis @ c

    def truncated(self, rank: int) -> "PodBasis":
        return PodBasis(np.ascontiguousarray(self.basis[:, :rank]), self.singular_values)

    @classmethod
    def zero(cls, n: int, m: int = 1) -> "PodBasis":
        """Rank-1 placeholder for an identically zero field."""
        basis = np.zeros((n, 1))
        basis[0, 0] = 1.0
        return cls(basis, np.zeros(min(n, m)))


def energy_rank(singular_values: np.ndarray, tol: float = DEFAULT_ENERGY_TOL) -> int:
    """Smallest rank whose discarded modes all have sigma_k / sigma_1 < tol."""
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or s[0] <= 0:
        return 0
    return max(1, int(np.count_nonzero(s / s[0] >= tol)))


def pod_fit(snapshots: np.ndarray, rank: int | None = None, energy_tol: float = DEFAULT_ENERGY_TOL) -> PodBasis:
    """Truncated SVD basis of an (n, m) snapshot matrix.

    With ``rank=None`` the rank follows the normalized singular value
    threshold ``energy_tol``; a fixed ``rank`` is clamped to the number of
    available modes.
    """
    M = np.asarray(snapshots, dtype=float)
    if M.ndim != 2 or M.shape[1] < 1:
        raise DataError("snapshot matrix must be 2-D with at least one column")
    if not np.all(np.isfinite(M)):
        raise DataError("snapshot matrix contains non-finite entries")
    if not np.any(M):
        raise DegenerateBasisError("snapshot matrix is identically zero")
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    r = energy_rank(s, energy_tol) if rank is None else int(rank)
    r = max(1, min(r, int(np.count_nonzero(s > 0)), U.shape[1]))
    U = U[:, :r].copy()
    # deterministic sign: largest-magnitude entry of each mode is positive
    idx = np.argmax(np.abs(U), axis=0)
    U *= np.sign(U[idx, np.arange(r)])
    return PodBasis(U, s)


def reconstruction_error(snapshots: np.ndarray, basis: PodBasis) -> float:
    M = np.asarray(snapshots, dtype=float)
    return float(np.linalg.norm(M - basis.basis @ (basis.basis.T @ M)))
