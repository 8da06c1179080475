"""Tolerance-aware dense rank kernels.

Every rank decision in the package goes through :func:`numeric_rank`, so a
single :class:`Tol` controls all verdicts.  Matrices with a zero dimension
are legal everywhere: they have rank 0, a matrix with no columns is
vacuously of full column rank, and one with no rows is vacuously of full
row rank.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

__all__ = [
    "Tol",
    "DEFAULT_TOL",
    "InvalidInputError",
    "SvdPartition",
    "ConditionReport",
    "numeric_rank",
    "svd_partition",
    "is_fcr",
    "is_frr",
    "right_null_basis",
    "left_null_basis",
    "fcr_report",
    "frr_report",
    "blkdiag",
    "as_matrix",
]


class InvalidInputError(ValueError):
    """Raised for non-finite or non-2-D matrix input."""


@dataclass(frozen=True)
class Tol:
    """Rank thresholds.

    A singular value counts toward the rank when it exceeds
    ``max(rank_atol, rank_rtol * sigma_max)``.
    """

    rank_rtol: float = 1e-9
    rank_atol: float = 1e-12

    def __post_init__(self):
        if not self.rank_rtol > 0:
            raise ValueError("rank_rtol must be positive")
        if not self.rank_atol >= 0:
            raise ValueError("rank_atol must be non-negative")

    def threshold(self, sigma_max: float) -> float:
        return max(self.rank_atol, self.rank_rtol * sigma_max)


DEFAULT_TOL = Tol()


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return `M` as a finite 2-D float array."""
    arr = np.asarray(M, dtype=float)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def _singular_values(M: np.ndarray) -> np.ndarray:
    if M.size == 0:
        return np.zeros(0)
    return np.linalg.svd(M, compute_uv=False)


def _rank_from_sigma(sigma: np.ndarray, tol: Tol) -> int:
    if sigma.size == 0:
        return 0
    return int(np.count_nonzero(sigma > tol.threshold(sigma[0])))


def numeric_rank(M, tol: Tol = DEFAULT_TOL) -> int:
    """Number of singular values above the tolerance threshold."""
    M = as_matrix(M)
    return _rank_from_sigma(_singular_values(M), tol)


@dataclass(frozen=True)
class SvdPartition:
    """SVD of a matrix split at its numerical rank ``r``.

    ``u1`` (m x r) and ``v1`` (n x r) span the row/column ranges, ``u2`` and
    ``v2`` the left and right null spaces.  ``sigma`` holds the ``r``
    retained singular values; ``dropped`` holds the discarded ones, kept so
    borderline rank decisions can be audited.
    """

    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    sigma: np.ndarray
    dropped: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def rank(self) -> int:
        return self.sigma.size

    @property
    def shape(self) -> Tuple[int, int]:
        return self.u1.shape[0], self.v1.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.u1 * self.sigma) @ self.v1.T


def svd_partition(M, tol: Tol = DEFAULT_TOL) -> SvdPartition:
    M = as_matrix(M)
    m, n = M.shape
    if m == 0 or n == 0:
        return SvdPartition(
            u1=np.zeros((m, 0)), u2=np.eye(m), v1=np.zeros((n, 0)), v2=np.eye(n),
            sigma=np.zeros(0),
        )
    U, s, Vt = np.linalg.svd(M, full_matrices=True)
    r = _rank_from_sigma(s, tol)
    V = Vt.T
    return SvdPartition(
        u1=U[:, :r], u2=U[:, r:], v1=V[:, :r], v2=V[:, r:], sigma=s[:r], dropped=s[r:]
    )


def is_fcr(M, tol: Tol = DEFAULT_TOL) -> bool:
    """Full column rank test; a matrix with no columns passes."""
    M = as_matrix(M)
    if M.shape[1] == 0:
        return True
    return numeric_rank(M, tol) == M.shape[1]


def is_frr(M, tol: Tol = DEFAULT_TOL) -> bool:
    """Full row rank test; a matrix with no rows passes."""
    M = as_matrix(M)
    if M.shape[0] == 0:
        return True
    return numeric_rank(M, tol) == M.shape[0]


def right_null_basis(M, tol: Tol = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal columns spanning the right null space of `M`."""
    return svd_partition(M, tol).v2


def left_null_basis(M, tol: Tol = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal rows spanning the left null space of `M`."""
    return svd_partition(M, tol).u2.T


def blkdiag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Block-diagonal assembly that accepts zero-size blocks and no blocks."""
    if len(blocks) == 0:
        return np.zeros((0, 0))
    return scipy.linalg.block_diag(*blocks)


@dataclass
class ConditionReport:
    """Verdict of a full-rank test plus the evidence behind it.

    ``deficiency`` is measured against the tested dimension (columns for a
    full-column-rank test, rows for a full-row-rank test), so
    ``verdict == (deficiency == 0)``.  ``sigma_gap`` is the pair (smallest
    retained, largest discarded) singular value; either side is ``None``
    when empty.
    """

    verdict: bool
    test_matrix_dims: Tuple[int, int]
    rank: int
    deficiency: int
    kind: str = "fcr"
    reduced_subsystems: list = field(default_factory=list)
    sigma_gap: Tuple[Optional[float], Optional[float]] = (None, None)
    note: str = ""

    @property
    def gap_ratio(self) -> float:
        """Ratio smallest-kept / largest-dropped; ``inf`` when one side is empty."""
        kept, dropped = self.sigma_gap
        if kept is None or dropped is None:
            return float("inf")
        if dropped == 0.0:
            return float("inf")
        return kept / dropped

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "kind": self.kind,
            "test_matrix_dims": list(self.test_matrix_dims),
            "rank": self.rank,
            "deficiency": self.deficiency,
            "reduced_subsystems": list(self.reduced_subsystems),
            "sigma_gap": list(self.sigma_gap),
            "note": self.note,
        }


def _rank_report(M: np.ndarray, tol: Tol, kind: str, **kw) -> ConditionReport:
    M = as_matrix(M)
    s = _singular_values(M)
    r = _rank_from_sigma(s, tol)
    kept = float(s[r - 1]) if r > 0 else None
    dropped = float(s[r]) if r < s.size else None
    target = M.shape[1] if kind == "fcr" else M.shape[0]
    deficiency = target - r
    return ConditionReport(
        verdict=deficiency == 0,
        test_matrix_dims=M.shape,
        rank=r,
        deficiency=deficiency,
        kind=kind,
        sigma_gap=(kept, dropped),
        **kw,
    )


def fcr_report(M, tol: Tol = DEFAULT_TOL, **kw) -> ConditionReport:
    return _rank_report(M, tol, "fcr", **kw)


def frr_report(M, tol: Tol = DEFAULT_TOL, **kw) -> ConditionReport:
    return _rank_report(M, tol, "frr", **kw)
