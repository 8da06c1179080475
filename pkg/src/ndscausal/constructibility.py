"""Whether some connection matrix (and decentralized feedback) can enforce the
rank conditions, decided from each subsystem's own matrices.

The per-subsystem rank tests are necessary but not sufficient on their own:
the affine test matrix must also have at least as many rows (columns) as
columns (rows).  :func:`report` combines both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .linalg import DEFAULT_TOL, Tol, as_matrix, blkdiag, is_fcr, is_frr, numeric_rank
from .model import NdsModel, Subsystem, check
from .scalable import cert_i, cert_ii, e_partition

__all__ = [
    "FeedbackGain",
    "SubsystemRecord",
    "ConstructibilityReport",
    "lemma2_exists",
    "thm3_subsystem",
    "thm4_subsystem",
    "cor1_subsystem",
    "feedback_rescues_thm3",
    "lemma4_check",
    "feedback_null_dim",
    "report",
]


@dataclass(frozen=True)
class FeedbackGain:
    """Decentralized static output feedback ``u(i) = F(i) (y(i) + gamma(i))``."""

    blocks: tuple

    def __post_init__(self):
        blocks = []
        for k, F in enumerate(self.blocks):
            F = np.array(F, dtype=float)
            if F.ndim != 2:
                raise ValueError(f"F({k}) must be 2-D")
            F.setflags(write=False)
            blocks.append(F)
        object.__setattr__(self, "blocks", tuple(blocks))

    @classmethod
    def zeros(cls, model: NdsModel) -> "FeedbackGain":
        return cls(tuple(np.zeros((s.dims.n_u, s.dims.n_y)) for s in model.subsystems))

    def dense(self) -> np.ndarray:
        rows = sum(F.shape[0] for F in self.blocks)
        cols = sum(F.shape[1] for F in self.blocks)
        return blkdiag(list(self.blocks)).reshape(rows, cols)

    def to_json(self) -> dict:
        return {"F": [F.tolist() for F in self.blocks]}

    @classmethod
    def from_json(cls, obj, model: NdsModel) -> "FeedbackGain":
        """Parse ``{"F": [...]}``; empty blocks take their shape from `model`."""
        blocks = obj["F"]
        if len(blocks) != model.N:
            raise ValueError(f"expected {model.N} feedback blocks, got {len(blocks)}")
        out = []
        for F, sub in zip(blocks, model.subsystems):
            shape = (sub.dims.n_u, sub.dims.n_y)
            out.append(np.array(F, dtype=float).reshape(shape))
        return cls(tuple(out))


def lemma2_exists(A, B, tol: Tol = DEFAULT_TOL) -> bool:
    """Whether ``A + X B`` has full column rank for some ``X``.

    True exactly when ``A`` has at least as many rows as columns and
    ``[A; B]`` has full column rank.
    """
    A, B = as_matrix(A, "A"), as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"column mismatch: A has {A.shape[1]}, B has {B.shape[1]}")
    return A.shape[0] >= A.shape[1] and is_fcr(np.vstack([A, B]), tol)


def _thm3_stack(sub: Subsystem, tol: Tol, extra=()) -> np.ndarray:
    part = e_partition(sub, tol)
    return np.vstack([part.u2.T @ sub.A_xx, sub.A_zx, *extra, part.v1.T])


def thm3_subsystem(sub: Subsystem, tol: Tol = DEFAULT_TOL) -> bool:
    """``[U_E2^T A_xx; A_zx; V_E1^T]`` has full column rank."""
    return is_fcr(_thm3_stack(sub, tol), tol)


def thm4_subsystem(sub: Subsystem, tol: Tol = DEFAULT_TOL) -> bool:
    """``[U_E1, A_xv, B_x]`` has full row rank."""
    part = e_partition(sub, tol)
    return is_frr(np.hstack([part.u1, sub.A_xv, sub.B_x]), tol)


def cor1_subsystem(sub: Subsystem, tol: Tol = DEFAULT_TOL) -> bool:
    """``[U_E2^T A_xx; A_zx; C_x; V_E1^T]`` has full column rank."""
    return is_fcr(_thm3_stack(sub, tol, extra=(sub.C_x,)), tol)


def feedback_rescues_thm3(sub: Subsystem, tol: Tol = DEFAULT_TOL) -> bool:
    """Whether some output feedback gain makes the closed loop pass :func:`thm3_subsystem`.

    The closed-loop stack is ``M + P W C_x`` with ``M`` the open-loop stack
    and ``P = [U_E2^T B_x; B_z; 0]``, so full column rank is reachable iff
    both ``[M; C_x]`` (the :func:`cor1_subsystem` test) and ``[M, P]`` have
    rank at least ``n_x``.
    """
    M = _thm3_stack(sub, tol)
    part = e_partition(sub, tol)
    P = np.vstack([part.u2.T @ sub.B_x, sub.B_z, np.zeros((part.v1.shape[1], sub.dims.n_u))])
    n_x = sub.dims.n_x
    return (numeric_rank(np.vstack([M, sub.C_x]), tol) == n_x
            and numeric_rank(np.hstack([M, P]), tol) >= n_x)


def lemma4_check(sub: Subsystem, tol: Tol = DEFAULT_TOL):
    """``([U_E2^T A_xx; V_E1^T] FCR, [U_E1, B_x] FRR)``."""
    part = e_partition(sub, tol)
    fcr_ok = is_fcr(np.vstack([part.u2.T @ sub.A_xx, part.v1.T]), tol)
    frr_ok = is_frr(np.hstack([part.u1, sub.B_x]), tol)
    return fcr_ok, frr_ok


def feedback_null_dim(sub: Subsystem, tol: Tol = DEFAULT_TOL) -> int:
    """Smallest null-space dimension of the local Condition I test matrix
    reachable by a static output feedback gain.

    Feedback turns ``T`` into ``T + P W Q`` with ``P = U_E2^T B_x`` and
    ``Q = [C_x V_E2, C_v]``; the largest rank over all ``W`` is
    ``min(rank [T P], rank [T; Q])``.
    """
    c = cert_i(sub, tol)
    T = c.test_matrix
    u2, v2 = c.svd.u2, c.svd.v2
    P = u2.T @ sub.B_x
    Q = np.hstack([sub.C_x @ v2, sub.C_v])
    best = min(numeric_rank(np.hstack([T, P]), tol), numeric_rank(np.vstack([T, Q]), tol))
    return T.shape[1] - best


@dataclass
class SubsystemRecord:
    index: int
    in_s_i: bool
    in_s_ii: bool
    thm3_ok: bool
    thm4_ok: bool
    in_d_i: bool
    in_d_ii: bool
    cor1_ok: bool
    feedback_fix_ok: bool
    null_dim_i: int
    null_dim_ii: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ConstructibilityReport:
    """Existence verdicts for a connection matrix, with and without feedback.

    ``dims_ok_i`` requires the summed local null-space dimensions for
    Condition I not to exceed ``sum(n_v)``; ``dims_ok_ii`` requires the summed
    left-null dimensions for Condition II not to exceed ``sum(n_z)``.
    ``joint_existence`` is only ever upgraded by an actual search.
    """

    subsystems: List[SubsystemRecord]
    square: bool
    dims_ok_i: bool
    dims_ok_ii: bool
    feedback_dims_ok_i: bool
    exists_phi_for_i: bool
    exists_phi_for_ii: bool
    feedback_can_fix_i: bool
    feedback_can_fix_ii: bool
    joint_existence: str = "unknown"
    notes: List[str] = field(default_factory=list)

    @property
    def d_i(self) -> List[int]:
        return [r.index for r in self.subsystems if r.in_d_i]

    @property
    def d_ii(self) -> List[int]:
        return [r.index for r in self.subsystems if r.in_d_ii]

    def to_dict(self) -> dict:
        return {
            "subsystems": [r.to_dict() for r in self.subsystems],
            "D_I": self.d_i,
            "D_II": self.d_ii,
            "square": self.square,
            "dims_ok_i": self.dims_ok_i,
            "dims_ok_ii": self.dims_ok_ii,
            "feedback_dims_ok_i": self.feedback_dims_ok_i,
            "exists_phi_for_i": self.exists_phi_for_i,
            "exists_phi_for_ii": self.exists_phi_for_ii,
            "feedback_can_fix_i": self.feedback_can_fix_i,
            "feedback_can_fix_ii": self.feedback_can_fix_ii,
            "joint_existence": self.joint_existence,
            "notes": list(self.notes),
        }


def report(model: NdsModel, tol: Tol = DEFAULT_TOL) -> ConstructibilityReport:
    check(model)
    records = []
    fb_null = 0
    for i, sub in enumerate(model.subsystems):
        ci, cii = cert_i(sub, tol), cert_ii(sub, tol)
        t3, t4 = thm3_subsystem(sub, tol), thm4_subsystem(sub, tol)
        records.append(SubsystemRecord(
            index=i, in_s_i=ci.in_s_i, in_s_ii=cii.in_s_ii, thm3_ok=t3, thm4_ok=t4,
            in_d_i=not t3, in_d_ii=not t4, cor1_ok=cor1_subsystem(sub, tol),
            feedback_fix_ok=feedback_rescues_thm3(sub, tol),
            null_dim_i=ci.k, null_dim_ii=cii.k))
        fb_null += feedback_null_dim(sub, tol)
    d = model.dims
    square = d.n_x == d.n_e
    dims_ok_i = sum(r.null_dim_i for r in records) <= d.n_v
    dims_ok_ii = sum(r.null_dim_ii for r in records) <= d.n_z
    fb_dims_ok_i = fb_null <= d.n_v
    exists_i = dims_ok_i and all(r.thm3_ok for r in records if not r.in_s_i)
    exists_ii = square and dims_ok_ii and all(r.thm4_ok for r in records if not r.in_s_ii)
    notes = []
    if not dims_ok_i:
        notes.append("Condition I test matrix has more columns than rows for every connection")
    if not square:
        notes.append("Condition II existence needs sum(n_x) == sum(n_e)")
    elif not dims_ok_ii:
        notes.append("Condition II test matrix has more rows than columns for every connection")
    return ConstructibilityReport(
        subsystems=records,
        square=square,
        dims_ok_i=dims_ok_i,
        dims_ok_ii=dims_ok_ii,
        feedback_dims_ok_i=fb_dims_ok_i,
        exists_phi_for_i=exists_i,
        exists_phi_for_ii=exists_ii,
        feedback_can_fix_i=fb_dims_ok_i and all(r.feedback_fix_ok for r in records if r.in_d_i),
        # feedback only shrinks the range of the input columns, so it never helps here
        feedback_can_fix_ii=exists_ii and not any(r.in_d_ii for r in records),
        notes=notes,
    )
