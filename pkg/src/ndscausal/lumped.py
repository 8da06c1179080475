"""Lumped descriptor model of the whole network and the classical rank tests.

This path eliminates the internal signals explicitly,

    A = A_xx + A_xv phi (I - A_zv phi)^-1 A_zx,   B = B_x + A_xv phi (I - A_zv phi)^-1 B_z,
    C = C_x  + C_v  phi (I - A_zv phi)^-1 A_zx,   D = D_u + C_v  phi (I - A_zv phi)^-1 B_z,

and then checks the descriptor conditions on ``(E, A, B)`` directly.  It
costs cubic time in the network size and is used as the reference the
subsystem-wise tests are compared against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .linalg import (DEFAULT_TOL, ConditionReport, Tol, fcr_report, frr_report,
                     numeric_rank, svd_partition)
from .model import NdsModel, Stacked, stack

__all__ = [
    "LumpedModel",
    "IllPosedError",
    "OverallVerdict",
    "well_posed",
    "interconnection_matrix",
    "lumped_lft",
    "lumped_from_stacked",
    "condition_i_lumped",
    "condition_ii_lumped",
    "regularity_probe",
    "RegularityResult",
    "verdict",
]

# I - A_zv phi is factorised, never inverted; above this condition number
# the lumped model is flagged as numerically fragile.
COND_WARN = 1e8


class IllPosedError(ValueError):
    """``I - A_zv phi`` is singular, so the interconnection is not well posed."""


@dataclass(frozen=True)
class LumpedModel:
    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    cond: float = 1.0

    @property
    def ill_conditioned(self) -> bool:
        return self.cond > COND_WARN


def interconnection_matrix(model: NdsModel, st: Optional[Stacked] = None) -> np.ndarray:
    """``I - A_zv phi`` on the stacked internal signals."""
    st = stack(model) if st is None else st
    n_z = st.dims.n_z
    return np.eye(n_z) - st.A_zv @ model.phi.to_dense()


def well_posed(model: NdsModel, tol: Tol = DEFAULT_TOL) -> bool:
    W = interconnection_matrix(model)
    return numeric_rank(W, tol) == W.shape[0]


def lumped_from_stacked(st: Stacked, phi: np.ndarray, tol: Tol = DEFAULT_TOL) -> LumpedModel:
    n_z = st.dims.n_z
    W = np.eye(n_z) - st.A_zv @ phi
    if n_z == 0:
        return LumpedModel(st.E, st.A_xx.copy(), st.B_x.copy(), st.C_x.copy(), st.D_u.copy())
    s = np.linalg.svd(W, compute_uv=False)
    if np.count_nonzero(s > tol.threshold(s[0])) < n_z:
        raise IllPosedError(
            f"I - A_zv*phi is singular (smallest singular value {s[-1]:.3e})")
    lu = scipy.linalg.lu_factor(W)
    # (I - A_zv phi)^-1 [A_zx B_z], then pre-multiply by phi
    Y = phi @ scipy.linalg.lu_solve(lu, np.hstack([st.A_zx, st.B_z]))
    n_x = st.dims.n_x
    A = st.A_xx + st.A_xv @ Y[:, :n_x]
    B = st.B_x + st.A_xv @ Y[:, n_x:]
    C = st.C_x + st.C_v @ Y[:, :n_x]
    D = st.D_u + st.C_v @ Y[:, n_x:]
    cond = float(s[0] / s[-1])
    return LumpedModel(st.E, A, B, C, D, cond=cond)


def lumped_lft(model: NdsModel, tol: Tol = DEFAULT_TOL) -> LumpedModel:
    """Eliminate ``v`` and ``z``; raises :class:`IllPosedError` when ill posed."""
    return lumped_from_stacked(stack(model), model.phi.to_dense(), tol)


def condition_i_lumped(lumped: LumpedModel, tol: Tol = DEFAULT_TOL) -> ConditionReport:
    """Full column rank of ``U_E2^T A V_E2`` for the lumped pencil."""
    part = svd_partition(lumped.E, tol)
    if part.v2.shape[1] == 0:
        return fcr_report(np.zeros((part.u2.shape[1], 0)), tol, note="E has full column rank")
    return fcr_report(part.u2.T @ lumped.A @ part.v2, tol)


def condition_ii_lumped(lumped: LumpedModel, tol: Tol = DEFAULT_TOL) -> ConditionReport:
    """``rank([E B])`` equals the number of rows of ``E``."""
    return frr_report(np.hstack([lumped.E, lumped.B]), tol)


@dataclass(frozen=True)
class RegularityResult:
    regular: bool
    probabilistic: bool
    trials: int

    def __bool__(self):
        return self.regular


def regularity_probe(lumped: LumpedModel, trials: int = 8, rng_seed=0,
                     tol: Tol = DEFAULT_TOL) -> RegularityResult:
    """Randomised check that ``det(lam E - A)`` is not identically zero.

    A ``True`` answer is certain.  A ``False`` answer means every sampled
    ``lam`` gave a singular pencil, which is almost surely correct but is
    flagged ``probabilistic``.
    """
    E, A = lumped.E, lumped.A
    if E.shape[0] != E.shape[1]:
        raise ValueError(f"regularity needs a square pencil, got {E.shape}")
    n = E.shape[0]
    if n == 0:
        return RegularityResult(True, False, 0)
    rng = np.random.default_rng(rng_seed)
    for k in range(trials):
        lam = rng.standard_normal()
        if numeric_rank(lam * E - A, tol) == n:
            return RegularityResult(True, False, k + 1)
    return RegularityResult(False, True, trials)


@dataclass
class OverallVerdict:
    time_domain: str
    dims_ok: bool
    condition_i: Optional[ConditionReport]
    condition_ii: Optional[ConditionReport]
    regular: Optional[bool]
    regular_probabilistic: bool
    impulse_free: Optional[bool] = None
    causal_lemma1_path: Optional[bool] = None

    def to_dict(self) -> dict:
        return {
            "time_domain": self.time_domain,
            "n_e_ge_n_x": self.dims_ok,
            "condition_i": None if self.condition_i is None else self.condition_i.to_dict(),
            "condition_ii": None if self.condition_ii is None else self.condition_ii.to_dict(),
            "regular": self.regular,
            "regular_probabilistic": self.regular_probabilistic,
            "impulse_free": self.impulse_free,
            "causal_lemma1_path": self.causal_lemma1_path,
        }


def verdict(model: NdsModel, time_domain: str = "continuous", tol: Tol = DEFAULT_TOL,
            trials: int = 8, rng_seed=0) -> OverallVerdict:
    """Impulse-freeness (continuous) or causality (discrete) of the lumped model.

    In discrete time a ``False`` for ``causal_lemma1_path`` means the
    sufficient route (regular, rank([E B]) full, Condition I) does not go
    through; it is not a proof of non-causality when rank([E B]) is deficient.
    """
    if time_domain not in ("continuous", "discrete"):
        raise ValueError("time_domain must be 'continuous' or 'discrete'")
    lumped = lumped_lft(model, tol)
    n_e, n_x = lumped.E.shape
    dims_ok = n_e >= n_x
    ci = condition_i_lumped(lumped, tol)
    if time_domain == "continuous":
        return OverallVerdict("continuous", dims_ok, ci, None, None, False,
                              impulse_free=dims_ok and ci.verdict)
    cii = condition_ii_lumped(lumped, tol)
    if n_e != n_x:
        regular, prob = False, False
    else:
        res = regularity_probe(lumped, trials, rng_seed, tol)
        regular, prob = res.regular, res.probabilistic
    return OverallVerdict("discrete", dims_ok, ci, cii, regular, prob,
                          causal_lemma1_path=regular and cii.verdict and ci.verdict)
