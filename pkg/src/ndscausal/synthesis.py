"""Randomised construction of a connection matrix (and output feedback).

When an existence certificate holds, the set of connection matrices that
fail the affine rank test is a proper algebraic subset, so i.i.d. normal
draws succeed with probability one.  Every accepted draw is re-checked on
the lumped model before it is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constructibility import FeedbackGain, report
from .generator import sample_phi
from .linalg import DEFAULT_TOL, Tol, numeric_rank
from .lumped import IllPosedError, condition_i_lumped, condition_ii_lumped, lumped_lft, well_posed
from .model import NdsModel, Scm, check
from .scalable import NotApplicableError, theorem1_check, theorem2_check

__all__ = [
    "SynthesisResult",
    "FeedbackInapplicableError",
    "apply_feedback",
    "synthesize_phi",
    "synthesize_feedback",
]

FOUND = "found"
IMPOSSIBLE = "certified-impossible"
EXHAUSTED = "exhausted"


class FeedbackInapplicableError(ValueError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"I - F(i) D_u(i) is singular for subsystem {index}")


@dataclass
class SynthesisResult:
    status: str
    phi: Optional[Scm] = None
    feedback: Optional[FeedbackGain] = None
    attempts_used: int = 0
    conditions_met: dict = field(default_factory=lambda: {
        "cond_i": False, "cond_ii": False, "well_posed": False})
    certificate: str = ""
    search_only: bool = False
    oracle_disagreements: int = 0

    def to_dict(self) -> dict:
        from .model import scm_to_json
        return {
            "status": self.status,
            "phi": None if self.phi is None else scm_to_json(self.phi),
            "feedback": None if self.feedback is None else self.feedback.to_json(),
            "attempts_used": self.attempts_used,
            "conditions_met": dict(self.conditions_met),
            "certificate": self.certificate,
            "search_only": self.search_only,
            "oracle_disagreements": self.oracle_disagreements,
        }


def apply_feedback(model: NdsModel, gain: FeedbackGain, tol: Tol = DEFAULT_TOL) -> NdsModel:
    """Close ``u(i) = F(i) (y(i) + gamma(i))`` on every subsystem.

    With ``W = (I - F D_u)^-1 F`` each input column block ``B`` becomes
    ``B W`` and each state/internal column block ``M`` becomes
    ``M + B W C``; ``gamma`` replaces ``u`` as the external input, so
    ``n_u`` becomes ``n_y``.  ``E`` and ``phi`` are untouched.
    """
    check(model)
    if len(gain.blocks) != model.N:
        raise ValueError(f"expected {model.N} feedback blocks, got {len(gain.blocks)}")
    subs = []
    for i, (sub, F) in enumerate(zip(model.subsystems, gain.blocks)):
        d = sub.dims
        if F.shape != (d.n_u, d.n_y):
            raise ValueError(f"F({i}) must be {d.n_u}x{d.n_y}, got {F.shape}")
        S = np.eye(d.n_u) - F @ sub.D_u
        if numeric_rank(S, tol) < d.n_u:
            raise FeedbackInapplicableError(i)
        W = np.linalg.solve(S, F) if d.n_u else F
        subs.append(sub.replace(
            A_xx=sub.A_xx + sub.B_x @ W @ sub.C_x,
            A_xv=sub.A_xv + sub.B_x @ W @ sub.C_v,
            B_x=sub.B_x @ W,
            A_zx=sub.A_zx + sub.B_z @ W @ sub.C_x,
            A_zv=sub.A_zv + sub.B_z @ W @ sub.C_v,
            B_z=sub.B_z @ W,
            C_x=sub.C_x + sub.D_u @ W @ sub.C_x,
            C_v=sub.C_v + sub.D_u @ W @ sub.C_v,
            D_u=sub.D_u @ W,
        ))
    return NdsModel(tuple(subs), model.phi)


def _verify(model: NdsModel, cond_i: bool, cond_ii: bool, tol: Tol):
    """Subsystem-wise and lumped verdicts; ``None`` when ill posed."""
    if not well_posed(model, tol):
        return None
    ok_sub = True
    if cond_i:
        ok_sub &= theorem1_check(model, tol).verdict
    if cond_ii:
        try:
            ok_sub &= theorem2_check(model, tol).verdict
        except NotApplicableError:
            ok_sub = False
    if not ok_sub:
        return False, False, {}
    try:
        lumped = lumped_lft(model, tol)
    except IllPosedError:
        return None
    met = {"cond_i": condition_i_lumped(lumped, tol).verdict,
           "cond_ii": condition_ii_lumped(lumped, tol).verdict,
           "well_posed": True}
    ok_lumped = (met["cond_i"] or not cond_i) and (met["cond_ii"] or not cond_ii)
    return True, ok_lumped, met


def _targets(cond_i: bool, cond_ii: bool):
    if not (cond_i or cond_ii):
        raise ValueError("at least one of cond_i, cond_ii must be targeted")


def synthesize_phi(model: NdsModel, cond_i: bool = True, cond_ii: bool = False,
                   attempts: int = 32, seed: int = 0, tol: Tol = DEFAULT_TOL,
                   support: Optional[np.ndarray] = None) -> SynthesisResult:
    """Search for ``phi`` meeting the targeted conditions.

    Attempt ``k`` draws from ``default_rng([seed, k])``, so results do not
    depend on how many earlier draws were rejected.  A `support` mask
    restricts the nonzero pattern; the existence certificates do not cover
    that case, so the result is marked ``search_only`` and never certified
    impossible.
    """
    _targets(cond_i, cond_ii)
    if attempts < 1:
        raise ValueError("attempts must be at least 1")
    check(model)
    rep = report(model, tol)
    search_only = support is not None
    if not search_only:
        reasons = []
        if cond_i and not rep.exists_phi_for_i:
            reasons.append(_cert_i_text(rep))
        if cond_ii and not rep.exists_phi_for_ii:
            reasons.append(_cert_ii_text(rep))
        if reasons:
            return SynthesisResult(IMPOSSIBLE, certificate="; ".join(reasons))
    d = model.dims
    disagreements = 0
    for k in range(attempts):
        rng = np.random.default_rng([seed, k])
        candidate = model.with_phi(sample_phi(d.n_v, d.n_z, rng, support=support))
        out = _verify(candidate, cond_i, cond_ii, tol)
        if out is None or not out[0]:
            continue
        if not out[1]:
            disagreements += 1
            continue
        return SynthesisResult(FOUND, phi=candidate.phi, attempts_used=k + 1,
                               conditions_met=out[2], search_only=search_only,
                               oracle_disagreements=disagreements)
    return SynthesisResult(EXHAUSTED, attempts_used=attempts, search_only=search_only,
                           oracle_disagreements=disagreements)


def _cert_i_text(rep) -> str:
    bad = [r.index for r in rep.subsystems if not r.in_s_i and not r.thm3_ok]
    if bad:
        return (f"subsystems {bad}: [U_E2^T A_xx; A_zx; V_E1^T] is column rank deficient, "
                f"so no connection matrix gives Condition I")
    return ("local null-space dimensions exceed the number of internal inputs, "
            "so the Condition I test matrix cannot have full column rank")


def _cert_ii_text(rep) -> str:
    if not rep.square:
        return "Condition II existence test needs sum(n_x) == sum(n_e)"
    bad = [r.index for r in rep.subsystems if not r.in_s_ii and not r.thm4_ok]
    if bad:
        return (f"subsystems {bad}: [U_E1, A_xv, B_x] is row rank deficient, "
                f"so no connection matrix gives Condition II")
    return ("local left-null dimensions exceed the number of internal outputs, "
            "so the Condition II test matrix cannot have full row rank")


def _sample_gain(model: NdsModel, rng, tol: Tol) -> Optional[FeedbackGain]:
    blocks = []
    for sub in model.subsystems:
        F = rng.standard_normal((sub.dims.n_u, sub.dims.n_y))
        if numeric_rank(np.eye(sub.dims.n_u) - F @ sub.D_u, tol) < sub.dims.n_u:
            return None
        blocks.append(F)
    return FeedbackGain(tuple(blocks))


def synthesize_feedback(model: NdsModel, cond_i: bool = True, cond_ii: bool = False,
                        attempts: int = 32, seed: int = 0,
                        tol: Tol = DEFAULT_TOL) -> SynthesisResult:
    """Search for a decentralized gain and ``phi`` meeting the targets on the closed loop.

    Condition II cannot be created by output feedback: the closed-loop input
    matrix has the open-loop one as a left factor.  A Condition II target is
    therefore certified impossible whenever ``phi`` alone cannot achieve it.
    """
    _targets(cond_i, cond_ii)
    if attempts < 1:
        raise ValueError("attempts must be at least 1")
    check(model)
    rep = report(model, tol)
    reasons = []
    if cond_ii and rep.d_ii:
        reasons.append(f"subsystems {rep.d_ii}: [U_E1, A_xv, B_x] is row rank deficient; "
                       f"no decentralized static output feedback together with any connection "
                       f"matrix gives Condition II")
    elif cond_ii and not rep.feedback_can_fix_ii:
        reasons.append(_cert_ii_text(rep))
    if cond_i and not rep.feedback_can_fix_i:
        bad = [i for i in rep.d_i if not rep.subsystems[i].feedback_fix_ok]
        if bad:
            reasons.append(f"subsystems {bad}: no output feedback gain makes "
                           f"[U_E2^T A_xx; A_zx; V_E1^T] full column rank")
        else:
            reasons.append("local null-space dimensions exceed the number of internal inputs "
                           "for every feedback gain")
    if reasons:
        return SynthesisResult(IMPOSSIBLE, certificate="; ".join(reasons))
    if not rep.d_i and (rep.exists_phi_for_i or not cond_i):
        return synthesize_phi(model, cond_i, cond_ii, attempts, seed, tol)
    d = model.dims
    disagreements = 0
    for k in range(attempts):
        rng = np.random.default_rng([seed, k])
        gain = _sample_gain(model, rng, tol)
        if gain is None:
            continue
        closed = apply_feedback(model, gain, tol)
        candidate = closed.with_phi(sample_phi(d.n_v, d.n_z, rng))
        out = _verify(candidate, cond_i, cond_ii, tol)
        if out is None or not out[0]:
            continue
        if not out[1]:
            disagreements += 1
            continue
        return SynthesisResult(FOUND, phi=candidate.phi, feedback=gain, attempts_used=k + 1,
                               conditions_met=out[2], oracle_disagreements=disagreements)
    return SynthesisResult(EXHAUSTED, attempts_used=attempts, oracle_disagreements=disagreements)
