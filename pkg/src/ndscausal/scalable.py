"""Subsystem-wise tests for the two descriptor rank conditions of a network.

Both conditions reduce to a rank test on a matrix that is affine in the
connection matrix ``phi``:

* Condition I (``U_E2^T A V_E2`` of full column rank) holds iff
  ``M_I = N_xv - phi (A_zx V_E2 N_xx + A_zv N_xv)`` has full column rank,
  where ``[N_xx; N_xv]`` spans the null space of ``U_E2^T [A_xx V_E2, A_xv]``.
* Condition II (``rank [E B] = n_e``) holds iff
  ``M_II = N_Bz - (N_Bx U_E2^T A_xv + N_Bz A_zv) phi`` has full row rank,
  where ``[N_Bx N_Bz]`` spans the left null space of ``[U_E2^T B_x; B_z]``.

Every SVD and null space involved is block diagonal, so it is computed one
subsystem at a time (:func:`cert_i`, :func:`cert_ii`) and cached on the
subsystem.  Changing only ``phi`` never repeats that work.  Subsystems whose
local null space is trivial (the sets S_I / S_II) contribute no columns
(rows) and are reported as reduced away.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .linalg import (DEFAULT_TOL, ConditionReport, SvdPartition, Tol, blkdiag, fcr_report,
                     frr_report, is_fcr, is_frr, left_null_basis, right_null_basis,
                     svd_partition)
from .model import NdsModel, Scm, Subsystem, check, offsets, stack

__all__ = [
    "SubsystemCertI",
    "SubsystemCertII",
    "NotApplicableError",
    "cert_i",
    "cert_ii",
    "theorem1_matrix",
    "theorem1_check",
    "theorem2_matrix",
    "theorem2_check",
    "connection_independent",
    "pi_matrix",
    "pi_ii_matrix",
    "omega_matrix",
]


class NotApplicableError(ValueError):
    """The subsystem-wise Condition II test needs sum(n_x) == sum(n_e)."""


@dataclass(frozen=True)
class SubsystemCertI:
    """Local data for Condition I.

    ``basis`` spans null(U_E2^T [A_xx V_E2, A_xv]); its first
    ``n_x - r`` rows are ``n_xx_block`` and the last ``n_v`` rows are
    ``n_xv_block``.  ``g_block = A_zx V_E2 N_xx + A_zv N_xv``.
    """

    svd: SvdPartition
    test_matrix: np.ndarray
    n_xx_block: np.ndarray
    n_xv_block: np.ndarray
    g_block: np.ndarray
    in_s_i: bool

    @property
    def basis(self) -> np.ndarray:
        return np.vstack([self.n_xx_block, self.n_xv_block])

    @property
    def k(self) -> int:
        return self.n_xv_block.shape[1]


@dataclass(frozen=True)
class SubsystemCertII:
    """Local data for Condition II.

    Rows of ``[n_bx_block, n_bz_block]`` span the left null space of
    ``[U_E2^T B_x; B_z]``; ``h_block = N_Bx U_E2^T A_xv + N_Bz A_zv``.
    """

    svd: SvdPartition
    test_matrix: np.ndarray
    n_bx_block: np.ndarray
    n_bz_block: np.ndarray
    h_block: np.ndarray
    in_s_ii: bool

    @property
    def k(self) -> int:
        return self.n_bz_block.shape[0]


def e_partition(sub: Subsystem, tol: Tol = DEFAULT_TOL, cache: bool = True) -> SvdPartition:
    key = ("svd", tol)
    if cache and key in sub._cache:
        return sub._cache[key]
    part = svd_partition(sub.E, tol)
    if cache:
        sub._cache[key] = part
    return part


def cert_i(sub: Subsystem, tol: Tol = DEFAULT_TOL, cache: bool = True) -> SubsystemCertI:
    key = ("I", tol)
    if cache and key in sub._cache:
        return sub._cache[key]
    part = e_partition(sub, tol, cache)
    u2, v2 = part.u2, part.v2
    T = u2.T @ np.hstack([sub.A_xx @ v2, sub.A_xv])
    K = right_null_basis(T, tol)
    nx2 = v2.shape[1]
    Kx, Kv = K[:nx2], K[nx2:]
    G = sub.A_zx @ (v2 @ Kx) + sub.A_zv @ Kv
    cert = SubsystemCertI(part, T, Kx, Kv, G, in_s_i=K.shape[1] == 0)
    if cache:
        sub._cache[key] = cert
    return cert


def cert_ii(sub: Subsystem, tol: Tol = DEFAULT_TOL, cache: bool = True) -> SubsystemCertII:
    key = ("II", tol)
    if cache and key in sub._cache:
        return sub._cache[key]
    part = e_partition(sub, tol, cache)
    u2 = part.u2
    Tb = np.vstack([u2.T @ sub.B_x, sub.B_z])
    L = left_null_basis(Tb, tol)
    ne2 = u2.shape[1]
    Lx, Lz = L[:, :ne2], L[:, ne2:]
    H = Lx @ (u2.T @ sub.A_xv) + Lz @ sub.A_zv
    cert = SubsystemCertII(part, Tb, Lx, Lz, H, in_s_ii=L.shape[0] == 0)
    if cache:
        sub._cache[key] = cert
    return cert


def _phi_times(phi: Scm, M: np.ndarray) -> np.ndarray:
    """``phi @ M`` exploiting the coordinate storage of ``phi``."""
    out = np.zeros((phi.n_v_total, M.shape[1]))
    if phi.nnz:
        np.add.at(out, phi.rows, phi.vals[:, None] * M[phi.cols])
    return out


def _times_phi(M: np.ndarray, phi: Scm) -> np.ndarray:
    """``M @ phi`` exploiting the coordinate storage of ``phi``."""
    return _phi_times(Scm(phi.n_z_total, phi.n_v_total, phi.cols, phi.rows, phi.vals), M.T).T


def theorem1_matrix(model: NdsModel, tol: Tol = DEFAULT_TOL,
                    certs: Optional[Sequence[SubsystemCertI]] = None,
                    cache: bool = True) -> np.ndarray:
    """``M_I`` assembled from per-subsystem null-space blocks.

    Column block ``i`` holds subsystem ``i``'s null basis, placed at that
    subsystem's row offsets in ``N_xv`` and ``G``; S_I members contribute no
    columns.  `certs` may be supplied to substitute other local bases.
    """
    if certs is None:
        certs = [cert_i(s, tol, cache) for s in model.subsystems]
    n_xv = blkdiag([c.n_xv_block for c in certs])
    G = blkdiag([c.g_block for c in certs])
    k = sum(c.k for c in certs)
    n_xv = n_xv.reshape(model.phi.n_v_total, k)
    G = G.reshape(model.phi.n_z_total, k)
    return n_xv - _phi_times(model.phi, G)


def _global_m_i(model: NdsModel, tol: Tol) -> Tuple[Optional[np.ndarray], bool]:
    """``M_I`` from one dense null-space computation on the stacked matrices."""
    st = stack(model)
    part = svd_partition(st.E, tol)
    u2, v2 = part.u2, part.v2
    T = u2.T @ np.hstack([st.A_xx @ v2, st.A_xv])
    if is_fcr(T, tol):
        return None, True
    K = right_null_basis(T, tol)
    Kx, Kv = K[:v2.shape[1]], K[v2.shape[1]:]
    phi = model.phi.to_dense()
    return Kv - phi @ (st.A_zx @ v2 @ Kx + st.A_zv @ Kv), False


def theorem1_check(model: NdsModel, tol: Tol = DEFAULT_TOL, reduce: bool = True,
                   cache: bool = True) -> ConditionReport:
    """Condition I for the network, decided through ``M_I``.

    With ``reduce=False`` the null space is computed once for the whole
    stacked network instead of per subsystem; the verdict is the same.
    Well-posedness is not required to form ``M_I`` but the equivalence with
    the lumped model only holds for well-posed connections.
    """
    check(model)
    n_v = model.phi.n_v_total
    if not reduce:
        M, fast = _global_m_i(model, tol)
        if fast:
            return fcr_report(np.zeros((n_v, 0)), tol, note="connection independent")
        return fcr_report(M, tol)
    certs = [cert_i(s, tol, cache) for s in model.subsystems]
    reduced = [i for i, c in enumerate(certs) if c.in_s_i]
    if len(reduced) == len(certs):
        return fcr_report(np.zeros((n_v, 0)), tol, reduced_subsystems=reduced,
                          note="connection independent")
    M = theorem1_matrix(model, tol, certs)
    return fcr_report(M, tol, reduced_subsystems=reduced)


def _require_square(model: NdsModel):
    d = model.dims
    if d.n_x != d.n_e:
        raise NotApplicableError(
            f"subsystem-wise Condition II test needs sum(n_x) == sum(n_e), "
            f"got {d.n_x} != {d.n_e}; use the lumped model")


def theorem2_matrix(model: NdsModel, tol: Tol = DEFAULT_TOL,
                    certs: Optional[Sequence[SubsystemCertII]] = None,
                    cache: bool = True) -> np.ndarray:
    """``M_II`` assembled from per-subsystem left-null-space blocks."""
    if certs is None:
        certs = [cert_ii(s, tol, cache) for s in model.subsystems]
    k = sum(c.k for c in certs)
    n_bz = blkdiag([c.n_bz_block for c in certs]).reshape(k, model.phi.n_z_total)
    H = blkdiag([c.h_block for c in certs]).reshape(k, model.phi.n_v_total)
    return n_bz - _times_phi(H, model.phi)


def _global_m_ii(model: NdsModel, tol: Tol) -> Tuple[Optional[np.ndarray], bool]:
    st = stack(model)
    u2 = svd_partition(st.E, tol).u2
    Tb = np.vstack([u2.T @ st.B_x, st.B_z])
    if is_frr(Tb, tol):
        return None, True
    L = left_null_basis(Tb, tol)
    Lx, Lz = L[:, :u2.shape[1]], L[:, u2.shape[1]:]
    phi = model.phi.to_dense()
    return Lz - (Lx @ u2.T @ st.A_xv + Lz @ st.A_zv) @ phi, False


def theorem2_check(model: NdsModel, tol: Tol = DEFAULT_TOL, reduce: bool = True,
                   cache: bool = True) -> ConditionReport:
    """Condition II for the network, decided through ``M_II``.

    Raises :class:`NotApplicableError` unless ``sum(n_x) == sum(n_e)``.
    """
    check(model)
    _require_square(model)
    n_z = model.phi.n_z_total
    if not reduce:
        M, fast = _global_m_ii(model, tol)
        if fast:
            return frr_report(np.zeros((0, n_z)), tol, note="connection independent")
        return frr_report(M, tol)
    certs = [cert_ii(s, tol, cache) for s in model.subsystems]
    reduced = [i for i, c in enumerate(certs) if c.in_s_ii]
    if len(reduced) == len(certs):
        return frr_report(np.zeros((0, n_z)), tol, reduced_subsystems=reduced,
                          note="connection independent")
    M = theorem2_matrix(model, tol, certs)
    return frr_report(M, tol, reduced_subsystems=reduced)


def connection_independent(model: NdsModel, tol: Tol = DEFAULT_TOL) -> Tuple[bool, bool]:
    """Whether Condition I / II hold for every well-posed ``phi``.

    Condition I is connection independent when each subsystem either has
    ``E(i)`` of full column rank or belongs to S_I; Condition II when each
    either has ``E(i)`` of full row rank or belongs to S_II.  In both cases
    the test matrix factors as an orthonormal basis times ``I - phi A_zv``
    (resp. ``I - A_zv phi``).
    """
    check(model)
    cond_i = all(is_fcr(s.E, tol) or cert_i(s, tol).in_s_i for s in model.subsystems)
    cond_ii = all(is_frr(s.E, tol) or cert_ii(s, tol).in_s_ii for s in model.subsystems)
    return cond_i, cond_ii


def _local_bases(model: NdsModel, tol: Tol):
    parts = [e_partition(s, tol) for s in model.subsystems]
    return parts, blkdiag([p.u2 for p in parts]), blkdiag([p.v2 for p in parts])


def _drop(model: NdsModel, parts, exclude, sizes_fn):
    """Boolean mask keeping the indices of subsystems not in `exclude`."""
    sizes = [sizes_fn(s, p) for s, p in zip(model.subsystems, parts)]
    off = offsets(sizes)
    keep = np.ones(off[-1], dtype=bool)
    for i in exclude:
        keep[off[i]:off[i + 1]] = False
    return keep


def pi_matrix(model: NdsModel, tol: Tol = DEFAULT_TOL, exclude: Sequence[int] = ()) -> np.ndarray:
    """``[[U_E2^T A_xx V_E2, U_E2^T A_xv], [-phi A_zx V_E2, I - phi A_zv]]``.

    Full column rank of this matrix is equivalent to Condition I.  Subsystems
    listed in `exclude` lose their ``U_E2`` rows and their ``V_E2``/``v``
    columns; excluding S_I members leaves the verdict unchanged.
    """
    check(model)
    st = stack(model)
    parts, U2, V2 = _local_bases(model, tol)
    n_v, n_z = st.dims.n_v, st.dims.n_z
    U2 = U2.reshape(st.dims.n_e, -1)
    V2 = V2.reshape(st.dims.n_x, -1)
    phi = model.phi.to_dense()
    top = np.hstack([U2.T @ st.A_xx @ V2, U2.T @ st.A_xv])
    bottom = np.hstack([-phi @ st.A_zx @ V2, np.eye(n_v) - phi @ st.A_zv])
    Pi = np.vstack([top, bottom])
    if not exclude:
        return Pi
    keep_rows_u = _drop(model, parts, exclude, lambda s, p: p.u2.shape[1])
    keep_cols_x = _drop(model, parts, exclude, lambda s, p: p.v2.shape[1])
    keep_cols_v = _drop(model, parts, exclude, lambda s, p: s.dims.n_v)
    rows = np.concatenate([keep_rows_u, np.ones(n_v, dtype=bool)])
    cols = np.concatenate([keep_cols_x, keep_cols_v])
    return Pi[np.ix_(rows, cols)]


def pi_ii_matrix(model: NdsModel, tol: Tol = DEFAULT_TOL,
                 exclude: Sequence[int] = ()) -> np.ndarray:
    """``[[U_E2^T B_x, U_E2^T A_xv phi], [B_z, -(I - A_zv phi)]]``.

    Full row rank of this matrix is equivalent to Condition II.  Subsystems
    in `exclude` lose their ``U_E2``/``z`` rows and their ``u`` columns;
    excluding S_II members leaves the verdict unchanged.
    """
    check(model)
    st = stack(model)
    parts, U2, _ = _local_bases(model, tol)
    n_z = st.dims.n_z
    U2 = U2.reshape(st.dims.n_e, -1)
    phi = model.phi.to_dense()
    top = np.hstack([U2.T @ st.B_x, U2.T @ st.A_xv @ phi])
    bottom = np.hstack([st.B_z, -(np.eye(n_z) - st.A_zv @ phi)])
    Pi = np.vstack([top, bottom])
    if not exclude:
        return Pi
    keep_rows_u = _drop(model, parts, exclude, lambda s, p: p.u2.shape[1])
    keep_rows_z = _drop(model, parts, exclude, lambda s, p: s.dims.n_z)
    keep_cols_u = _drop(model, parts, exclude, lambda s, p: s.dims.n_u)
    rows = np.concatenate([keep_rows_u, keep_rows_z])
    cols = np.concatenate([keep_cols_u, np.ones(n_z, dtype=bool)])
    return Pi[np.ix_(rows, cols)]


def omega_matrix(model: NdsModel, tol: Tol = DEFAULT_TOL) -> np.ndarray:
    """``U_E2^T (A_xx + A_xv phi (I - A_zv phi)^-1 A_zx) V_E2`` via the lumped model."""
    from .lumped import lumped_lft

    lumped = lumped_lft(model, tol)
    part = svd_partition(lumped.E, tol)
    return part.u2.T @ lumped.A @ part.v2


def reduced_subsystems_i(model: NdsModel, tol: Tol = DEFAULT_TOL) -> List[int]:
    return [i for i, s in enumerate(model.subsystems) if cert_i(s, tol).in_s_i]


def reduced_subsystems_ii(model: NdsModel, tol: Tol = DEFAULT_TOL) -> List[int]:
    return [i for i, s in enumerate(model.subsystems) if cert_ii(s, tol).in_s_ii]
