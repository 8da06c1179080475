"""Reproducible random networks with prescribed structural properties.

Standard normal matrices are almost surely of generic rank, so every
deficiency a profile asks for is built in by explicit surgery and then
re-verified with the same predicate the analysis uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .constructibility import cor1_subsystem, feedback_rescues_thm3, thm3_subsystem, thm4_subsystem
from .linalg import DEFAULT_TOL, blkdiag
from .model import NdsModel, Scm, Subsystem
from .scalable import cert_i, cert_ii, e_partition

__all__ = [
    "PROFILES",
    "GenProfile",
    "GenerationError",
    "gen_subsystem",
    "gen_model",
    "gen_benchmark_model",
    "sample_phi",
    "sample_well_posed_phi",
]

PROFILES = (
    "generic",
    "square",
    "rectangular",
    "independent-I",
    "independent-II",
    "thm3-violating",
    "thm4-violating",
    "cor1-rescuable",
    "d2-blocked",
)

REJECTION_BUDGET = 1000


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenProfile:
    """A named instance family with caps on the per-subsystem dimensions.

    ``max_dim`` bounds ``n_x`` and ``n_e``, ``max_channels`` bounds ``n_v``
    and ``n_z``, ``max_io`` bounds ``n_u`` and ``n_y`` (profiles that need
    more input columns to be connection independent may exceed it).
    """

    name: str = "generic"
    max_dim: int = 4
    max_channels: int = 2
    max_io: int = 2

    def __post_init__(self):
        if self.name not in PROFILES:
            raise ValueError(f"unknown profile {self.name!r}; choose from {', '.join(PROFILES)}")
        if self.max_dim < 1 or self.max_channels < 0 or self.max_io < 0:
            raise ValueError("dimension caps must be max_dim >= 1, others >= 0")
        if self.name == "rectangular" and self.max_dim < 2:
            raise ValueError("rectangular profile needs max_dim >= 2")


RngLike = Union[None, int, np.random.Generator]


def _orthonormal(n: int, k: int, rng) -> np.ndarray:
    if k == 0:
        return np.zeros((n, 0))
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return q


def _low_rank(n_e: int, n_x: int, r: int, rng) -> np.ndarray:
    """Exact-rank ``r`` matrix with singular values in [0.5, 2]."""
    s = rng.uniform(0.5, 2.0, size=r)
    return (_orthonormal(n_e, r, rng) * s) @ _orthonormal(n_x, r, rng).T


def _unit(n: int, rng) -> np.ndarray:
    c = rng.standard_normal(n)
    return c / np.linalg.norm(c)


def _draw_dims(p: GenProfile, rng):
    D, C, IO = p.max_dim, p.max_channels, p.max_io
    n_v = int(rng.integers(0, C + 1))
    n_z = int(rng.integers(0, C + 1))
    n_u = int(rng.integers(0, IO + 1))
    n_y = int(rng.integers(0, IO + 1))
    name = p.name
    if name == "independent-I":
        n_v = min(n_v, D - 1)
        n_x = int(rng.integers(1, D - n_v + 1))
        n_e = int(rng.integers(n_x + n_v, D + 1))
    else:
        n_x = int(rng.integers(1, D + 1))
        if name in ("square", "independent-II", "d2-blocked"):
            n_e = n_x
        elif name == "rectangular":
            n_e = int(rng.choice([k for k in range(1, D + 1) if k != n_x]))
        else:
            n_e = int(np.clip(n_x + rng.integers(-1, 2), 1, D))
    full = min(n_e, n_x)
    if name in ("thm3-violating", "cor1-rescuable"):
        r = int(rng.integers(0, min(full, n_x - 1) + 1))
    elif name in ("thm4-violating", "d2-blocked"):
        r = int(rng.integers(0, min(full, n_e - 1) + 1))
    else:
        r = int(rng.integers(0, full + 1))
    if name == "independent-II":
        n_u = n_e - r + n_z + int(rng.integers(0, 2))
    if name == "cor1-rescuable":
        n_y = max(n_y, 1)
        n_u = max(n_u, 1)
    return n_x, n_e, r, n_v, n_z, n_u, n_y


def _violate_thm3(m: dict, part, rng):
    """Make ``[U_E2^T A_xx; A_zx; V_E1^T] w = 0`` for some ``w`` in null(E)."""
    w = part.v2 @ _unit(part.v2.shape[1], rng)
    proj = np.eye(w.size) - np.outer(w, w)
    m["A_zx"] = m["A_zx"] @ proj
    m["A_xx"] = m["A_xx"] - part.u2 @ (part.u2.T @ m["A_xx"] @ np.outer(w, w))


def _violate_thm4(m: dict, part, rng):
    """Make ``y^T [U_E1, A_xv, B_x] = 0`` for some ``y`` in the left null of E."""
    y = part.u2 @ _unit(part.u2.shape[1], rng)
    proj = np.eye(y.size) - np.outer(y, y)
    m["A_xv"] = proj @ m["A_xv"]
    m["B_x"] = proj @ m["B_x"]


def _local_cond_i_defect(m: dict, part, rng):
    """Rank-deficient ``U_E2^T A_xx V_E2`` while keeping ``A_zx`` generic."""
    w = part.v2 @ _unit(part.v2.shape[1], rng)
    m["A_xx"] = m["A_xx"] - part.u2 @ (part.u2.T @ m["A_xx"] @ np.outer(w, w))


def _draw(p: GenProfile, rng) -> Subsystem:
    n_x, n_e, r, n_v, n_z, n_u, n_y = _draw_dims(p, rng)
    g = rng.standard_normal
    m = {
        "E": _low_rank(n_e, n_x, r, rng),
        "A_xx": g((n_e, n_x)), "A_xv": g((n_e, n_v)), "B_x": g((n_e, n_u)),
        "A_zx": g((n_z, n_x)), "A_zv": g((n_z, n_v)), "B_z": g((n_z, n_u)),
        "C_x": g((n_y, n_x)), "C_v": g((n_y, n_v)), "D_u": g((n_y, n_u)),
    }
    part = e_partition(Subsystem.build(m["E"], m["A_xx"]), DEFAULT_TOL, cache=False)
    name = p.name
    if name in ("thm3-violating", "cor1-rescuable"):
        _violate_thm3(m, part, rng)
    elif name in ("thm4-violating", "d2-blocked"):
        _violate_thm4(m, part, rng)
    elif name in ("generic", "square", "rectangular"):
        kind = rng.choice(["none", "thm3", "cond-i", "thm4", "zero-azv"],
                          p=[0.4, 0.15, 0.15, 0.15, 0.15])
        if kind == "thm3" and part.v2.shape[1]:
            _violate_thm3(m, part, rng)
        elif kind == "cond-i" and part.v2.shape[1]:
            _local_cond_i_defect(m, part, rng)
        elif kind == "thm4" and part.u2.shape[1]:
            _violate_thm4(m, part, rng)
        elif kind == "zero-azv":
            m["A_zv"] = np.zeros_like(m["A_zv"])
    return Subsystem.build(**m, n_v=n_v, n_z=n_z, n_u=n_u, n_y=n_y)


def _fits(p: GenProfile, sub: Subsystem) -> bool:
    tol = DEFAULT_TOL
    d = sub.dims
    name = p.name
    if name == "square":
        return d.n_e == d.n_x
    if name == "rectangular":
        return d.n_e != d.n_x
    if name == "independent-I":
        return cert_i(sub, tol).in_s_i
    if name == "independent-II":
        return d.n_e == d.n_x and cert_ii(sub, tol).in_s_ii
    if name == "thm3-violating":
        return not thm3_subsystem(sub, tol) and not cert_i(sub, tol).in_s_i
    if name == "thm4-violating":
        return not thm4_subsystem(sub, tol)
    if name == "cor1-rescuable":
        return (not thm3_subsystem(sub, tol) and cor1_subsystem(sub, tol)
                and feedback_rescues_thm3(sub, tol))
    if name == "d2-blocked":
        return d.n_e == d.n_x and not thm4_subsystem(sub, tol)
    return True


def _profile(profile) -> GenProfile:
    return profile if isinstance(profile, GenProfile) else GenProfile(str(profile))


def gen_subsystem(profile: Union[str, GenProfile], rng: RngLike = None) -> Subsystem:
    """One subsystem satisfying `profile`, by rejection sampling."""
    p = _profile(profile)
    rng = np.random.default_rng(rng)
    for _ in range(REJECTION_BUDGET):
        sub = _draw(p, rng)
        if _fits(p, sub):
            return sub
    raise GenerationError(f"profile {p.name!r}: no valid subsystem in {REJECTION_BUDGET} draws")


def sample_phi(n_v: int, n_z: int, rng, density: Optional[float] = None,
               support: Optional[np.ndarray] = None) -> Scm:
    """I.i.d. standard normal entries, optionally thinned or restricted to `support`."""
    M = rng.standard_normal((n_v, n_z))
    if density is not None:
        M = M * (rng.random((n_v, n_z)) < density)
    if support is not None:
        M = M * np.asarray(support, dtype=bool)
    return Scm.from_dense(M)


def _interconnection_cond(model: NdsModel, phi: Scm) -> float:
    n_z = phi.n_z_total
    if n_z == 0:
        return 1.0
    A_zv = blkdiag([s.A_zv for s in model.subsystems]).reshape(n_z, phi.n_v_total)
    s = np.linalg.svd(np.eye(n_z) - A_zv @ phi.to_dense(), compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else np.inf


def sample_well_posed_phi(model: NdsModel, rng, max_cond: float = 1e3,
                          density: Optional[float] = None) -> Scm:
    """Resample until ``I - A_zv phi`` has condition number at most `max_cond`."""
    d = model.dims
    for _ in range(REJECTION_BUDGET):
        phi = sample_phi(d.n_v, d.n_z, rng, density)
        if _interconnection_cond(model, phi) <= max_cond:
            return phi
    raise GenerationError(f"no well-conditioned connection matrix in {REJECTION_BUDGET} draws")


def gen_model(N: int, profile: Union[str, GenProfile] = "generic", rng: RngLike = None,
              max_cond: float = 1e3) -> NdsModel:
    """`N` subsystems from `profile` joined by a random well-posed ``phi``.

    For ``d2-blocked`` one randomly placed subsystem violates the Condition II
    certificate and the rest are drawn from the square family.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    p = _profile(profile)
    rng = np.random.default_rng(rng)
    if p.name == "d2-blocked":
        blocked = int(rng.integers(0, N))
        square = GenProfile("square", p.max_dim, p.max_channels, p.max_io)
        subs = [gen_subsystem(p if i == blocked else square, rng) for i in range(N)]
    else:
        subs = [gen_subsystem(p, rng) for _ in range(N)]
    model = NdsModel(tuple(subs), Scm.zeros(0, 0))
    return model.with_phi(sample_well_posed_phi(model, rng, max_cond))


def gen_benchmark_model(N: int, dims: int = 4, rng: RngLike = None,
                        links_per_input: int = 2) -> NdsModel:
    """Square network of `N` identical-shape subsystems for timing runs.

    Each subsystem has ``n_x = n_e = dims``, ``rank E = dims // 2`` and one
    internal input and output; ``phi`` couples every internal input to a few
    random internal outputs, so the network is sparse but connected.
    """
    rng = np.random.default_rng(rng)
    r = dims // 2
    g = rng.standard_normal
    subs = []
    for _ in range(N):
        subs.append(Subsystem.build(
            _low_rank(dims, dims, r, rng), g((dims, dims)), g((dims, 1)), g((dims, 2)),
            g((1, dims)), g((1, 1)), g((1, 2)), g((1, dims)), g((1, 1)), g((1, 2))))
    model = NdsModel(tuple(subs), Scm.zeros(0, 0))
    k = min(links_per_input, N)
    for _ in range(REJECTION_BUDGET):
        rows = np.repeat(np.arange(N), k)
        cols = np.concatenate([rng.choice(N, size=k, replace=False) for _ in range(N)])
        phi = Scm(N, N, rows, cols, g(N * k) / np.sqrt(k))
        if _interconnection_cond(model, phi) <= 1e4:
            return model.with_phi(phi)
    raise GenerationError("no well-conditioned benchmark connection matrix")
