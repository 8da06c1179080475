"""Subsystems, the subsystem connection matrix, and whole-network models.

Each subsystem obeys

    [E dx; z; y] = [[A_xx, A_xv, B_x], [A_zx, A_zv, B_z], [C_x, C_v, D_u]] [x; v; u]

and the network closes the loop with ``v = phi @ z`` on the stacked internal
signals.  Models are immutable once built; matrices are stored read-only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse

__all__ = [
    "Dims",
    "Subsystem",
    "Scm",
    "NdsModel",
    "Stacked",
    "Violation",
    "ModelFormatError",
    "ModelValidationError",
    "MATRIX_FIELDS",
    "validate",
    "check",
    "offsets",
    "stack",
    "load",
    "save",
    "loads",
    "dumps",
    "model_to_dict",
    "model_from_dict",
    "scm_from_json",
    "scm_to_json",
]

DIM_FIELDS = ("n_x", "n_e", "n_z", "n_v", "n_u", "n_y")

# field -> (row dim, column dim)
MATRIX_FIELDS: Dict[str, Tuple[str, str]] = {
    "E": ("n_e", "n_x"),
    "A_xx": ("n_e", "n_x"),
    "A_xv": ("n_e", "n_v"),
    "B_x": ("n_e", "n_u"),
    "A_zx": ("n_z", "n_x"),
    "A_zv": ("n_z", "n_v"),
    "B_z": ("n_z", "n_u"),
    "C_x": ("n_y", "n_x"),
    "C_v": ("n_y", "n_v"),
    "D_u": ("n_y", "n_u"),
}


class ModelFormatError(ValueError):
    """A model file could not be parsed."""


class ModelValidationError(ValueError):
    """A model violates its dimensional or finiteness invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid model: {lines}")


@dataclass(frozen=True)
class Violation:
    subsystem: Optional[int]
    field: str
    message: str

    def __str__(self):
        where = "phi" if self.subsystem is None else f"subsystem {self.subsystem}"
        return f"{where}, field {self.field}: {self.message}"


@dataclass(frozen=True)
class Dims:
    n_x: int
    n_e: int
    n_z: int = 0
    n_v: int = 0
    n_u: int = 0
    n_y: int = 0

    def __add__(self, other: "Dims") -> "Dims":
        return Dims(*(getattr(self, f) + getattr(other, f) for f in DIM_FIELDS))

    def shape_of(self, name: str) -> Tuple[int, int]:
        rows, cols = MATRIX_FIELDS[name]
        return getattr(self, rows), getattr(self, cols)

    def as_dict(self) -> Dict[str, int]:
        return {f: getattr(self, f) for f in DIM_FIELDS}


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Subsystem:
    """One descriptor-form node of the network.

    ``E`` may be rectangular (``n_e != n_x``).  Analysis results that only
    depend on this subsystem's matrices are memoised in ``_cache``; since
    the matrices are read-only, a changed subsystem is a new object and
    starts with an empty cache.
    """

    dims: Dims
    E: np.ndarray
    A_xx: np.ndarray
    A_xv: np.ndarray
    B_x: np.ndarray
    A_zx: np.ndarray
    A_zv: np.ndarray
    B_z: np.ndarray
    C_x: np.ndarray
    C_v: np.ndarray
    D_u: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in MATRIX_FIELDS:
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @classmethod
    def build(cls, E, A_xx, A_xv=None, B_x=None, A_zx=None, A_zv=None, B_z=None,
              C_x=None, C_v=None, D_u=None, *, n_v=None, n_z=None, n_u=None, n_y=None):
        """Build a subsystem, inferring dimensions and zero-filling omitted blocks."""
        E = np.atleast_2d(np.asarray(E, dtype=float))
        n_e, n_x = E.shape

        def cols(M, default):
            return default if M is None else np.atleast_2d(np.asarray(M, float)).shape[1]

        def rows(M, default):
            return default if M is None else np.atleast_2d(np.asarray(M, float)).shape[0]

        n_v = n_v if n_v is not None else cols(A_xv, cols(A_zv, cols(C_v, 0)))
        n_u = n_u if n_u is not None else cols(B_x, cols(B_z, cols(D_u, 0)))
        n_z = n_z if n_z is not None else rows(A_zx, rows(A_zv, rows(B_z, 0)))
        n_y = n_y if n_y is not None else rows(C_x, rows(C_v, rows(D_u, 0)))
        dims = Dims(n_x=n_x, n_e=n_e, n_z=n_z, n_v=n_v, n_u=n_u, n_y=n_y)
        given = dict(A_xx=A_xx, A_xv=A_xv, B_x=B_x, A_zx=A_zx, A_zv=A_zv, B_z=B_z,
                     C_x=C_x, C_v=C_v, D_u=D_u)
        mats = {"E": E}
        for name, value in given.items():
            shape = dims.shape_of(name)
            if value is None:
                mats[name] = np.zeros(shape)
            else:
                mats[name] = np.asarray(value, dtype=float).reshape(shape)
        return cls(dims=dims, **mats)

    def matrices(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in MATRIX_FIELDS}

    def replace(self, **changes) -> "Subsystem":
        """Copy with some matrices replaced; dims are re-derived from shapes."""
        mats = self.matrices()
        mats.update(changes)
        d = self.dims.as_dict()
        for name, (r, c) in MATRIX_FIELDS.items():
            shape = np.shape(mats[name])
            if len(shape) == 2:
                d[r], d[c] = shape
        return Subsystem(dims=Dims(**d), **mats)

    def __eq__(self, other):
        if not isinstance(other, Subsystem):
            return NotImplemented
        return self.dims == other.dims and all(
            np.array_equal(getattr(self, n), getattr(other, n)) for n in MATRIX_FIELDS
        )

    __hash__ = object.__hash__


@dataclass(frozen=True, eq=False)
class Scm:
    """Sparse subsystem connection matrix in coordinate form (0-based)."""

    n_v_total: int
    n_z_total: int
    rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    vals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name, dtype in (("rows", int), ("cols", int), ("vals", float)):
            arr = np.array(getattr(self, name), dtype=dtype).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_entries(cls, n_v_total, n_z_total, entries) -> "Scm":
        entries = list(entries)
        if not entries:
            return cls(n_v_total, n_z_total)
        r, c, v = zip(*entries)
        return cls(n_v_total, n_z_total, r, c, v)

    @classmethod
    def from_dense(cls, M) -> "Scm":
        M = np.asarray(M, dtype=float)
        if M.ndim != 2:
            raise ValueError("dense phi must be 2-D")
        r, c = np.nonzero(M)
        return cls(M.shape[0], M.shape[1], r, c, M[r, c])

    @classmethod
    def zeros(cls, n_v_total, n_z_total) -> "Scm":
        return cls(n_v_total, n_z_total)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_v_total, self.n_z_total

    @property
    def entries(self) -> List[Tuple[int, int, float]]:
        return [(int(r), int(c), float(v)) for r, c, v in zip(self.rows, self.cols, self.vals)]

    @property
    def nnz(self) -> int:
        return self.vals.size

    def to_dense(self) -> np.ndarray:
        M = np.zeros(self.shape)
        M[self.rows, self.cols] = self.vals
        return M

    def to_sparse(self) -> scipy.sparse.csr_array:
        return scipy.sparse.csr_array((self.vals, (self.rows, self.cols)), shape=self.shape)

    def __eq__(self, other):
        if not isinstance(other, Scm):
            return NotImplemented
        return self.shape == other.shape and sorted(self.entries) == sorted(other.entries)

    __hash__ = object.__hash__


@dataclass(frozen=True, eq=False)
class NdsModel:
    subsystems: Tuple[Subsystem, ...]
    phi: Scm

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))

    @property
    def N(self) -> int:
        return len(self.subsystems)

    @property
    def dims(self) -> Dims:
        total = Dims(0, 0)
        for sub in self.subsystems:
            total = total + sub.dims
        return total

    def with_phi(self, phi) -> "NdsModel":
        """Same subsystems (and their cached certificates), new connections."""
        if not isinstance(phi, Scm):
            phi = Scm.from_dense(phi)
        return NdsModel(self.subsystems, phi)

    def __eq__(self, other):
        if not isinstance(other, NdsModel):
            return NotImplemented
        return (len(self.subsystems) == len(other.subsystems)
                and all(a == b for a, b in zip(self.subsystems, other.subsystems))
                and self.phi == other.phi)

    __hash__ = object.__hash__


@dataclass(frozen=True)
class Stacked:
    """Block-diagonal stacking of all subsystem matrices in list order."""

    dims: Dims
    E: np.ndarray
    A_xx: np.ndarray
    A_xv: np.ndarray
    B_x: np.ndarray
    A_zx: np.ndarray
    A_zv: np.ndarray
    B_z: np.ndarray
    C_x: np.ndarray
    C_v: np.ndarray
    D_u: np.ndarray


def validate(model: NdsModel) -> List[Violation]:
    """All invariant violations of `model`; an empty list means valid."""
    out: List[Violation] = []
    for i, sub in enumerate(model.subsystems):
        for f in DIM_FIELDS:
            val = getattr(sub.dims, f)
            if not isinstance(val, (int, np.integer)) or val < 0:
                out.append(Violation(i, f, f"dimension must be a non-negative integer, got {val!r}"))
        for name in MATRIX_FIELDS:
            M = getattr(sub, name)
            try:
                expected = sub.dims.shape_of(name)
            except TypeError:
                continue
            if M.ndim != 2 or M.shape != expected:
                out.append(Violation(i, name, f"shape {M.shape} does not match dims {expected}"))
            elif not np.all(np.isfinite(M)):
                out.append(Violation(i, name, "non-finite entries"))
    d = model.dims
    phi = model.phi
    if phi.n_v_total != d.n_v:
        out.append(Violation(None, "rows", f"phi has {phi.n_v_total} rows, sum of n_v is {d.n_v}"))
    if phi.n_z_total != d.n_z:
        out.append(Violation(None, "cols", f"phi has {phi.n_z_total} cols, sum of n_z is {d.n_z}"))
    bad_r = (phi.rows < 0) | (phi.rows >= phi.n_v_total)
    bad_c = (phi.cols < 0) | (phi.cols >= phi.n_z_total)
    for k in np.flatnonzero(bad_r | bad_c):
        out.append(Violation(None, "entries",
                             f"entry {k} at ({phi.rows[k]}, {phi.cols[k]}) out of bounds "
                             f"for {phi.n_v_total}x{phi.n_z_total}"))
    if not np.all(np.isfinite(phi.vals)):
        out.append(Violation(None, "entries", "non-finite values"))
    seen = set()
    for r, c in zip(phi.rows.tolist(), phi.cols.tolist()):
        if (r, c) in seen:
            out.append(Violation(None, "entries", f"duplicate entry at ({r}, {c})"))
        seen.add((r, c))
    return out


def check(model: NdsModel) -> NdsModel:
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)
    return model


def stack(model: NdsModel, validate_first: bool = True) -> Stacked:
    """Block-diagonal stacking; pass ``validate_first=False`` for a model already checked."""
    if validate_first:
        check(model)
    d = model.dims
    mats = {}
    for name, (rdim, cdim) in MATRIX_FIELDS.items():
        M = np.zeros(d.shape_of(name))
        r = c = 0
        for sub in model.subsystems:
            block = getattr(sub, name)
            M[r:r + block.shape[0], c:c + block.shape[1]] = block
            r += block.shape[0]
            c += block.shape[1]
        mats[name] = M
    return Stacked(dims=d, **mats)


def offsets(sizes: Sequence[int]) -> np.ndarray:
    """Start offsets of consecutive blocks, with the total appended."""
    return np.concatenate([[0], np.cumsum(sizes, dtype=int)]).astype(int)


# -- serialization -----------------------------------------------------------

def _matrix_from_json(value, shape, where) -> np.ndarray:
    if not isinstance(value, list):
        raise ModelFormatError(f"{where}: expected a nested array, got {type(value).__name__}")
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"{where}: not a rectangular numeric array ({exc})") from None
    if arr.size == 0 and arr.ndim == 1:
        arr = arr.reshape(0, shape[1] if shape is not None else 0)
    if arr.ndim != 2:
        raise ModelFormatError(f"{where}: expected 2-D array, got {arr.ndim}-D")
    return arr


def scm_to_json(phi: Scm) -> dict:
    return {"rows": phi.n_v_total, "cols": phi.n_z_total,
            "entries": [[r, c, v] for r, c, v in phi.entries]}


def scm_from_json(value, where="phi") -> Scm:
    if isinstance(value, list):
        arr = _matrix_from_json(value, None, where)
        return Scm.from_dense(arr)
    if not isinstance(value, dict):
        raise ModelFormatError(f"{where}: expected object or nested array")
    for key in ("rows", "cols", "entries"):
        if key not in value:
            raise ModelFormatError(f"{where}: missing key {key!r}")
    entries = value["entries"]
    if not isinstance(entries, list):
        raise ModelFormatError(f"{where}.entries: expected a list")
    triplets = []
    for k, e in enumerate(entries):
        if not (isinstance(e, list) and len(e) == 3):
            raise ModelFormatError(f"{where}.entries[{k}]: expected [row, col, value]")
        r, c, v = e
        if not (isinstance(r, int) and isinstance(c, int)):
            raise ModelFormatError(f"{where}.entries[{k}]: row/col must be integers")
        triplets.append((r, c, float(v)))
    return Scm.from_entries(int(value["rows"]), int(value["cols"]), triplets)


def _subsystem_from_json(obj, i) -> Subsystem:
    where = f"subsystems[{i}]"
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{where}: expected an object")
    dims = {}
    for f in DIM_FIELDS:
        if f not in obj:
            raise ModelFormatError(f"{where}: missing key {f!r}")
        if not isinstance(obj[f], int) or isinstance(obj[f], bool):
            raise ModelFormatError(f"{where}.{f}: expected an integer")
        dims[f] = obj[f]
    dims = Dims(**dims)
    mats = {}
    for name in MATRIX_FIELDS:
        if name not in obj:
            raise ModelFormatError(f"{where}: missing key {name!r}")
        shape = dims.shape_of(name) if all(d >= 0 for d in dims.as_dict().values()) else None
        mats[name] = _matrix_from_json(obj[name], shape, f"{where}.{name}")
    return Subsystem(dims=dims, **mats)


def model_from_dict(data) -> NdsModel:
    if not isinstance(data, dict):
        raise ModelFormatError("top level: expected an object")
    for key in ("subsystems", "phi"):
        if key not in data:
            raise ModelFormatError(f"top level: missing key {key!r}")
    if not isinstance(data["subsystems"], list):
        raise ModelFormatError("subsystems: expected a list")
    subs = [_subsystem_from_json(obj, i) for i, obj in enumerate(data["subsystems"])]
    return NdsModel(tuple(subs), scm_from_json(data["phi"]))


def model_to_dict(model: NdsModel) -> dict:
    subs = []
    for s in model.subsystems:
        obj = dict(s.dims.as_dict())
        for name in MATRIX_FIELDS:
            obj[name] = getattr(s, name).tolist()
        subs.append(obj)
    return {"subsystems": subs, "phi": scm_to_json(model.phi)}


def _reject_constant(name):
    raise ModelFormatError(f"non-finite number {name} is not allowed")


def loads(text: str) -> NdsModel:
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return model_from_dict(data)


def dumps(model: NdsModel, indent: Optional[int] = None) -> str:
    # json renders floats with repr(), which round-trips doubles exactly
    return json.dumps(model_to_dict(model), indent=indent, allow_nan=False)


def load(path) -> NdsModel:
    """Read a model file; dimension problems surface through :func:`validate`."""
    return loads(Path(path).read_text())


def save(model: NdsModel, path) -> None:
    Path(path).write_text(dumps(model) + "\n")
