"""Dense complex matrices, polar parts, and subspaces of matrix spaces.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.
Subspaces are stored through an orthonormal basis for the trace inner
product ``<x, y> = tr(y* x)``, which is the Euclidean inner product of the
flattened entries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ParseError, PreconditionError

# Products are formed in chunks of at most this many matrix entries.
_CHUNK_ENTRIES = 2_000_000


@dataclass(frozen=True)
class Tolerance:
    """Numerical thresholds shared by every routine.

    eq_eps : equality tolerance, applied as ``eq_eps * (1 + norm)``.
    rank_eps : singular values below ``rank_eps * max(s_max, 1)`` count as zero.
    series_eps : stopping threshold for the binomial root series.
    """

    eq_eps: float = 1e-9
    rank_eps: float = 1e-8
    series_eps: float = 1e-12

    def __post_init__(self):
        for name in ("eq_eps", "rank_eps", "series_eps"):
            val = getattr(self, name)
            if not (math.isfinite(val) and 0 < val < 1):
                raise PreconditionError(f"{name} must lie in (0, 1), got {val}")

    def close(self, x, y, factor: float = 1.0) -> bool:
        """Operator-norm closeness relative to the size of the operands."""
        x = np.asarray(x)
        y = np.asarray(y)
        if x.shape != y.shape:
            return False
        scale = 1.0 + max(opnorm(x), opnorm(y))
        return opnorm(x - y) <= factor * self.eq_eps * scale

    def scaled(self, factor: float) -> "Tolerance":
        return Tolerance(
            min(self.eq_eps * factor, 0.5),
            min(self.rank_eps * factor, 0.5),
            min(self.series_eps * factor, 0.5),
        )

    def as_dict(self) -> dict:
        return {"eq_eps": self.eq_eps, "rank_eps": self.rank_eps, "series_eps": self.series_eps}


DEFAULT_TOL = Tolerance()


def as_matrix(m, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Coerce to a finite 2-D complex array, optionally checking its shape."""
    arr = np.array(m, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"expected shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError("matrix has non-finite entries")
    return arr


def dag(x: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.conj(x).T


def eye(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.complex128)


def opnorm(x) -> float:
    """Operator norm, i.e. the largest singular value."""
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2))


def rank_threshold(s_max: float, tol: Tolerance = DEFAULT_TOL) -> float:
    return tol.rank_eps * max(s_max, 1.0)


def numerical_rank(x, tol: Tolerance = DEFAULT_TOL) -> int:
    s = np.linalg.svd(np.asarray(x), compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > rank_threshold(s[0], tol)))


def range_projector(x, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthogonal projection onto the column space of ``x``."""
    x = np.asarray(x, dtype=np.complex128)
    u, s, _ = np.linalg.svd(x)
    if s.size == 0:
        return np.zeros((x.shape[0], x.shape[0]), dtype=np.complex128)
    r = int(np.sum(s > rank_threshold(s[0], tol)))
    ur = u[:, :r]
    return ur @ dag(ur)


def polar(x, tol: Tolerance = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Polar decomposition ``x = r |x|`` with ``r`` the minimal partial isometry.

    Singular directions below the rank threshold are dropped from ``r``, so
    ``r* r`` is the right support and ``r r*`` the left support of ``x``.
    """
    x = as_matrix(x)
    u, s, vh = np.linalg.svd(x, full_matrices=False)
    if s.size == 0:
        return np.zeros_like(x), np.zeros((x.shape[1], x.shape[1]), dtype=np.complex128)
    r = int(np.sum(s > rank_threshold(s[0], tol)))
    part = u[:, :r] @ vh[:r]
    modulus = dag(vh) @ np.diag(s) @ vh
    return part, modulus


def partial_isometry_part(x, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    return polar(x, tol)[0]


def is_projection(p, tol: Tolerance = DEFAULT_TOL) -> bool:
    p = np.asarray(p)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        return False
    return tol.close(p, dag(p)) and tol.close(p @ p, p)


def is_partial_isometry(v, tol: Tolerance = DEFAULT_TOL) -> bool:
    v = np.asarray(v)
    return tol.close(v @ dag(v) @ v, v)


def psd_sqrt(h: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian positive semidefinite matrix via eigh."""
    h = (h + dag(h)) / 2
    w, q = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    return (q * np.sqrt(w)) @ dag(q)


# ---------------------------------------------------------------- JSON I/O

def matrix_to_json(m) -> dict:
    m = as_matrix(m)
    flat = m.reshape(-1)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_json(obj) -> np.ndarray:
    try:
        rows = int(obj["rows"])
        cols = int(obj["cols"])
        data = obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad matrix object: {exc}") from exc
    if rows < 0 or cols < 0 or len(data) != rows * cols:
        raise ParseError(f"matrix data has {len(data)} entries, expected {rows * cols}")
    try:
        vals = [complex(float(re), float(im)) for re, im in data]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"matrix entries must be [re, im] pairs: {exc}") from exc
    arr = np.array(vals, dtype=np.complex128).reshape(rows, cols)
    if not np.all(np.isfinite(arr)):
        raise ParseError("matrix has non-finite entries")
    return arr


# ---------------------------------------------------------------- subspaces

def _orthonormal_rows(vecs: np.ndarray, tol: Tolerance) -> np.ndarray:
    if vecs.shape[0] == 0:
        return vecs
    _, s, vh = np.linalg.svd(vecs, full_matrices=False)
    r = int(np.sum(s > rank_threshold(s[0], tol)))
    return vh[:r].copy()


class MatSubspace:
    """A linear subspace of the ``rows x cols`` complex matrices.

    The basis is orthonormal for the trace inner product. Rank decisions
    use ``tol.rank_eps`` relative to ``max(s_max, 1)``, so numerical noise on
    inputs of unit size is discarded rather than promoted to a direction.
    """

    def __init__(self, shape: tuple[int, int], vectors: np.ndarray, tol: Tolerance = DEFAULT_TOL):
        self.shape = (int(shape[0]), int(shape[1]))
        n = self.shape[0] * self.shape[1]
        vectors = np.asarray(vectors, dtype=np.complex128).reshape(-1, n)
        self.vectors = vectors
        self.tol = tol

    # construction
    @classmethod
    def span(cls, mats: Iterable, shape: tuple[int, int] | None = None,
             tol: Tolerance = DEFAULT_TOL) -> "MatSubspace":
        mats = [np.asarray(m, dtype=np.complex128) for m in mats]
        if shape is None:
            if not mats:
                raise DimensionError("span of no matrices needs an explicit shape")
            shape = mats[0].shape
        shape = (int(shape[0]), int(shape[1]))
        for m in mats:
            if m.shape != shape:
                raise DimensionError(f"span: shape {m.shape} does not match {shape}")
        if not mats:
            return cls.zero(shape, tol)
        vecs = np.stack([m.reshape(-1) for m in mats])
        return cls(shape, _orthonormal_rows(vecs, tol), tol)

    @classmethod
    def zero(cls, shape: tuple[int, int], tol: Tolerance = DEFAULT_TOL) -> "MatSubspace":
        return cls(shape, np.zeros((0, shape[0] * shape[1]), dtype=np.complex128), tol)

    @classmethod
    def full(cls, shape: tuple[int, int], tol: Tolerance = DEFAULT_TOL) -> "MatSubspace":
        n = shape[0] * shape[1]
        return cls(shape, np.eye(n, dtype=np.complex128), tol)

    # basic access
    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def __len__(self) -> int:
        return self.dim

    @property
    def basis(self) -> np.ndarray:
        """Basis as an array of shape ``(dim, rows, cols)``."""
        return self.vectors.reshape(self.dim, *self.shape)

    def __iter__(self):
        return iter(self.basis)

    def __repr__(self) -> str:
        return f"MatSubspace(shape={self.shape}, dim={self.dim})"

    def _check_shape(self, other: "MatSubspace"):
        if self.shape != other.shape:
            raise DimensionError(f"subspace shapes differ: {self.shape} vs {other.shape}")

    def coords(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=np.complex128)
        if m.shape != self.shape:
            raise DimensionError(f"matrix shape {m.shape} does not match subspace {self.shape}")
        return np.conj(self.vectors) @ m.reshape(-1)

    def element(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if self.dim == 0:
            return np.zeros(self.shape, dtype=np.complex128)
        return (coeffs @ self.vectors).reshape(self.shape)

    def project(self, m) -> np.ndarray:
        return self.element(self.coords(m))

    def residual(self, m) -> float:
        """Frobenius distance from ``m`` to the subspace."""
        m = np.asarray(m, dtype=np.complex128)
        return float(np.linalg.norm(m - self.project(m)))

    def contains(self, m, tol: Tolerance | None = None) -> bool:
        tol = tol or self.tol
        m = np.asarray(m, dtype=np.complex128)
        return self.residual(m) < tol.eq_eps * (1.0 + float(np.linalg.norm(m)))

    # lattice operations
    def adjoint(self) -> "MatSubspace":
        return MatSubspace.span([dag(b) for b in self.basis], (self.shape[1], self.shape[0]), self.tol)

    def __add__(self, other: "MatSubspace") -> "MatSubspace":
        self._check_shape(other)
        vecs = np.vstack([self.vectors, other.vectors])
        return MatSubspace(self.shape, _orthonormal_rows(vecs, self.tol), self.tol)

    def principal_angles(self, other: "MatSubspace") -> np.ndarray:
        """Principal angles, ascending, between self and other.

        Small angles come from the residual norms of the principal vectors
        rather than from arccos, which loses all precision near zero.
        """
        self._check_shape(other)
        k = min(self.dim, other.dim)
        if k == 0:
            return np.zeros(0)
        _, _, sines = self._principal(other)
        return np.sort(np.arcsin(np.clip(sines, 0.0, 1.0)))[:k]

    def _principal(self, other: "MatSubspace"):
        g = self.vectors @ dag(other.vectors)
        u, s, _ = np.linalg.svd(g)
        pvecs = dag(u) @ self.vectors
        resid = pvecs - (pvecs @ dag(other.vectors)) @ other.vectors
        sines = np.linalg.norm(resid, axis=1)
        return pvecs, s, sines

    def intersect(self, other: "MatSubspace", angle_tol: float | None = None) -> "MatSubspace":
        self._check_shape(other)
        if self.dim == 0 or other.dim == 0:
            return MatSubspace.zero(self.shape, self.tol)
        angle_tol = self.tol.rank_eps if angle_tol is None else angle_tol
        pvecs, _, sines = self._principal(other)
        keep = np.arcsin(np.clip(sines, 0.0, 1.0)) < angle_tol
        return MatSubspace(self.shape, _orthonormal_rows(pvecs[keep], self.tol), self.tol)

    def max_angle(self, other: "MatSubspace") -> float:
        """Largest principal angle, or pi/2 when the dimensions differ."""
        self._check_shape(other)
        if self.dim != other.dim:
            return math.pi / 2
        if self.dim == 0:
            return 0.0
        return float(self.principal_angles(other).max())

    def equal(self, other: "MatSubspace", angle_tol: float | None = None) -> bool:
        angle_tol = self.tol.rank_eps if angle_tol is None else angle_tol
        return self.max_angle(other) < angle_tol

    def subset_of(self, other: "MatSubspace", tol: Tolerance | None = None) -> bool:
        self._check_shape(other)
        return all(other.contains(b, tol) for b in self.basis)

    def map(self, fn, shape: tuple[int, int] | None = None) -> "MatSubspace":
        """Span of the images of the basis under ``fn`` (linear maps only)."""
        imgs = [fn(b) for b in self.basis]
        if shape is None:
            shape = imgs[0].shape if imgs else self.shape
        return MatSubspace.span(imgs, shape, self.tol)

    def product(self, other: "MatSubspace") -> "MatSubspace":
        """Span of all products ``x y`` with x in self and y in other."""
        if self.shape[1] != other.shape[0]:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        shape = (self.shape[0], other.shape[1])
        if self.dim == 0 or other.dim == 0:
            return MatSubspace.zero(shape, self.tol)
        left = self.basis
        right = other.basis
        per_row = other.dim * shape[0] * shape[1]
        step = max(1, _CHUNK_ENTRIES // max(per_row, 1))
        acc = np.zeros((0, shape[0] * shape[1]), dtype=np.complex128)
        for start in range(0, self.dim, step):
            block = np.einsum("irk,jkc->ijrc", left[start:start + step], right)
            vecs = np.vstack([acc, block.reshape(-1, shape[0] * shape[1])])
            acc = _orthonormal_rows(vecs, self.tol)
        return MatSubspace(shape, acc, self.tol)

    def random_element(self, rng: np.random.Generator, real: bool = False) -> np.ndarray:
        if self.dim == 0:
            return np.zeros(self.shape, dtype=np.complex128)
        c = rng.standard_normal(self.dim)
        if not real:
            c = c + 1j * rng.standard_normal(self.dim)
        return self.element(c / np.linalg.norm(c))

    # serialization
    def to_json(self) -> dict:
        return {"basis": [matrix_to_json(b) for b in self.basis],
                "rows": self.shape[0], "cols": self.shape[1]}

    @classmethod
    def from_json(cls, obj, tol: Tolerance = DEFAULT_TOL) -> "MatSubspace":
        try:
            mats = [matrix_from_json(m) for m in obj["basis"]]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad subspace object: {exc}") from exc
        shape = None
        if "rows" in obj and "cols" in obj:
            shape = (int(obj["rows"]), int(obj["cols"]))
        if not mats and shape is None:
            raise ParseError("empty subspace needs rows and cols")
        return cls.span(mats, shape, tol)


def matrix_units(m: int, n: int | None = None) -> list[np.ndarray]:
    """The standard basis ``E_ij`` of the m x n matrices, row-major."""
    n = m if n is None else n
    out = []
    for i in range(m):
        for j in range(n):
            e = np.zeros((m, n), dtype=np.complex128)
            e[i, j] = 1.0
            out.append(e)
    return out


def E(i: int, j: int, n: int = 2, m: int | None = None) -> np.ndarray:
    """Matrix unit with a one at (i, j), indices starting at 1."""
    m = n if m is None else m
    out = np.zeros((n, m), dtype=np.complex128)
    out[i - 1, j - 1] = 1.0
    return out


def block(rows: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    return np.block([[np.asarray(b, dtype=np.complex128) for b in row] for row in rows])
