"""Finite-dimensional operator algebras inside M_n.

An algebra is a product-closed subspace of M_n, recorded with the
convention that fixes its distinguished contractive cone.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DimensionError, ParseError, PreconditionError
from .matcore import (
    DEFAULT_TOL,
    MatSubspace,
    Tolerance,
    as_matrix,
    dag,
    eye,
    matrix_from_json,
    matrix_to_json,
    matrix_units,
    opnorm,
)

MAX_CLOSURE_ROUNDS = 256


class SConvention(str, enum.Enum):
    """Which norm condition defines the cone base.

    HALF_BALL: ``||1 - 2a|| <= 1``.
    SHIFTED_BALL: ``||a|| <= 1`` and ``||1 - a|| <= 1``.
    """

    HALF_BALL = "half-ball"
    SHIFTED_BALL = "shifted"

    @classmethod
    def parse(cls, value) -> "SConvention":
        if isinstance(value, cls):
            return value
        aliases = {"half-ball": cls.HALF_BALL, "half": cls.HALF_BALL, "halfball": cls.HALF_BALL,
                   "shifted": cls.SHIFTED_BALL, "shifted-ball": cls.SHIFTED_BALL}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ParseError(f"unknown convention {value!r}") from None

    @property
    def factor(self) -> float:
        """The scalar K in ``||unit - K a|| <= 1``."""
        return 2.0 if self is SConvention.HALF_BALL else 1.0


@dataclass
class OperatorAlgebra:
    """A product-closed subspace of M_n.

    ``unital`` records whether the identity I_n lies in the algebra; an
    algebra can have its own unit (a projection) without containing I_n.
    """

    n: int
    space: MatSubspace
    convention: SConvention = SConvention.HALF_BALL
    tol: Tolerance = DEFAULT_TOL
    _diagonal: "OperatorAlgebra | None" = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def basis(self) -> np.ndarray:
        return self.space.basis

    @property
    def unital(self) -> bool:
        return self.space.contains(eye(self.n))

    def contains(self, m) -> bool:
        return self.space.contains(as_matrix(m, (self.n, self.n)), self.tol)

    def require(self, m, what: str = "element") -> np.ndarray:
        m = as_matrix(m, (self.n, self.n))
        if not self.contains(m):
            raise PreconditionError(f"{what} is not in the algebra")
        return m

    def is_full(self) -> bool:
        return self.dim == self.n * self.n

    def is_self_adjoint(self) -> bool:
        return all(self.contains(dag(b)) for b in self.basis)

    def diagonal(self) -> "OperatorAlgebra":
        """The largest C*-subalgebra, A intersected with A*."""
        if self._diagonal is None:
            space = self.space.intersect(self.space.adjoint())
            self._diagonal = OperatorAlgebra(self.n, space, self.convention, self.tol)
        return self._diagonal

    def corner(self, p, q=None) -> MatSubspace:
        """``{x in A : x = p x q}``, computed as the image of ``x -> p x q``."""
        q = p if q is None else q
        img = MatSubspace.span([p @ b @ q for b in self.basis], (self.n, self.n), self.tol)
        return img.intersect(self.space)

    def with_tol(self, tol: Tolerance) -> "OperatorAlgebra":
        return OperatorAlgebra(self.n, self.space, self.convention, tol)

    def to_json(self) -> dict:
        return {"ambient": self.n, "generators": [matrix_to_json(b) for b in self.basis],
                "convention": self.convention.value}

    def __repr__(self) -> str:
        return f"OperatorAlgebra(n={self.n}, dim={self.dim}, convention={self.convention.value})"


def close_under_products(space: MatSubspace, generators: MatSubspace) -> MatSubspace:
    """Smallest product-closed subspace containing ``space`` and ``generators``.

    Grows by right multiplication with the generators until the dimension
    stops increasing; every word in the generators is reached this way.
    """
    cur = space + generators
    for _ in range(MAX_CLOSURE_ROUNDS):
        nxt = cur + cur.product(generators)
        if nxt.dim == cur.dim:
            return cur
        cur = nxt
    raise ConsistencyError("product closure did not stabilize")


def make_algebra(n: int, generators, convention="half-ball",
                 tol: Tolerance = DEFAULT_TOL) -> OperatorAlgebra:
    """Algebra generated by ``generators`` inside M_n (no unit is added)."""
    if n < 1:
        raise DimensionError("ambient dimension must be positive")
    mats = [as_matrix(g, (n, n)) for g in generators]
    gens = MatSubspace.span(mats, (n, n), tol)
    space = close_under_products(gens, gens)
    return OperatorAlgebra(n, space, SConvention.parse(convention), tol)


def full_algebra(n: int, convention="half-ball", tol: Tolerance = DEFAULT_TOL) -> OperatorAlgebra:
    return OperatorAlgebra(n, MatSubspace.full((n, n), tol), SConvention.parse(convention), tol)


def upper_triangular(n: int, convention="half-ball", tol: Tolerance = DEFAULT_TOL) -> OperatorAlgebra:
    mats = [u for u in matrix_units(n) if np.argmax(np.abs(u)) // n <= np.argmax(np.abs(u)) % n]
    return OperatorAlgebra(n, MatSubspace.span(mats, (n, n), tol), SConvention.parse(convention), tol)


def algebra_from_space(space: MatSubspace, convention="half-ball") -> OperatorAlgebra:
    """Wrap a subspace already known to be product closed (checked)."""
    if space.shape[0] != space.shape[1]:
        raise DimensionError("an algebra lives in square matrices")
    if not space.product(space).subset_of(space):
        raise PreconditionError("subspace is not closed under products")
    return OperatorAlgebra(space.shape[0], space, SConvention.parse(convention), space.tol)


def unitize(A: OperatorAlgebra) -> OperatorAlgebra:
    if A.unital:
        return A
    space = A.space + MatSubspace.span([eye(A.n)], (A.n, A.n), A.tol)
    return OperatorAlgebra(A.n, space, A.convention, A.tol)


def algebra_from_json(obj, tol: Tolerance = DEFAULT_TOL) -> OperatorAlgebra:
    try:
        n = int(obj["ambient"])
        gens = [matrix_from_json(g) for g in obj["generators"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad algebra object: {exc}") from exc
    return make_algebra(n, gens, obj.get("convention", "half-ball"), tol)


# ---------------------------------------------------------------- units and HSAs

def unit_of(S: MatSubspace, tol: Tolerance | None = None) -> np.ndarray | None:
    """Two-sided identity of a product-closed subspace, if it has one of norm 1.

    Solves ``e s = s e = s`` for ``e`` in S by least squares. The zero space
    returns the zero matrix, its identity.
    """
    tol = tol or S.tol
    n = S.shape[0]
    if S.shape[0] != S.shape[1]:
        raise DimensionError("unit_of needs square matrices")
    if S.dim == 0:
        return np.zeros((n, n), dtype=np.complex128)
    basis = S.basis
    # column j of the system: the map coefficient j -> (b_j s_k - s_k, s_k b_j - s_k)
    cols = []
    for bj in basis:
        left = np.einsum("rk,ikc->irc", bj, basis).reshape(-1)
        right = np.einsum("irk,kc->irc", basis, bj).reshape(-1)
        cols.append(np.concatenate([left, right]))
    mat = np.stack(cols, axis=1)
    rhs = np.concatenate([basis.reshape(-1), basis.reshape(-1)])
    coef, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    e = S.element(coef)
    if np.linalg.norm(mat @ coef - rhs) > tol.eq_eps * (1 + np.linalg.norm(rhs)) * 10:
        return None
    if abs(opnorm(e) - 1.0) > tol.eq_eps * 10:
        return None
    return e


def hsa_check(A: OperatorAlgebra, S: MatSubspace) -> bool:
    """Is S a hereditary subalgebra of A, i.e. ``S A S ⊆ S`` with a unit?"""
    if not S.subset_of(A.space, A.tol):
        return False
    if not S.product(A.space).product(S).subset_of(S, A.tol):
        return False
    return unit_of(S, A.tol) is not None


# ---------------------------------------------------------------- Wedderburn

@dataclass
class BlockDecomposition:
    """Minimal central projections of a finite-dimensional C*-algebra."""

    algebra: OperatorAlgebra
    central: list[np.ndarray]
    unit: np.ndarray

    def block_ranks(self, p) -> tuple[int, ...]:
        """Ambient rank of ``z_i p`` for each minimal central projection z_i.

        Two projections of the algebra are Murray-von Neumann equivalent in it
        exactly when these tuples coincide: a block of multiplicity m scales
        every rank by the same m.
        """
        return tuple(int(round(np.trace(z @ p).real)) for z in self.central)

    def multiplicities(self) -> list[int]:
        """Ambient rank of a minimal projection in each block."""
        return [minimal_projection_rank(self.algebra, z) for z in self.central]

    def __len__(self) -> int:
        return len(self.central)


def center(C: OperatorAlgebra) -> MatSubspace:
    """``{z in C : z c = c z for all c in C}`` by a null-space computation."""
    basis = C.basis
    if C.dim == 0:
        return MatSubspace.zero((C.n, C.n), C.tol)
    cols = []
    for bi in basis:
        comm = np.einsum("rk,jkc->jrc", bi, basis) - np.einsum("jrk,kc->jrc", basis, bi)
        cols.append(comm.reshape(-1))
    mat = np.stack(cols, axis=1)
    _, s, vh = np.linalg.svd(mat)
    thresh = C.tol.rank_eps * max(s[0] if s.size else 0.0, 1.0)
    rank = int(np.sum(s > thresh))
    null = vh[rank:]
    mats = [C.space.element(np.conj(row)) for row in null]
    return MatSubspace.span(mats, (C.n, C.n), C.tol)


def _spectral_projections(h: np.ndarray, gap: float) -> list[tuple[float, np.ndarray]]:
    w, q = np.linalg.eigh((h + dag(h)) / 2)
    groups: list[list[int]] = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[i - 1] > gap:
            groups.append([i])
        else:
            groups[-1].append(i)
    out = []
    for g in groups:
        qg = q[:, g]
        out.append((float(np.mean(w[g])), qg @ dag(qg)))
    return out


def _require_cstar(C: OperatorAlgebra):
    if not C.is_self_adjoint():
        raise PreconditionError("algebra is not closed under adjoints")
    if not C.space.product(C.space).subset_of(C.space, C.tol):
        raise PreconditionError("subspace is not closed under products")


def _split_by_random_element(C: OperatorAlgebra, space: MatSubspace, unit: np.ndarray,
                             expected: int, rng: np.random.Generator, attempts: int = 12):
    """Spectral projections (inside ``unit``) of a random self-adjoint element."""
    for _ in range(attempts):
        z = space.random_element(rng)
        h = (z + dag(z)) / 2
        h = h / max(opnorm(h), 1e-300)
        # shift so that the part of range(unit) sits at eigenvalues >= 2
        shifted = h + 3.0 * unit
        projs = [p for lam, p in _spectral_projections(shifted, 1e-6) if lam > 1.0]
        if len(projs) == expected and all(C.contains(p) for p in projs):
            return projs
    return None


def wedderburn(C: OperatorAlgebra, seed: int = 0) -> BlockDecomposition:
    """Minimal central projections of the C*-algebra C.

    A random self-adjoint central element is diagonalized; its eigenspaces
    inside the unit of C are the minimal central projections when their
    number equals the dimension of the center, which holds with
    probability one and is checked.
    """
    _require_cstar(C)
    unit = unit_of(C.space, C.tol)
    if unit is None:
        raise ConsistencyError("a finite-dimensional C*-algebra must have a unit")
    if C.dim == 0:
        return BlockDecomposition(C, [], unit)
    Z = center(C)
    rng = np.random.default_rng(seed)
    projs = _split_by_random_element(C, Z, unit, Z.dim, rng)
    if projs is None:
        raise ConsistencyError("could not separate the minimal central projections")
    total = sum(projs)
    if not C.tol.close(total, unit, 100):
        raise ConsistencyError("central projections do not sum to the unit")
    return BlockDecomposition(C, projs, unit)


def minimal_projections(C: OperatorAlgebra, p, seed: int = 0) -> list[np.ndarray]:
    """Split a projection p of the C*-algebra C into minimal projections of C.

    Works in the corner ``p C p``: a generic self-adjoint element there has
    one eigenspace per minimal projection of the corner.
    """
    corner = C.corner(p)
    if corner.dim == 0:
        return []
    rng = np.random.default_rng(seed)
    corner_alg = OperatorAlgebra(C.n, corner, C.convention, C.tol)
    Z = center(corner_alg)
    # the number of minimal projections summing to p is sum_i of rank_i,
    # where each block of the corner is a full matrix algebra of size rank_i
    dims = []
    dec_projs = _split_by_random_element(corner_alg, Z, p, Z.dim, rng)
    if dec_projs is None:
        raise ConsistencyError("could not split the corner into blocks")
    for z in dec_projs:
        block_dim = corner_alg.corner(z).dim
        k = int(round(np.sqrt(block_dim)))
        if k * k != block_dim:
            raise ConsistencyError("block of a C*-algebra is not a full matrix algebra")
        dims.append(k)
    out = _split_by_random_element(corner_alg, corner, p, sum(dims), rng)
    if out is None:
        raise ConsistencyError("could not find minimal projections")
    return out


def minimal_projection_rank(C: OperatorAlgebra, z) -> int:
    """Ambient rank of a minimal projection under the central projection z."""
    block_dim = C.corner(z).dim
    k = int(round(np.sqrt(block_dim)))
    return int(round(np.trace(z).real)) // max(k, 1)
