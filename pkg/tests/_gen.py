"""Random instances for the test suite.

Block algebras are built from their structure (block sizes, multiplicities,
a strictly upper part and a unitary frame), so tests know the diagonal
algebra, its minimal projections and all block ranks without asking the
library.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from oat.algebra import OperatorAlgebra, SConvention
from oat.matcore import MatSubspace


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def unitary(rng, n):
    q, r = np.linalg.qr(crandn(rng, n, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def isometry(rng, n, k):
    return unitary(rng, n)[:, :k]


def contraction(rng, n, m=None, top=None):
    """Random contraction; ``top`` fixes the largest singular value."""
    m = n if m is None else m
    u, _, vh = np.linalg.svd(crandn(rng, n, m), full_matrices=False)
    s = rng.uniform(0, 1, min(n, m))
    if top is not None:
        s = s / s.max() * top
    return u @ np.diag(s) @ vh


def cone_base(rng, n, convention="half-ball", rank=None, normal=False):
    """Random element of the cone base of M_n with the given rank.

    The element is ``V a_k V*`` with V an n x k isometry and a_k invertible in
    the cone base of M_k, so its support is ``V V*``.
    """
    conv = SConvention.parse(convention)
    k = n if rank is None else rank
    if k == 0:
        return np.zeros((n, n), dtype=complex)
    V = isometry(rng, n, k)
    if normal:
        W = unitary(rng, k)
        lam = _disk_points(rng, k, conv)
        core = W @ np.diag(lam) @ W.conj().T
    elif conv is SConvention.HALF_BALL or rng.random() < 0.3:
        c = contraction(rng, k, top=rng.uniform(0.3, 0.97))
        core = (np.eye(k) - c) / 2
    else:
        for _ in range(200):
            c = contraction(rng, k, top=rng.uniform(0.3, 0.97))
            core = np.eye(k) - c
            if np.linalg.norm(core, 2) <= 1:
                break
        else:
            core = (np.eye(k) - contraction(rng, k, top=0.9)) / 2
    return V @ core @ V.conj().T


def _disk_points(rng, k, conv):
    """Points with ``|1 - 2z| < 1`` (half-ball) or ``|z|, |1 - z| < 1`` (shifted), away from 0."""
    out = []
    while len(out) < k:
        z = complex(rng.uniform(0, 1), rng.uniform(-0.5, 0.5))
        if conv is SConvention.HALF_BALL:
            ok = abs(1 - 2 * z) < 0.98
        else:
            ok = abs(z) < 0.99 and abs(1 - z) < 0.99
        if ok and abs(z) > 0.02:
            out.append(z)
    return np.array(out)


def partial_isometry(rng, n, k, domain=None):
    """Rank-k partial isometry; ``domain`` (an n x k isometry) fixes its initial space."""
    D = isometry(rng, n, k) if domain is None else domain
    R = isometry(rng, n, k)
    return R @ D.conj().T


# ---------------------------------------------------------------- block algebras

@dataclass
class BlockAlgebra:
    """``U (B ⊕ upper parts) U*`` with B = ⊕ M_k ⊗ I_m over the given blocks.

    ``blocks`` is a list of (k, m). With ``upper=True`` the blocks are
    ordered along the diagonal and every matrix unit strictly above the
    diagonal blocks is added, which keeps the diagonal algebra equal to B.
    """

    blocks: list[tuple[int, int]]
    U: np.ndarray
    upper: bool
    offsets: list[int] = field(default_factory=list)

    @property
    def n(self) -> int:
        return sum(k * m for k, m in self.blocks)

    def _unit(self, b, i, j):
        k, m = self.blocks[b]
        out = np.zeros((self.n, self.n), dtype=complex)
        off = self.offsets[b]
        for r in range(m):
            out[off + r * k + i, off + r * k + j] = 1.0
        return out

    def diagonal_basis(self):
        mats = []
        for b, (k, m) in enumerate(self.blocks):
            for i in range(k):
                for j in range(k):
                    mats.append(self.U @ self._unit(b, i, j) @ self.U.conj().T)
        return mats

    def basis(self):
        mats = self.diagonal_basis()
        if self.upper:
            n = self.n
            for b, (k, m) in enumerate(self.blocks):
                end = self.offsets[b] + k * m
                for r in range(self.offsets[b], end):
                    for c in range(end, n):
                        e = np.zeros((n, n), dtype=complex)
                        e[r, c] = 1.0
                        mats.append(self.U @ e @ self.U.conj().T)
        return mats

    def algebra(self, convention="half-ball") -> OperatorAlgebra:
        space = MatSubspace.span(self.basis(), (self.n, self.n))
        return OperatorAlgebra(self.n, space, SConvention.parse(convention))

    @property
    def diagonal_dim(self) -> int:
        return sum(k * k for k, _ in self.blocks)

    def projection(self, rng, ranks, rotate=True):
        """Projection in the diagonal algebra with block ranks ``ranks``.

        Returns the projection and its decomposition into minimal projections.
        """
        mins = []
        for b, (k, m) in enumerate(self.blocks):
            W = unitary(rng, k) if rotate else np.eye(k)
            for i in range(ranks[b]):
                P = np.outer(W[:, i], W[:, i].conj())
                full = sum(P[r, c] * self._unit(b, r, c) for r in range(k) for c in range(k))
                mins.append(self.U @ full @ self.U.conj().T)
        proj = sum(mins) if mins else np.zeros((self.n, self.n), dtype=complex)
        return proj, mins

    def random_ranks(self, rng, at_least_one=True):
        while True:
            ranks = [int(rng.integers(0, k + 1)) for k, _ in self.blocks]
            if not at_least_one or sum(ranks) > 0:
                return ranks

    def corner_element(self, rng, p, convention="half-ball"):
        """Cone-base element of the algebra with support exactly p.

        ``(p - c) / 2`` with c a strict contraction in the corner pAp; in the
        shifted convention ``p - c`` when that stays in the unit ball.
        """
        A = self.algebra(convention)
        mats = [p @ b @ p for b in A.basis]
        z = sum(crandn(rng, 1)[0] * m for m in mats)
        nz = np.linalg.norm(z, 2)
        if nz < 1e-12:
            return p / 2
        c = z / nz * rng.uniform(0.2, 0.9)
        if SConvention.parse(convention) is SConvention.SHIFTED_BALL and np.linalg.norm(p - c, 2) <= 1:
            return p - c
        return (p - c) / 2


def block_algebra(rng, blocks, upper=False, frame=True) -> BlockAlgebra:
    offsets = []
    pos = 0
    for k, m in blocks:
        offsets.append(pos)
        pos += k * m
    U = unitary(rng, pos) if frame else np.eye(pos, dtype=complex)
    return BlockAlgebra(list(blocks), U, upper, offsets)


def random_blocks(rng, max_n=6, max_diag=None):
    """Random (k, m) list with total size <= max_n and sum k^2 <= max_diag."""
    while True:
        count = int(rng.integers(1, 4))
        blocks = [(int(rng.integers(1, 3)), int(rng.integers(1, 3))) for _ in range(count)]
        n = sum(k * m for k, m in blocks)
        dd = sum(k * k for k, _ in blocks)
        if n <= max_n and (max_diag is None or dd <= max_diag):
            return blocks


# ---------------------------------------------------------------- ternary rings

@dataclass
class BlockTro:
    """``U (⊕ M_{r x c} ⊗ I_m) W*`` inside the m_total x n_total matrices."""

    blocks: list[tuple[int, int, int]]
    U: np.ndarray
    W: np.ndarray
    rows: int
    cols: int

    def basis(self):
        mats = []
        r0 = c0 = 0
        for r, c, m in self.blocks:
            for i in range(r):
                for j in range(c):
                    e = np.zeros((self.rows, self.cols), dtype=complex)
                    for t in range(m):
                        e[r0 + t * r + i, c0 + t * c + j] = 1.0
                    mats.append(self.U @ e @ self.W.conj().T)
            r0 += r * m
            c0 += c * m
        return mats


def block_tro(rng, max_side=5):
    while True:
        count = int(rng.integers(1, 3))
        blocks = [(int(rng.integers(1, 3)), int(rng.integers(1, 3)), int(rng.integers(1, 3)))
                  for _ in range(count)]
        rows = sum(r * m for r, _, m in blocks) + int(rng.integers(0, 2))
        cols = sum(c * m for _, c, m in blocks) + int(rng.integers(0, 2))
        if rows <= max_side and cols <= max_side:
            return BlockTro(blocks, unitary(rng, rows), unitary(rng, cols), rows, cols)


def polar_part(z, rtol=1e-8):
    u, s, vh = np.linalg.svd(z)
    k = int(np.sum(s > rtol * max(s[0], 1.0))) if s.size else 0
    return u[:, :k] @ vh[:k]


def linking_isometry(rng, BA: BlockAlgebra, p, q):
    """Partial isometry of a random element of ``q (A ∩ A*) p``."""
    mats = [q @ m @ p for m in BA.diagonal_basis()]
    coef = crandn(rng, len(mats))
    return polar_part(sum(c * m for c, m in zip(coef, mats)))


def equivalent_pair(rng, BA: BlockAlgebra, convention="half-ball", ranks=None):
    """(a, b, v) with a in the cone base, v* v = p_a, v v* = p_b and b = v a v*."""
    ranks = BA.random_ranks(rng) if ranks is None else ranks
    p, _ = BA.projection(rng, ranks)
    q, _ = BA.projection(rng, ranks)
    a = BA.corner_element(rng, p, convention)
    v = linking_isometry(rng, BA, p, q)
    return a, v @ a @ v.conj().T, v
