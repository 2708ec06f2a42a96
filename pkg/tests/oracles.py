"""Reference computations that share no code with the package."""
from __future__ import annotations

import numpy as np
from scipy.linalg import null_space, orth
from scipy.optimize import linear_sum_assignment


def eig_power(a, t, cond_limit=1e6):
    """Principal-branch ``a^t`` from an eigendecomposition, or None if ill conditioned."""
    w, V = np.linalg.eig(a)
    if np.linalg.cond(V) > cond_limit:
        return None
    zero = 1e-10 * max(1.0, np.abs(w).max(initial=0.0))
    wt = np.array([0.0 if abs(z) < zero else z ** t for z in w], dtype=complex)
    return V @ np.diag(wt) @ np.linalg.inv(V)


def range_proj(a, rtol=1e-8):
    Q = orth(np.asarray(a), rcond=rtol)
    return Q @ Q.conj().T


def rank(a, rtol=1e-8):
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > rtol * max(s[0], 1.0))) if s.size else 0


def span_dim(mats, rtol=1e-8):
    if not mats:
        return 0
    return rank(np.stack([np.asarray(m).reshape(-1) for m in mats]), rtol)


def same_span(ms1, ms2, rtol=1e-8):
    d1, d2 = span_dim(ms1, rtol), span_dim(ms2, rtol)
    return d1 == d2 == span_dim(list(ms1) + list(ms2), rtol)


def in_span(m, mats, rtol=1e-8):
    return span_dim(list(mats) + [m], rtol) == span_dim(mats, rtol)


def normal_unitarily_equivalent(a, b, atol=1e-8):
    """Normal matrices are unitarily equivalent iff their spectra agree."""
    wa, wb = np.linalg.eigvals(a), np.linalg.eigvals(b)
    cost = np.abs(wa[:, None] - wb[None, :])
    r, c = linear_sum_assignment(cost)
    return bool(cost[r, c].max() <= atol)


def distance_to_ideal(a, x):
    """``||(1 - p) x||`` with p the range projection of a."""
    p = range_proj(a)
    return np.linalg.norm((np.eye(a.shape[0]) - p) @ x, 2)


def commutant_intertwiners(a, b):
    """Basis of ``{X : X a = b X, X a* = b* X}`` by a plain null space."""
    n = a.shape[0]
    rows = []
    for M, N in ((a, b), (a.conj().T, b.conj().T)):
        rows.append(np.kron(np.eye(n), M.T) - np.kron(N, np.eye(n)))
    return [v.reshape(n, n) for v in null_space(np.vstack(rows)).T]


def distinct_singular_values(x, rtol=1e-8, gap=1e-6):
    s = np.sort(np.linalg.svd(x, compute_uv=False))
    s = s[s > rtol * max(s.max(), 1.0)]
    if s.size == 0:
        return 0
    return 1 + int(np.sum(np.diff(s) > gap))


def pz_by_witness(diag_basis, p, q, rng, tries=3, atol=1e-8):
    """Is there a partial isometry v in span(diag_basis) with v* v = p, v v* = q?

    Brute force over random elements of ``q span p``: a random element has
    maximal rank, so its polar part works whenever anything does.
    """
    mats = [q @ m @ p for m in diag_basis]
    if np.trace(p).real < 0.5 and np.trace(q).real < 0.5:
        return True
    for _ in range(tries):
        coef = rng.standard_normal(len(mats)) + 1j * rng.standard_normal(len(mats))
        z = sum(c * m for c, m in zip(coef, mats))
        u, s, vh = np.linalg.svd(z)
        k = int(np.sum(s > 1e-8 * max(s[0], 1.0)))
        v = u[:, :k] @ vh[:k]
        if np.allclose(v.conj().T @ v, p, atol=atol) and np.allclose(v @ v.conj().T, q, atol=atol):
            return True
    return False
