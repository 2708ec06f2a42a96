"""Equivalence relations on the contractive cone.

Three relations are handled here. Factorization through contractions
(``a = xy``, ``b = yx``) is the loosest. The modulus-matched refinement
adds conditions on ``|x|`` and ``|y|`` and is implemented by a partial
isometry v with ``b = v a v*``. The support-level relation compares only
the support projections.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .algebra import OperatorAlgebra, SConvention, full_algebra, wedderburn
from .calculus import cone_scale, in_S, in_S_matrix, power, power_t, support
from .errors import ConsistencyError, DimensionError, PreconditionError
from .matcore import (
    DEFAULT_TOL,
    MatSubspace,
    Tolerance,
    as_matrix,
    dag,
    eye,
    opnorm,
    polar,
)
from .tripotent import generic_partial_isometry, is_tripotent, pz_decide, pz_verify
from .verdict import Answer, Verdict, no, unknown

VARIANTS = ("i", "ii", "ii'", "ii''", "ii'''", "iii", "iv", "iv'")
WORD_TRACE_RTOL = 1e-7
WORD_INDEPENDENCE = 1e-9


# ---------------------------------------------------------------- factorization

def c_verify(a, b, x, y, tol: Tolerance = DEFAULT_TOL) -> Verdict:
    """``a = x y`` and ``b = y x`` with x, y contractions."""
    a, b, x, y = (as_matrix(m) for m in (a, b, x, y))
    slack = 1.0 + tol.eq_eps
    checks = [
        ("||x|| <= 1", opnorm(x) <= slack),
        ("||y|| <= 1", opnorm(y) <= slack),
        ("a = x y", (x @ y).shape == a.shape and tol.close(x @ y, a)),
        ("b = y x", (y @ x).shape == b.shape and tol.close(y @ x, b)),
    ]
    return Verdict.from_checks(checks, {"x": x, "y": y})


def noncommuting_pair(K: float = 0.05) -> dict:
    """Contractions whose two products have different norms.

    ``x = diag(1, 1 + 3K) / sqrt 2`` and ``y = [[1 + K, 2K], [0, 1]] / sqrt 2``
    give upper-triangular ``x y`` and ``y x`` with equal diagonals but
    off-diagonal entries K and ``(1 + 3K) K``.
    """
    r = np.sqrt(2.0)
    x = np.diag([1.0, 1.0 + 3 * K]).astype(np.complex128) / r
    y = np.array([[(1 + K) / r, r * K], [0.0, 1 / r]], dtype=np.complex128)
    return {"K": K, "x": x, "y": y, "a": x @ y, "b": y @ x}


def square_transitivity_check(a, b, d, x, y, w, z, tol: Tolerance = DEFAULT_TOL) -> Verdict:
    """From ``a = xy, b = yx = wz, d = zw`` build ``a^2 = (xw)(zy)``, ``d^2 = (zy)(xw)``."""
    first = c_verify(a, b, x, y, tol)
    second = c_verify(b, d, w, z, tol)
    if not (first.yes and second.yes):
        raise PreconditionError("inputs are not two factorizations through contractions")
    a, d = as_matrix(a), as_matrix(d)
    X, Y = x @ w, z @ y
    out = c_verify(a @ a, d @ d, X, Y, tol)
    out.witness = {"x": X, "y": Y}
    out.notes = ["a^2 = (x w)(z y), d^2 = (z y)(x w)"] + out.notes
    return out


# ---------------------------------------------------------------- modulus-matched equivalence

@dataclass
class PedersenWitness:
    """Data for one formulation of the modulus-matched equivalence.

    Variants ``i`` through ``ii'''`` use ``x`` and ``y``; ``iii`` uses
    ``sequence``, a list of pairs ``(x_n, y_n)`` for n = 1, 2, ...;
    ``iv`` and ``iv'`` use the partial isometry ``v``.
    """

    variant: str
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    v: np.ndarray | None = None
    sequence: list = field(default_factory=list)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise PreconditionError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")


def _require_S(A: OperatorAlgebra, m, what: str) -> np.ndarray:
    m = as_matrix(m, (A.n, A.n))
    if not in_S(A, m):
        raise PreconditionError(f"{what} is not in the cone base of the algebra")
    return m


@dataclass
class _Ctx:
    A: OperatorAlgebra
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    pa: np.ndarray
    pb: np.ndarray

    @classmethod
    def build(cls, A: OperatorAlgebra, a, b) -> "_Ctx":
        a = _require_S(A, a, "a")
        b = _require_S(A, b, "b")
        conv, tol = A.convention, A.tol
        return cls(A, a, b, power_t(a, 0.5, conv, tol), power_t(b, 0.5, conv, tol),
                   support(a, tol), support(b, tol))


def _lstsq_left(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Least operator-norm R with ``c R = x`` (pseudo-inverse solution)."""
    return np.linalg.pinv(c) @ x


def _xy_checks(ctx: _Ctx, w: PedersenWitness) -> list[tuple[str, bool]]:
    A, tol = ctx.A, ctx.A.tol
    if w.x is None or w.y is None:
        raise PreconditionError(f"variant {w.variant} needs x and y")
    x = as_matrix(w.x, (A.n, A.n))
    y = as_matrix(w.y, (A.n, A.n))
    c, d = ctx.c, ctx.d
    checks = [
        ("x in A", A.contains(x)),
        ("y in A", A.contains(y)),
        ("a = x y", tol.close(x @ y, ctx.a)),
        ("b = y x", tol.close(y @ x, ctx.b)),
    ]
    v = w.variant
    if v in ("i", "ii", "ii'", "ii''"):
        checks.append(("|y| = |a^1/2|", tol.close(dag(y) @ y, dag(c) @ c, 10)))
    if v == "ii":
        checks.append(("x = x p_b", tol.close(x @ ctx.pb, x)))
    if v in ("ii'", "ii''"):
        checks.append(("|y*| = |(b^1/2)*|", tol.close(y @ dag(y), d @ dag(d), 10)))
    if v == "ii''":
        checks.append(("|x| = |b^1/2|", tol.close(dag(x) @ x, dag(d) @ d, 10)))
        checks.append(("|x*| = |(a^1/2)*|", tol.close(x @ dag(x), c @ dag(c), 10)))
    if v == "ii'''":
        R = _lstsq_left(c, x)
        S = _lstsq_left(dag(c), dag(y))
        S = dag(S)
        slack = 1.0 + 10 * tol.eq_eps
        checks += [
            ("x = a^1/2 R", tol.close(c @ R, x, 10)),
            ("y = S a^1/2", tol.close(S @ c, y, 10)),
            (f"||R|| <= 1 [{opnorm(R):.10f}]", opnorm(R) <= slack),
            (f"||S|| <= 1 [{opnorm(S):.10f}]", opnorm(S) <= slack),
        ]
    return checks


def _sequence_checks(ctx: _Ctx, w: PedersenWitness) -> list[tuple[str, bool]]:
    A, tol = ctx.A, ctx.A.tol
    seq = w.sequence
    if len(seq) < 4:
        raise PreconditionError("variant iii needs at least four terms")
    conv = A.convention
    checks = []
    ya = []
    for n, (xn, yn) in enumerate(seq, start=1):
        xn = as_matrix(xn, (A.n, A.n))
        yn = as_matrix(yn, (A.n, A.n))
        an = power_t(ctx.a, 1.0 / n, conv, tol)
        bn = power_t(ctx.b, 1.0 / n, conv, tol)
        ok = (A.contains(xn) and A.contains(yn)
              and opnorm(xn) <= 1 + tol.eq_eps and opnorm(yn) <= 1 + tol.eq_eps
              and tol.close(xn @ yn, an, 10) and tol.close(yn @ xn, bn, 10))
        checks.append((f"n={n}: x_n y_n = a^(1/n), y_n x_n = b^(1/n)", ok))
        ya.append(yn @ ctx.a)
    # Cauchy test on (y_n a): the tail must shrink against the head
    last = ya[-1]
    head = max(opnorm(t - last) for t in ya)
    tail = max(opnorm(t - last) for t in ya[len(ya) // 2:])
    checks.append((f"(y_n a) settles [tail {tail:.2e} vs head {head:.2e}]",
                   tail <= 0.5 * head + tol.eq_eps))
    return checks


def _v_checks(ctx: _Ctx, w: PedersenWitness) -> list[tuple[str, bool]]:
    A, tol = ctx.A, ctx.A.tol
    if w.v is None:
        raise PreconditionError(f"variant {w.variant} needs v")
    v = as_matrix(w.v, (A.n, A.n))
    checks = [
        ("v* v = p_a", tol.close(dag(v) @ v, ctx.pa, 10)),
        ("v a in A", A.contains(v @ ctx.a)),
        ("b = v a v*", tol.close(v @ ctx.a @ dag(v), ctx.b, 10)),
    ]
    if w.variant == "iv":
        checks += [
            ("v v* = p_b", tol.close(v @ dag(v), ctx.pb, 10)),
            ("a v* in A", A.contains(ctx.a @ dag(v))),
        ]
    else:
        checks += [("v in A", A.contains(v)), ("v* in A", A.contains(dag(v)))]
    return checks


def pedersen_verify(A: OperatorAlgebra, a, b, witness: PedersenWitness) -> Verdict:
    """Verify one formulation of ``a ~ b`` for a, b in the cone base of A.

    A passing verdict must also satisfy the consequences ``||a|| = ||b||``
    and, for the x/y formulations other than ``i``, ``x in aAb`` and
    ``y in bAa``; a failure there is an internal inconsistency.
    """
    ctx = _Ctx.build(A, a, b)
    tol = A.tol
    v = witness.variant
    if v in ("i", "ii", "ii'", "ii''", "ii'''"):
        checks = _xy_checks(ctx, witness)
    elif v == "iii":
        checks = _sequence_checks(ctx, witness)
    else:
        checks = _v_checks(ctx, witness)
    out = Verdict.from_checks(checks, witness)
    out.notes.insert(0, f"variant {v}")
    if out.yes:
        if abs(opnorm(ctx.a) - opnorm(ctx.b)) > 10 * tol.eq_eps * (1 + opnorm(ctx.a)):
            raise ConsistencyError("verified pair has different norms")
        if v in ("ii", "ii'", "ii''", "ii'''"):
            aAb = A.corner(ctx.pa, ctx.pb)
            bAa = A.corner(ctx.pb, ctx.pa)
            if not (aAb.contains(witness.x, tol.scaled(10)) and bAa.contains(witness.y, tol.scaled(10))):
                raise ConsistencyError("verified witness does not lie in aAb and bAa")
        out.notes.append("||a|| = ||b||: ok")
    return out


def witness_from_v(A: OperatorAlgebra, a, v, variant: str = "ii''") -> PedersenWitness:
    """``x = a^(1/2) v*`` and ``y = v a^(1/2)`` from an implementing partial isometry."""
    a = as_matrix(a, (A.n, A.n))
    v = as_matrix(v, (A.n, A.n))
    c = power_t(a, 0.5, A.convention, A.tol)
    return PedersenWitness(variant, x=c @ dag(v), y=v @ c, v=v)


def v_from_witness(A: OperatorAlgebra, a, y) -> np.ndarray:
    """Recover ``v = r(y) r(a^(1/2))*`` from y with ``|y| = |a^(1/2)|``."""
    c = power_t(as_matrix(a), 0.5, A.convention, A.tol)
    return polar(as_matrix(y), A.tol)[0] @ dag(polar(c, A.tol)[0])


def root_equiv_witnesses(a, b, v, N: int = 4, convention=SConvention.HALF_BALL,
                         tol: Tolerance = DEFAULT_TOL) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairs ``x_n = a^(1/2n) v*``, ``y_n = v a^(1/2n)`` factoring the n-th roots.

    Checks each pair and the compatibility ``y_k x_l y_m = y_r x_s y_t``
    whenever ``1/k + 1/l + 1/m = 1/r + 1/s + 1/t``.
    """
    a, b, v = as_matrix(a), as_matrix(b), as_matrix(v)
    if not in_S_matrix(a, convention, tol=tol):
        raise PreconditionError("a must lie in the cone base")
    if not tol.close(dag(v) @ v, support(a, tol), 10) or not tol.close(v @ a @ dag(v), b, 10):
        raise PreconditionError("need v* v = p_a and b = v a v*")
    pairs = []
    for n in range(1, N + 1):
        r = power_t(a, 1.0 / (2 * n), convention, tol)
        xn, yn = r @ dag(v), v @ r
        slack = 1 + tol.eq_eps
        if opnorm(xn) > slack or opnorm(yn) > slack:
            why = (f"; ||a^(1/{2 * n})|| = {opnorm(r):.6g}, the shifted ball is not closed under roots"
                   if opnorm(r) > slack else "")
            raise ConsistencyError(f"root pair {n} is not contractive{why}")
        if not tol.close(xn @ yn, power_t(a, 1.0 / n, convention, tol), 10):
            raise ConsistencyError(f"x_{n} y_{n} != a^(1/{n})")
        if not tol.close(yn @ xn, power_t(b, 1.0 / n, convention, tol), 10):
            raise ConsistencyError(f"y_{n} x_{n} != b^(1/{n})")
        pairs.append((xn, yn))
    groups: dict[Fraction, list[np.ndarray]] = {}
    for k, l, m in iproduct(range(1, N + 1), repeat=3):
        key = Fraction(1, k) + Fraction(1, l) + Fraction(1, m)
        if key <= 1:
            groups.setdefault(key, []).append(pairs[k - 1][1] @ pairs[l - 1][0] @ pairs[m - 1][1])
    for key, mats in groups.items():
        for mat in mats[1:]:
            if not tol.close(mat, mats[0], 10):
                raise ConsistencyError(f"triple products with exponent sum {key} disagree")
    return pairs


# ---------------------------------------------------------------- deciding in M_n

def _matched_gap(u: np.ndarray, w: np.ndarray) -> float:
    cost = np.abs(u[:, None] - w[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max()) if len(r) else 0.0


def _word_trace_mismatch(a: np.ndarray, b: np.ndarray, max_len: int, rtol: float):
    """Search words in (a, a*) whose trace differs from the same word in (b, b*).

    Words are explored breadth first; a word whose pair ``(w(a), w(b))`` is
    in the span of those already kept is not extended, so at most ``2 n^2``
    words are expanded. Returns the offending word or None.
    """
    n = a.shape[0]
    gens = [("a", a, b), ("a*", dag(a), dag(b))]
    start = (np.concatenate([eye(n).reshape(-1), eye(n).reshape(-1)]))
    cap = 2 * n * n
    basis = np.zeros((cap, cap), dtype=np.complex128)
    basis[0] = start / np.linalg.norm(start)
    kept = 1
    queue = deque([("", eye(n), eye(n))])
    while queue:
        word, wa, wb = queue.popleft()
        if len(word.split()) >= max_len:
            continue
        for name, ga, gb in gens:
            na, nb = wa @ ga, wb @ gb
            vec = np.concatenate([na.reshape(-1), nb.reshape(-1)])
            nrm = np.linalg.norm(vec)
            if nrm == 0:
                continue
            na, nb, vec = na / nrm, nb / nrm, vec / nrm
            new_word = (word + " " + name).strip()
            if abs(np.trace(na) - np.trace(nb)) > rtol * n:
                return new_word
            if kept == cap:
                continue
            # projecting twice keeps the kept vectors orthonormal to working precision
            Q = basis[:kept]
            resid = vec - Q.T @ (np.conj(Q) @ vec)
            resid = resid - Q.T @ (np.conj(Q) @ resid)
            rn = np.linalg.norm(resid)
            if rn > WORD_INDEPENDENCE:
                basis[kept] = resid / rn
                kept += 1
                queue.append((new_word, na, nb))
    return None


def _intertwiner_space(a: np.ndarray, b: np.ndarray, rtol: float) -> list[np.ndarray]:
    """Basis of ``{X : X a = b X, X a* = b* X}`` (row-major vectorization)."""
    n = a.shape[0]
    I = eye(n)
    m1 = np.kron(I, a.T) - np.kron(b, I)
    m2 = np.kron(I, np.conj(a)) - np.kron(dag(b), I)
    mat = np.vstack([m1, m2])
    _, s, vh = np.linalg.svd(mat)
    thr = rtol * max(s[0], 1.0)
    null = np.conj(vh[np.sum(s > thr):])
    return [row.reshape(n, n) for row in null]


def unitary_intertwiner(a, b, rtol: float = WORD_TRACE_RTOL, seed: int = 0,
                        tol: Tolerance = DEFAULT_TOL) -> np.ndarray | None:
    """A unitary U with ``U a U* = b``, or None.

    Normal pairs are matched through Schur forms. Otherwise a generic
    intertwiner of the pairs (a, a*) and (b, b*) is taken to its unitary
    polar part (the Procrustes step), which still intertwines.
    """
    from scipy.linalg import schur

    a, b = as_matrix(a), as_matrix(b)
    n = a.shape[0]
    normal = tol.close(a @ dag(a), dag(a) @ a) and tol.close(b @ dag(b), dag(b) @ b)
    candidates = []
    if normal:
        ta, za = schur(a, output="complex")
        tb, zb = schur(b, output="complex")
        la, lb = np.diag(ta), np.diag(tb)
        r, c = linear_sum_assignment(np.abs(la[:, None] - lb[None, :]))
        perm = np.zeros((n, n), dtype=np.complex128)
        perm[c, r] = 1.0
        candidates.append(zb @ perm @ dag(za))
    basis = _intertwiner_space(a, b, rtol)
    if basis:
        rng = np.random.default_rng(seed)
        for _ in range(3):
            coef = rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
            X = sum(cf * B for cf, B in zip(coef, basis))
            u, _, vh = np.linalg.svd(X)
            candidates.append(u @ vh)
    for U in candidates:
        if tol.close(U @ a @ dag(U), b, 1000) and tol.close(dag(U) @ U, eye(n), 100):
            return U
    return None


def pedersen_decide_full(a, b, convention=SConvention.HALF_BALL, tol: Tolerance = DEFAULT_TOL,
                         rtol: float = WORD_TRACE_RTOL, max_len: int | None = None,
                         seed: int = 0) -> Verdict:
    """Decide ``a ~ b`` in the full matrix algebra, where it is unitary equivalence.

    Cheap invariants (singular values, eigenvalues) are compared first,
    then traces of words in (a, a*) against (b, b*). A yes carries a
    unitary and the partial isometry it restricts to; if no unitary can be
    recovered the answer is downgraded to unknown.
    """
    a, b = as_matrix(a), as_matrix(b)
    n = a.shape[0]
    if b.shape != (n, n):
        raise DimensionError("a and b must have the same square shape")
    conv = SConvention.parse(convention)
    for m, name in ((a, "a"), (b, "b")):
        if not in_S_matrix(m, conv, tol=tol):
            raise PreconditionError(f"{name} is not in the cone base of M_{n}")
    thr = rtol * n * (1.0 + max(opnorm(a), opnorm(b)))
    notes = []
    sa = np.linalg.svd(a, compute_uv=False)
    sb = np.linalg.svd(b, compute_uv=False)
    gap = float(np.max(np.abs(sa - sb)))
    notes.append(f"singular value gap {gap:.3e}")
    if gap > thr:
        return no({"invariant": "singular values", "a": sa, "b": sb, "gap": gap}, *notes,
                  f"refutation: singular values differ (||a|| - ||b|| = {sa[0] - sb[0]:.3e})")
    egap = _matched_gap(np.linalg.eigvals(a), np.linalg.eigvals(b))
    notes.append(f"eigenvalue gap {egap:.3e}")
    if egap > max(thr, np.sqrt(thr)):
        return no({"invariant": "eigenvalues", "gap": egap}, *notes,
                  "refutation: spectra differ")
    max_len = 2 * n * n if max_len is None else max_len
    word = _word_trace_mismatch(a, b, max_len, rtol)
    if word is not None:
        return no({"invariant": "word trace", "word": word}, *notes,
                  f"refutation: trace of word '{word}' differs")
    notes.append(f"all word traces agree (length cap {max_len})")
    U = unitary_intertwiner(a, b, rtol, seed, tol)
    if U is None:
        return unknown(*notes, "invariants agree but no unitary witness was recovered")
    v = U @ support(a, tol)
    A = full_algebra(n, conv, tol)
    ver = pedersen_verify(A, a, b, PedersenWitness("iv", v=v))
    if not ver.yes:
        return unknown(*notes, *ver.notes, "recovered witness failed verification")
    return Verdict(Answer.YES, {"unitary": U, "v": v}, notes + ver.notes)


def _intertwiners_in(space: MatSubspace, a: np.ndarray, b: np.ndarray, tol: Tolerance) -> MatSubspace:
    """``{x in space : x a = b x, x a* = b* x}``."""
    if space.dim == 0:
        return space
    cols = []
    for e in space.basis:
        cols.append(np.concatenate([(e @ a - b @ e).reshape(-1),
                                    (e @ dag(a) - dag(b) @ e).reshape(-1)]))
    mat = np.stack(cols, axis=1)
    _, s, vh = np.linalg.svd(mat)
    thr = tol.rank_eps * max(s[0] if s.size else 0.0, 1.0) * 10
    null = np.conj(vh[int(np.sum(s > thr)):])
    return MatSubspace.span([space.element(r) for r in null], space.shape, tol)


def pedersen_decide(A: OperatorAlgebra, a, b, seed: int = 0, budget: int = 6) -> Verdict:
    """Decide ``a ~ b`` in A.

    Full matrix algebras go through :func:`pedersen_decide_full`. For a
    subalgebra, any implementing v lies in ``p_b (A ∩ A*) p_a`` and
    intertwines (a, a*) with (b, b*); conversely the partial isometry of a
    generic element of that intertwiner space works whenever any element
    has full supports. ``budget`` random elements are tried.
    """
    tol = A.tol
    a = _require_S(A, a, "a")
    b = _require_S(A, b, "b")
    if A.is_full():
        return pedersen_decide_full(a, b, A.convention, tol, seed=seed)
    ambient = pedersen_decide_full(a, b, A.convention, tol, seed=seed)
    if ambient.no:
        return no(ambient.witness, *ambient.notes, "not even equivalent in the full matrix algebra")
    pa, pb = support(a, tol), support(b, tol)
    notes = ["equivalent in the full matrix algebra" if ambient.yes else "ambient test inconclusive"]
    D = A.diagonal()
    between = D.space.map(lambda m: pb @ m @ pa)
    inter = _intertwiners_in(between, a, b, tol)
    notes.append(f"intertwiner space in p_b (A ∩ A*) p_a has dimension {inter.dim}")
    rank_a = int(round(np.trace(pa).real))
    if rank_a > 0 and inter.dim == 0:
        return no({"intertwiner_dim": 0}, *notes,
                  "refutation: no nonzero element of p_b (A ∩ A*) p_a intertwines a with b")
    rng = np.random.default_rng(seed)
    best = 0
    for _ in range(budget):
        v = generic_partial_isometry(inter, rng, tol)
        best = max(best, int(round(np.trace(dag(v) @ v).real)))
        ver = pedersen_verify(A, a, b, PedersenWitness("iv'", v=v))
        if ver.yes:
            return Verdict(Answer.YES, {"v": v}, notes + ver.notes)
    if best < rank_a:
        return no({"generic_rank": best, "rank_p_a": rank_a}, *notes,
                  f"refutation: generic intertwiner rank {best} < rank p_a = {rank_a} "
                  f"over {budget} random draws")
    return unknown(*notes, "search budget exhausted")


def power_equiv_transport(A: OperatorAlgebra, a, b, v, r: float) -> Verdict:
    """Move an equivalence implemented by v to powers.

    With ``c = a^(1/2)``: ``y' = v c^r`` and ``x' = c^r v*`` factor
    ``a^r`` and ``b^r`` with matched moduli. For ``0 < r < 1`` also
    ``y = v a^r``, ``x = a^(1-r) v*`` factor a and b with ``|y| = |a^r|``.
    """
    ctx = _Ctx.build(A, a, b)
    tol, conv = A.tol, A.convention
    v = as_matrix(v, (A.n, A.n))
    if not (tol.close(dag(v) @ v, ctx.pa, 10) and tol.close(v @ ctx.a @ dag(v), ctx.b, 10)):
        raise PreconditionError("v must satisfy v* v = p_a and b = v a v*")
    if r <= 0:
        raise PreconditionError("r must be positive")
    cr = power(ctx.c, r, conv, tol)
    ar = power(ctx.a, r, conv, tol)
    br = power(ctx.b, r, conv, tol)
    yp, xp = v @ cr, cr @ dag(v)
    checks = [
        ("x' y' = a^r", tol.close(xp @ yp, ar, 100)),
        ("y' x' = b^r", tol.close(yp @ xp, br, 100)),
        ("|y'| = |c^r|", tol.close(dag(yp) @ yp, dag(cr) @ cr, 100)),
        ("|x'*| = |(c^r)*|", tol.close(xp @ dag(xp), cr @ dag(cr), 100)),
        ("x' = x' p_b", tol.close(xp @ ctx.pb, xp, 10)),
        ("x', y' in A", A.contains(xp) and A.contains(yp)),
    ]
    wit = {"x_r": xp, "y_r": yp}
    if 0 < r < 1:
        y = v @ ar
        x = power(ctx.a, 1 - r, conv, tol) @ dag(v)
        checks += [
            ("a = x y (split)", tol.close(x @ y, ctx.a, 100)),
            ("b = y x (split)", tol.close(y @ x, ctx.b, 100)),
            ("|y| = |a^r| (split)", tol.close(dag(y) @ y, dag(ar) @ ar, 100)),
            ("x = x p_b (split)", tol.close(x @ ctx.pb, x, 10)),
        ]
        wit.update(x=x, y=y)
    return Verdict.from_checks(checks, wit)


def vpr_construct(A: OperatorAlgebra, a, x, y) -> Verdict:
    """Given ``a = x y`` with ``|y| = |a^1/2|`` and ``|x*| = |(a^1/2)*|``, certify ``b = y x``.

    b lands in the cone base with ``||1 - 2b|| <= ||1 - 2a||`` and
    ``||1 - b|| <= ||1 - a||``, and ``v = r(y) r(a^1/2)*`` implements the
    equivalence.
    """
    tol, conv = A.tol, A.convention
    a = _require_S(A, a, "a")
    x = A.require(x, "x")
    y = A.require(y, "y")
    c = power_t(a, 0.5, conv, tol)
    if not tol.close(x @ y, a, 10):
        raise PreconditionError("need a = x y")
    if not (tol.close(dag(y) @ y, dag(c) @ c, 10) and tol.close(x @ dag(x), c @ dag(c), 10)):
        raise PreconditionError("need |y| = |a^1/2| and |x*| = |(a^1/2)*|")
    b = y @ x
    I = eye(A.n)
    slack = 10 * tol.eq_eps
    checks = [
        ("b in A", A.contains(b)),
        ("b in cone base", in_S_matrix(b, conv, tol=tol)),
        ("||1 - 2b|| <= ||1 - 2a||", opnorm(I - 2 * b) <= opnorm(I - 2 * a) + slack),
        ("||1 - b|| <= ||1 - a||", opnorm(I - b) <= opnorm(I - a) + slack),
    ]
    out = Verdict.from_checks(checks)
    v = v_from_witness(A, a, y)
    if out.yes:
        ver = pedersen_verify(A, a, b, PedersenWitness("iv", v=v))
        out = Verdict(ver.answer, None, out.notes + ver.notes)
    out.witness = {"b": b, "v": v}
    return out


# ---------------------------------------------------------------- support-level comparison

def _cone_pair(A: OperatorAlgebra, a, b):
    a = A.require(a, "a")
    b = A.require(b, "b")
    la = cone_scale(a, A.convention, A.tol)
    lb = cone_scale(b, A.convention, A.tol)
    if la is None or lb is None:
        raise PreconditionError("a and b must lie in the cone")
    return a, b, la, lb


def _ideal(A: OperatorAlgebra, a, side: str) -> MatSubspace:
    if side == "right":
        return MatSubspace.span([a @ m for m in A.basis], (A.n, A.n), A.tol)
    return MatSubspace.span([m @ a for m in A.basis], (A.n, A.n), A.tol)


def _module_map_checks(A: OperatorAlgebra, a, b, v, onto: bool) -> list[tuple[str, bool]]:
    """Left multiplication by v on aA and right multiplication by v* on Aa."""
    tol = A.tol
    aA, Aa = _ideal(A, a, "right"), _ideal(A, a, "left")
    bA, Ab = _ideal(A, b, "right"), _ideal(A, b, "left")
    phi_img = aA.map(lambda m: v @ m)
    psi_img = Aa.map(lambda m: m @ dag(v))
    rel = "=" if onto else "⊆"
    phi_ok = phi_img.equal(bA, 1e-7) if onto else phi_img.subset_of(bA)
    psi_ok = psi_img.equal(Ab, 1e-7) if onto else psi_img.subset_of(Ab)
    compat = all(tol.close(x @ dag(v) @ v @ y, x @ y, 10) for x in Aa.basis for y in aA.basis)
    iso = all(tol.close(dag(v) @ v @ y, y, 10) for y in aA.basis) and \
        all(tol.close(x @ dag(v) @ v, x, 10) for x in Aa.basis)
    return [
        (f"v aA {rel} bA", phi_ok),
        (f"Aa v* {rel} Ab", psi_ok),
        ("(x v*)(v y) = x y on Aa x aA", compat),
        ("v* v fixes aA and Aa (complete isometry)", iso),
    ]


def blackadar_decide(A: OperatorAlgebra, a, b, seed: int = 0) -> Verdict:
    """Decide whether the support projections of a and b are equivalent.

    On yes the witness holds the partial isometry v, the module maps it
    induces on the one-sided ideals, and the interpolating elements
    ``b' = v a v*`` (equivalent to a, same support as b) and
    ``a' = v* b v`` (equivalent to b, same support as a).
    """
    a, b, la, lb = _cone_pair(A, a, b)
    tol = A.tol
    pa, pb = support(a, tol), support(b, tol)
    pz = pz_decide(A, pa, pb, seed)
    if not pz.yes:
        return Verdict(pz.answer, pz.witness, ["supports compared blockwise"] + pz.notes)
    v = pz.witness
    checks = _module_map_checks(A, a, b, v, onto=True)
    a_s = a / la if la > 0 else a
    b_s = b / lb if lb > 0 else b
    b_prime = v @ a_s @ dag(v)
    a_prime = dag(v) @ b_s @ v
    ver_b = pedersen_verify(A, a_s, b_prime, PedersenWitness("iv", v=v))
    ver_a = pedersen_verify(A, b_s, a_prime, PedersenWitness("iv", v=dag(v)))
    checks += [
        ("b' = v a v* equivalent to a", ver_b.yes),
        ("support of b' is p_b", tol.close(support(b_prime, tol), pb, 100)),
        ("a' = v* b v equivalent to b", ver_a.yes),
        ("support of a' is p_a", tol.close(support(a_prime, tol), pa, 100)),
    ]
    out = Verdict.from_checks(checks, {"v": v, "b_prime": b_prime, "a_prime": a_prime})
    if not out.yes:
        raise ConsistencyError("support equivalence found but its consequences fail: "
                               + "; ".join(out.notes))
    out.notes = pz.notes + out.notes
    return out


def m1_check(a, b, x, y, tol: Tolerance = DEFAULT_TOL) -> Verdict:
    """For cone elements with ``a = x y``, ``b = y x``: ``w = p_a r(x)`` links the supports.

    Checks ``p_a x = x p_b``, ``p_a r(x) = r(x) p_b`` and that w is a partial
    isometry from ``p_b`` onto ``p_a``, so the supports are equivalent in
    the ambient matrix algebra.
    """
    a, b, x, y = (as_matrix(m) for m in (a, b, x, y))
    n = a.shape[0]
    for m, name in ((a, "a"), (b, "b")):
        if cone_scale(m, SConvention.HALF_BALL, tol) is None:
            raise PreconditionError(f"{name} is not in the cone")
    if not (tol.close(x @ y, a, 10) and tol.close(y @ x, b, 10)):
        raise PreconditionError("need a = x y and b = y x")
    p, q = support(a, tol), support(b, tol)
    rx = polar(x, tol)[0]
    w = p @ rx
    M = full_algebra(n, tol=tol)
    checks = [
        ("p_a x = x p_b", tol.close(p @ x, x @ q, 10)),
        ("p_a r(x) = r(x) p_b", tol.close(p @ rx, rx @ q, 10)),
        ("w tripotent", is_tripotent(w, tol)),
        ("w w* = p_a", tol.close(w @ dag(w), p, 10)),
        ("w* w = p_b", tol.close(dag(w) @ w, q, 10)),
    ]
    out = Verdict.from_checks(checks, w)
    if out.yes:
        ver = pz_verify(M, p, q, dag(w))
        out = Verdict(ver.answer, w, out.notes + ver.notes)
    return out


def ideal_equality_check(A: OperatorAlgebra, a, b, x) -> Verdict:
    """If ``aA = xA`` and ``Ab = Ax``, the supports are equivalent in M_n.

    A no means the ideal equalities themselves fail.
    """
    a, b, _, _ = _cone_pair(A, a, b)
    x = A.require(x, "x")
    tol = A.tol
    eq_right = _ideal(A, a, "right").equal(_ideal(A, x, "right"), 1e-7)
    eq_left = _ideal(A, b, "left").equal(_ideal(A, x, "left"), 1e-7)
    checks = [("aA = xA", eq_right), ("Ab = Ax", eq_left)]
    if not (eq_right and eq_left):
        return Verdict.from_checks(checks)
    p, q = support(a, tol), support(b, tol)
    rx = polar(x, tol)[0]
    w = p @ rx
    checks += [
        ("r(x) r(x)* p_a = p_a", tol.close(rx @ dag(rx) @ p, p, 10)),
        ("w w* = p_a", tol.close(w @ dag(w), p, 10)),
        ("w* w = p_b", tol.close(dag(w) @ w, q, 10)),
    ]
    out = Verdict.from_checks(checks, w)
    if out.yes:
        ver = pz_verify(full_algebra(A.n, tol=tol), p, q, dag(w))
        out = Verdict(ver.answer, w, out.notes + ver.notes)
    return out


def ideal_generator(A: OperatorAlgebra, a, b, seed: int = 0) -> Verdict:
    """When the supports of a and b are equivalent, an x with ``aA = xA``, ``Ab = Ax``.

    Uses ``x = a^(1/2) v*`` for the implementing partial isometry v.
    """
    bl = blackadar_decide(A, a, b, seed)
    if not bl.yes:
        return bl
    a = as_matrix(a)
    la = cone_scale(a, A.convention, A.tol) or 1.0
    v = bl.witness["v"]
    x = power_t(a / la, 0.5, A.convention, A.tol) @ dag(v)
    out = ideal_equality_check(A, a, b, x)
    if not out.yes:
        raise ConsistencyError("generator built from the witness fails the ideal equalities")
    out.witness = x
    return out


def subequiv_decide(A: OperatorAlgebra, a, b, seed: int = 0, attempts: int = 4) -> Verdict:
    """Is the support of a equivalent to a subprojection of the support of b?

    Decided by blockwise rank domination in ``A ∩ A*``. On yes, v is the
    partial isometry of a generic element of ``p_b (A ∩ A*) p_a``, so
    ``v* v = p_a`` and ``q' = v v* <= p_b``; ``b' = v a v*`` is equivalent
    to a and lies in the hereditary subalgebra of b.
    """
    a, b, la, _ = _cone_pair(A, a, b)
    tol = A.tol
    pa, pb = support(a, tol), support(b, tol)
    D = A.diagonal()
    dec = wedderburn(D, seed)
    ra, rb = dec.block_ranks(pa), dec.block_ranks(pb)
    notes = [f"block ranks of p_a: {list(ra)}", f"block ranks of p_b: {list(rb)}"]
    bad = [i for i in range(len(ra)) if ra[i] > rb[i]]
    if bad:
        i = bad[0]
        return no({"block": i, "rank_a": ra[i], "rank_b": rb[i]}, *notes,
                  f"refutation: block {i} needs rank {ra[i]} but p_b has only {rb[i]}")
    between = D.space.map(lambda m: pb @ m @ pa)
    rng = np.random.default_rng(seed)
    a_s = a / la if la > 0 else a
    Ab = A.corner(pb)
    for _ in range(attempts):
        v = generic_partial_isometry(between, rng, tol)
        q_prime = v @ dag(v)
        if not tol.close(dag(v) @ v, pa, 10):
            continue
        b_prime = v @ a_s @ dag(v)
        checks = [
            ("q' <= p_b", tol.close(pb @ q_prime, q_prime, 10)),
            ("p_a ~ q'", pz_verify(A, pa, q_prime, v).yes),
            ("b' in A_b", Ab.contains(b_prime, tol.scaled(10))),
            ("b' in cone", cone_scale(b_prime, A.convention, tol) is not None),
            ("a ~ b'", pedersen_verify(A, a_s, b_prime, PedersenWitness("iv", v=v)).yes),
        ]
        checks += _module_map_checks(A, a, b, v, onto=False)
        out = Verdict.from_checks(checks, {"v": v, "q_prime": q_prime, "b_prime": b_prime})
        if out.yes:
            out.notes = notes + out.notes
            return out
    return unknown(*notes, "ranks dominate but no witness verified")


# ---------------------------------------------------------------- module maps

@dataclass
class LinearMap:
    """A linear map on a matrix subspace, stored by the images of its basis."""

    domain: MatSubspace
    images: np.ndarray

    @classmethod
    def from_function(cls, domain: MatSubspace, fn: Callable[[np.ndarray], np.ndarray]) -> "LinearMap":
        imgs = np.array([fn(bm) for bm in domain.basis], dtype=np.complex128)
        if imgs.size == 0:
            imgs = np.zeros((0, *domain.shape), dtype=np.complex128)
        return cls(domain, imgs)

    def __call__(self, z) -> np.ndarray:
        coef = self.domain.coords(z)
        if len(coef) == 0:
            return np.zeros(self.images.shape[1:] if self.images.ndim == 3 else self.domain.shape,
                            dtype=np.complex128)
        return np.tensordot(coef, self.images, axes=1)

    def range(self) -> MatSubspace:
        shape = self.images.shape[1:] if self.images.shape[0] else self.domain.shape
        return MatSubspace.span(list(self.images), shape, self.domain.tol)


def _multiplier(lm: LinearMap, side: str, tol: Tolerance):
    """Matrix T with ``lm(y) = T y`` (side 'left') or ``y T`` (side 'right') if one exists."""
    basis = lm.domain.basis
    if side == "left":
        Y = np.hstack(list(basis))
        F = np.hstack(list(lm.images))
        T = F @ np.linalg.pinv(Y)
        ok = np.linalg.norm(T @ Y - F) <= tol.eq_eps * 100 * (1 + np.linalg.norm(F))
    else:
        Y = np.vstack(list(basis))
        F = np.vstack(list(lm.images))
        T = np.linalg.pinv(Y) @ F
        ok = np.linalg.norm(Y @ T - F) <= tol.eq_eps * 100 * (1 + np.linalg.norm(F))
    return T if ok else None


def _cb_contractive(lm: LinearMap, side: str, tol: Tolerance, rng: np.random.Generator):
    """Certify complete contractivity, or refute it by a sample at matrix level n.

    A map that is multiplication by T on a space whose elements live on a
    fixed range is bounded at every level by the norm of T there. Failing
    that, random elements of M_n(domain) give lower bounds.
    Returns (status, note) with status True, False or None.
    """
    if lm.domain.dim == 0:
        return True, "zero domain"
    T = _multiplier(lm, side, tol)
    if T is not None and opnorm(T) <= 1 + 10 * tol.eq_eps:
        return True, f"multiplier norm {opnorm(T):.6f} <= 1"
    n = lm.domain.shape[0]
    worst = 0.0
    for _ in range(64):
        blocks = [[lm.domain.random_element(rng) for _ in range(n)] for _ in range(n)]
        Y = np.block(blocks)
        FY = np.block([[lm(z) for z in row] for row in blocks])
        worst = max(worst, opnorm(FY) / max(opnorm(Y), 1e-300))
    if worst > 1 + 1e-6:
        return False, f"level-{n} sample has norm ratio {worst:.6f} > 1"
    return None, f"not certified (best sampled ratio {worst:.6f})"


def haver_extract(A: OperatorAlgebra, a, Phi: LinearMap | None, Psi: LinearMap | None,
                  seed: int = 0) -> Verdict:
    """Produce b equivalent to a from module maps on the one-sided ideals of a.

    Phi must be a right module map on aA and Psi a left module map on Aa,
    both completely contractive, with ``Psi(x) Phi(y) = x y``. Then
    ``y = Phi(a^1/2)``, ``x = Psi(a^1/2)`` and ``b = y x`` is equivalent to
    a, with ``Phi(aA) = bA`` and ``Psi(Aa) = Ab``.
    """
    a = A.require(a, "a")
    tol = A.tol
    la = cone_scale(a, A.convention, tol)
    if la is None:
        raise PreconditionError("a must lie in the cone")
    if Phi is None or Psi is None:
        return no(None, "rejected: both module maps are required; the product condition "
                        "Psi(x) Phi(y) = x y cannot be checked without Psi")
    aA, Aa = _ideal(A, a, "right"), _ideal(A, a, "left")
    if not (Phi.domain.equal(aA, 1e-7) and Psi.domain.equal(Aa, 1e-7)):
        raise PreconditionError("Phi must be defined on aA and Psi on Aa")
    rng = np.random.default_rng(seed)
    phi_mod = all(tol.close(Phi(y @ m), Phi(y) @ m, 100) for y in aA.basis for m in A.basis)
    psi_mod = all(tol.close(Psi(m @ x), m @ Psi(x), 100) for x in Aa.basis for m in A.basis)
    into = all(A.contains(z) for z in Phi.images) and all(A.contains(z) for z in Psi.images)
    compat = all(tol.close(Psi(x) @ Phi(y), x @ y, 100) for x in Aa.basis for y in aA.basis)
    cb_phi, note_phi = _cb_contractive(Phi, "left", tol, rng)
    cb_psi, note_psi = _cb_contractive(Psi, "right", tol, rng)
    checks = [
        ("Phi is a right module map", phi_mod),
        ("Psi is a left module map", psi_mod),
        ("maps land in A", into),
        ("Psi(x) Phi(y) = x y", compat),
    ]
    notes = [f"Phi: {note_phi}", f"Psi: {note_psi}"]
    if cb_phi is False or cb_psi is False:
        checks.append(("complete contractivity", False))
    pre = Verdict.from_checks(checks)
    if not pre.yes:
        return Verdict(Answer.NO, None, pre.notes + notes)
    if cb_phi is None or cb_psi is None:
        return Verdict(Answer.UNKNOWN, None, pre.notes + notes)
    a_s = a / la if la > 0 else a
    c = power_t(a_s, 0.5, A.convention, tol)
    y, x = Phi(c), Psi(c)
    b_s = y @ x
    vpr = vpr_construct(A, a_s, x, y)
    b = la * b_s
    checks += [
        ("b equivalent to a", vpr.yes),
        ("Phi(aA) = bA", Phi.range().equal(_ideal(A, b_s, "right"), 1e-7)),
        ("Psi(Aa) = Ab", Psi.range().equal(_ideal(A, b_s, "left"), 1e-7)),
    ]
    out = Verdict.from_checks(checks, {"b": b, "x": x, "y": y, "v": vpr.witness["v"]})
    out.notes += notes + vpr.notes
    return out


__all__ = [
    "LinearMap", "PedersenWitness", "VARIANTS", "blackadar_decide", "c_verify", "haver_extract",
    "ideal_equality_check", "ideal_generator", "m1_check", "noncommuting_pair", "pedersen_decide",
    "pedersen_decide_full", "pedersen_verify", "power_equiv_transport", "root_equiv_witnesses",
    "square_transitivity_check", "subequiv_decide", "unitary_intertwiner", "v_from_witness",
    "vpr_construct", "witness_from_v",
]
