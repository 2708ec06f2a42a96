"""Tripotents, their ordering, Peirce algebras and partial-isometry equivalence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import OperatorAlgebra, SConvention, wedderburn
from .calculus import in_S_matrix
from .errors import ConsistencyError, PreconditionError
from .matcore import (
    DEFAULT_TOL,
    MatSubspace,
    Tolerance,
    as_matrix,
    dag,
    is_projection,
    opnorm,
    polar,
    range_projector,
)
from .verdict import Answer, Verdict, no, unknown, yes


@dataclass
class Tripotent:
    """A partial isometry v with its initial projection ``v* v`` and final ``v v*``."""

    v: np.ndarray
    initial: np.ndarray
    final: np.ndarray

    @classmethod
    def of(cls, v, tol: Tolerance = DEFAULT_TOL) -> "Tripotent":
        v = as_matrix(v)
        if not is_tripotent(v, tol):
            raise PreconditionError("matrix is not a tripotent (v v* v != v)")
        return cls(v, dag(v) @ v, v @ dag(v))

    @property
    def adjoint(self) -> "Tripotent":
        return Tripotent(dag(self.v), self.final, self.initial)


def is_tripotent(v, tol: Tolerance = DEFAULT_TOL) -> bool:
    v = np.asarray(v, dtype=np.complex128)
    return tol.close(v @ dag(v) @ v, v)


def range_tripotent(x, tol: Tolerance = DEFAULT_TOL) -> Tripotent:
    """The partial isometry in the polar decomposition of x."""
    return Tripotent.of(polar(x, tol)[0], tol)


def hat(u) -> np.ndarray:
    """``(1/2) [[u u*, u], [u*, u* u]]``, a projection exactly when u is a tripotent."""
    u = np.asarray(u, dtype=np.complex128)
    return 0.5 * np.block([[u @ dag(u), u], [dag(u), dag(u) @ u]])


def tripotent_leq(u, w, tol: Tolerance = DEFAULT_TOL) -> bool:
    """Tripotent order ``u <= w``, defined by ``u w* u = u``.

    The equivalent forms ``u = w u* u`` and ``u = u u* w`` are evaluated too
    and must agree; when the order holds, ``u*u <= w*w`` and ``u u* <= w w*``
    must follow.
    """
    u = as_matrix(u)
    w = as_matrix(w, u.shape)
    forms = [
        tol.close(u @ dag(w) @ u, u),
        tol.close(w @ dag(u) @ u, u),
        tol.close(u @ dag(u) @ w, u),
    ]
    if len(set(forms)) != 1:
        raise ConsistencyError(f"equivalent forms of the tripotent order disagree: {forms}")
    if forms[0]:
        pu, pw = dag(u) @ u, dag(w) @ w
        qu, qw = u @ dag(u), w @ dag(w)
        if not (tol.close(pw @ pu, pu) and tol.close(qw @ qu, qu)):
            raise ConsistencyError("order holds but the supports are not nested")
    return forms[0]


def peirce_space(A: OperatorAlgebra, u) -> MatSubspace:
    """``{a in A : u u* a u* u = a}``."""
    u = np.asarray(u, dtype=np.complex128)
    return A.corner(u @ dag(u), dag(u) @ u)


def is_star_open(A: OperatorAlgebra, u) -> bool:
    """Is u a tripotent lying, with its adjoint, in A?

    Two routes: the intrinsic test (u in its Peirce space, that space
    times u* inside A, u* in A) and plain membership of u in A ∩ A*.
    """
    u = as_matrix(u, (A.n, A.n))
    if not is_tripotent(u, A.tol):
        return False
    in_a = A.contains(u)
    intrinsic = False
    if in_a:
        Au = peirce_space(A, u)
        intrinsic = (
            Au.contains(u)
            and all(A.contains(x @ dag(u)) for x in Au.basis)
            and A.contains(dag(u))
        )
    diagonal = A.diagonal().contains(u)
    if intrinsic != diagonal:
        raise ConsistencyError("the two *-openness tests disagree")
    return diagonal


def require_star_open(A: OperatorAlgebra, u, what: str = "u") -> np.ndarray:
    u = as_matrix(u, (A.n, A.n))
    if not is_star_open(A, u):
        raise PreconditionError(f"{what} is not a *-open tripotent of the algebra")
    return u


@dataclass
class PeirceAlgebra:
    """The space ``A_u`` with product ``x u* y``, involution ``u x* u`` and unit u."""

    A: OperatorAlgebra
    u: np.ndarray
    space: MatSubspace

    def product(self, x, y) -> np.ndarray:
        return x @ dag(self.u) @ y

    def involution(self, x) -> np.ndarray:
        return self.u @ dag(x) @ self.u

    @property
    def unit(self) -> np.ndarray:
        return self.u

    def contains(self, x) -> bool:
        return self.space.contains(x, self.A.tol)

    def in_S(self, x) -> bool:
        return self.contains(x) and in_S_matrix(x, self.A.convention, unit=self.u, tol=self.A.tol)


def peirce(A: OperatorAlgebra, u) -> PeirceAlgebra:
    u = require_star_open(A, u)
    P = PeirceAlgebra(A, u, peirce_space(A, u))
    basis = P.space.basis
    for x in basis:
        for y in basis:
            if not P.contains(P.product(x, y)):
                raise ConsistencyError("Peirce space is not closed under its product")
    if basis.shape[0] and not all(np.allclose(P.product(u, x), x) and np.allclose(P.product(x, u), x)
                                  for x in basis):
        raise ConsistencyError("u is not the unit of its Peirce algebra")
    return P


def _s_samples(P: PeirceAlgebra, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Elements of the cone base of a Peirce algebra, including u itself."""
    u = P.u
    conv = P.A.convention
    out = [u]
    contractions = [np.exp(1j * th) * u for th in np.linspace(0, 2 * np.pi, 12, endpoint=False)]
    for _ in range(count):
        c = P.space.random_element(rng)
        nrm = opnorm(c)
        if nrm > 0:
            contractions.append(c * (rng.uniform(0.2, 1.0) / nrm))
    for c in contractions:
        if conv is SConvention.HALF_BALL:
            out.append((u - c) / 2)
        else:
            d = u - c
            out.append(d * min(1.0, 1.0 / max(opnorm(d), 1e-300)))
    return out


def peirce_order_check(A: OperatorAlgebra, u, w, samples: int = 48, seed: int = 0) -> Verdict:
    """Four characterizations of ``u <= w`` for *-open tripotents; all must agree.

    (i) the tripotent order; (ii) ``A_u`` is a unital subalgebra of the
    Peirce algebra of w with the same product, and hereditary there;
    (iii) the cone base of ``A_u`` sits inside that of ``A_w`` (sampled,
    always including u); (iv) ``hat(u) <= hat(w)``.
    """
    u = require_star_open(A, u, "u")
    w = require_star_open(A, w, "w")
    tol = A.tol
    Pu = peirce(A, u)
    Pw = peirce(A, w)
    c1 = tripotent_leq(u, w, tol)

    c2 = Pu.space.subset_of(Pw.space, tol)
    if c2:
        bu, bw = Pu.space.basis, Pw.space.basis
        for x in bu:
            if not tol.close(Pw.product(x, u), x) or not tol.close(Pw.product(u, x), x):
                c2 = False
                break
            for y in bu:
                if not tol.close(Pw.product(x, y), Pu.product(x, y)):
                    c2 = False
                    break
            if not c2:
                break
        if c2:
            for x in bu:
                for y in bw:
                    for z in bu:
                        if not Pu.contains(Pw.product(Pw.product(x, y), z)):
                            c2 = False
                            break

    rng = np.random.default_rng(seed)
    c3 = all(Pw.in_S(x) for x in _s_samples(Pu, samples, rng))

    hu, hw = hat(u), hat(w)
    c4 = tol.close(hw @ hu, hu)

    flags = {"(i) u w* u = u": c1, "(ii) Peirce subalgebra": c2,
             "(iii) cone base inclusion": c3, "(iv) hat(u) <= hat(w)": c4}
    notes = [f"{k}: {'ok' if v else 'FAIL'}" for k, v in flags.items()]
    if len(set(flags.values())) != 1:
        raise ConsistencyError("characterizations of the tripotent order disagree: " + "; ".join(notes))
    return Verdict(Answer.YES if c1 else Answer.NO, {"u": u, "w": w}, notes)


def tripotent_join(u, w, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Least tripotent above u and w, read off the join of their hat projections.

    Raises PreconditionError when the hat join is not the hat of a tripotent
    dominating both, i.e. when u and w have no common upper bound.
    """
    u = as_matrix(u)
    w = as_matrix(w, u.shape)
    if not (is_tripotent(u, tol) and is_tripotent(w, tol)):
        raise PreconditionError("join needs two tripotents")
    m = u.shape[0]
    P = range_projector(hat(u) + hat(w), tol)
    j = 2.0 * P[:m, m:]
    ok = (is_tripotent(j, tol) and tol.close(hat(j), P, 10)
          and tripotent_leq(u, j, tol) and tripotent_leq(w, j, tol))
    if not ok:
        raise PreconditionError("the tripotents have no common upper bound")
    return j


# ---------------------------------------------------------------- PZ equivalence

def _require_projection(A: OperatorAlgebra, p, what: str) -> np.ndarray:
    p = as_matrix(p, (A.n, A.n))
    if not is_projection(p, A.tol):
        raise PreconditionError(f"{what} is not a projection")
    if not A.contains(p):
        raise PreconditionError(f"{what} is not in the algebra")
    return p


def pz_verify(A: OperatorAlgebra, p, q, v) -> Verdict:
    """Verify that v implements ``p ~ q``.

    Required: ``v* v = p``, ``v v* = q``, v and v* in A, ``v A_p ⊆ A``. The
    mirror condition ``v* A_q ⊆ A`` and the one-sided forms ``A_q v ⊆ A``,
    ``A_p v* ⊆ A`` must then follow, which is checked as well.
    """
    tol = A.tol
    p = _require_projection(A, p, "p")
    q = _require_projection(A, q, "q")
    v = as_matrix(v, (A.n, A.n))
    Ap = A.corner(p)
    Aq = A.corner(q)
    p_side = [
        ("v* v = p", tol.close(dag(v) @ v, p)),
        ("v v* = q", tol.close(v @ dag(v), q)),
        ("v in A", A.contains(v)),
        ("v* in A", A.contains(dag(v))),
        ("v A_p ⊆ A", all(A.contains(v @ x) for x in Ap.basis)),
    ]
    q_side = [
        ("v* A_q ⊆ A", all(A.contains(dag(v) @ x) for x in Aq.basis)),
        ("A_q v ⊆ A", all(A.contains(x @ v) for x in Aq.basis)),
        ("A_p v* ⊆ A", all(A.contains(x @ dag(v)) for x in Ap.basis)),
    ]
    if all(ok for _, ok in p_side) and not all(ok for _, ok in q_side):
        raise ConsistencyError("p-side conditions hold but the q-side ones fail")
    return Verdict.from_checks(p_side + q_side, v)


def generic_partial_isometry(space: MatSubspace, rng: np.random.Generator,
                             tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Partial isometry of a random element of ``space``.

    A random element has maximal rank among elements of the space with
    probability one, so its supports dominate those of any other element.
    """
    return polar(space.random_element(rng), tol)[0]


def pz_decide(A: OperatorAlgebra, p, q, seed: int = 0, attempts: int = 4) -> Verdict:
    """Decide ``p ~ q`` by comparing block ranks in ``A ∩ A*``.

    A yes is backed by a verified witness: the partial isometry of a random
    element of ``q (A ∩ A*) p``. A no names the block whose ranks differ.
    """
    tol = A.tol
    p = _require_projection(A, p, "p")
    q = _require_projection(A, q, "q")
    D = A.diagonal()
    dec = wedderburn(D, seed)
    rp = dec.block_ranks(p)
    rq = dec.block_ranks(q)
    notes = [f"block ranks of p: {list(rp)}", f"block ranks of q: {list(rq)}"]
    if rp != rq:
        i = next(k for k in range(len(rp)) if rp[k] != rq[k])
        return no({"block": i, "rank_p": rp[i], "rank_q": rq[i]}, *notes,
                  f"refutation: block {i} has rank {rp[i]} under p but {rq[i]} under q")
    between = D.space.map(lambda b: q @ b @ p)
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        v = generic_partial_isometry(between, rng, tol)
        ver = pz_verify(A, p, q, v)
        if ver.yes:
            return yes(v, *notes, *ver.notes)
    return unknown(*notes, "ranks agree but no witness verified")


__all__ = [
    "PeirceAlgebra", "Tripotent", "generic_partial_isometry", "hat", "is_star_open", "is_tripotent",
    "peirce", "peirce_order_check", "peirce_space", "pz_decide", "pz_verify", "range_tripotent",
    "require_star_open", "tripotent_join", "tripotent_leq",
]
