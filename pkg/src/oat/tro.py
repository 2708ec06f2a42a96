"""Ternary rings of operators: subspaces Z of m x n matrices with ``Z Z* Z ⊆ Z``.

Rectangular elements are multiplied inside the linking algebra, which sits
in M_{m+n} with corners ``Z Z*``, Z, Z* and ``Z* Z``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import MAX_CLOSURE_ROUNDS, OperatorAlgebra, SConvention, unit_of
from .bimodule import support_tripotent_search
from .calculus import in_S_matrix, power_t, support
from .errors import ConsistencyError, DimensionError, PreconditionError
from .matcore import DEFAULT_TOL, MatSubspace, Tolerance, as_matrix, dag, opnorm
from .tripotent import is_tripotent, pz_verify
from .verdict import Verdict, no

ANGLE_TOL = 1e-7


def _place(m: np.ndarray, row: int, col: int, rows: int, cols: int) -> np.ndarray:
    """Put an m x n or n x m block into the corner of the (rows + cols) square."""
    size = rows + cols
    out = np.zeros((size, size), dtype=np.complex128)
    r0 = 0 if row == 0 else rows
    c0 = 0 if col == 0 else rows
    out[r0:r0 + m.shape[0], c0:c0 + m.shape[1]] = m
    return out


@dataclass
class TroSpace:
    """A ternary-closed subspace together with its corner and linking algebras."""

    Z: MatSubspace
    left: MatSubspace
    right: MatSubspace
    linking: MatSubspace
    convention: SConvention = SConvention.HALF_BALL
    notes: list[str] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return self.Z.shape

    @property
    def tol(self) -> Tolerance:
        return self.Z.tol

    def left_algebra(self) -> OperatorAlgebra:
        return OperatorAlgebra(self.shape[0], self.left, self.convention, self.tol)

    def right_algebra(self) -> OperatorAlgebra:
        return OperatorAlgebra(self.shape[1], self.right, self.convention, self.tol)

    def linking_algebra(self) -> OperatorAlgebra:
        return OperatorAlgebra(sum(self.shape), self.linking, self.convention, self.tol)

    def embed(self, z) -> np.ndarray:
        """``z`` in the top right corner of the linking algebra."""
        m, n = self.shape
        return _place(as_matrix(z, (m, n)), 0, 1, m, n)

    def to_json(self) -> dict:
        from .matcore import matrix_to_json

        return {"rows": self.shape[0], "cols": self.shape[1],
                "generators": [matrix_to_json(b) for b in self.Z.basis]}


def _linking(Z: MatSubspace, left: MatSubspace, right: MatSubspace) -> MatSubspace:
    m, n = Z.shape
    mats = ([_place(b, 0, 0, m, n) for b in left.basis] + [_place(b, 0, 1, m, n) for b in Z.basis]
            + [_place(dag(b), 1, 0, m, n) for b in Z.basis]
            + [_place(b, 1, 1, m, n) for b in right.basis])
    return MatSubspace.span(mats, (m + n, m + n), Z.tol)


def _ternary(Z: MatSubspace) -> MatSubspace:
    return Z.product(Z.adjoint()).product(Z)


def tro_from_space(Z: MatSubspace, convention="half-ball") -> TroSpace:
    """Wrap a subspace after checking ternary closure and the corner structure."""
    if not _ternary(Z).subset_of(Z):
        raise PreconditionError("subspace is not ternary closed (Z Z* Z ⊄ Z)")
    left = Z.product(Z.adjoint())
    right = Z.adjoint().product(Z)
    L = _linking(Z, left, right)
    checks = [
        ("Z Z* Z ⊆ Z", True),
        ("left corner *-closed", left.adjoint().equal(left, ANGLE_TOL)),
        ("left corner product closed", left.product(left).subset_of(left)),
        ("right corner *-closed", right.adjoint().equal(right, ANGLE_TOL)),
        ("right corner product closed", right.product(right).subset_of(right)),
        ("linking algebra *-closed", L.adjoint().equal(L, ANGLE_TOL)),
        ("linking algebra product closed", L.product(L).subset_of(L)),
    ]
    ver = Verdict.from_checks(checks)
    if not ver.yes:
        raise ConsistencyError("ternary closed but the linking algebra is not a C*-algebra: "
                               + "; ".join(ver.notes))
    return TroSpace(Z, left, right, L, SConvention.parse(convention), ver.notes)


def make_tro(generators, shape: tuple[int, int] | None = None, convention="half-ball",
             tol: Tolerance = DEFAULT_TOL) -> TroSpace:
    """Smallest ternary-closed subspace containing the generators."""
    mats = [np.asarray(g, dtype=np.complex128) for g in generators]
    if shape is None:
        if not mats:
            raise DimensionError("need a generator or an explicit shape")
        shape = mats[0].shape
    for g in mats:
        if g.shape != tuple(shape):
            raise DimensionError(f"generator of shape {g.shape}, expected {tuple(shape)}")
    cur = MatSubspace.span(mats, tuple(shape), tol)
    for _ in range(MAX_CLOSURE_ROUNDS):
        nxt = cur + _ternary(cur)
        if nxt.dim == cur.dim:
            return tro_from_space(cur, convention)
        cur = nxt
    raise ConsistencyError("ternary closure did not stabilize")


def tro_from_json(obj, tol: Tolerance = DEFAULT_TOL) -> TroSpace:
    from .errors import ParseError
    from .matcore import matrix_from_json

    try:
        shape = (int(obj["rows"]), int(obj["cols"]))
        gens = [matrix_from_json(g) for g in obj["generators"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad TRO object: {exc}") from exc
    return make_tro(gens, shape, obj.get("convention", "half-ball"), tol)


# ---------------------------------------------------------------- equivalence in a TRO

def _require_tripotent(Z: TroSpace, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    if v.shape != Z.shape:
        raise DimensionError(f"v has shape {v.shape}, the TRO lives in {Z.shape}")
    if not is_tripotent(v, Z.tol):
        raise PreconditionError("v is not a tripotent")
    return v


def _corner(S: MatSubspace, p, q) -> MatSubspace:
    img = MatSubspace.span([p @ b @ q for b in S.basis], (p.shape[0], q.shape[1]), S.tol)
    return img.intersect(S, ANGLE_TOL)


def tro_pz_verify(Z: TroSpace, v) -> Verdict:
    """Does the tripotent v implement an equivalence of ``v* v`` and ``v v*``?

    Required: ``p = v* v`` in ``Z* Z``, ``q = v v*`` in ``Z Z*`` and
    ``v (Z*Z)_p ⊆ Z``. The mirror inclusion ``v* (ZZ*)_q ⊆ Z*`` and the
    pair ``v* (qZp) ⊆ Z*Z``, ``v (pZ*q) ⊆ ZZ*`` must then follow.
    """
    v = _require_tripotent(Z, v)
    tol = Z.tol
    p, q = dag(v) @ v, v @ dag(v)
    Zs = Z.Z.adjoint()
    right_p = _corner(Z.right, p, p)
    left_q = _corner(Z.left, q, q)
    main = [
        ("p = v* v in Z* Z", Z.right.contains(p, tol)),
        ("q = v v* in Z Z*", Z.left.contains(q, tol)),
        ("v (Z*Z)_p ⊆ Z", all(Z.Z.contains(v @ x, tol) for x in right_p.basis)),
    ]
    derived = [
        ("v in Z", Z.Z.contains(v, tol)),
        ("v* (ZZ*)_q ⊆ Z*", all(Zs.contains(dag(v) @ x, tol) for x in left_q.basis)),
        ("v* (q Z p) ⊆ Z*Z", all(Z.right.contains(dag(v) @ x, tol)
                                 for x in _corner(Z.Z, q, p).basis)),
        ("v (p Z* q) ⊆ ZZ*", all(Z.left.contains(v @ x, tol)
                                 for x in _corner(Zs, p, q).basis)),
    ]
    if all(ok for _, ok in main) and not all(ok for _, ok in derived):
        raise ConsistencyError("main inclusions hold but a derived one fails")
    return Verdict.from_checks(main + derived, v)


def tro_pz_via_linking(Z: TroSpace, v) -> Verdict:
    """The same question asked in the linking algebra, between ``0 ⊕ p`` and ``q ⊕ 0``."""
    v = _require_tripotent(Z, v)
    m, n = Z.shape
    L = Z.linking_algebra()
    V = Z.embed(v)
    P = _place(dag(v) @ v, 1, 1, m, n)
    Q = _place(v @ dag(v), 0, 0, m, n)
    if not (L.contains(P) and L.contains(Q)):
        return no(None, "a support projection is not in the linking algebra")
    return pz_verify(L, P, Q, V)


def _require_cone_base(a, conv: SConvention, tol: Tolerance, what: str):
    if not in_S_matrix(a, conv, tol=tol):
        raise PreconditionError(f"{what} is not in the cone base")


def isu_construct(Z: TroSpace, v, b) -> Verdict:
    """From ``p_b = v* v`` build ``a = v b v*``, ``x = v b^(1/2)``, ``y = b^(1/2) v*``.

    Certified: a in the cone base of ``Z Z*`` with ``p_a = v v*``; ``x y = a``,
    ``y x = b``; ``aZb = qZp``; and ``z -> v* z`` is a ternary isomorphism
    of ``qZp`` onto ``p (Z*Z) p``, isometric at levels 1 and 2.
    """
    tol = Z.tol
    m, n = Z.shape
    v = _require_tripotent(Z, v)
    if not tro_pz_verify(Z, v).yes:
        raise PreconditionError("v does not implement an equivalence in Z")
    b = as_matrix(b, (n, n))
    if not Z.right.contains(b, tol):
        raise PreconditionError("b is not in the right corner algebra")
    _require_cone_base(b, Z.convention, tol, "b")
    p, q = dag(v) @ v, v @ dag(v)
    if not tol.close(support(b, tol), p, 100):
        raise PreconditionError("support of b is not v* v")
    a = v @ b @ dag(v)
    rb = power_t(b, 0.5, Z.convention, tol)
    x, y = v @ rb, rb @ dag(v)
    aZb = MatSubspace.span([a @ z @ b for z in Z.Z.basis], (m, n), tol)
    qZp = _corner(Z.Z, q, p)
    pBp = _corner(Z.right, p, p)
    image = qZp.map(lambda z: dag(v) @ z, (n, n))
    rng = np.random.default_rng(0)
    ternary = all(tol.close(dag(v) @ (z1 @ dag(z2) @ z3),
                            (dag(v) @ z1) @ dag(dag(v) @ z2) @ (dag(v) @ z3), 10)
                  for z1 in qZp.basis[:4] for z2 in qZp.basis[:4] for z3 in qZp.basis[:4])
    iso = True
    for _ in range(4):
        z = qZp.random_element(rng)
        iso &= abs(opnorm(dag(v) @ z) - opnorm(z)) <= 100 * tol.eq_eps * (1 + opnorm(z))
        blocks = [[qZp.random_element(rng) for _ in range(2)] for _ in range(2)]
        big = np.block(blocks)
        mapped = np.block([[dag(v) @ w for w in row] for row in blocks])
        iso &= abs(opnorm(big) - opnorm(mapped)) <= 100 * tol.eq_eps * (1 + opnorm(big))
    checks = [
        ("a in Z Z*", Z.left.contains(a, tol)),
        ("a in cone base", in_S_matrix(a, Z.convention, tol=tol)),
        ("p_a = v v*", tol.close(support(a, tol), q, 100)),
        ("x in Z", Z.Z.contains(x, tol)),
        ("y in Z*", Z.Z.adjoint().contains(y, tol)),
        ("x y = a", tol.close(x @ y, a, 10)),
        ("y x = b", tol.close(y @ x, b, 10)),
        ("aZb = qZp", aZb.equal(qZp, ANGLE_TOL)),
        ("v* (qZp) = p (Z*Z) p", image.equal(pBp, ANGLE_TOL)),
        ("z -> v* z preserves triple products", ternary),
        ("z -> v* z isometric at levels 1 and 2 (sampled)", iso),
        ("||a|| = ||b||", abs(opnorm(a) - opnorm(b)) <= 10 * tol.eq_eps),
    ]
    return Verdict.from_checks(checks, {"a": a, "x": x, "y": y, "p": p, "q": q})


def is_tro_inner_ideal(Z: TroSpace, D: MatSubspace) -> bool:
    if D.shape != Z.shape or not D.subset_of(Z.Z):
        return False
    return D.product(Z.Z.adjoint()).product(D).subset_of(D)


def sep_decompose(Z: TroSpace, D: MatSubspace, seed: int = 0, with_pz: bool = True) -> Verdict:
    """Write an inner ideal D of Z as ``aZb``, with a and b the units of ``DD*`` and ``D*D``.

    With ``with_pz`` the routine also asks whether D has a support tripotent
    inside the linking algebra; if so its supports are the two units, which
    are then equivalent in Z.
    """
    tol = Z.tol
    if not is_tro_inner_ideal(Z, D):
        raise PreconditionError("D is not an inner ideal of Z (D Z* D ⊄ D)")
    m, n = Z.shape
    DD = D.product(D.adjoint())
    DsD = D.adjoint().product(D)
    a, b = unit_of(DD, tol), unit_of(DsD, tol)
    if a is None or b is None:
        raise ConsistencyError("D D* or D* D has no unit")
    aZb = MatSubspace.span([a @ z @ b for z in Z.Z.basis], (m, n), tol)
    checks = [
        ("D D* hereditary in Z Z*", DD.product(Z.left).product(DD).subset_of(DD)),
        ("D* D hereditary in Z* Z", DsD.product(Z.right).product(DsD).subset_of(DsD)),
        ("D = aZb", D.equal(aZb, ANGLE_TOL)),
    ]
    ver = Verdict.from_checks(checks, {"a": a, "b": b})
    ver.notes.append("separability dropped: every subspace here is finite-dimensional")
    if not ver.yes:
        raise ConsistencyError("inner ideal is not aZb: " + "; ".join(ver.notes))
    if with_pz:
        L = Z.linking_algebra()
        X = MatSubspace.span([Z.embed(d) for d in D.basis], (m + n, m + n), tol)
        found = support_tripotent_search(L, X, seed)
        if found.yes:
            w = found.witness[:m, m:]
            pz = tro_pz_verify(Z, w)
            ok = pz.yes and tol.close(w @ dag(w), a, 100) and tol.close(dag(w) @ w, b, 100)
            if not ok:
                raise ConsistencyError("support tripotent of D does not link the two units")
            ver.witness["tripotent"] = w
            ver.notes.append("D has a support tripotent: a and b are equivalent via it")
        else:
            ver.notes.append("D has no support tripotent in the linking algebra")
    return ver


def singly_generated_dim(x, tol: Tolerance = DEFAULT_TOL) -> int:
    """Dimension of the TRO generated by x: its number of distinct nonzero singular values."""
    s = np.linalg.svd(np.asarray(x, dtype=np.complex128), compute_uv=False)
    thr = tol.rank_eps * max(s[0] if s.size else 0.0, 1.0)
    vals = sorted(s[s > thr])
    groups = 0
    last = None
    for val in vals:
        if last is None or val - last > 1e-6 * max(val, 1.0):
            groups += 1
        last = val
    return groups


__all__ = [
    "TroSpace", "is_tro_inner_ideal", "isu_construct", "make_tro", "sep_decompose",
    "singly_generated_dim", "tro_from_json", "tro_from_space", "tro_pz_verify",
    "tro_pz_via_linking",
]
