"""Hereditary bimodules: corners ``p A q`` cut out by a *-open tripotent.

A hereditary bimodule of A is an inner ideal X (``X A X ⊆ X``) equal to
the Peirce space ``{a in A : u u* a u* u = a}`` of some *-open tripotent u,
its support tripotent.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import OperatorAlgebra, hsa_check
from .calculus import cone_scale, in_S, support, support_projection
from .equivalence import LinearMap, PedersenWitness, pedersen_verify, witness_from_v
from .errors import ConsistencyError, DimensionError, PreconditionError
from .matcore import (
    MatSubspace,
    as_matrix,
    dag,
    eye,
    opnorm,
    polar,
)
from .tripotent import (
    generic_partial_isometry,
    is_star_open,
    is_tripotent,
    peirce,
    peirce_space,
    pz_verify,
    require_star_open,
    tripotent_leq,
)
from .verdict import Answer, Verdict, no, unknown, yes

ALS_STARTS = 50
ALS_ITERS = 200
ANGLE_TOL = 1e-7


@dataclass
class HereditaryBimodule:
    """The Morita context ``(D, E, X, Y)`` of a *-open tripotent u.

    ``D = p A p`` and ``E = q A q`` with ``p = u u*`` and ``q = u* u``;
    ``X = p A q`` and ``Y = q A p``. ``linking`` is the subspace
    ``[[D, X], [Y, E]]`` of M_2(A).
    """

    A: OperatorAlgebra
    u: np.ndarray
    D: MatSubspace
    E: MatSubspace
    X: MatSubspace
    Y: MatSubspace
    linking: MatSubspace
    notes: list[str] = field(default_factory=list)

    @property
    def p(self) -> np.ndarray:
        return self.u @ dag(self.u)

    @property
    def q(self) -> np.ndarray:
        return dag(self.u) @ self.u


def _embed(m: np.ndarray, i: int, j: int, n: int) -> np.ndarray:
    out = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    out[i * n:(i + 1) * n, j * n:(j + 1) * n] = m
    return out


def _m2(A: OperatorAlgebra) -> MatSubspace:
    mats = [_embed(b, i, j, A.n) for i in range(2) for j in range(2) for b in A.basis]
    return MatSubspace.span(mats, (2 * A.n, 2 * A.n), A.tol)


def is_inner_ideal(A: OperatorAlgebra, X: MatSubspace) -> bool:
    if not X.subset_of(A.space, A.tol):
        return False
    return X.product(A.space).product(X).subset_of(X, A.tol)


def _require_inner_ideal(A: OperatorAlgebra, X: MatSubspace):
    if X.shape != (A.n, A.n):
        raise DimensionError("subspace must live in the ambient matrices of the algebra")
    if not is_inner_ideal(A, X):
        raise PreconditionError("X is not an inner ideal of A (X A X ⊄ X or X ⊄ A)")


def bimodule_from_tripotent(A: OperatorAlgebra, u, seed: int = 0) -> HereditaryBimodule:
    """Build and audit the Morita context of a *-open tripotent.

    Audited: ``D = XY``, ``E = YX``, ``X = DAE``, ``Y = EAD``; D and E are
    hereditary subalgebras; the linking space is the corner
    ``P M_2(A) P`` with ``P = p ⊕ q`` in M_2(A), hence hereditary; and
    ``l -> S* l S`` with ``S = diag(1, u*)`` carries it onto ``M_2(D)``,
    multiplicatively and isometrically.
    """
    u = require_star_open(A, u)
    tol = A.tol
    n = A.n
    p, q = u @ dag(u), dag(u) @ u
    D, E = A.corner(p), A.corner(q)
    X, Y = A.corner(p, q), A.corner(q, p)
    checks = [
        ("X is the Peirce space of u", X.equal(peirce_space(A, u), ANGLE_TOL)),
        ("D = X Y", D.equal(X.product(Y), ANGLE_TOL)),
        ("E = Y X", E.equal(Y.product(X), ANGLE_TOL)),
        ("X = D A E", X.equal(D.product(A.space).product(E), ANGLE_TOL)),
        ("Y = E A D", Y.equal(E.product(A.space).product(D), ANGLE_TOL)),
        ("D hereditary", hsa_check(A, D)),
        ("E hereditary", hsa_check(A, E)),
    ]
    mats = ([_embed(m, 0, 0, n) for m in D.basis] + [_embed(m, 0, 1, n) for m in X.basis]
            + [_embed(m, 1, 0, n) for m in Y.basis] + [_embed(m, 1, 1, n) for m in E.basis])
    L = MatSubspace.span(mats, (2 * n, 2 * n), tol)
    M2A = _m2(A)
    P = _embed(p, 0, 0, n) + _embed(q, 1, 1, n)
    corner = M2A.map(lambda m: P @ m @ P)
    checks += [
        ("P in M_2(A)", M2A.contains(P)),
        ("linking space = P M_2(A) P", L.equal(corner, ANGLE_TOL)),
    ]
    rng = np.random.default_rng(seed)
    herd = True
    for _ in range(8):
        l1, m, l2 = L.random_element(rng), M2A.random_element(rng), L.random_element(rng)
        herd &= L.contains(l1 @ m @ l2, tol.scaled(100))
    checks.append(("sampled L M_2(A) L ⊆ L", herd))

    S = _embed(eye(n), 0, 0, n) + _embed(dag(u), 1, 1, n)
    M2D = MatSubspace.span([_embed(m, i, j, n) for i in range(2) for j in range(2) for m in D.basis],
                           (2 * n, 2 * n), tol)
    img = L.map(lambda m: dag(S) @ m @ S)
    fixed = all(tol.close(S @ dag(S) @ m, m, 10) and tol.close(m @ S @ dag(S), m, 10) for m in L.basis)
    iso = True
    for _ in range(4):
        blocks = [[L.random_element(rng) for _ in range(2)] for _ in range(2)]
        big = np.block(blocks)
        mapped = np.block([[dag(S) @ z @ S for z in row] for row in blocks])
        iso &= abs(opnorm(big) - opnorm(mapped)) <= 100 * tol.eq_eps * (1 + opnorm(big))
    mult = all(tol.close(dag(S) @ l1 @ S @ dag(S) @ l2 @ S, dag(S) @ l1 @ l2 @ S, 10)
               for l1 in L.basis[:6] for l2 in L.basis[:6])
    checks += [
        ("S* L S = M_2(D)", img.equal(M2D, ANGLE_TOL)),
        ("S S* acts as the identity on L", fixed),
        ("corner map is multiplicative", mult),
        ("corner map isometric at level 2 (sampled)", iso),
    ]
    ver = Verdict.from_checks(checks)
    if not ver.yes:
        raise ConsistencyError("Morita context audit failed: " + "; ".join(ver.notes))
    return HereditaryBimodule(A, u, D, E, X, Y, L, ver.notes)


# ---------------------------------------------------------------- descriptions of aAb

@dataclass
class QuadResult:
    aAa: MatSubspace
    bAb: MatSubspace
    aAb: MatSubspace
    bAa: MatSubspace
    max_angle: float
    notes: list[str]


def _fixed_points(A: OperatorAlgebra, p, q) -> MatSubspace:
    """``{x in A : p x q = x}`` from the null space of ``x -> p x q - x`` on A."""
    if A.dim == 0:
        return MatSubspace.zero((A.n, A.n), A.tol)
    cols = [(p @ e @ q - e).reshape(-1) for e in A.basis]
    mat = np.stack(cols, axis=1)
    _, s, vh = np.linalg.svd(mat)
    thr = A.tol.rank_eps * max(s[0] if s.size else 0.0, 1.0)
    null = np.conj(vh[int(np.sum(s > thr)):])
    return MatSubspace.span([A.space.element(r) for r in null], (A.n, A.n), A.tol)


def quad(A: OperatorAlgebra, a, b) -> QuadResult:
    """The Morita context of cone elements a, b; ``aAb`` is computed six ways.

    The routes (products ``a m b``, the corner ``p_a A p_b`` as an
    image and as a fixed-point set, ``aA ∩ Ab``, ``aA · Ab`` and
    ``A_a A A_b``) must give the same subspace.
    """
    a = A.require(a, "a")
    b = A.require(b, "b")
    tol = A.tol
    for m, name in ((a, "a"), (b, "b")):
        if cone_scale(m, A.convention, tol) is None:
            raise PreconditionError(f"{name} is not in the cone")
    pa, pb = support(a, tol), support(b, tol)
    shape = (A.n, A.n)

    def sandwich(x, y):
        return MatSubspace.span([x @ m @ y for m in A.basis], shape, tol)

    aA = MatSubspace.span([a @ m for m in A.basis], shape, tol)
    Ab = MatSubspace.span([m @ b for m in A.basis], shape, tol)
    aAa, bAb = sandwich(a, a), sandwich(b, b)
    routes = {
        "a A b": sandwich(a, b),
        "p_a A p_b": A.corner(pa, pb),
        "{x in A : x = p_a x p_b}": _fixed_points(A, pa, pb),
        "aA ∩ Ab": aA.intersect(Ab, ANGLE_TOL),
        "aA · Ab": aA.product(Ab),
        "A_a A A_b": aAa.product(A.space).product(bAb),
    }
    ref = routes["a A b"]
    notes = []
    worst = 0.0
    for name, sp in routes.items():
        ang = ref.max_angle(sp)
        worst = max(worst, ang)
        notes.append(f"{name}: dim {sp.dim}, angle {ang:.2e}")
    if worst >= ANGLE_TOL:
        raise ConsistencyError("descriptions of aAb disagree: " + "; ".join(notes))
    return QuadResult(aAa, bAb, ref, sandwich(b, a), worst, notes)


# ---------------------------------------------------------------- recognizing support tripotents

def phii_check(A: OperatorAlgebra, X: MatSubspace, c, d) -> Verdict:
    """Does the pair (c, d) exhibit X as a hereditary bimodule?

    Required: c in X and d in A contractions with ``c d x = x`` and
    ``x d c = x`` for x in X. Then c itself is the support tripotent:
    ``c d`` and ``d c`` are projections, ``c* = d c d`` lies in A, and X is
    the Peirce space of c. Those consequences are re-derived.
    """
    _require_inner_ideal(A, X)
    tol = A.tol
    c = as_matrix(c, (A.n, A.n))
    d = as_matrix(d, (A.n, A.n))
    slack = 1 + tol.eq_eps
    checks = [
        ("c in X", X.contains(c, tol)),
        ("d in A", A.contains(d)),
        ("||c|| <= 1", opnorm(c) <= slack),
        ("||d|| <= 1", opnorm(d) <= slack),
        ("c d x = x on X", all(tol.close(c @ d @ x, x, 10) for x in X.basis)),
        ("x d c = x on X", all(tol.close(x @ d @ c, x, 10) for x in X.basis)),
    ]
    out = Verdict.from_checks(checks)
    if not out.yes:
        return out
    cd, dc = c @ d, d @ c
    derived = [
        ("c d c = c", tol.close(cd @ c, c, 10)),
        ("c d is a projection", tol.close(cd, dag(cd), 10) and tol.close(cd @ cd, cd, 10)),
        ("d c is a projection", tol.close(dc, dag(dc), 10) and tol.close(dc @ dc, dc, 10)),
        ("c is a partial isometry", is_tripotent(c, tol.scaled(10))),
        ("c* = d c d", tol.close(dag(c), d @ c @ d, 10)),
        ("X = Peirce space of c", X.equal(peirce_space(A, c), ANGLE_TOL)),
        ("c is *-open", is_star_open(A, c)),
    ]
    der = Verdict.from_checks(derived)
    if not der.yes:
        raise ConsistencyError("(c, d) passes but the consequences fail: " + "; ".join(der.notes))
    return Verdict(Answer.YES, c, out.notes + der.notes)


def _als(A: OperatorAlgebra, X: MatSubspace, rng: np.random.Generator, starts: int, iters: int):
    """Alternating least squares for ``c d x = x = x d c`` with c in X, d in A."""
    tol = A.tol
    xb = X.basis
    rhs = np.concatenate([np.concatenate([x.reshape(-1), x.reshape(-1)]) for x in xb])

    def system_for_d(c):
        cols = [np.concatenate([np.concatenate([(c @ e @ x).reshape(-1), (x @ e @ c).reshape(-1)])
                                for x in xb]) for e in A.basis]
        return np.stack(cols, axis=1)

    def system_for_c(d):
        cols = [np.concatenate([np.concatenate([(e @ d @ x).reshape(-1), (x @ d @ e).reshape(-1)])
                                for x in xb]) for e in X.basis]
        return np.stack(cols, axis=1)

    for _ in range(starts):
        c = X.random_element(rng)
        d = A.space.random_element(rng)
        prev = np.inf
        for _ in range(iters):
            md = system_for_d(c)
            beta, *_ = np.linalg.lstsq(md, rhs, rcond=None)
            d = A.space.element(beta)
            mc = system_for_c(d)
            alpha, *_ = np.linalg.lstsq(mc, rhs, rcond=None)
            c = X.element(alpha)
            res = float(np.linalg.norm(mc @ alpha - rhs))
            if res < tol.eq_eps * (1 + np.linalg.norm(rhs)):
                u = polar(c, tol)[0]
                ver = phii_check(A, X, u, dag(u))
                if ver.yes:
                    return u
                break
            if res > 0.999 * prev:
                break
            prev = res
    return None


def support_tripotent_search(A: OperatorAlgebra, X: MatSubspace, seed: int = 0,
                             starts: int = ALS_STARTS, iters: int = ALS_ITERS,
                             method: str = "generic") -> Verdict:
    """Find a support tripotent for the inner ideal X, or certify that none exists.

    Any support tripotent lies in ``X ∩ A ∩ A*`` and, since X is the corner
    between its supports, has maximal rank there. So the partial isometry
    of a generic element of ``X ∩ A ∩ A*`` is a support tripotent whenever
    one exists. ``method="als"`` instead runs alternating least squares on
    ``c d x = x = x d c`` within the given budget and answers unknown when
    it runs out.
    """
    _require_inner_ideal(A, X)
    tol = A.tol
    if X.dim == 0:
        return yes(np.zeros((A.n, A.n), dtype=np.complex128), "X = 0 has support tripotent 0")
    rng = np.random.default_rng(seed)
    if method == "als":
        u = _als(A, X, rng, starts, iters)
        if u is not None:
            return yes(u, "alternating least squares converged")
        return unknown(f"alternating least squares found nothing in {starts} x {iters}")
    if method != "generic":
        raise PreconditionError(f"unknown search method {method!r}")
    W = X.intersect(A.diagonal().space, ANGLE_TOL)
    if W.dim == 0:
        return no({"certificate": "X ∩ A ∩ A* = 0"},
                  "refutation: a support tripotent of X ≠ 0 is a nonzero element of X ∩ A ∩ A*, "
                  "which is zero")
    u = generic_partial_isometry(W, rng, tol)
    ver = phii_check(A, X, u, dag(u))
    if ver.yes:
        return Verdict(Answer.YES, u, [f"generic element of X ∩ A ∩ A* (dim {W.dim})"] + ver.notes)
    Pu = peirce_space(A, u)
    return no({"certificate": "maximal partial isometry too small", "peirce_dim": Pu.dim,
               "X_dim": X.dim},
              f"refutation: the maximal-rank partial isometry of X ∩ A ∩ A* has Peirce space of "
              f"dimension {Pu.dim}, not {X.dim}")


def bimodule_maps(H: HereditaryBimodule) -> dict[str, LinearMap]:
    u = H.u
    return {
        "D->E": LinearMap.from_function(H.D, lambda m: dag(u) @ m @ u),
        "X->Y": LinearMap.from_function(H.X, lambda m: dag(u) @ m @ dag(u)),
        "D->X": LinearMap.from_function(H.D, lambda m: m @ u),
        "D->Y": LinearMap.from_function(H.D, lambda m: dag(u) @ m),
    }


def expis_maps(H: HereditaryBimodule, seed: int = 0) -> Verdict:
    """The four isometries of a hereditary bimodule.

    ``a -> u* a u`` (D onto E, multiplicative), ``x -> u* x u*`` (X onto Y),
    ``d -> d u`` (D onto X) and ``d -> u* d`` (D onto Y). Each is checked to
    land in its target, to be onto, and to have an explicit inverse that is
    also multiplication by u or u*, so both directions are complete
    contractions.
    """
    tol = H.A.tol
    u = H.u
    maps = bimodule_maps(H)
    targets = {"D->E": H.E, "X->Y": H.Y, "D->X": H.X, "D->Y": H.Y}
    inverses = {
        "D->E": lambda m: u @ m @ dag(u),
        "X->Y": lambda m: u @ m @ u,
        "D->X": lambda m: m @ dag(u),
        "D->Y": lambda m: u @ m,
    }
    rng = np.random.default_rng(seed)
    checks = []
    for name, lm in maps.items():
        tgt = targets[name]
        src = lm.domain
        onto = lm.range().equal(tgt, ANGLE_TOL)
        back = all(tol.close(inverses[name](lm(m)), m, 10) for m in src.basis)
        sample = True
        for _ in range(4):
            z = src.random_element(rng)
            sample &= abs(opnorm(lm(z)) - opnorm(z)) <= 100 * tol.eq_eps * (1 + opnorm(z))
        checks += [(f"{name} onto", onto), (f"{name} inverted by the reverse multiplication", back),
                   (f"{name} isometric (sampled)", sample)]
    mult = all(tol.close(maps["D->E"](x @ y), maps["D->E"](x) @ maps["D->E"](y), 10)
               for x in H.D.basis for y in H.D.basis)
    checks.append(("D->E multiplicative", mult))
    return Verdict.from_checks(checks, maps)


def sharp(H: HereditaryBimodule, x) -> np.ndarray:
    """``x# = u* x u*``."""
    return dag(H.u) @ as_matrix(x) @ dag(H.u)


def _require_aAb(A: OperatorAlgebra, a, b, H: HereditaryBimodule):
    pa, pb = support(a, A.tol), support(b, A.tol)
    if not H.X.equal(A.corner(pa, pb), ANGLE_TOL):
        raise PreconditionError("the bimodule is not aAb")
    return pa, pb


def finma2_check(A: OperatorAlgebra, a, b, x, H: HereditaryBimodule) -> Verdict:
    """``a = x x#`` and ``b = x# x`` for some x in X = aAb; on yes a ~ b via ``v = u*``."""
    tol = A.tol
    a = A.require(a, "a")
    b = A.require(b, "b")
    if not (in_S(A, a) and in_S(A, b)):
        raise PreconditionError("a and b must lie in the cone base")
    _require_aAb(A, a, b, H)
    x = as_matrix(x, (A.n, A.n))
    xs = sharp(H, x)
    checks = [
        ("x in X", H.X.contains(x, tol)),
        ("a = x x#", tol.close(x @ xs, a, 10)),
        ("b = x# x", tol.close(xs @ x, b, 10)),
    ]
    out = Verdict.from_checks(checks)
    if not out.yes:
        return out
    v = dag(H.u)
    ver_iv = pedersen_verify(A, a, b, PedersenWitness("iv", v=v))
    wit = witness_from_v(A, a, v)
    ver_ii = pedersen_verify(A, a, b, wit)
    if not (ver_iv.yes and ver_ii.yes):
        raise ConsistencyError("a = x x#, b = x# x but the equivalence witness fails")
    return Verdict(Answer.YES, wit, out.notes + ver_iv.notes + ver_ii.notes)


def hco_construct(A: OperatorAlgebra, u, x) -> Verdict:
    """From x in the cone of the Peirce algebra of u, produce equivalent a, b in A.

    With s the support tripotent of x in the Peirce algebra,
    ``a = x s*`` and ``b = s* x``; the Peirce space of s is aAb. x is first
    scaled into the cone base of the Peirce algebra.
    """
    tol = A.tol
    P = peirce(A, u)
    u = P.u
    x = as_matrix(x, (A.n, A.n))
    if not P.contains(x):
        raise PreconditionError("x is not in the Peirce space of u")
    q = dag(u) @ u
    frame = polar(q, tol)[0]
    cols = np.linalg.svd(frame)[0][:, :int(round(np.trace(q).real))]
    y = dag(u) @ x
    yc = dag(cols) @ y @ cols
    lam = cone_scale(yc, A.convention, tol)
    if lam is None:
        raise PreconditionError("x is not in the cone of the Peirce algebra")
    scale = lam if lam > 1 else 1.0
    xs = x / scale
    cert = support_projection(dag(cols) @ dag(u) @ xs @ cols, A.convention, tol)
    sy = cols @ cert.projection @ dag(cols)
    s = u @ sy
    a = xs @ dag(s)
    b = dag(s) @ xs
    pa, pb = s @ dag(s), dag(s) @ s
    K = A.convention.factor
    bound = opnorm(u - K * xs)
    slack = 10 * tol.eq_eps
    aAb = MatSubspace.span([a @ m @ b for m in A.basis], (A.n, A.n), tol)
    checks = [
        ("s tripotent", is_tripotent(s, tol.scaled(10))),
        ("s <= u", tripotent_leq(s, u, tol.scaled(10))),
        ("s *-open", is_star_open(A, s)),
        ("a in cone base", in_S(A, a)),
        ("b in cone base", in_S(A, b)),
        ("||p_a - K a|| <= ||u - K x||", opnorm(pa - K * a) <= bound + slack),
        ("||p_b - K b|| <= ||u - K x||", opnorm(pb - K * b) <= bound + slack),
        ("support of a is s s*", tol.close(support(a, tol), pa, 100)),
        ("support of b is s* s", tol.close(support(b, tol), pb, 100)),
        ("a ~ b via s*", pedersen_verify(A, a, b, PedersenWitness("iv", v=dag(s))).yes),
        ("Peirce space of s = aAb", peirce_space(A, s).equal(aAb, ANGLE_TOL)),
    ]
    return Verdict.from_checks(checks, {"s": s, "a": a, "b": b, "scale": scale})


def principal_witness(A: OperatorAlgebra, H: HereditaryBimodule) -> Verdict:
    """``a = u u*`` and ``b = u* u`` are equivalent projections with ``X = aAb``."""
    tol = A.tol
    u = H.u
    a, b = u @ dag(u), dag(u) @ u
    aAb = MatSubspace.span([a @ m @ b for m in A.basis], (A.n, A.n), tol)
    checks = [
        ("a in cone base", in_S(A, a)),
        ("b in cone base", in_S(A, b)),
        ("a ~ b via u*", pedersen_verify(A, a, b, PedersenWitness("iv", v=dag(u))).yes),
        ("X = aAb", H.X.equal(aAb, ANGLE_TOL)),
    ]
    return Verdict.from_checks(checks, (a, b))


def _constant_pair_checks(A, X, a, b, c, d):
    tol = A.tol
    slack = 1 + tol.eq_eps
    return [
        ("c in aAb", X.contains(c, tol)),
        ("d in A", A.contains(d)),
        ("||c||, ||d|| <= 1", opnorm(c) <= slack and opnorm(d) <= slack),
        ("c d x = x on aAb", all(tol.close(c @ d @ x, x, 10) for x in X.basis)),
        ("x d c = x on aAb", all(tol.close(x @ d @ c, x, 10) for x in X.basis)),
        ("c d a = a", tol.close(c @ d @ a, a, 10)),
        ("b d c = b", tol.close(b @ d @ c, b, 10)),
    ]


def mst2_check(A: OperatorAlgebra, a, b, c, d) -> Verdict:
    """Constant pair (c, d) making aAb a principal bimodule between the supports.

    On yes, u = c satisfies ``u u* = p_a`` and ``u* u = p_b``, so the
    supports are equivalent via ``u*``.
    """
    tol = A.tol
    a = A.require(a, "a")
    b = A.require(b, "b")
    for m, name in ((a, "a"), (b, "b")):
        if cone_scale(m, A.convention, tol) is None:
            raise PreconditionError(f"{name} is not in the cone")
    c = as_matrix(c, (A.n, A.n))
    d = as_matrix(d, (A.n, A.n))
    pa, pb = support(a, tol), support(b, tol)
    X = A.corner(pa, pb)
    out = Verdict.from_checks(_constant_pair_checks(A, X, a, b, c, d))
    if not out.yes:
        return out
    ph = phii_check(A, X, c, d)
    u = c
    derived = [
        ("(c, d) exhibits aAb as hereditary", ph.yes),
        ("u u* = p_a", tol.close(u @ dag(u), pa, 10)),
        ("u* u = p_b", tol.close(dag(u) @ u, pb, 10)),
        ("p_a ~ p_b via u*", pz_verify(A, pa, pb, dag(u)).yes),
    ]
    der = Verdict.from_checks(derived, u)
    if not der.yes:
        raise ConsistencyError("constant pair passes but the support equivalence fails")
    return Verdict(Answer.YES, u, out.notes + der.notes)


def finma_check(A: OperatorAlgebra, a, b, x, y, c, d) -> Verdict:
    """a ~ b through ``a = x y``, ``b = y x`` with x in aAb, y in bAa and ``y c = d x``.

    Here (c, d) is a constant pair exhibiting aAb as hereditary. On yes the
    support tripotent u = c gives ``y = x#`` and the equivalence via ``u*``.
    """
    tol = A.tol
    a = A.require(a, "a")
    b = A.require(b, "b")
    if not (in_S(A, a) and in_S(A, b)):
        raise PreconditionError("a and b must lie in the cone base")
    x, y, c, d = (as_matrix(m, (A.n, A.n)) for m in (x, y, c, d))
    pa, pb = support(a, tol), support(b, tol)
    X = A.corner(pa, pb)
    ph = phii_check(A, X, c, d)
    if not ph.yes:
        return Verdict(Answer.NO, None, ["(c, d) does not exhibit aAb as hereditary"] + ph.notes)
    checks = [
        ("x in aAb", X.contains(x, tol)),
        ("y in bAa", A.corner(pb, pa).contains(y, tol)),
        ("a = x y", tol.close(x @ y, a, 10)),
        ("b = y x", tol.close(y @ x, b, 10)),
        ("y c = d x", tol.close(y @ c, d @ x, 10)),
    ]
    out = Verdict.from_checks(checks)
    if not out.yes:
        return out
    H = bimodule_from_tripotent(A, c)
    if not tol.close(sharp(H, x), y, 100):
        raise ConsistencyError("y c = d x holds but y is not x#")
    fin = finma2_check(A, a, b, x, H)
    if not fin.yes:
        raise ConsistencyError("finma conditions hold but a = x x#, b = x# x fails")
    return Verdict(Answer.YES, fin.witness, out.notes + fin.notes)


# ---------------------------------------------------------------- three routes to support comparison

def blackadar_via_bimodule(A: OperatorAlgebra, a, b, seed: int = 0) -> Verdict:
    """Support comparison through aAb: is it principal between the two supports?"""
    tol = A.tol
    a = A.require(a, "a")
    b = A.require(b, "b")
    pa, pb = support(a, tol), support(b, tol)
    X = MatSubspace.span([a @ m @ b for m in A.basis], (A.n, A.n), tol)
    found = support_tripotent_search(A, X, seed)
    if not found.yes:
        return Verdict(Answer.NO if found.no else Answer.UNKNOWN, found.witness,
                       ["aAb has no support tripotent"] + found.notes)
    u = found.witness
    if tol.close(u @ dag(u), pa, 100) and tol.close(dag(u) @ u, pb, 100):
        return yes(u, "aAb is principal with support tripotent between p_a and p_b")
    return no({"support_ranks": (int(round(np.trace(u @ dag(u)).real)),
                                 int(round(np.trace(dag(u) @ u).real)))},
              "refutation: the support tripotent of aAb (maximal in X ∩ A ∩ A*) does not "
              "reach both supports")


def blackadar_via_interpolant(A: OperatorAlgebra, a, b, seed: int = 0, attempts: int = 4) -> Verdict:
    """Support comparison through an equivalent element ``b' = v a v*`` supported on p_b."""
    tol = A.tol
    a = A.require(a, "a")
    b = A.require(b, "b")
    la = cone_scale(a, A.convention, tol)
    if la is None or cone_scale(b, A.convention, tol) is None:
        raise PreconditionError("a and b must lie in the cone")
    a_s = a / la if la > 0 else a
    pa, pb = support(a, tol), support(b, tol)
    between = A.diagonal().space.map(lambda m: pb @ m @ pa)
    rng = np.random.default_rng(seed)
    ranks = []
    for _ in range(attempts):
        v = generic_partial_isometry(between, rng, tol)
        bp = v @ a_s @ dag(v)
        ranks.append(int(round(np.trace(dag(v) @ v).real)))
        if not tol.close(dag(v) @ v, pa, 10):
            continue
        if pedersen_verify(A, a_s, bp, PedersenWitness("iv'", v=v)).yes and \
                tol.close(support(bp, tol), pb, 100):
            return yes({"v": v, "b_prime": bp}, "b' = v a v* is equivalent to a with support p_b")
    ra, rb = int(round(np.trace(pa).real)), int(round(np.trace(pb).real))
    return no({"generic_rank": max(ranks), "rank_p_a": ra, "rank_p_b": rb},
              f"refutation: generic partial isometries of p_b (A ∩ A*) p_a reach rank {max(ranks)}, "
              f"supports have ranks {ra} and {rb}")


def isaq_consistency(A: OperatorAlgebra, a, b, seed: int = 0) -> dict[str, Verdict]:
    """Run the block-rank, bimodule and interpolant routes; they must agree."""
    from .equivalence import blackadar_decide

    out = {
        "block ranks": blackadar_decide(A, a, b, seed),
        "bimodule": blackadar_via_bimodule(A, a, b, seed),
        "interpolant": blackadar_via_interpolant(A, a, b, seed),
    }
    answers = {k: v.answer for k, v in out.items()}
    if len(set(answers.values())) != 1:
        raise ConsistencyError(f"support comparison routes disagree: {answers}")
    return out


__all__ = [
    "HereditaryBimodule", "QuadResult", "bimodule_from_tripotent", "bimodule_maps",
    "blackadar_via_bimodule", "blackadar_via_interpolant", "expis_maps", "finma2_check",
    "finma_check", "hco_construct", "is_inner_ideal", "isaq_consistency", "mst2_check",
    "phii_check", "principal_witness", "quad", "sharp", "support_tripotent_search",
]
