import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oat.algebra import full_algebra, upper_triangular
from oat.bimodule import (
    bimodule_from_tripotent,
    blackadar_via_bimodule,
    blackadar_via_interpolant,
    expis_maps,
    finma2_check,
    finma_check,
    hco_construct,
    is_inner_ideal,
    isaq_consistency,
    mst2_check,
    phii_check,
    principal_witness,
    quad,
    sharp,
    support_tripotent_search,
)
from oat.calculus import power_t
from oat.errors import PreconditionError
from oat.matcore import E, MatSubspace

import oracles
from _gen import block_algebra, crandn, linking_isometry, random_blocks

seeds = st.integers(0, 2**32 - 1)


def _star_open_tripotent(rng, max_n=5):
    BA = block_algebra(rng, random_blocks(rng, max_n=max_n), upper=bool(rng.random() < 0.5))
    ranks = BA.random_ranks(rng)
    p, _ = BA.projection(rng, ranks)
    q, _ = BA.projection(rng, ranks)
    return BA, BA.algebra(), linking_isometry(rng, BA, q, p)


def test_quad_examples():
    M2 = full_algebra(2)
    r = quad(M2, E(1, 1), E(1, 1))
    assert r.aAb.equal(MatSubspace.span([E(1, 1)]))
    r = quad(M2, E(1, 1), E(2, 2))
    assert r.aAb.equal(MatSubspace.span([E(1, 2)]))
    assert r.bAa.equal(MatSubspace.span([E(2, 1)]))
    assert r.max_angle < 1e-7


@given(seeds)
def test_quad_dimension_matches_block_oracle(seed):
    rng = np.random.default_rng(seed)
    BA = block_algebra(rng, random_blocks(rng, max_n=5), upper=bool(rng.random() < 0.5))
    A = BA.algebra()
    pa, _ = BA.projection(rng, BA.random_ranks(rng))
    pb, _ = BA.projection(rng, BA.random_ranks(rng))
    a, b = BA.corner_element(rng, pa), BA.corner_element(rng, pb)
    r = quad(A, a, b)
    brute = [pa @ m @ pb for m in BA.basis()]
    assert r.aAb.dim == oracles.span_dim(brute)


def test_bimodule_of_matrix_unit():
    H = bimodule_from_tripotent(full_algebra(2), E(1, 2))
    assert H.D.dim == H.E.dim == H.X.dim == H.Y.dim == 1
    assert H.linking.dim == 4
    assert np.allclose(sharp(H, E(1, 2)), E(2, 1))


def test_bimodule_rejects_non_star_open():
    with pytest.raises(PreconditionError):
        bimodule_from_tripotent(upper_triangular(2), E(1, 2))


def test_projection_tripotent_collapses_corners():
    M3 = full_algebra(3)
    p = E(1, 1, 3) + E(2, 2, 3)
    H = bimodule_from_tripotent(M3, p)
    assert H.D.equal(H.E) and H.D.equal(H.X) and H.X.equal(H.Y)
    assert H.D.dim == 4


@given(seeds)
def test_bimodule_audit_on_random_tripotents(seed):
    rng = np.random.default_rng(seed)
    BA, A, u = _star_open_tripotent(rng)
    H = bimodule_from_tripotent(A, u, seed=seed)
    assert expis_maps(H, seed).yes
    pw = principal_witness(A, H)
    assert pw.yes
    a, b = pw.witness
    assert quad(A, a, b).aAb.equal(H.X, 1e-7)


def test_phii_on_triangular_and_full():
    X = MatSubspace.span([E(1, 2)])
    T2, M2 = upper_triangular(2), full_algebra(2)
    assert is_inner_ideal(T2, X)
    assert not phii_check(T2, X, E(1, 2), E(2, 1)).yes
    assert phii_check(M2, X, E(1, 2), E(2, 1)).yes
    assert support_tripotent_search(T2, X).no
    ver = support_tripotent_search(M2, X)
    assert ver.yes and np.allclose(abs(ver.witness), E(1, 2))


def test_search_methods_agree_on_full_algebra():
    M3 = full_algebra(3)
    X = M3.corner(E(1, 1, 3) + E(2, 2, 3), E(2, 2, 3) + E(3, 3, 3))
    assert support_tripotent_search(M3, X, method="generic").yes
    assert support_tripotent_search(M3, X, method="als", starts=10, iters=100).yes
    # corners between projections of different rank are not hereditary bimodules
    X = M3.corner(E(1, 1, 3), E(2, 2, 3) + E(3, 3, 3))
    assert support_tripotent_search(M3, X, method="generic").no
    assert not support_tripotent_search(M3, X, method="als", starts=3, iters=50).yes
    with pytest.raises(PreconditionError):
        support_tripotent_search(M3, X, method="guess")


@given(seeds)
def test_search_finds_peirce_space_of_random_tripotent(seed):
    rng = np.random.default_rng(seed)
    _, A, u = _star_open_tripotent(rng)
    H = bimodule_from_tripotent(A, u)
    ver = support_tripotent_search(A, H.X, seed=seed)
    assert ver.yes
    w = ver.witness
    assert np.allclose(w @ w.conj().T, H.p, atol=1e-8)
    assert np.allclose(w.conj().T @ w, H.q, atol=1e-8)


def test_hco_example():
    M2 = full_algebra(2)
    ver = hco_construct(M2, E(1, 2), 0.9 * E(1, 2))
    assert ver.yes
    assert np.allclose(ver.witness["a"], 0.9 * E(1, 1))
    assert np.allclose(ver.witness["b"], 0.9 * E(2, 2))


@given(seeds)
def test_finma2_round_trip(seed):
    rng = np.random.default_rng(seed)
    BA, A, u = _star_open_tripotent(rng)
    H = bimodule_from_tripotent(A, u)
    p = H.p
    a = BA.corner_element(rng, p)
    # x = a^(1/2) u lies in X and x x# = a, x# x = u* a u
    x = power_t(a, 0.5) @ u
    b = u.conj().T @ a @ u
    ver = finma2_check(A, a, b, x, H)
    assert ver.yes


def test_mst2_and_finma_on_matrix_unit():
    M2 = full_algebra(2)
    a, b = 0.5 * E(1, 1), 0.5 * E(2, 2)
    c, d = E(1, 2), E(2, 1)
    assert mst2_check(M2, a, b, c, d).yes
    x, y = np.sqrt(0.5) * E(1, 2), np.sqrt(0.5) * E(2, 1)
    assert finma_check(M2, a, b, x, y, c, d).yes
    # a phase twist breaks y c = d x
    t = np.exp(0.7j)
    assert not finma_check(M2, a, b, x * t, y / t, c, d).yes


def test_isaq_triangular_all_no():
    T2 = upper_triangular(2)
    out = isaq_consistency(T2, E(1, 1), E(2, 2))
    assert all(v.no for v in out.values())
    assert blackadar_via_bimodule(T2, E(1, 1), E(2, 2)).no
    assert blackadar_via_interpolant(T2, E(1, 1), E(2, 2)).no


@given(seeds)
def test_isaq_routes_match_block_ranks(seed):
    rng = np.random.default_rng(seed)
    BA = block_algebra(rng, random_blocks(rng, max_n=5), upper=bool(rng.random() < 0.5))
    A = BA.algebra()
    ra = BA.random_ranks(rng)
    rb = ra if rng.random() < 0.5 else BA.random_ranks(rng)
    pa, _ = BA.projection(rng, ra)
    pb, _ = BA.projection(rng, rb)
    a, b = BA.corner_element(rng, pa), BA.corner_element(rng, pb)
    out = isaq_consistency(A, a, b, seed=seed)
    want = "yes" if ra == rb else "no"
    assert {v.answer.value for v in out.values()} == {want}


def test_finma2_requires_matching_bimodule():
    M2 = full_algebra(2)
    H = bimodule_from_tripotent(M2, E(1, 2))
    with pytest.raises(PreconditionError):
        finma2_check(M2, 0.5 * E(1, 1), 0.5 * E(1, 1), crandn(np.random.default_rng(0), 2, 2), H)
